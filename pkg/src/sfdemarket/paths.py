"""Uniform time grids, price-history segments, and simulated path records.

Everything downstream (functional evaluation, stepping, pricing) works on
the types defined here. Grids are uniform by design: the delayed lookup
S(t - l) then always lands exactly on a node, so no interpolation ever
happens inside a stochastic integral. Linear interpolation exists only as
a diagnostic convenience (``PathRecord.value_at`` between nodes).

All types are immutable after construction and safe to share across
concurrent readers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

# Time comparisons use an absolute tolerance of GRID_RTOL * dt.
GRID_RTOL = 1e-12


class GridAlignmentError(ValueError):
    """A time or duration does not sit on the simulation grid."""


def steps_in(duration: float, dt: float, what: str = "duration") -> int:
    """Number of dt-steps spanning ``duration``, or raise if dt does not divide it."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    k = int(round(duration / dt))
    if k < 0 or abs(duration - k * dt) > GRID_RTOL * max(1.0, abs(duration)):
        raise GridAlignmentError(f"{what}={duration!r} is not a multiple of dt={dt!r}")
    return k


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``count`` steps: nodes start + i*step, i = 0..count."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if self.step <= 0.0:
            raise ValueError(f"grid step must be positive, got {self.step}")
        if self.count < 1:
            raise ValueError(f"grid needs at least one step, got count={self.count}")

    @property
    def end(self) -> float:
        return self.start + self.count * self.step

    def times(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count + 1)

    def index_of(self, t: float) -> int:
        """Node index of time t; raises if t is off-grid or out of range."""
        i = int(round((t - self.start) / self.step))
        if i < 0 or i > self.count:
            raise GridAlignmentError(f"time {t} outside grid [{self.start}, {self.end}]")
        if abs(self.start + i * self.step - t) > GRID_RTOL * self.step:
            raise GridAlignmentError(f"time {t} does not lie on a grid node (dt={self.step})")
        return i

    def contains(self, t: float) -> bool:
        return self.start - GRID_RTOL * self.step <= t <= self.end + GRID_RTOL * self.step


@dataclass(frozen=True)
class HistorySegment:
    """A continuous price history on [anchor - window, anchor].

    ``values`` are uniform samples, oldest first; this is the single
    argument every drift/volatility functional consumes.
    """

    anchor: float
    window: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.window <= 0.0:
            raise ValueError(f"segment window must be positive, got {self.window}")
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("segment needs at least two samples")
        if not np.isfinite(self.values).all():
            raise ValueError("segment contains non-finite samples")

    @property
    def step(self) -> float:
        return self.window / (self.values.size - 1)

    @property
    def strictly_positive(self) -> bool:
        return bool(self.values.min() > 0.0)

    def value_at_offset(self, s: float) -> float:
        """Sample at grid-aligned offset s in [-window, 0]."""
        i = int(round((s + self.window) / self.step))
        if i < 0 or i >= self.values.size or abs(-self.window + i * self.step - s) > GRID_RTOL * self.step:
            raise GridAlignmentError(f"offset {s} not on the segment grid")
        return float(self.values[i])


@dataclass(frozen=True)
class InitialPath:
    """Strictly positive initial history on [-window - extension_gap, 0].

    The first ``extension_gap`` worth of samples is the constant
    continuation at the oldest observed level, appended by
    :func:`extend_initial` so that delayed lookups before time 0 are
    defined.
    """

    window: float
    values: np.ndarray
    extension_gap: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.window <= 0.0:
            raise ValueError(f"window must be positive, got {self.window}")
        if self.extension_gap < 0.0:
            raise ValueError(f"extension gap must be >= 0, got {self.extension_gap}")
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("initial path needs at least two samples")
        if not np.isfinite(self.values).all():
            raise ValueError("initial path contains non-finite samples")
        if self.values.min() <= 0.0:
            raise ValueError("initial path samples must be strictly positive")
        gap_steps = steps_in(self.extension_gap, self.step, "extension_gap")
        steps_in(self.window, self.step, "window")
        if gap_steps and not (self.values[:gap_steps] == self.values[gap_steps]).all():
            raise ValueError("extension region must be constant at the oldest observed level")

    @property
    def step(self) -> float:
        return (self.window + self.extension_gap) / (self.values.size - 1)

    @property
    def span(self) -> float:
        return self.window + self.extension_gap

    @property
    def spot(self) -> float:
        """Value at time 0."""
        return float(self.values[-1])

    def times(self) -> np.ndarray:
        return -self.span + self.step * np.arange(self.values.size)

    @classmethod
    def constant(cls, level: float, window: float, step: float) -> "InitialPath":
        n = steps_in(window, step, "window")
        return cls(window=window, values=np.full(n + 1, float(level)))

    @classmethod
    def from_function(cls, fn, window: float, step: float) -> "InitialPath":
        """Sample ``fn(u)`` on the grid u = -window .. 0."""
        n = steps_in(window, step, "window")
        u = -window + step * np.arange(n + 1)
        return cls(window=window, values=np.array([fn(x) for x in u]))


def extend_initial(theta: InitialPath, gap: float) -> InitialPath:
    """Extend ``theta`` backwards by ``gap``, constant at its oldest level.

    With gap 0 the path is returned unchanged; otherwise the returned path
    covers [-gap - span, 0] and agrees with ``theta`` where both are
    defined.
    """
    if gap < 0.0:
        raise ValueError(f"extension gap must be >= 0, got {gap}")
    if gap == 0.0:
        return theta
    extra = steps_in(gap, theta.step, "gap")
    values = np.concatenate([np.full(extra, theta.values[0]), theta.values])
    return InitialPath(window=theta.window, values=values,
                       extension_gap=theta.extension_gap + gap)


def align_extension(theta: InitialPath, gap: float) -> InitialPath:
    """Return ``theta`` with extension gap exactly ``gap`` (extend or trim)."""
    if abs(theta.extension_gap - gap) <= GRID_RTOL * max(1.0, gap):
        return theta
    if theta.extension_gap < gap:
        return extend_initial(theta, gap - theta.extension_gap)
    drop = steps_in(theta.extension_gap - gap, theta.step, "gap difference")
    return InitialPath(window=theta.window, values=theta.values[drop:], extension_gap=gap)


@dataclass(frozen=True)
class PathRecord:
    """A simulated trajectory on [-gap - window, horizon] on a uniform grid.

    The Brownian increments that drove the [0, horizon] part are retained
    (one per step) so measure-change weights can be recomputed; records
    loaded from CSV dumps carry ``brownian_increments=None``.
    """

    grid: TimeGrid
    prices: np.ndarray
    gap: float
    window: float
    measure: str = "P"
    brownian_increments: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "prices", _frozen_array(self.prices))
        if self.prices.ndim != 1 or self.prices.size != self.grid.count + 1:
            raise ValueError("prices must hold one sample per grid node")
        if self.prices.min() <= 0.0:
            raise ValueError("path prices must be strictly positive")
        if self.measure not in ("P", "Q"):
            raise ValueError(f"measure must be 'P' or 'Q', got {self.measure!r}")
        # The initial region may extend beyond the memory span (gap-closing
        # sequence records share one grid), but never fall short of it.
        span = self.gap + self.window
        if self.grid.start > -span + GRID_RTOL * max(1.0, span):
            raise ValueError("grid must cover [-(gap + window), ...]")
        if self.brownian_increments is not None:
            object.__setattr__(self, "brownian_increments",
                               _frozen_array(self.brownian_increments))
            n_fwd = self.grid.count - self.grid.index_of(0.0)
            if self.brownian_increments.size != n_fwd:
                raise ValueError("need one Brownian increment per step on [0, horizon]")

    @property
    def horizon(self) -> float:
        return self.grid.end

    def value_at(self, t: float) -> float:
        """Exact sample at grid nodes, linear interpolation between them."""
        if not self.grid.contains(t):
            raise GridAlignmentError(f"time {t} outside grid [{self.grid.start}, {self.grid.end}]")
        x = (t - self.grid.start) / self.grid.step
        i = int(np.floor(x))
        if i >= self.grid.count:
            return float(self.prices[-1])
        if i < 0:
            return float(self.prices[0])
        w = x - i
        if w <= GRID_RTOL:
            return float(self.prices[i])
        return float((1.0 - w) * self.prices[i] + w * self.prices[i + 1])

    def segment_at(self, t: float, window: float) -> HistorySegment:
        """History segment on [t - window, t]; t must be a grid node."""
        i = self.grid.index_of(t)
        w = steps_in(window, self.grid.step, "window")
        if w < 1:
            raise ValueError("segment window must span at least one step")
        if i - w < 0:
            raise GridAlignmentError(f"segment [{t - window}, {t}] starts before the grid")
        return HistorySegment(anchor=t, window=window, values=self.prices[i - w:i + 1])

    def initial_slice(self, t: float, gap: float, window: float) -> InitialPath:
        """Reanchor the realized history ending at node ``t`` as an initial path.

        Used to price at a positive time: the returned path covers
        [-gap - window, 0] in shifted time and carries the realized values
        on [t - gap - window, t].
        """
        i = self.grid.index_of(t)
        w = steps_in(gap + window, self.grid.step, "gap + window")
        if i - w < 0:
            raise GridAlignmentError("realized path too short for the requested memory span")
        return InitialPath(window=window, values=self.prices[i - w:i + 1], extension_gap=gap)

    def to_csv(self, fh) -> None:
        writer = csv.writer(fh)
        writer.writerow(["t", "price"])
        for t, p in zip(self.grid.times(), self.prices):
            writer.writerow([f"{t:.12g}", f"{p:.17g}"])


def record_from_initial(theta: InitialPath, gap: float, measure: str = "P") -> PathRecord:
    """Degenerate record covering only [-gap - window, 0] (no simulated part).

    Lets the closed-form pricer read delayed segments when the whole
    remaining life of the option sits inside the last delay period.
    """
    aligned = align_extension(theta, gap)
    grid = TimeGrid(start=-aligned.span, step=aligned.step, count=aligned.values.size - 1)
    return PathRecord(grid=grid, prices=aligned.values, gap=gap,
                      window=aligned.window, measure=measure,
                      brownian_increments=np.empty(0))


def load_initial_csv(fh, window: float | None = None) -> InitialPath:
    """Read an ``offset,price`` CSV (header required, offsets ascending in [-L, 0])."""
    if isinstance(fh, str):
        with open(fh, newline="") as f:
            return load_initial_csv(f, window)
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header[:2]] != ["offset", "price"]:
        raise ValueError("initial-path CSV must start with a header row 'offset,price'")
    offsets, prices = [], []
    for row in reader:
        if not row:
            continue
        offsets.append(float(row[0]))
        prices.append(float(row[1]))
    if len(offsets) < 2:
        raise ValueError("initial-path CSV needs at least two samples")
    off = np.asarray(offsets)
    if not (np.diff(off) > 0).all():
        raise ValueError("offsets must be strictly ascending")
    if abs(off[-1]) > 1e-9:
        raise ValueError("last offset must be 0 (the anchor time)")
    span = -off[0]
    step = span / (len(off) - 1)
    if np.abs(off - (-span + step * np.arange(len(off)))).max() > 1e-9 * max(1.0, span):
        raise ValueError("offsets must be uniformly spaced")
    if window is not None and abs(span - window) > 1e-9 * max(1.0, window):
        raise ValueError(f"CSV covers [{-span}, 0] but window {window} was requested")
    return InitialPath(window=span, values=np.asarray(prices))


def load_record_csv(fh, gap: float, window: float, measure: str = "P") -> PathRecord:
    """Read a ``t,price`` path dump back into a record (increments are not kept)."""
    if isinstance(fh, str):
        with open(fh, newline="") as f:
            return load_record_csv(f, gap, window, measure)
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header[:2]] != ["t", "price"]:
        raise ValueError("path CSV must start with a header row 't,price'")
    times, prices = [], []
    for row in reader:
        if not row:
            continue
        times.append(float(row[0]))
        prices.append(float(row[1]))
    if len(times) < 2:
        raise ValueError("path CSV needs at least two samples")
    t = np.asarray(times)
    step = (t[-1] - t[0]) / (len(t) - 1)
    grid = TimeGrid(start=float(t[0]), step=float(step), count=len(t) - 1)
    if np.abs(t - grid.times()).max() > 1e-9 * max(1.0, abs(t[-1] - t[0])):
        raise ValueError("path CSV times must be uniformly spaced")
    return PathRecord(grid=grid, prices=np.asarray(prices), gap=gap, window=window,
                      measure=measure, brownian_increments=None)
