"""Path simulation with delayed coefficients, under P and under the pricing measure.

The stepping scheme is exponential (log-Euler): over one step the
coefficients are frozen at the left endpoint, where they read the history
segment ending a full delay in the past, so each step multiplies the price
by ``exp((a - b^2/2) dt + b dW)``. That matches the per-interval
closed-form solution of the dynamics, keeps every price strictly positive,
and makes the coefficients measurable before the step by construction.

Under the risk-neutral measure the drift functional is replaced by the
flat rate; the physical-measure drift still matters there only through the
measure-change weight, which :func:`girsanov_weight` recomputes from a
stored path and its retained increments.

Randomness: one Philox stream per replicate, keyed by (seed, stream id),
so results never depend on block size or evaluation order. Stream ids at
or above ``AUX_STREAM`` are reserved for auxiliary draws (e.g. synthetic
initial paths) and never collide with replicate streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .functionals import FunctionalSpec, WindowMismatchError, require_positive_vol
from .paths import (
    GRID_RTOL,
    GridAlignmentError,
    InitialPath,
    PathRecord,
    TimeGrid,
    align_extension,
    steps_in,
)

BLOCK_SIZE = 8192
MIN_VOL = 1e-12
AUX_STREAM = 1 << 63

_U64 = 1 << 64


class NumericalError(RuntimeError):
    """Simulation or weighting produced a numerically unusable value."""


@dataclass(frozen=True)
class SimulationConfig:
    """Grid, measure, and replication parameters for one experiment.

    Times are in years. ``dt`` must divide the delay ``gap``, the history
    ``window``, and the ``horizon``; the delayed lookup then always lands
    on a node. ``noiseless`` forces all Brownian increments to zero (a
    deterministic mode used to check drift handling in isolation).
    """

    horizon: float
    gap: float
    window: float
    dt: float
    measure: str = "P"
    rate: float = 0.0
    seed: int = 0
    replicates: int = 1
    noiseless: bool = False

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.gap <= 0.0:
            raise ValueError(f"memory gap must be positive, got {self.gap}")
        if self.window <= 0.0:
            raise ValueError(f"window must be positive, got {self.window}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.gap < self.dt - GRID_RTOL:
            raise ValueError(f"gap {self.gap} smaller than dt {self.dt}: the delayed "
                             "segment would not be fully known before each step")
        steps_in(self.gap, self.dt, "gap")
        steps_in(self.window, self.dt, "window")
        steps_in(self.horizon, self.dt, "horizon")
        if self.measure not in ("P", "Q"):
            raise ValueError(f"measure must be 'P' or 'Q', got {self.measure!r}")
        if self.measure == "Q" and self.rate < 0.0:
            raise ValueError(f"risk-neutral rate must be >= 0, got {self.rate}")
        if not 0 <= int(self.seed) < _U64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.replicates < 1:
            raise ValueError(f"need at least one replicate, got {self.replicates}")

    @property
    def steps(self) -> int:
        return steps_in(self.horizon, self.dt, "horizon")

    @property
    def delay_steps(self) -> int:
        return steps_in(self.gap, self.dt, "gap")

    @property
    def window_steps(self) -> int:
        return steps_in(self.window, self.dt, "window")

    @property
    def init_nodes(self) -> int:
        """Nodes covering [-(gap + window), 0]."""
        return self.delay_steps + self.window_steps + 1

    def grid(self) -> TimeGrid:
        return TimeGrid(start=-(self.gap + self.window), step=self.dt,
                        count=self.init_nodes - 1 + self.steps)


@dataclass(frozen=True)
class GirsanovWeight:
    """Measure-change density at the horizon, kept in log form."""

    log_value: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


# -- randomness ---------------------------------------------------------------


def _stream(seed: int, stream_id: int) -> np.random.Generator:
    if not 0 <= int(seed) < _U64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    if not 0 <= int(stream_id) < _U64:
        raise ValueError("stream id must fit in an unsigned 64-bit integer")
    key = np.array([seed, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def brownian_increments(seed: int, stream_id: int, grid: TimeGrid) -> np.ndarray:
    """i.i.d. normal(0, dt) increments, one per grid step.

    Reproducible from (seed, stream_id); distinct stream ids give
    independent Philox streams.
    """
    return _stream(seed, stream_id).standard_normal(grid.count) * math.sqrt(grid.step)


# -- functional compilation ----------------------------------------------------


def kernel_params(spec: FunctionalSpec, window: float, dt: float) -> tuple:
    """Flatten a spec into the (kind, p0, p1, scale, shift, w) kernel encoding.

    History-dependent kinds must declare exactly the simulation window, so
    every evaluation consumes the full segment the dynamics carry.
    """
    scale, shift = 1.0, 0.0
    base = spec
    if spec.kind == "affine":
        scale, shift, base = spec.scale, spec.shift, spec.inner
    if base.kind == "constant":
        return (0, base.value, 0.0, scale, shift, 0)
    if abs(base.window - window) > 1e-9 * max(1.0, window):
        raise WindowMismatchError(
            f"functional window {base.window} does not match simulation window {window}")
    w = steps_in(window, dt, "window")
    if base.kind == "moving_average":
        return (1, 0.0, 0.0, scale, shift, w)
    return (2, base.floor, base.cap, scale, shift, w)


def _drift_params(drift: FunctionalSpec, cfg: SimulationConfig) -> tuple:
    if cfg.measure == "Q":
        return (0, cfg.rate, 0.0, 1.0, 0.0, 0)
    return kernel_params(drift, cfg.window, cfg.dt)


def _aligned_initial(theta: InitialPath, cfg: SimulationConfig) -> InitialPath:
    if abs(theta.window - cfg.window) > 1e-9 * max(1.0, cfg.window):
        raise WindowMismatchError(
            f"initial path window {theta.window} does not match simulation window {cfg.window}")
    if abs(theta.step - cfg.dt) > GRID_RTOL * max(1.0, cfg.dt):
        raise GridAlignmentError(
            f"initial path sampled at {theta.step}, simulation dt is {cfg.dt}")
    return align_extension(theta, cfg.gap)


# -- block driver ---------------------------------------------------------------


@dataclass
class PathBlock:
    """One simulated block of replicate rows (a view into the Monte Carlo run)."""

    first: int
    prices: np.ndarray
    increments: np.ndarray
    n0: int
    drift_values: np.ndarray | None = None
    vol_values: np.ndarray | None = None

    @property
    def zero_node(self) -> int:
        return self.n0 - 1


def iter_path_blocks(theta: InitialPath, drift: FunctionalSpec, vol: FunctionalSpec,
                     cfg: SimulationConfig, *, steps: int | None = None,
                     replicates: int | None = None, antithetic: bool = False,
                     with_coefficients: bool = False, base_stream: int = 0,
                     block_size: int = BLOCK_SIZE):
    """Simulate the configured replicates in memory-bounded blocks.

    Replicate ``i`` is driven by Philox stream ``base_stream + i``
    (stream ``base_stream + i // 2`` with mirrored increments on odd rows
    when ``antithetic``), so any slicing into blocks yields identical
    paths. Yields :class:`PathBlock` in replicate order.
    """
    require_positive_vol(vol)
    theta_ext = _aligned_initial(theta, cfg)
    dk = _drift_params(drift, cfg)
    vk = kernel_params(vol, cfg.window, cfg.dt)
    n_steps = cfg.steps if steps is None else int(steps)
    n = cfg.replicates if replicates is None else int(replicates)
    if n < 1:
        raise ValueError("need at least one replicate")
    if antithetic and n % 2:
        raise ValueError("antithetic sampling needs an even replicate count")
    n0 = cfg.init_nodes
    init = theta_ext.values
    sq = math.sqrt(cfg.dt)
    done = 0
    block = max(2, block_size - block_size % 2) if antithetic else block_size
    while done < n:
        rows = min(block, n - done)
        dw = np.empty((rows, n_steps))
        if cfg.noiseless:
            dw[:] = 0.0
        elif antithetic:
            for r in range(0, rows, 2):
                pair = (done + r) // 2
                dw[r] = _stream(cfg.seed, base_stream + pair).standard_normal(n_steps) * sq
                dw[r + 1] = -dw[r]
        else:
            for r in range(rows):
                dw[r] = _stream(cfg.seed, base_stream + done + r).standard_normal(n_steps) * sq
        prices = np.empty((rows, n0 + n_steps))
        prices[:, :n0] = init
        f_out = np.empty((rows, n_steps)) if with_coefficients else None
        g_out = np.empty((rows, n_steps)) if with_coefficients else None
        backend.simulate_chunk(prices, dw, n0, cfg.delay_steps, cfg.dt,
                               *dk, *vk, f_out, g_out)
        if not np.isfinite(prices).all():
            bad = int(np.argwhere(~np.isfinite(prices))[0, 0])
            raise NumericalError(f"replicate {done + bad} produced a non-finite price "
                                 "(coefficients too large for the horizon?)")
        yield PathBlock(first=done, prices=prices, increments=dw, n0=n0,
                        drift_values=f_out, vol_values=g_out)
        done += rows


# -- single-path operations ------------------------------------------------------


def _record_from_row(prices: np.ndarray, dw: np.ndarray, cfg: SimulationConfig,
                     gap: float, start: float) -> PathRecord:
    grid = TimeGrid(start=start, step=cfg.dt, count=prices.size - 1)
    return PathRecord(grid=grid, prices=prices, gap=gap, window=cfg.window,
                      measure=cfg.measure, brownian_increments=dw)


def simulate_gap_path(theta: InitialPath, drift: FunctionalSpec, vol: FunctionalSpec,
                      cfg: SimulationConfig, stream_id: int = 0) -> PathRecord:
    """One path of the delayed-coefficient dynamics on [-(gap+window), horizon]."""
    blk = next(iter_path_blocks(theta, drift, vol, cfg, replicates=1,
                                base_stream=stream_id))
    return _record_from_row(blk.prices[0], blk.increments[0], cfg,
                            gap=cfg.gap, start=-(cfg.gap + cfg.window))


def _sequence_with_dw(k: int, theta: InitialPath, drift: FunctionalSpec,
                      vol: FunctionalSpec, cfg: SimulationConfig,
                      dw: np.ndarray) -> PathRecord:
    if k < 1:
        raise ValueError(f"approximation index k must be >= 1, got {k}")
    cfg_k = replace(cfg, gap=1.0 / k)
    theta_ext = _aligned_initial(theta, cfg_k)
    dk = _drift_params(drift, cfg_k)
    vk = kernel_params(vol, cfg_k.window, cfg_k.dt)
    n0 = cfg_k.init_nodes
    prices = np.empty((1, n0 + cfg_k.steps))
    prices[0, :n0] = theta_ext.values
    backend.simulate_chunk(prices, dw[None, :], n0, cfg_k.delay_steps, cfg_k.dt,
                           *dk, *vk, None, None)
    if not np.isfinite(prices).all():
        raise NumericalError("gap-sequence path produced a non-finite price")
    # present every k on the common grid covering [-1 - window, horizon]
    pad = steps_in(1.0 - 1.0 / k, cfg.dt, "1 - 1/k")
    full = np.concatenate([np.full(pad, theta_ext.values[0]), prices[0]])
    grid = TimeGrid(start=-(1.0 + cfg.window), step=cfg.dt, count=full.size - 1)
    return PathRecord(grid=grid, prices=full, gap=1.0 / k, window=cfg.window,
                      measure=cfg.measure, brownian_increments=dw)


def simulate_gap_sequence(k: int, theta: InitialPath, drift: FunctionalSpec,
                          vol: FunctionalSpec, cfg: SimulationConfig,
                          stream_id: int = 0) -> PathRecord:
    """k-th gap-closing approximation: delay 1/k, reported on [-1 - window, horizon]."""
    cfg_k = replace(cfg, gap=1.0 / k)  # validates dt | 1/k and 1/k >= dt
    if cfg.noiseless:
        dw = np.zeros(cfg.steps)
    else:
        dw = brownian_increments(cfg.seed, stream_id,
                                 TimeGrid(start=0.0, step=cfg.dt, count=cfg_k.steps))
    return _sequence_with_dw(k, theta, drift, vol, cfg, dw)


def coupled_paths(k_list: list[int], theta: InitialPath, drift: FunctionalSpec,
                  vol: FunctionalSpec, cfg: SimulationConfig,
                  stream_id: int = 0) -> list[PathRecord]:
    """Gap-closing approximations for each k, all driven by one increment stream."""
    if not k_list:
        raise ValueError("k_list must not be empty")
    if cfg.noiseless:
        dw = np.zeros(cfg.steps)
    else:
        dw = brownian_increments(cfg.seed, stream_id,
                                 TimeGrid(start=0.0, step=cfg.dt, count=cfg.steps))
    return [_sequence_with_dw(k, theta, drift, vol, cfg, dw) for k in k_list]


# -- measure change ---------------------------------------------------------------


def path_coefficients(path: PathRecord, drift: FunctionalSpec, vol: FunctionalSpec,
                      dt: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Re-evaluate (f_i, g_i) at every left endpoint of a stored path."""
    dt = path.grid.step if dt is None else dt
    dk = kernel_params(drift, path.window, dt)
    vk = kernel_params(vol, path.window, dt)
    zero = path.grid.index_of(0.0)
    n_steps = path.grid.count - zero
    nodes = zero + np.arange(n_steps) - steps_in(path.gap, dt, "gap")
    row = path.prices[None, :]
    f = backend.eval_nodes(row, nodes, *dk)[0]
    g = backend.eval_nodes(row, nodes, *vk)[0]
    return f, g


def girsanov_weight(path: PathRecord, drift: FunctionalSpec, vol: FunctionalSpec,
                    rate: float) -> GirsanovWeight:
    """Density of the pricing measure against P along one stored P-path.

    log rho = -sum X_i dW_i - (dt/2) sum X_i^2 with X_i = (f_i - r) / g_i
    evaluated on the delayed segments at left endpoints.
    """
    if path.measure != "P":
        raise ValueError("measure-change weights are defined along physical-measure paths")
    if path.brownian_increments is None:
        raise ValueError("path record does not retain its Brownian increments")
    f, g = path_coefficients(path, drift, vol)
    if g.min() <= MIN_VOL:
        raise NumericalError(f"volatility {g.min():.3g} too close to zero for the "
                             "measure change")
    x = (f - rate) / g
    dt = path.grid.step
    log_rho = float(-np.sum(x * path.brownian_increments) - 0.5 * dt * np.sum(x * x))
    return GirsanovWeight(log_value=log_rho)


# -- reductions -------------------------------------------------------------------


def mc_mean_se(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and standard error (pairwise summation via numpy)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no samples")
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def pair_mean(values: np.ndarray) -> np.ndarray:
    """Average adjacent antithetic rows into one value per pair."""
    v = np.asarray(values)
    if v.shape[0] % 2:
        raise ValueError("antithetic reduction needs an even number of rows")
    return v.reshape(-1, 2).mean(axis=1)
