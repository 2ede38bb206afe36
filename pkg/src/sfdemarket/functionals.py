"""Declarative drift and volatility functionals over history segments.

Four kinds are supported:

* ``constant(c)`` — ignores the segment.
* ``moving_average(window)`` — trapezoidal mean of the segment,
  (1/L) * integral of the history over its window.
* ``realized_vol(window, floor, cap)`` — root-mean-square deviation of the
  segment around its moving-average mean, clamped into [floor, cap]. The
  clamp keeps the value strictly positive on constant segments, which the
  measure change downstream requires.
* ``affine(inner, scale, shift)`` — scale * inner(segment) + shift,
  evaluated after the inner kind's own clamping.

Specs are immutable; evaluation is pure, reentrant, and independent of
the anchor time (all supported kinds are time-homogeneous).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .paths import HistorySegment

_HISTORY_KINDS = ("moving_average", "realized_vol")
_KINDS = ("constant",) + _HISTORY_KINDS + ("affine",)


class WindowMismatchError(ValueError):
    """Segment window does not match the functional's declared window."""


@dataclass(frozen=True)
class FunctionalSpec:
    """One drift or volatility functional plus its declared metadata.

    ``declared_bound``, ``declared_range`` and ``declared_lipschitz`` are
    optional claims checked empirically by :func:`validate_bounds`; the
    constructors fill them in where they follow from the parameters.
    """

    kind: str
    value: float | None = None
    window: float | None = None
    floor: float | None = None
    cap: float | None = None
    inner: "FunctionalSpec | None" = None
    scale: float = 1.0
    shift: float = 0.0
    declared_bound: float | None = None
    declared_range: tuple[float, float] | None = None
    declared_lipschitz: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind == "constant":
            if self.value is None or not np.isfinite(self.value):
                raise ValueError("constant functional needs a finite value")
        elif self.kind in _HISTORY_KINDS:
            if self.window is None or self.window <= 0.0:
                raise ValueError(f"{self.kind} needs a positive window")
        if self.kind == "realized_vol":
            if self.floor is None or self.cap is None or not 0.0 < self.floor < self.cap:
                raise ValueError("realized_vol needs 0 < floor < cap")
        if self.kind == "affine":
            if self.inner is None:
                raise ValueError("affine functional needs an inner spec")
            if self.inner.kind == "affine":
                raise ValueError("affine specs are flattened; nest at most one level")
            if not (np.isfinite(self.scale) and np.isfinite(self.shift)):
                raise ValueError("affine scale/shift must be finite")

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, c: float) -> "FunctionalSpec":
        return cls(kind="constant", value=float(c),
                   declared_bound=abs(float(c)),
                   declared_range=(float(c), float(c)))

    @classmethod
    def moving_average(cls, window: float,
                       lipschitz: float | None = None) -> "FunctionalSpec":
        return cls(kind="moving_average", window=float(window),
                   declared_lipschitz=lipschitz)

    @classmethod
    def realized_vol(cls, window: float, floor: float, cap: float) -> "FunctionalSpec":
        return cls(kind="realized_vol", window=float(window),
                   floor=float(floor), cap=float(cap),
                   declared_bound=max(abs(floor), abs(cap)),
                   declared_range=(float(floor), float(cap)))

    @classmethod
    def affine(cls, inner: "FunctionalSpec", scale: float = 1.0,
               shift: float = 0.0) -> "FunctionalSpec":
        if inner.kind == "affine":  # flatten: a2*(a1*x + b1) + b2
            scale, shift, inner = scale * inner.scale, scale * inner.shift + shift, inner.inner
        rng = inner.value_range()
        declared = None
        if rng is not None:
            lo = min(scale * rng[0] + shift, scale * rng[1] + shift)
            hi = max(scale * rng[0] + shift, scale * rng[1] + shift)
            declared = (lo, hi)
        return cls(kind="affine", inner=inner, scale=float(scale), shift=float(shift),
                   declared_range=declared,
                   declared_bound=None if declared is None else max(abs(declared[0]), abs(declared[1])))

    # -- introspection -----------------------------------------------------

    @property
    def history_window(self) -> float | None:
        """Window of segment data the functional reads, or None for constants."""
        if self.kind == "affine":
            return self.inner.history_window
        return self.window if self.kind in _HISTORY_KINDS else None

    def value_range(self) -> tuple[float, float] | None:
        """Guaranteed output interval, when one exists."""
        if self.kind == "constant":
            return (self.value, self.value)
        if self.kind == "realized_vol":
            return (self.floor, self.cap)
        if self.kind == "affine":
            return self.declared_range
        return None

    def positive_on_positive(self) -> bool:
        """True when the output is guaranteed > 0 on strictly positive segments."""
        rng = self.value_range()
        if rng is not None:
            return rng[0] > 0.0
        if self.kind == "moving_average":
            return True  # mean of strictly positive samples
        if self.kind == "affine" and self.inner.kind == "moving_average":
            return self.scale > 0.0 and self.shift >= 0.0
        return False


def require_positive_vol(spec: FunctionalSpec) -> None:
    """Reject specs that could evaluate to a non-positive volatility."""
    if not spec.positive_on_positive():
        raise ValueError(
            f"volatility spec {spec.kind!r} is not guaranteed positive on "
            "positive histories; use a clamped or positive-constant spec")


# -- evaluation -------------------------------------------------------------


def _trap_mean(values: np.ndarray) -> float:
    # trapezoidal rule divided by the window; the step length cancels
    return float(np.trapezoid(values) / (values.size - 1))


def _check_segment(spec: FunctionalSpec, seg: HistorySegment) -> None:
    w = spec.history_window
    if w is not None and abs(seg.window - w) > 1e-9 * max(1.0, w):
        raise WindowMismatchError(
            f"functional window {w} does not match segment window {seg.window}")


def _evaluate(spec: FunctionalSpec, seg: HistorySegment) -> float:
    if spec.kind == "constant":
        return spec.value
    if spec.kind == "moving_average":
        return _trap_mean(seg.values)
    if spec.kind == "realized_vol":
        m = _trap_mean(seg.values)
        rms = float(np.sqrt(_trap_mean((seg.values - m) ** 2)))
        return min(max(rms, spec.floor), spec.cap)
    return spec.scale * _evaluate(spec.inner, seg) + spec.shift


def eval_drift(spec: FunctionalSpec, t: float, seg: HistorySegment) -> float:
    """Drift rate f(t, segment). Time-homogeneous: t is accepted but unused."""
    _check_segment(spec, seg)
    return _evaluate(spec, seg)


def eval_vol(spec: FunctionalSpec, t: float, seg: HistorySegment) -> float:
    """Volatility g(t, segment); clamped kinds stay inside their range."""
    _check_segment(spec, seg)
    return _evaluate(spec, seg)


# -- empirical bound validation ---------------------------------------------


@dataclass(frozen=True)
class BoundsReport:
    """Empirical check of a spec's declared bound/range/Lipschitz metadata."""

    max_abs: float
    min_value: float
    max_value: float
    lipschitz_ratio: float | None
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_bounds(spec: FunctionalSpec, probes: list[HistorySegment],
                    rtol: float = 1e-9) -> BoundsReport:
    """Evaluate ``spec`` on probe segments and compare against its declarations.

    Report-only: violations are listed, never raised. The Lipschitz ratio
    is the max of |f(a) - f(b)| / sup|a - b| over probe pairs with common
    shape.
    """
    if not probes:
        raise ValueError("need at least one probe segment")
    vals = np.array([eval_drift(spec, 0.0, p) for p in probes])
    ratio = None
    for a, b in combinations(range(len(probes)), 2):
        pa, pb = probes[a], probes[b]
        if pa.values.size != pb.values.size:
            continue
        gap = float(np.max(np.abs(pa.values - pb.values)))
        if gap <= 0.0:
            continue
        r = abs(vals[a] - vals[b]) / gap
        ratio = r if ratio is None else max(ratio, r)
    violations = []
    if spec.declared_bound is not None and np.abs(vals).max() > spec.declared_bound * (1.0 + rtol):
        violations.append(f"|value| reached {np.abs(vals).max():.6g}, declared bound "
                          f"{spec.declared_bound:.6g}")
    if spec.declared_range is not None:
        lo, hi = spec.declared_range
        if vals.min() < lo - rtol * max(1.0, abs(lo)) or vals.max() > hi + rtol * max(1.0, abs(hi)):
            violations.append(f"values spanned [{vals.min():.6g}, {vals.max():.6g}], declared "
                              f"range [{lo:.6g}, {hi:.6g}]")
    if spec.declared_lipschitz is not None and ratio is not None:
        if ratio > spec.declared_lipschitz * (1.0 + rtol):
            violations.append(f"Lipschitz ratio {ratio:.6g} exceeds declared "
                              f"{spec.declared_lipschitz:.6g}")
    return BoundsReport(max_abs=float(np.abs(vals).max()),
                        min_value=float(vals.min()), max_value=float(vals.max()),
                        lipschitz_ratio=ratio, violations=tuple(violations))
