"""Empirical verification of the model's analytic guarantees.

Four statistical checks, each phrased in units of estimated standard error
rather than absolute epsilons:

* gap-closing convergence rate: coupled discrepancy between the delay-1/k
  and delay-1/(2k) paths, log-log slope against the theoretical -2*beta
  envelope (the bound is one-sided, so steeper fitted slopes are fine);
* measure-change normalization: the expected density weight is exactly 1;
* moment-bound uniformity: the expected running supremum moment is flat
  in k for bounded coefficients;
* martingale property: the discounted price has constant expectation
  under the pricing measure.

All studies are replicate-parallel and reproducible from (seed, stream).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import backend, engine
from .engine import (
    AUX_STREAM,
    NumericalError,
    SimulationConfig,
    _stream,
    iter_path_blocks,
    mc_mean_se,
)
from .functionals import FunctionalSpec
from .paths import InitialPath, steps_in


@dataclass(frozen=True)
class HolderInitialPath:
    """Recipe for a rough but positive synthetic initial history.

    ``exponent`` is the Hölder regularity the convergence theory assumes;
    exponentiated Brownian samples achieve every exponent below one half,
    stay strictly positive, and have the required moment modulus.
    """

    exponent: float
    seed: int
    window: float
    level: float
    scale: float = 0.5

    def build(self, dt: float) -> InitialPath:
        return make_holder_path(self.exponent, self.seed, self.window,
                                self.level, dt, scale=self.scale)


def make_holder_path(beta: float, seed: int, window: float, level: float,
                     dt: float, scale: float = 0.5) -> InitialPath:
    """Sample level * exp(scale * B) on [-window, 0], anchored at level at time 0."""
    if not 0.0 < beta < 0.5:
        raise ValueError(f"Hölder exponent must lie in (0, 1/2), got {beta}")
    if level <= 0.0:
        raise ValueError(f"base level must be positive, got {level}")
    n = steps_in(window, dt, "window")
    rng = _stream(seed, AUX_STREAM)
    bm = np.concatenate([[0.0], np.cumsum(rng.standard_normal(n) * math.sqrt(dt))])
    values = level * np.exp(scale * (bm - bm[-1]))
    return InitialPath(window=window, values=values)


def holder_ratio(theta: InitialPath, exponent: float) -> float:
    """max |theta(t) - theta(s)| / |t - s|^exponent over all grid pairs."""
    v = theta.values
    t = theta.times()
    best = 0.0
    for lag in range(1, v.size):
        num = np.abs(v[lag:] - v[:-lag]).max()
        best = max(best, num / (lag * theta.step) ** exponent)
    return float(best)


# -- coupled gap-closing machinery -------------------------------------------


def _delay_blocks(theta: InitialPath, drift: FunctionalSpec, vol: FunctionalSpec,
                  cfg: SimulationConfig, delays_steps: tuple[int, ...],
                  block_size: int = 2048):
    """Simulate the same replicates at several delays, sharing increments.

    Everything lives on the common grid covering [-1 - window, horizon],
    the natural home of the whole gap-closing family. Yields tuples of
    price blocks, one per requested delay, plus the index of time 0.
    """
    cfg1 = replace(cfg, gap=1.0)
    theta_ext = engine._aligned_initial(theta, cfg1)
    dk = engine._drift_params(drift, cfg1)
    vk = engine.kernel_params(vol, cfg1.window, cfg1.dt)
    n0 = cfg1.init_nodes
    steps = cfg1.steps
    sq = math.sqrt(cfg.dt)
    done = 0
    while done < cfg.replicates:
        rows = min(block_size, cfg.replicates - done)
        dw = np.empty((rows, steps))
        if cfg.noiseless:
            dw[:] = 0.0
        else:
            for r in range(rows):
                dw[r] = _stream(cfg.seed, done + r).standard_normal(steps) * sq
        out = []
        for delay in delays_steps:
            prices = np.empty((rows, n0 + steps))
            prices[:, :n0] = theta_ext.values
            backend.simulate_chunk(prices, dw, n0, delay, cfg.dt, *dk, *vk, None, None)
            if not np.isfinite(prices).all():
                raise NumericalError("gap-closing path produced a non-finite price")
            out.append(prices)
        yield tuple(out), n0 - 1
        done += rows


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-k coupled discrepancies and the fitted log-log rate."""

    k_values: tuple[int, ...]
    discrepancies: tuple[float, ...]
    std_errors: tuple[float, ...]
    fitted_slope: float
    theoretical_slope: float
    replicates: int
    seed: int
    degenerate: bool = False

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.k_values, self.k_values[1:])):
            raise ValueError("k values must be strictly increasing")
        if any(d < 0 for d in self.discrepancies):
            raise ValueError("discrepancies must be >= 0")


def convergence_study(k_values: list[int], beta: float, theta: InitialPath,
                      drift: FunctionalSpec, vol: FunctionalSpec,
                      cfg: SimulationConfig) -> ConvergenceReport:
    """Estimate E sup |S_k - S_2k|^2 for each k and fit its log-log decay.

    The pairwise discrepancy of consecutive approximations stands in for
    the distance to the (unsimulable) limit process; under the rate bound
    it inherits the same order in 1/k. Constant coefficients make every
    discrepancy exactly zero; the report then flags itself degenerate
    instead of fitting a slope.
    """
    ks = sorted(int(k) for k in k_values)
    if len(ks) < 3:
        raise ValueError("need at least three k values for a rate fit")
    if ks != list(k_values):
        raise ValueError("k values must be strictly increasing")
    if not 0.0 < beta < 0.5:
        raise ValueError(f"Hölder exponent must lie in (0, 1/2), got {beta}")
    for k in ks:
        replace(cfg, gap=1.0 / (2 * k))  # validates dt | 1/(2k)
    sums = np.zeros(len(ks))
    sq_sums = np.zeros(len(ks))
    # consecutive k share delays; simulate each distinct delay once
    uniq: list[int] = []
    index: dict[int, int] = {}
    pairs: list[tuple[int, int]] = []
    for k in ks:
        pair = []
        for gap in (1.0 / k, 1.0 / (2 * k)):
            d = steps_in(gap, cfg.dt, "delay")
            if d not in index:
                index[d] = len(uniq)
                uniq.append(d)
            pair.append(index[d])
        pairs.append((pair[0], pair[1]))
    for blocks, zero in _delay_blocks(theta, drift, vol, cfg, tuple(uniq)):
        for i, (ia, ib) in enumerate(pairs):
            a, b = blocks[ia], blocks[ib]
            d = np.max(np.abs(a[:, zero:] - b[:, zero:]), axis=1) ** 2
            sums[i] += d.sum()
            sq_sums[i] += (d * d).sum()
    n = cfg.replicates
    means = sums / n
    var = np.maximum(sq_sums / n - means**2, 0.0) * n / max(n - 1, 1)
    ses = np.sqrt(var / n)
    degenerate = bool((means <= 0.0).any())
    if degenerate:
        slope = float("nan")
    else:
        slope = float(np.polyfit(np.log(ks), np.log(means), 1)[0])
    return ConvergenceReport(k_values=tuple(ks), discrepancies=tuple(map(float, means)),
                             std_errors=tuple(map(float, ses)), fitted_slope=slope,
                             theoretical_slope=-2.0 * beta, replicates=n,
                             seed=cfg.seed, degenerate=degenerate)


# -- measure-change normalization ---------------------------------------------


@dataclass(frozen=True)
class NormalizationReport:
    """Monte Carlo estimate of the expected measure-change weight (target 1)."""

    estimate: float
    std_error: float
    replicates: int

    @property
    def passed(self) -> bool:
        return abs(self.estimate - 1.0) <= 3.0 * self.std_error


def normalization_check(drift: FunctionalSpec, vol: FunctionalSpec, rate: float,
                        theta: InitialPath, cfg: SimulationConfig) -> NormalizationReport:
    """Estimate E[rho(T)] under the physical measure; exact 1 in theory."""
    cfg_p = replace(cfg, measure="P")
    weights = []
    dt = cfg.dt
    for blk in iter_path_blocks(theta, drift, vol, cfg_p, with_coefficients=True):
        g = blk.vol_values
        if g.min() <= engine.MIN_VOL:
            raise NumericalError(f"volatility {g.min():.3g} too close to zero for the "
                                 "measure change")
        x = (blk.drift_values - rate) / g
        log_rho = -np.sum(x * blk.increments, axis=1) - 0.5 * dt * np.sum(x * x, axis=1)
        weights.append(np.exp(log_rho))
    est, se = mc_mean_se(np.concatenate(weights))
    return NormalizationReport(estimate=est, std_error=se, replicates=cfg.replicates)


# -- moment-bound uniformity ---------------------------------------------------


@dataclass(frozen=True)
class MomentBoundReport:
    """E sup |S_k|^(2 gamma) across k; flat within a factor 2 when bounded."""

    k_values: tuple[int, ...]
    gamma: int
    statistics: tuple[float, ...]
    std_errors: tuple[float, ...]
    replicates: int

    @property
    def ratio(self) -> float:
        return max(self.statistics) / min(self.statistics)

    @property
    def passed(self) -> bool:
        return self.ratio < 2.0


def moment_bound_check(k_values: list[int], gamma: int, theta: InitialPath,
                       drift: FunctionalSpec, vol: FunctionalSpec,
                       cfg: SimulationConfig) -> MomentBoundReport:
    """Estimate the running-supremum moment for each delay 1/k."""
    if gamma not in (1, 2):
        raise ValueError(f"gamma must be 1 or 2, got {gamma}")
    ks = [int(k) for k in k_values]
    if not ks:
        raise ValueError("need at least one k value")
    delays = tuple(steps_in(1.0 / k, cfg.dt, "1/k") for k in ks)
    sums = np.zeros(len(ks))
    sq_sums = np.zeros(len(ks))
    for blocks, zero in _delay_blocks(theta, drift, vol, cfg, delays):
        for i, prices in enumerate(blocks):
            stat = np.max(np.abs(prices[:, zero:]), axis=1) ** (2 * gamma)
            sums[i] += stat.sum()
            sq_sums[i] += (stat * stat).sum()
    n = cfg.replicates
    means = sums / n
    var = np.maximum(sq_sums / n - means**2, 0.0) * n / max(n - 1, 1)
    return MomentBoundReport(k_values=tuple(ks), gamma=gamma,
                             statistics=tuple(map(float, means)),
                             std_errors=tuple(map(float, np.sqrt(var / n))),
                             replicates=n)


# -- martingale property ---------------------------------------------------------


@dataclass(frozen=True)
class MartingaleCheckpoint:
    time: float
    estimate: float
    std_error: float
    target: float

    @property
    def passed(self) -> bool:
        return abs(self.estimate - self.target) <= 3.0 * self.std_error


@dataclass(frozen=True)
class MartingaleReport:
    checkpoints: tuple[MartingaleCheckpoint, ...]
    replicates: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checkpoints)


def martingale_check(theta: InitialPath, drift: FunctionalSpec, vol: FunctionalSpec,
                     cfg: SimulationConfig,
                     checkpoint_times: list[float] | None = None) -> MartingaleReport:
    """Discounted-price flatness under the pricing measure at a few checkpoints."""
    if cfg.measure != "Q":
        raise ValueError("the martingale property is a pricing-measure statement; "
                         "configure measure='Q'")
    T = cfg.horizon
    raw = checkpoint_times if checkpoint_times is not None else [T / 4, T / 2, T]
    steps = sorted({max(1, int(round(t / cfg.dt))) for t in raw})
    if any(s > cfg.steps for s in steps):
        raise ValueError("checkpoint beyond the simulation horizon")
    cols: list[np.ndarray] = []
    for blk in iter_path_blocks(theta, drift, vol, cfg):
        nodes = [blk.zero_node + s for s in steps]
        cols.append(blk.prices[:, nodes])
    values = np.concatenate(cols, axis=0)
    target = theta.spot
    checkpoints = []
    for i, s in enumerate(steps):
        t = s * cfg.dt
        est, se = mc_mean_se(math.exp(-cfg.rate * t) * values[:, i])
        checkpoints.append(MartingaleCheckpoint(time=t, estimate=est, std_error=se,
                                                target=target))
    return MartingaleReport(checkpoints=tuple(checkpoints), replicates=cfg.replicates)
