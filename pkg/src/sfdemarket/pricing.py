"""Arbitrage-free European call pricing and hedging on delayed-memory dynamics.

Inside the last delay period the forward integrated variance is already
determined by the realized path, so the fair price is a closed form of
Black-Scholes shape with the flat variance replaced by the path-dependent
integral of g^2; the hedge ratio is the first normal-CDF factor. Earlier
than one delay before maturity the price is a conditional expectation of
an explicit function H of the discounted price at the start of the last
delay period, estimated by Monte Carlo under the pricing measure. The
full-memory model is priced by running the gap dynamics at a small delay
1/k and averaging the discounted payoff.

Left-endpoint sums are used for every integrated variance so the pricers
are exactly consistent with the simulator's stepping; the finer-grid
trapezoid exists only as a test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from . import backend, engine
from .engine import SimulationConfig, iter_path_blocks, mc_mean_se, pair_mean
from .functionals import FunctionalSpec
from .paths import InitialPath, PathRecord, steps_in

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class MarketConfig:
    """The bond-and-stock market: flat rate, strike, and maturity.

    The bond is always B(t) = exp(rate * t); it is implied, never stored.
    """

    rate: float
    strike: float
    maturity: float

    def __post_init__(self):
        if self.rate < 0.0:
            raise ValueError(f"rate must be >= 0, got {self.rate}")
        if self.strike <= 0.0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if self.maturity <= 0.0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")

    def bond(self, t: float) -> float:
        return math.exp(self.rate * t)


@dataclass(frozen=True)
class PricingResult:
    """A price with its Monte Carlo uncertainty (zero for closed forms)."""

    price: float
    std_error: float
    replicates: int
    method: str
    degenerate: bool = False

    def __post_init__(self):
        if self.price < 0.0:
            raise ValueError(f"price must be >= 0, got {self.price}")
        if self.std_error < 0.0:
            raise ValueError(f"std error must be >= 0, got {self.std_error}")

    @property
    def ci95(self) -> tuple[float, float]:
        half = 1.96 * self.std_error
        return (self.price - half, self.price + half)


@dataclass(frozen=True)
class HedgePosition:
    """Replicating stock/bond holdings at one valuation time."""

    stock_units: float
    bond_units: float
    valuation_time: float

    def value(self, stock_price: float, rate: float) -> float:
        return self.stock_units * stock_price + self.bond_units * math.exp(rate * self.valuation_time)


def normal_cdf(x: float) -> float:
    """Standard normal distribution function via the complementary error function."""
    return 0.5 * math.erfc(-x / _SQRT2)


def black_scholes(s: float, k: float, r: float, sigma: float, tau: float) -> float:
    """Classical constant-volatility call price; the independent oracle."""
    if s <= 0.0 or k <= 0.0 or sigma <= 0.0 or tau <= 0.0:
        raise ValueError("black_scholes needs s, k, sigma, tau all positive")
    if r < 0.0:
        raise ValueError(f"rate must be >= 0, got {r}")
    srt = sigma * math.sqrt(tau)
    d1 = (math.log(s / k) + (r + 0.5 * sigma * sigma) * tau) / srt
    d2 = d1 - srt
    return s * normal_cdf(d1) - k * math.exp(-r * tau) * normal_cdf(d2)


def closed_form_last_delay(s: float, sigma2: float, tau: float,
                           mkt: MarketConfig) -> tuple[PricingResult, HedgePosition]:
    """Exact call price and hedge once the forward variance is determined.

    ``sigma2`` is the integrated squared volatility over the remaining
    life ``tau``. A vanishing variance is not an error: the price
    degenerates to the deterministic payoff bound and the result is
    flagged.
    """
    if s <= 0.0:
        raise ValueError(f"stock price must be positive, got {s}")
    if sigma2 < 0.0:
        raise ValueError(f"integrated variance must be >= 0, got {sigma2}")
    if tau < 0.0 or tau > mkt.maturity * (1.0 + 1e-12):
        raise ValueError(f"time to maturity {tau} outside [0, {mkt.maturity}]")
    t = mkt.maturity - tau
    k_disc = mkt.strike * math.exp(-mkt.rate * tau)
    if sigma2 == 0.0 or tau == 0.0:
        itm = 1.0 if s > k_disc else 0.0
        price = max(0.0, s - k_disc)
        hedge = HedgePosition(stock_units=itm,
                              bond_units=-mkt.strike * math.exp(-mkt.rate * mkt.maturity) * itm,
                              valuation_time=t)
        return (PricingResult(price=price, std_error=0.0, replicates=0,
                              method="closed_form", degenerate=True), hedge)
    sig = math.sqrt(sigma2)
    base = math.log(s / mkt.strike) + mkt.rate * tau
    beta_plus = (base + 0.5 * sigma2) / sig
    beta_minus = (base - 0.5 * sigma2) / sig
    phi_p = normal_cdf(beta_plus)
    phi_m = normal_cdf(beta_minus)
    price = s * phi_p - k_disc * phi_m
    hedge = HedgePosition(stock_units=phi_p,
                          bond_units=-mkt.strike * math.exp(-mkt.rate * mkt.maturity) * phi_m,
                          valuation_time=t)
    return (PricingResult(price=max(price, 0.0), std_error=0.0, replicates=0,
                          method="closed_form"), hedge)


def _h_values(x: np.ndarray, m: np.ndarray, sigma2: np.ndarray,
              mkt: MarketConfig) -> np.ndarray:
    """Vectorized H(x, m, sigma^2); zero-variance entries take the limit value."""
    x = np.asarray(x, dtype=np.float64)
    m = np.broadcast_to(np.asarray(m, dtype=np.float64), x.shape)
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=np.float64), x.shape)
    k_disc = mkt.strike * math.exp(-mkt.rate * mkt.maturity)
    out = np.empty_like(x)
    pos = sigma2 > 0.0
    if pos.any():
        sig = np.sqrt(sigma2[pos])
        core = np.log(x[pos] / mkt.strike) + mkt.rate * mkt.maturity + m[pos]
        out[pos] = (x[pos] * np.exp(m[pos] + 0.5 * sigma2[pos]) * ndtr((core + sigma2[pos]) / sig)
                    - k_disc * ndtr(core / sig))
    if (~pos).any():
        out[~pos] = np.maximum(x[~pos] * np.exp(m[~pos]) - k_disc, 0.0)
    return out


def h_function(x: float, m: float, sigma2: float, mkt: MarketConfig) -> float:
    """Payoff transform behind the nested price: H(x, m, sigma^2)."""
    if x <= 0.0:
        raise ValueError(f"x must be positive, got {x}")
    if sigma2 <= 0.0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    return float(_h_values(np.array([x]), np.array([m]), np.array([sigma2]), mkt)[0])


def integrated_variance(path: PathRecord, t: float, maturity: float,
                        vol: FunctionalSpec, gap: float | None = None) -> float:
    """Left-endpoint sum of g^2 over [t, maturity] along a realized path.

    Only valid from one delay before maturity onwards: there every needed
    history segment is already determined by the path up to ``t``.
    """
    gap = path.gap if gap is None else gap
    dt = path.grid.step
    if t > maturity + 1e-12:
        raise ValueError(f"t={t} is past maturity {maturity}")
    if t < maturity - gap - 1e-12 * max(1.0, gap):
        raise ValueError(f"t={t} is earlier than one delay before maturity; the forward "
                         "variance is not determined yet")
    n = steps_in(maturity - t, dt, "maturity - t")
    if n == 0:
        return 0.0
    delay = steps_in(gap, dt, "gap")
    nodes = path.grid.index_of(t) + np.arange(n) - delay
    vk = engine.kernel_params(vol, path.window, dt)
    g = backend.eval_nodes(path.prices[None, :], nodes, *vk)[0]
    return float(np.sum(g * g) * dt)


def price_closed_form_at(path: PathRecord, t: float, vol: FunctionalSpec,
                         mkt: MarketConfig) -> tuple[PricingResult, HedgePosition]:
    """Closed-form quote at a grid time inside the last delay period."""
    sigma2 = integrated_variance(path, t, mkt.maturity, vol)
    return closed_form_last_delay(path.value_at(t), sigma2, mkt.maturity - t, mkt)


def _require_horizon(cfg: SimulationConfig, mkt: MarketConfig) -> None:
    if abs(cfg.horizon - mkt.maturity) > 1e-12 * max(1.0, mkt.maturity):
        raise ValueError(f"simulation horizon {cfg.horizon} must equal the option "
                         f"maturity {mkt.maturity}")


def price_nested(theta: InitialPath, drift: FunctionalSpec, vol: FunctionalSpec,
                 cfg: SimulationConfig, mkt: MarketConfig, *,
                 antithetic: bool = False, replicates: int | None = None) -> PricingResult:
    """Monte Carlo price at time 0 via the nested (tower) representation.

    Paths are simulated under the pricing measure only up to one delay
    before maturity; the conditional expectation over the final delay
    period is then the explicit H transform of the discounted price there,
    with the forward variance read off the already-determined segments.
    """
    _require_horizon(cfg, mkt)
    if mkt.maturity <= cfg.gap + 1e-12:
        raise ValueError("maturity inside the last delay period: use the closed form")
    cfg_q = replace(cfg, measure="Q", rate=mkt.rate)
    steps_sim = steps_in(mkt.maturity - cfg.gap, cfg.dt, "maturity - gap")
    l_steps = cfg_q.delay_steps
    vk = engine.kernel_params(vol, cfg.window, cfg.dt)
    disc = math.exp(-mkt.rate * (mkt.maturity - cfg.gap))
    n = cfg.replicates if replicates is None else replicates
    chunks = []
    for blk in iter_path_blocks(theta, drift, vol, cfg_q, steps=steps_sim,
                                replicates=n, antithetic=antithetic):
        x = blk.prices[:, -1] * disc
        nodes = blk.zero_node + steps_sim + np.arange(l_steps) - l_steps
        g = backend.eval_nodes(blk.prices, nodes, *vk)
        s2 = np.sum(g * g, axis=1) * cfg.dt
        chunks.append(_h_values(x, -0.5 * s2, s2, mkt))
    values = np.concatenate(chunks)
    if antithetic:
        values = pair_mean(values)
    mean, se = mc_mean_se(values)
    return PricingResult(price=mean, std_error=se, replicates=n, method="nested_h")


def price_full_memory_mc(theta: InitialPath, drift: FunctionalSpec, vol: FunctionalSpec,
                         cfg: SimulationConfig, mkt: MarketConfig, approx_k: int, *,
                         payoff: str = "call", antithetic: bool = False,
                         replicates: int | None = None) -> PricingResult:
    """Monte Carlo price of the full-memory model via the delay-1/k scheme.

    Simulates the gap dynamics at delay 1/approx_k under the pricing
    measure to maturity and averages the discounted payoff. Convergence
    in k is the caller's concern; the diagnostics module quantifies it.
    """
    _require_horizon(cfg, mkt)
    if approx_k < 1:
        raise ValueError(f"approx_k must be >= 1, got {approx_k}")
    if payoff not in ("call", "put"):
        raise ValueError(f"payoff must be 'call' or 'put', got {payoff!r}")
    cfg_q = replace(cfg, measure="Q", rate=mkt.rate, gap=1.0 / approx_k)
    disc = math.exp(-mkt.rate * mkt.maturity)
    n = cfg.replicates if replicates is None else replicates
    chunks = []
    for blk in iter_path_blocks(theta, drift, vol, cfg_q, replicates=n,
                                antithetic=antithetic):
        terminal = blk.prices[:, -1]
        if payoff == "call":
            chunks.append(disc * np.maximum(terminal - mkt.strike, 0.0))
        else:
            chunks.append(disc * np.maximum(mkt.strike - terminal, 0.0))
    values = np.concatenate(chunks)
    if antithetic:
        values = pair_mean(values)
    mean, se = mc_mean_se(values)
    return PricingResult(price=mean, std_error=se, replicates=n, method="full_memory_mc")


def hedge_replication_backtest(path: PathRecord, rebalance_dt: float,
                               mkt: MarketConfig, vol: FunctionalSpec,
                               gap: float | None = None) -> float:
    """Terminal wealth error of the closed-form hedge over the last delay period.

    Starts a self-financing stock/bond portfolio at the closed-form price
    one delay before maturity, rebalances the stock holding to the hedge
    ratio at each rebalance time, and returns terminal wealth minus the
    realized call payoff.
    """
    gap = path.gap if gap is None else gap
    dt = path.grid.step
    steps_in(rebalance_dt, dt, "rebalance_dt")
    n_reb = steps_in(gap, rebalance_dt, "gap")
    if n_reb < 1:
        raise ValueError("rebalance interval exceeds the delay period")
    t0 = mkt.maturity - gap
    path.grid.index_of(mkt.maturity)  # path must reach maturity
    result, hedge = price_closed_form_at(path, t0, vol, mkt)
    wealth = result.price
    growth = math.exp(mkt.rate * rebalance_dt)
    for j in range(n_reb):
        t = t0 + j * rebalance_dt
        if j > 0:
            _, hedge = price_closed_form_at(path, t, vol, mkt)
        s_now = path.value_at(t)
        s_next = path.value_at(t + rebalance_dt)
        wealth = hedge.stock_units * s_next + (wealth - hedge.stock_units * s_now) * growth
    return wealth - max(path.value_at(mkt.maturity) - mkt.strike, 0.0)


@dataclass(frozen=True)
class HedgeStudyRow:
    rebalance_dt: float
    rms_error: float
    mean_error: float
    se_mean: float
    paths: int


def hedge_backtest_study(theta: InitialPath, drift: FunctionalSpec, vol: FunctionalSpec,
                         cfg: SimulationConfig, mkt: MarketConfig,
                         rebalance_dts: list[float],
                         n_paths: int | None = None) -> list[HedgeStudyRow]:
    """Backtest the last-delay hedge at several rebalance intervals, same paths."""
    _require_horizon(cfg, mkt)
    n = cfg.replicates if n_paths is None else n_paths
    errors: dict[float, list[float]] = {rdt: [] for rdt in rebalance_dts}
    start = -(cfg.gap + cfg.window)
    for blk in iter_path_blocks(theta, drift, vol, cfg, replicates=n):
        for r in range(blk.prices.shape[0]):
            rec = engine._record_from_row(blk.prices[r], blk.increments[r], cfg,
                                          gap=cfg.gap, start=start)
            for rdt in rebalance_dts:
                errors[rdt].append(hedge_replication_backtest(rec, rdt, mkt, vol))
    rows = []
    for rdt in rebalance_dts:
        err = np.asarray(errors[rdt])
        mean, se = mc_mean_se(err)
        rows.append(HedgeStudyRow(rebalance_dt=rdt,
                                  rms_error=float(np.sqrt(np.mean(err * err))),
                                  mean_error=mean, se_mean=se, paths=n))
    return rows
