"""Stock-price simulation and option pricing with finite price memory.

The dynamics multiply the current price by drift and volatility
functionals of a trailing window of past prices, read a fixed delay in
the past. The package simulates those paths exactly in exponential form,
prices European calls (closed form inside the last delay period, nested
or plain Monte Carlo elsewhere), hedges them, and verifies the supporting
limit theorems empirically.
"""

__version__ = "0.1.0"

from .backend import BACKEND
from .diagnostics import (
    ConvergenceReport,
    HolderInitialPath,
    MartingaleReport,
    MomentBoundReport,
    NormalizationReport,
    convergence_study,
    make_holder_path,
    martingale_check,
    moment_bound_check,
    normalization_check,
)
from .engine import (
    GirsanovWeight,
    NumericalError,
    SimulationConfig,
    brownian_increments,
    coupled_paths,
    girsanov_weight,
    simulate_gap_path,
    simulate_gap_sequence,
)
from .functionals import BoundsReport, FunctionalSpec, eval_drift, eval_vol, validate_bounds
from .paths import (
    GridAlignmentError,
    HistorySegment,
    InitialPath,
    PathRecord,
    TimeGrid,
    extend_initial,
    load_initial_csv,
    load_record_csv,
)
from .pricing import (
    HedgePosition,
    MarketConfig,
    PricingResult,
    black_scholes,
    closed_form_last_delay,
    h_function,
    hedge_backtest_study,
    hedge_replication_backtest,
    integrated_variance,
    normal_cdf,
    price_closed_form_at,
    price_full_memory_mc,
    price_nested,
)

__all__ = [
    "BACKEND",
    "BoundsReport",
    "ConvergenceReport",
    "FunctionalSpec",
    "GirsanovWeight",
    "GridAlignmentError",
    "HedgePosition",
    "HistorySegment",
    "HolderInitialPath",
    "InitialPath",
    "MarketConfig",
    "MartingaleReport",
    "MomentBoundReport",
    "NormalizationReport",
    "NumericalError",
    "PathRecord",
    "PricingResult",
    "SimulationConfig",
    "TimeGrid",
    "black_scholes",
    "brownian_increments",
    "closed_form_last_delay",
    "convergence_study",
    "coupled_paths",
    "eval_drift",
    "eval_vol",
    "extend_initial",
    "girsanov_weight",
    "h_function",
    "hedge_backtest_study",
    "hedge_replication_backtest",
    "integrated_variance",
    "load_initial_csv",
    "load_record_csv",
    "make_holder_path",
    "martingale_check",
    "moment_bound_check",
    "normal_cdf",
    "normalization_check",
    "price_closed_form_at",
    "price_full_memory_mc",
    "price_nested",
    "simulate_gap_path",
    "simulate_gap_sequence",
    "validate_bounds",
]
