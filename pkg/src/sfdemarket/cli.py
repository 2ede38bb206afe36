"""Command-line entry point: config parsing, orchestration, CSV/manifest output.

Configs are INI-style key-value text with one section per concern
([market], [simulation], [drift], [vol], [initial_path], plus per-command
sections). Validation is total: every violation in the file is reported
at once and nothing executes on an invalid config. Exit codes: 0 success,
1 invalid config, 2 numerical failure.

Every artifact is a CSV body plus a plain key-value manifest carrying the
resolved configuration, its hash, the seed, and the RNG/backend identity,
so any result is regenerable from its manifest alone. The timestamp is
isolated in a single manifest line; CSV bodies are byte-identical across
reruns of the same config and seed.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import click

from . import __version__, backend
from .diagnostics import (
    convergence_study,
    make_holder_path,
    martingale_check,
    moment_bound_check,
    normalization_check,
)
from .engine import NumericalError, SimulationConfig, simulate_gap_path
from .functionals import FunctionalSpec, require_positive_vol
from .paths import InitialPath, load_initial_csv, load_record_csv, steps_in
from .pricing import (
    MarketConfig,
    PricingResult,
    black_scholes,
    closed_form_last_delay,
    hedge_backtest_study,
    price_closed_form_at,
    price_full_memory_mc,
    price_nested,
)
from .paths import GridAlignmentError, record_from_initial

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2

COMMANDS = ("simulate", "price", "converge", "hedge", "check")

DEFAULT_REPLICATES = 10_000
DEFAULT_VOL_FLOOR = 0.01
DEFAULT_VOL_CAP = 10.0


class ConfigError(ValueError):
    """Invalid run configuration; carries every violation found."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


_SPEC_KEYS = {
    "constant": {"kind", "value"},
    "moving_average": {"kind", "window"},
    "realized_vol": {"kind", "window", "floor", "cap"},
    "affine": {"kind", "inner", "scale", "shift",
               "inner_value", "inner_window", "inner_floor", "inner_cap"},
}

_SECTION_KEYS = {
    "market": {"rate", "strike", "maturity"},
    "simulation": {"gap", "window", "dt", "horizon", "seed", "replicates"},
    "drift": set().union(*_SPEC_KEYS.values()),
    "vol": set().union(*_SPEC_KEYS.values()),
    "initial_path": {"constant", "file"},
    "simulate": {"measure", "stream"},
    "price": {"method", "approx_k", "payoff", "at_time", "path_file"},
    "convergence": {"beta", "k_values", "level", "path_vol"},
    "hedge": {"rebalance"},
    "check": {"gamma", "k_values", "checks"},
}


@dataclass
class RunConfig:
    """A fully validated run: objects ready to execute plus the resolved text."""

    command: str
    sim: SimulationConfig
    drift: FunctionalSpec
    vol: FunctionalSpec
    theta: InitialPath
    market: MarketConfig | None = None
    antithetic: bool = False
    options: dict = field(default_factory=dict)
    resolved: dict[str, str] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        text = "\n".join(f"{k}={v}" for k, v in sorted(self.resolved.items()))
        return hashlib.sha256(text.encode()).hexdigest()


class _Reader:
    """Typed section/key access that records violations instead of raising."""

    def __init__(self, parser: configparser.ConfigParser, violations: list[str]):
        self.parser = parser
        self.violations = violations
        self.resolved: dict[str, str] = {}

    def has(self, section: str) -> bool:
        return self.parser.has_section(section)

    def raw(self, section: str, key: str, default=None):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key)
        return default

    def _get(self, section, key, conv, default, required, what):
        raw = self.raw(section, key)
        if raw is None:
            if required:
                self.violations.append(f"[{section}] is missing required key '{key}'")
                return None
            if default is None:
                return None
            self.resolved[f"{section}.{key}"] = str(default)
            return default
        try:
            value = conv(raw)
        except (TypeError, ValueError):
            self.violations.append(f"[{section}] {key} = {raw!r} is not a valid {what}")
            return None
        self.resolved[f"{section}.{key}"] = str(value)
        return value

    def get_float(self, section, key, default=None, required=False):
        return self._get(section, key, float, default, required, "number")

    def get_int(self, section, key, default=None, required=False):
        return self._get(section, key, int, default, required, "integer")

    def get_str(self, section, key, default=None, required=False, choices=None):
        val = self._get(section, key, str, default, required, "string")
        if val is not None and choices is not None and val not in choices:
            self.violations.append(f"[{section}] {key} = {val!r} must be one of "
                                   f"{sorted(choices)}")
            return None
        return val

    def get_int_list(self, section, key, default):
        def conv(raw):
            return [int(x) for x in raw.replace(",", " ").split()]
        return self._get(section, key, conv, default, False, "integer list")

    def get_float_list(self, section, key, default):
        def conv(raw):
            return [float(x) for x in raw.replace(",", " ").split()]
        return self._get(section, key, conv, default, False, "number list")


def _check_unknown(parser, command, violations):
    relevant = {"market", "simulation", "drift", "vol", "initial_path", command,
                "convergence" if command == "converge" else command}
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            violations.append(f"unknown section [{section}]")
            continue
        # sections for other commands may sit in the same file; only the
        # active command's sections are key-checked strictly
        for key in parser.options(section):
            if key not in _SECTION_KEYS[section]:
                violations.append(f"unknown key '{key}' in section [{section}]")


def _parse_spec(rd: _Reader, section: str, violations: list[str],
                default_floor: float, default_cap: float) -> FunctionalSpec | None:
    kind = rd.get_str(section, "kind", required=True,
                      choices=set(_SPEC_KEYS))
    if kind is None:
        return None
    allowed = _SPEC_KEYS[kind]
    for key in rd.parser.options(section):
        if key in _SECTION_KEYS[section] and key not in allowed:
            violations.append(f"[{section}] key '{key}' does not apply to kind '{kind}'")

    def build(prefix: str, k: str):
        if k == "constant":
            value = rd.get_float(section, f"{prefix}value", required=True)
            return None if value is None else FunctionalSpec.constant(value)
        if k == "moving_average":
            window = rd.get_float(section, f"{prefix}window", required=True)
            return None if window is None else FunctionalSpec.moving_average(window)
        floor = rd.get_float(section, f"{prefix}floor", default=default_floor)
        cap = rd.get_float(section, f"{prefix}cap", default=default_cap)
        window = rd.get_float(section, f"{prefix}window", required=True)
        if window is None or floor is None or cap is None:
            return None
        if not 0.0 < floor < cap:
            violations.append(f"[{section}] needs 0 < floor < cap, got floor={floor}, cap={cap}")
            return None
        return FunctionalSpec.realized_vol(window, floor, cap)

    try:
        if kind == "affine":
            inner_kind = rd.get_str(section, "inner", required=True,
                                    choices={"constant", "moving_average", "realized_vol"})
            if inner_kind is None:
                return None
            inner = build("inner_", inner_kind)
            scale = rd.get_float(section, "scale", default=1.0)
            shift = rd.get_float(section, "shift", default=0.0)
            if inner is None or scale is None or shift is None:
                return None
            return FunctionalSpec.affine(inner, scale=scale, shift=shift)
        return build("", kind)
    except ValueError as exc:
        violations.append(f"[{section}] {exc}")
        return None


def parse_config(text: str, command: str, *, seed: int | None = None,
                 replicates: int | None = None, antithetic: bool = False,
                 base_dir: str | Path = ".") -> RunConfig:
    """Validate config text for one command; raise ConfigError listing every violation."""
    if command not in COMMANDS:
        raise ConfigError([f"unknown command {command!r}"])
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"config syntax: {exc}"]) from None

    violations: list[str] = []
    _check_unknown(parser, command, violations)
    rd = _Reader(parser, violations)
    base_dir = Path(base_dir)

    # market (required except for a physical-measure simulate / converge)
    market = None
    needs_market = command in ("price", "hedge", "check") or (
        command == "simulate" and rd.raw("simulate", "measure", "P") == "Q")
    if rd.has("market") or needs_market:
        rate = rd.get_float("market", "rate", default=0.0)
        strike = rd.get_float("market", "strike", required=needs_market and command != "simulate")
        maturity = rd.get_float("market", "maturity", required=needs_market and command != "simulate")
        if rate is not None and rate < 0.0:
            violations.append("[market] rate must be >= 0")
        if strike is not None and strike <= 0.0:
            violations.append("[market] strike must be positive")
        if maturity is not None and maturity <= 0.0:
            violations.append("[market] maturity must be positive")
        if command == "simulate":
            strike = strike if strike is not None else 1.0
            maturity = maturity if maturity is not None else None
        if not violations and strike is not None and maturity is not None and rate is not None:
            market = MarketConfig(rate=rate, strike=strike, maturity=maturity)

    # simulation grid
    gap = rd.get_float("simulation", "gap", required=True)
    window = rd.get_float("simulation", "window", required=True)
    dt = rd.get_float("simulation", "dt",
                      default=None if gap is None else gap / 16.0)
    horizon = rd.get_float("simulation", "horizon",
                           default=market.maturity if market else None,
                           required=market is None)
    seed_val = seed if seed is not None else rd.get_int("simulation", "seed", default=0)
    rd.resolved["simulation.seed"] = str(seed_val)
    reps = replicates if replicates is not None else rd.get_int(
        "simulation", "replicates", default=DEFAULT_REPLICATES)
    rd.resolved["simulation.replicates"] = str(reps)

    for name, val in (("gap", gap), ("window", window), ("dt", dt), ("horizon", horizon)):
        if val is not None and val <= 0.0:
            violations.append(f"[simulation] {name} must be positive, got {val}")
    if dt is not None and dt > 0:
        for name, val in (("gap", gap), ("window", window), ("horizon", horizon)):
            if val is not None and val > 0:
                try:
                    steps_in(val, dt, name)
                except (GridAlignmentError, ValueError):
                    violations.append(f"[simulation] dt = {dt} does not divide {name} = {val}")
    if reps is not None and reps < 1:
        violations.append(f"[simulation] replicates must be >= 1, got {reps}")
    if seed_val is not None and not 0 <= seed_val < 2**64:
        violations.append("[simulation] seed must fit in an unsigned 64-bit integer")
    if antithetic and reps is not None and reps % 2:
        violations.append("antithetic sampling needs an even replicate count")

    # functionals
    drift = _parse_spec(rd, "drift", violations, DEFAULT_VOL_FLOOR, DEFAULT_VOL_CAP) \
        if rd.has("drift") else None
    if not rd.has("drift"):
        violations.append("missing section [drift]")
    vol = _parse_spec(rd, "vol", violations, DEFAULT_VOL_FLOOR, DEFAULT_VOL_CAP) \
        if rd.has("vol") else None
    if not rd.has("vol"):
        violations.append("missing section [vol]")
    if vol is not None:
        try:
            require_positive_vol(vol)
        except ValueError as exc:
            violations.append(f"[vol] {exc}")
    if window is not None:
        for section, spec in (("drift", drift), ("vol", vol)):
            w = spec.history_window if spec is not None else None
            if w is not None and abs(w - window) > 1e-9 * max(1.0, window):
                violations.append(f"[{section}] window {w} must equal the simulation "
                                  f"window {window}")

    # per-command options
    options: dict = {}
    if command == "simulate":
        options["measure"] = rd.get_str("simulate", "measure", default="P",
                                        choices={"P", "Q"})
        options["stream"] = rd.get_int("simulate", "stream", default=0)
        if options["measure"] == "Q" and market is None:
            violations.append("[simulate] measure Q needs a [market] section with a rate")
    if command == "price":
        options["method"] = rd.get_str("price", "method", default="auto",
                                       choices={"auto", "closed_form", "nested", "full_memory"})
        default_k = None if gap is None or gap <= 0 else max(1, round(1.0 / gap))
        options["approx_k"] = rd.get_int("price", "approx_k", default=default_k)
        options["payoff"] = rd.get_str("price", "payoff", default="call",
                                       choices={"call", "put"})
        options["at_time"] = rd.get_float("price", "at_time", default=0.0)
        options["path_file"] = rd.get_str("price", "path_file", default=None)
        if options["payoff"] == "put" and options["method"] != "full_memory":
            violations.append("[price] put payoff is only available with method = full_memory")
        if options["at_time"] and not options["path_file"]:
            violations.append("[price] pricing at a positive time needs path_file with the "
                              "realized history")
        if options["at_time"] and market is not None and options["at_time"] >= market.maturity:
            violations.append("[price] at_time must be before maturity")
    if command == "converge":
        options["beta"] = rd.get_float("convergence", "beta", default=0.4)
        options["k_values"] = rd.get_int_list("convergence", "k_values", [2, 4, 8, 16])
        options["level"] = rd.get_float("convergence", "level", default=1.0)
        options["path_vol"] = rd.get_float("convergence", "path_vol", default=0.5)
        if options["beta"] is not None and not 0.0 < options["beta"] < 0.5:
            violations.append("[convergence] beta must lie in (0, 0.5)")
        if options["k_values"] is not None:
            if len(options["k_values"]) < 3:
                violations.append("[convergence] needs at least three k values")
            if dt:
                for k in options["k_values"]:
                    try:
                        steps_in(1.0 / (2 * k), dt, "1/(2k)")
                    except (GridAlignmentError, ValueError):
                        violations.append(f"[convergence] dt = {dt} does not divide 1/(2k) "
                                          f"for k = {k}")
    if command == "hedge":
        default_reb = None if gap is None else [gap / 4.0, gap / 8.0]
        options["rebalance"] = rd.get_float_list("hedge", "rebalance", default_reb)
        if options["rebalance"] and dt and gap:
            for rdt in options["rebalance"]:
                ok = rdt > 0
                try:
                    steps_in(rdt, dt, "rebalance")
                    steps_in(gap, rdt, "gap")
                except (GridAlignmentError, ValueError):
                    ok = False
                if not ok:
                    violations.append(f"[hedge] rebalance {rdt} must be a multiple of dt "
                                      "dividing the gap")
    if command == "check":
        options["gamma"] = rd.get_int("check", "gamma", default=1)
        options["k_values"] = rd.get_int_list("check", "k_values", [2, 4, 8, 16])
        raw_checks = rd.get_str("check", "checks", default="normalization,martingale,moments")
        checks = tuple(c.strip() for c in raw_checks.split(",")) if raw_checks else ()
        options["checks"] = checks
        for c in checks:
            if c not in ("normalization", "martingale", "moments"):
                violations.append(f"[check] unknown check {c!r}")
        if options["gamma"] not in (1, 2, None):
            violations.append("[check] gamma must be 1 or 2")
        if options["k_values"] and dt:
            for k in options["k_values"]:
                try:
                    steps_in(1.0 / k, dt, "1/k")
                except (GridAlignmentError, ValueError):
                    violations.append(f"[check] dt = {dt} does not divide 1/k for k = {k}")

    # initial path
    theta = None
    if command == "converge":
        if None not in (options.get("beta"), options.get("level"), window, dt,
                        options.get("path_vol")) and not violations:
            theta = make_holder_path(options["beta"], seed_val, window,
                                     options["level"], dt, scale=options["path_vol"])
    else:
        const = rd.get_float("initial_path", "constant")
        fname = rd.get_str("initial_path", "file")
        if const is None and fname is None:
            violations.append("[initial_path] needs either 'constant' or 'file'")
        elif const is not None and fname is not None:
            violations.append("[initial_path] 'constant' and 'file' are mutually exclusive")
        elif const is not None:
            if const <= 0.0:
                violations.append("[initial_path] constant level must be positive")
            elif window and dt and not violations:
                theta = InitialPath.constant(const, window=window, step=dt)
        else:
            try:
                theta = load_initial_csv(str(base_dir / fname), window)
                if dt is not None and abs(theta.step - dt) > 1e-9 * dt:
                    violations.append(f"[initial_path] file sampled at {theta.step}, "
                                      f"dt is {dt}")
            except (OSError, ValueError) as exc:
                violations.append(f"[initial_path] {exc}")

    sim = None
    if not violations:
        try:
            sim = SimulationConfig(horizon=horizon, gap=gap, window=window, dt=dt,
                                   seed=seed_val, replicates=reps)
        except (ValueError, GridAlignmentError) as exc:
            violations.append(str(exc))
    if violations:
        raise ConfigError(violations)
    rc = RunConfig(command=command, sim=sim, drift=drift, vol=vol, theta=theta,
                   market=market, antithetic=antithetic, options=options,
                   resolved=dict(rd.resolved))
    rc.resolved["command"] = command
    rc.resolved["antithetic"] = str(antithetic)
    return rc


# -- output helpers -------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(float(x))  # shortest round-trip representation
    return str(x)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def _manifest_text(rc: RunConfig, extra: dict) -> str:
    lines = [
        f"command = {rc.command}",
        f"config_hash = {rc.config_hash}",
        f"seed = {rc.sim.seed}",
        f"rng = philox4x64 keyed by (seed, stream)",
        f"normal_transform = numpy-ziggurat",
        f"backend = {backend.BACKEND}",
        f"version = {__version__}",
    ]
    lines += [f"config.{k} = {v}" for k, v in sorted(rc.resolved.items())]
    lines += [f"{k} = {_fmt(v)}" for k, v in extra.items()]
    lines.append(f"timestamp = {time.strftime('%Y-%m-%dT%H:%M:%S%z')}")
    return "\n".join(lines) + "\n"


def _emit(csv_body: str, manifest: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(csv_body)
        sys.stderr.write(manifest)
    else:
        path = Path(out)
        path.write_text(csv_body)
        Path(str(path) + ".manifest").write_text(manifest)


# -- command execution -----------------------------------------------------------


def _run_simulate(rc: RunConfig) -> tuple[str, dict]:
    sim = replace(rc.sim, measure=rc.options["measure"],
                  rate=rc.market.rate if rc.market else 0.0)
    record = simulate_gap_path(rc.theta, rc.drift, rc.vol, sim,
                               stream_id=rc.options["stream"])
    buf = io.StringIO()
    record.to_csv(buf)
    return buf.getvalue(), {"measure": sim.measure, "stream": rc.options["stream"],
                            "nodes": record.prices.size}


def _price_result(rc: RunConfig) -> tuple[PricingResult, str]:
    mkt = rc.market
    sim = rc.sim
    method = rc.options["method"]
    t = rc.options["at_time"] or 0.0
    both_const = all(s.kind == "constant" or
                     (s.kind == "affine" and s.inner.kind == "constant")
                     for s in (rc.drift, rc.vol))
    if method == "auto":
        if t > 0.0:
            method = "closed_form" if t >= mkt.maturity - sim.gap - 1e-12 else "nested"
        else:
            method = "closed_form" if (mkt.maturity <= sim.gap + 1e-12 or both_const) \
                else "nested"
    if t > 0.0:
        record = load_record_csv(rc.options["path_file"], gap=sim.gap, window=sim.window)
        if method == "closed_form":
            result, _ = price_closed_form_at(record, t, rc.vol, mkt)
            return result, method
        # reanchor the realized history at time t and price the remaining life
        theta_t = record.initial_slice(t, sim.gap, sim.window)
        sim_t = replace(sim, horizon=mkt.maturity - t)
        mkt_t = MarketConfig(rate=mkt.rate, strike=mkt.strike, maturity=mkt.maturity - t)
        if method == "nested":
            return price_nested(theta_t, rc.drift, rc.vol, sim_t, mkt_t,
                                antithetic=rc.antithetic), method
        raise ConfigError(["[price] only closed_form/nested support at_time > 0"])
    if method == "closed_form":
        if mkt.maturity <= sim.gap + 1e-12:
            record = record_from_initial(rc.theta, sim.gap)
            result, _ = price_closed_form_at(record, 0.0, rc.vol, mkt)
            return result, method
        if not both_const:
            raise ConfigError(["[price] closed_form needs maturity <= gap or constant "
                               "coefficients; use nested or full_memory"])
        g0 = rc.vol.value if rc.vol.kind == "constant" \
            else rc.vol.scale * rc.vol.inner.value + rc.vol.shift
        result, _ = closed_form_last_delay(rc.theta.spot, g0 * g0 * mkt.maturity,
                                           mkt.maturity, mkt)
        return result, method
    if method == "nested":
        return price_nested(rc.theta, rc.drift, rc.vol, sim, mkt,
                            antithetic=rc.antithetic), method
    return price_full_memory_mc(rc.theta, rc.drift, rc.vol, sim, mkt,
                                rc.options["approx_k"], payoff=rc.options["payoff"],
                                antithetic=rc.antithetic), method


def _run_price(rc: RunConfig) -> tuple[str, dict]:
    result, method = _price_result(rc)
    lo, hi = result.ci95
    csv_body = _csv_text(
        ["method", "price", "std_error", "ci_lo", "ci_hi", "replicates", "seed"],
        [[result.method, result.price, result.std_error, lo, hi,
          result.replicates, rc.sim.seed]])
    extra = {"method_resolved": method, "degenerate": result.degenerate}
    return csv_body, extra


def _run_converge(rc: RunConfig) -> tuple[str, dict]:
    report = convergence_study(rc.options["k_values"], rc.options["beta"],
                               rc.theta, rc.drift, rc.vol, rc.sim)
    rows = [[k, d, s, rc.sim.replicates]
            for k, d, s in zip(report.k_values, report.discrepancies, report.std_errors)]
    csv_body = _csv_text(["k", "discrepancy", "std_error", "replicates"], rows)
    extra = {
        "fitted_slope": report.fitted_slope,
        "theoretical_slope": report.theoretical_slope,
        "degenerate": report.degenerate,
        "slope_ok": report.degenerate or
                    report.fitted_slope <= report.theoretical_slope + 0.5,
    }
    return csv_body, extra


def _run_hedge(rc: RunConfig) -> tuple[str, dict]:
    sim = replace(rc.sim, measure="Q", rate=rc.market.rate)
    rows_out = hedge_backtest_study(rc.theta, rc.drift, rc.vol, sim, rc.market,
                                    rc.options["rebalance"])
    rows = [[r.rebalance_dt, r.rms_error, r.mean_error, r.se_mean, r.paths]
            for r in rows_out]
    csv_body = _csv_text(["rebalance_dt", "rms_error", "mean_error", "se_mean", "paths"],
                         rows)
    extra = {}
    for a, b in zip(rows_out, rows_out[1:]):
        if a.rms_error > 0:
            extra[f"rms_ratio_{b.rebalance_dt:g}_over_{a.rebalance_dt:g}"] = \
                b.rms_error / a.rms_error
    return csv_body, extra


def _run_check(rc: RunConfig) -> tuple[str, dict]:
    rows: list[list] = []
    extra: dict = {}
    checks = rc.options["checks"]
    if "normalization" in checks:
        rep = normalization_check(rc.drift, rc.vol, rc.market.rate, rc.theta, rc.sim)
        rows.append(["normalization", "mean_weight", rep.estimate, rep.std_error,
                     1.0, rep.passed])
        extra["normalization_pass"] = rep.passed
    if "martingale" in checks:
        sim_q = replace(rc.sim, measure="Q", rate=rc.market.rate)
        rep = martingale_check(rc.theta, rc.drift, rc.vol, sim_q)
        for cp in rep.checkpoints:
            rows.append(["martingale", f"discounted_mean_t={cp.time:g}", cp.estimate,
                         cp.std_error, cp.target, cp.passed])
        extra["martingale_pass"] = rep.passed
    if "moments" in checks:
        rep = moment_bound_check(rc.options["k_values"], rc.options["gamma"],
                                 rc.theta, rc.drift, rc.vol, rc.sim)
        for k, stat, se in zip(rep.k_values, rep.statistics, rep.std_errors):
            rows.append(["moments", f"sup_moment_k={k}", stat, se, "", ""])
        rows.append(["moments", "max_over_min_ratio", rep.ratio, "", 2.0, rep.passed])
        extra["moments_pass"] = rep.passed
    extra["all_pass"] = all(v for k, v in extra.items() if k.endswith("_pass"))
    csv_body = _csv_text(["check", "quantity", "value", "std_error", "target", "passed"],
                         rows)
    return csv_body, extra


_RUNNERS = {
    "simulate": _run_simulate,
    "price": _run_price,
    "converge": _run_converge,
    "hedge": _run_hedge,
    "check": _run_check,
}


def run(rc: RunConfig, out: str | None = None) -> int:
    """Execute a validated config; write CSV + manifest; return the exit code."""
    try:
        csv_body, extra = _RUNNERS[rc.command](rc)
    except ConfigError as exc:
        for v in exc.violations:
            click.echo(f"config error: {v}", err=True)
        return EXIT_CONFIG
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return EXIT_NUMERICAL
    _emit(csv_body, _manifest_text(rc, extra), out)
    return EXIT_OK


def _execute(command: str, config: str, seed: int | None, out: str | None,
             replicates: int | None, antithetic: bool) -> None:
    try:
        text = Path(config).read_text()
    except OSError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        rc = parse_config(text, command, seed=seed, replicates=replicates,
                          antithetic=antithetic, base_dir=Path(config).parent)
    except ConfigError as exc:
        for v in exc.violations:
            click.echo(f"config error: {v}", err=True)
        sys.exit(EXIT_CONFIG)
    sys.exit(run(rc, out))


def _common_options(fn):
    fn = click.option("--config", required=True, type=click.Path(),
                      help="INI-style run configuration.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override [simulation] seed.")(fn)
    fn = click.option("--out", type=click.Path(), default=None,
                      help="CSV output path (manifest at <out>.manifest); stdout if omitted.")(fn)
    fn = click.option("--replicates", type=int, default=None,
                      help="Override [simulation] replicates.")(fn)
    fn = click.option("--antithetic", is_flag=True, default=False,
                      help="Antithetic variates for Monte Carlo pricers.")(fn)
    return fn


@click.group()
@click.version_option(version=__version__)
def main():
    """Simulate delayed-memory stock dynamics and price European calls."""


def _command(name, help_text):
    @main.command(name=name, help=help_text)
    @_common_options
    def _cmd(config, seed, out, replicates, antithetic, _name=name):
        _execute(_name, config, seed, out, replicates, antithetic)
    return _cmd


_command("simulate", "Simulate one path and dump it as t,price CSV.")
_command("price", "Price a European call (closed form, nested, or full-memory MC).")
_command("converge", "Gap-closing convergence-rate study on a rough initial path.")
_command("hedge", "Backtest the closed-form hedge over the last delay period.")
_command("check", "Run normalization / martingale / moment-bound checks.")


if __name__ == "__main__":
    main()
