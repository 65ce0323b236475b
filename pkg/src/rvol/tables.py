"""Benchmark table definitions.

Deterministic kernel-error tables (t1-t6) and Monte Carlo pricing
tables (t7-t10) over the standard rough Heston test configuration. Each
function returns a (header, rows) pair ready for CSV serialization; the
CLI ``table`` subcommand is a thin wrapper.
"""

from __future__ import annotations

from .kernel import RoughKernelSpec, l2_error_exact
from .mc import HestonModel, McConfig, euro_call, lookback_call, price, rate_factor_estimate
from .quadrature import (
    GeometricConfig,
    NewtonCotesConfig,
    RiemannConfig,
    build_geometric,
    build_riemann,
    build_simpson,
    build_systematic,
)
from .schemes import GridSpec, HestonParams

__all__ = ["TABLE_IDS", "table_rows"]

TABLE_IDS = ("t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8", "t9", "t10")

_HURSTS = (0.45, 0.25, 0.05)
_HORIZON = 1.0


def _riemann_error(H: float, n: int, exponent: float, rule: str) -> float:
    spec = RoughKernelSpec(H)
    cfg = RiemannConfig(n=n, K=float(n) ** exponent, node_rule=rule)
    return l2_error_exact(spec, build_riemann(spec, cfg), _HORIZON)


def _riemann_table(rule: str, exponent: float, n: int):
    header = ["H", "n", "l2_sq_n", "l2_sq_2n", "rate_factor"]
    rows = []
    for H in _HURSTS:
        err_n = _riemann_error(H, n, exponent, rule)
        err_2n = _riemann_error(H, 2 * n, exponent, rule)
        rows.append([H, n, err_n, err_2n, rate_factor_estimate(err_n, err_2n, H)])
    return header, rows


def _simpson_error(H: float, n: int, k_exp: float, beta: float, rule: str) -> float:
    spec = RoughKernelSpec(H)
    cfg = NewtonCotesConfig(n=n, K=float(n) ** k_exp, beta=beta, J=2, node_rule=rule)
    return l2_error_exact(spec, build_simpson(spec, cfg), _HORIZON)


def _simpson_table(rule: str, n: int):
    header = ["H", "n", "l2_sq_n", "l2_sq_2n", "rate_factor"]
    rows = []
    for H in _HURSTS:
        if rule == "midpoint":
            k_exp = (13.0 - 6.0 * H) / (15.0 - 6.0 * H)
            beta = (10.0 - 6.0 * H) / (13.0 - 6.0 * H)
        else:
            k_exp = (22.0 - 4.0 * H) / (25.0 - 4.0 * H)
            beta = (20.0 - 4.0 * H) / (22.0 - 4.0 * H)
        err_n = _simpson_error(H, n, k_exp, beta, rule)
        err_2n = _simpson_error(H, 2 * n, k_exp, beta, rule)
        rows.append([H, n, err_n, err_2n, rate_factor_estimate(err_n, err_2n, H)])
    return header, rows


def _geometric_table(ratio: float = 3.0):
    header = ["H", "l2_sq_50", "l2_sq_200", "l2_sq_400", "rate_factor"]
    rows = []
    for H in _HURSTS:
        spec = RoughKernelSpec(H)
        errs = {}
        for n in (50, 200, 400):
            cfg = GeometricConfig(n=n, K=float(n) ** 0.8, A=ratio)
            errs[n] = l2_error_exact(spec, build_geometric(spec, cfg), _HORIZON)
        rows.append(
            [H, errs[50], errs[200], errs[400], rate_factor_estimate(errs[200], errs[400], H)]
        )
    return header, rows


def _systematic_table():
    header = ["H", "n_total", "l2_error"]
    rows = []
    for H, n_total in ((0.45, 10), (0.45, 20), (0.25, 20), (0.25, 40), (0.05, 40), (0.05, 80)):
        spec = RoughKernelSpec(H)
        kern = build_systematic(spec, n_total, _HORIZON)
        rows.append([H, n_total, l2_error_exact(spec, kern, _HORIZON) ** 0.5])
    return header, rows


_PRICING_STEPS = {
    "t7": (10, 20, 40, 80, 160, 320),
    "t8": (10, 20, 40, 80, 160, 320),
    "t9": (10, 20, 40, 80, 160),
    "t10": (10, 20, 40, 80, 160, 320),
}
_PRICING_SCHEMES = {
    "t7": ("multifactor-truncated", "volterra", "hybrid"),
    "t8": ("multifactor-truncated", "volterra", "hybrid"),
    "t9": ("integrated-multifactor", "integrated-volterra"),
    "t10": ("integrated-multifactor", "integrated-volterra"),
}
_PRICING_PAYOFF = {
    "t7": euro_call,
    "t8": lookback_call,
    "t9": euro_call,
    "t10": lookback_call,
}


def _pricing_table(table_id: str, paths: int, seed: int, workers: int):
    header = ["N"]
    schemes = _PRICING_SCHEMES[table_id]
    for scheme in schemes:
        header += [f"{scheme}_mean", f"{scheme}_halfwidth", f"{scheme}_seconds"]
    payoff = _PRICING_PAYOFF[table_id](1.0)
    params = HestonParams()
    cfg = McConfig(paths=paths, seed=seed, workers=workers)
    rows = []
    for N in _PRICING_STEPS[table_id]:
        grid = GridSpec(T=_HORIZON, N=N)
        row = [N]
        for scheme in schemes:
            model = HestonModel(scheme=scheme, params=params, hurst=0.1)
            report = price(model, payoff, grid, cfg)
            row += [report.mean, report.half_width_95, report.wall_seconds]
        rows.append(row)
    return header, rows


def table_rows(table_id: str, paths: int = 100_000, seed: int = 0, workers: int = 1):
    """Header and rows for one benchmark table id (``t1`` .. ``t10``)."""
    table_id = table_id.lower()
    if table_id == "t1":
        return _riemann_table("midpoint", 2.0 / 3.0, 50)
    if table_id == "t2":
        return _riemann_table("barycentric", 0.8, 50)
    if table_id == "t3":
        return _simpson_table("midpoint", 16)
    if table_id == "t4":
        return _simpson_table("barycentric", 16)
    if table_id == "t5":
        return _geometric_table()
    if table_id == "t6":
        return _systematic_table()
    if table_id in _PRICING_STEPS:
        return _pricing_table(table_id, paths, seed, workers)
    raise ValueError(f"unknown table id {table_id!r}; expected one of {TABLE_IDS}")
