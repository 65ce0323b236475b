"""Command line interface.

Subcommands: ``kernel`` (build an exponential-sum kernel and report its
errors), ``table`` (emit a benchmark table as CSV), ``price`` (Monte
Carlo option price as JSON), ``smile`` (rough Bergomi implied-vol smile
CSV for both sampling modes) and ``path-dump`` (single trajectory CSV).
Scalar results go to stdout as JSON; vector results are CSV. The
``RVOL_WORKERS`` environment variable overrides the default worker
count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .bergomi import BergomiParams
from .kernel import (
    ExpSumKernel,
    RoughKernelSpec,
    l2_error_discrete,
    l2_error_exact,
    write_kernel_csv,
)
from .mc import (
    BERGOMI_MODES,
    HESTON_SCHEMES,
    BergomiModel,
    CounterRng,
    HestonModel,
    McConfig,
    bergomi_smile,
    euro_call,
    lookback_call,
    price,
)
from .quadrature import (
    GeometricConfig,
    NewtonCotesConfig,
    RiemannConfig,
    build_geometric,
    build_newton_cotes,
    build_riemann,
    build_simpson,
    build_systematic,
)
from .schemes import GridSpec
from .tables import TABLE_IDS, table_rows

_METHODS = ("riemann-mid", "riemann-bary", "simpson", "newton-cotes", "geometric", "systematic")


def _default_workers() -> int:
    env = os.environ.get("RVOL_WORKERS")
    if env:
        return max(1, int(env))
    return 1


def _build_kernel_from_config(config: dict) -> ExpSumKernel:
    method = config["method"]
    if method not in _METHODS:
        raise ValueError(f"method must be one of {_METHODS}")
    H = float(config["hurst"])
    spec = RoughKernelSpec(H)
    n = int(config["n"])
    horizon = float(config.get("horizon", 1.0))
    if method in ("riemann-mid", "riemann-bary"):
        rule = "midpoint" if method == "riemann-mid" else "barycentric"
        default_k = n ** (2.0 / 3.0) if rule == "midpoint" else n**0.8
        cfg = RiemannConfig(n=n, K=float(config.get("truncation", default_k)), node_rule=rule)
        return build_riemann(spec, cfg)
    if method in ("simpson", "newton-cotes"):
        rule = config.get("node_rule", "midpoint")
        default_k = n ** ((13.0 - 6.0 * H) / (15.0 - 6.0 * H))
        default_beta = (10.0 - 6.0 * H) / (13.0 - 6.0 * H)
        cfg = NewtonCotesConfig(
            n=n,
            K=float(config.get("truncation", default_k)),
            beta=float(config.get("beta", default_beta)),
            J=int(config.get("order", 2)),
            node_rule=rule,
        )
        return build_simpson(spec, cfg) if method == "simpson" else build_newton_cotes(spec, cfg)
    if method == "geometric":
        cfg = GeometricConfig(
            n=n,
            K=float(config.get("truncation", n**0.8)),
            A=float(config.get("tail_ratio", 3.0)),
        )
        return build_geometric(spec, cfg)
    return build_systematic(spec, n, horizon)


def _cmd_kernel(args) -> int:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    else:
        config = {
            "method": args.method,
            "hurst": args.hurst,
            "n": args.n,
            "horizon": args.horizon,
        }
        if args.truncation is not None:
            config["truncation"] = args.truncation
        if args.beta is not None:
            config["beta"] = args.beta
        if args.order is not None:
            config["order"] = args.order
        if args.tail_ratio is not None:
            config["tail_ratio"] = args.tail_ratio
        if args.node_rule is not None:
            config["node_rule"] = args.node_rule
    if config.get("method") is None:
        raise ValueError("a method is required (flag --method or config key)")
    kernel = _build_kernel_from_config(config)
    spec = RoughKernelSpec(float(config["hurst"]))
    horizon = float(config.get("horizon", 1.0))
    if args.out:
        write_kernel_csv(kernel, args.out)
    err_sq = l2_error_exact(spec, kernel, horizon)
    summary = {
        "method": config["method"],
        "n_factors": kernel.n,
        "l2_error_sq": err_sq,
        "l2_error": math.sqrt(err_sq),
        "discrete_l2_error": l2_error_discrete(spec, kernel, horizon, args.steps),
        "out": args.out,
    }
    print(json.dumps(summary))
    return 0


def _write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{x:.17g}" if isinstance(x, float) else str(x) for x in row))
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_table(args) -> int:
    paths = 1_000_000 if args.paper_scale else args.paths
    header, rows = table_rows(args.id, paths=paths, seed=args.seed, workers=args.workers)
    _write_csv(args.out, header, rows)
    return 0


def _heston_model(args) -> HestonModel:
    hurst = args.hurst if args.hurst is not None else 0.1
    factors = args.factors if args.factors is not None else 100
    return HestonModel(scheme=args.scheme, hurst=hurst, kernel_factors=factors)


def _bergomi_model(args) -> BergomiModel:
    params = BergomiParams(H=args.hurst) if args.hurst is not None else BergomiParams()
    factors = args.factors if args.factors is not None else 40
    return BergomiModel(mode=args.scheme, params=params, kernel_factors=factors)


def _cmd_price(args) -> int:
    if args.model == "heston":
        if args.scheme not in HESTON_SCHEMES:
            raise ValueError(f"heston scheme must be one of {HESTON_SCHEMES}")
        model = _heston_model(args)
    else:
        if args.scheme not in BERGOMI_MODES:
            raise ValueError(f"bergomi scheme must be one of {BERGOMI_MODES}")
        model = _bergomi_model(args)
    payoff = (euro_call if args.payoff == "euro-call" else lookback_call)(args.strike)
    grid = GridSpec(T=args.horizon, N=args.steps)
    paths = 1_000_000 if args.paper_scale else args.paths
    cfg = McConfig(paths=paths, seed=args.seed, workers=args.workers)
    report = price(model, payoff, grid, cfg)
    print(report.to_json())
    return 0


def _cmd_smile(args) -> int:
    if not args.kmin < args.kmax and args.points > 1:
        raise ValueError("need kmin < kmax")
    params = BergomiParams(
        S0=args.spot, v0=args.variance, eta=args.eta, rho=args.rho, H=args.hurst
    )
    grid = GridSpec(T=args.horizon, N=args.steps)
    paths = 1_000_000 if args.paper_scale else args.paths
    cfg = McConfig(paths=paths, seed=args.seed, workers=args.workers)
    if args.points == 1:
        ks = [args.kmin]
    else:
        ks = list(np.linspace(args.kmin, args.kmax, args.points))
    rows = bergomi_smile(params, grid, cfg, ks, kernel_factors=args.factors)
    _write_csv(args.out, ["mode", "k", "price", "ci_halfwidth", "implied_vol"], rows)
    return 0


def _cmd_path_dump(args) -> int:
    grid = GridSpec(T=args.horizon, N=args.steps)
    if args.model == "heston":
        model = _heston_model(args)
    else:
        model = _bergomi_model(args)
    rng = CounterRng(args.seed)
    normals = rng.normals_block(
        np.array([0], dtype=np.uint64), grid.N, model.components_per_step(grid)
    )
    # rebuild the full trajectory rather than the terminal summary
    from .bergomi import simulate_bergomi
    from .mc import systematic_kernel

    if args.model == "heston":
        kern = model.resolve_kernel(grid)
        sqrt_dt = math.sqrt(grid.dt)
        if args.scheme in ("integrated-volterra", "integrated-multifactor"):
            from .schemes import heston_integrated_multifactor, heston_integrated_volterra

            fn = (
                heston_integrated_volterra
                if args.scheme == "integrated-volterra"
                else heston_integrated_multifactor
            )
            paths = fn(model.params, kern, grid, normals[:, :, 0], normals[:, :, 1])
            states = [np.exp(paths.log_price[0]), paths.integrated_variance[0]]
            header = ["t", "price", "integrated_variance"]
        elif args.scheme == "hybrid":
            from .schemes import heston_hybrid_multifactor, hybrid_step_covariance

            spec = RoughKernelSpec(model.hurst)
            cov = hybrid_step_covariance(spec, grid.dt)
            l11 = math.sqrt(cov[0, 0])
            l21 = cov[0, 1] / l11
            l22 = math.sqrt(cov[1, 1] - l21 * l21)
            paths = heston_hybrid_multifactor(
                model.params,
                spec,
                kern,
                grid,
                l11 * normals[:, :, 0],
                sqrt_dt * normals[:, :, 1],
                l21 * normals[:, :, 0] + l22 * normals[:, :, 2],
            )
            states = [np.exp(paths.log_price[0]), paths.variance[0]]
            header = ["t", "price", "variance"]
        else:
            from .schemes import heston_multifactor_euler, heston_volterra_euler

            fn = heston_volterra_euler if args.scheme == "volterra" else heston_multifactor_euler
            paths = fn(
                model.params, kern, grid, sqrt_dt * normals[:, :, 0], sqrt_dt * normals[:, :, 1]
            )
            states = [np.exp(paths.log_price[0]), paths.variance[0]]
            header = ["t", "price", "variance"]
    else:
        kern = (
            None
            if args.scheme == "exact"
            else systematic_kernel(model.params.H, model.kernel_factors, grid.T)
        )
        paths = simulate_bergomi(model.params, grid, kernel=kern, normals=normals)
        states = [np.exp(paths.log_price[0]), paths.variance[0]]
        header = ["t", "price", "variance"]
    rows = [
        [t] + [component[i] for component in states]
        for i, t in enumerate(grid.times())
    ]
    _write_csv(args.out, header, rows)
    return 0


def _add_mc_flags(parser):
    parser.add_argument("--paths", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=_default_workers())
    parser.add_argument("--paper-scale", action="store_true", help="use 10^6 paths")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rvol")
    sub = parser.add_subparsers(dest="command", required=True)

    p_kernel = sub.add_parser("kernel", help="build an exponential-sum kernel")
    p_kernel.add_argument("--config", help="JSON config naming the method and parameters")
    p_kernel.add_argument("--method", choices=_METHODS)
    p_kernel.add_argument("--hurst", type=float, default=0.1)
    p_kernel.add_argument("--n", type=int, default=100)
    p_kernel.add_argument("--horizon", type=float, default=1.0)
    p_kernel.add_argument("--truncation", type=float, default=None)
    p_kernel.add_argument("--beta", type=float, default=None)
    p_kernel.add_argument("--order", type=int, default=None)
    p_kernel.add_argument("--tail-ratio", type=float, default=None)
    p_kernel.add_argument("--node-rule", choices=("midpoint", "barycentric"), default=None)
    p_kernel.add_argument("--steps", type=int, default=160)
    p_kernel.add_argument("--out", default=None)
    p_kernel.set_defaults(func=_cmd_kernel)

    p_table = sub.add_parser("table", help="emit a benchmark table as CSV")
    p_table.add_argument("--id", required=True, type=str.lower, choices=TABLE_IDS)
    p_table.add_argument("--out", default=None)
    _add_mc_flags(p_table)
    p_table.set_defaults(func=_cmd_table)

    p_price = sub.add_parser("price", help="Monte Carlo option price")
    p_price.add_argument("--model", required=True, choices=("heston", "bergomi"))
    p_price.add_argument("--scheme", required=True)
    p_price.add_argument("--payoff", choices=("euro-call", "lookback-call"), default="euro-call")
    p_price.add_argument("--strike", type=float, default=1.0)
    p_price.add_argument("--hurst", type=float, default=None)
    p_price.add_argument("--factors", type=int, default=None)
    p_price.add_argument("--steps", type=int, default=160)
    p_price.add_argument("--horizon", type=float, default=1.0)
    _add_mc_flags(p_price)
    p_price.set_defaults(func=_cmd_price)

    p_smile = sub.add_parser("smile", help="rough Bergomi implied-vol smile")
    p_smile.add_argument("--kmin", type=float, default=-0.10)
    p_smile.add_argument("--kmax", type=float, default=0.05)
    p_smile.add_argument("--points", type=int, default=16)
    p_smile.add_argument("--steps", type=int, default=20)
    p_smile.add_argument("--horizon", type=float, default=0.041)
    p_smile.add_argument("--spot", type=float, default=1.0)
    p_smile.add_argument("--variance", type=float, default=0.235**2)
    p_smile.add_argument("--eta", type=float, default=1.9)
    p_smile.add_argument("--rho", type=float, default=-0.9)
    p_smile.add_argument("--hurst", type=float, default=0.07)
    p_smile.add_argument("--factors", type=int, default=40)
    p_smile.add_argument("--out", default=None)
    _add_mc_flags(p_smile)
    p_smile.set_defaults(func=_cmd_smile)

    p_dump = sub.add_parser("path-dump", help="dump one simulated trajectory as CSV")
    p_dump.add_argument("--model", required=True, choices=("heston", "bergomi"))
    p_dump.add_argument("--scheme", required=True)
    p_dump.add_argument("--hurst", type=float, default=None)
    p_dump.add_argument("--factors", type=int, default=None)
    p_dump.add_argument("--steps", type=int, default=20)
    p_dump.add_argument("--horizon", type=float, default=1.0)
    p_dump.add_argument("--seed", type=int, default=0)
    p_dump.add_argument("--out", default=None)
    p_dump.set_defaults(func=_cmd_path_dump)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
