"""Constructors for the exponential-sum kernels.

Each builder discretizes the spectral density c_H rho^(-H-1/2) into a
finite point measure: plain interval rules on a truncated range,
composite Simpson / Newton-Cotes rules on the upper part of the range,
a geometric extension of the truncation range, and the fully systematic
construction that optimizes the geometric ratio and then rescales the
weights to the best L2 fit. A factor-count reduction picks the smallest
head of a kernel whose discarded tail is negligible at the first grid
point of a simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .kernel import (
    ExpSumKernel,
    RoughKernelSpec,
    barycenter,
    expsum_inner_products,
    l2_error_exact,
    lambda_mass,
)
from .numerics import minimize_scalar

__all__ = [
    "RiemannConfig",
    "NewtonCotesConfig",
    "GeometricConfig",
    "newton_cotes_coefficients",
    "build_riemann",
    "build_simpson",
    "build_newton_cotes",
    "build_geometric",
    "optimize_tail_ratio",
    "rescale_weights",
    "build_systematic",
    "truncate_factors",
    "DEFAULT_TAIL_RATIO_BRACKET",
]

_NODE_RULES = ("midpoint", "barycentric")

# The optimal geometric ratio is O(1)-O(10) in practice; the bracket is
# generous on both sides and the search runs on log ratio.
DEFAULT_TAIL_RATIO_BRACKET = (1.05, 50.0)


@dataclass(frozen=True)
class RiemannConfig:
    """Uniform partition of [0, K) into n intervals.

    ``node_rule`` selects the representative rate inside each interval:
    the interval midpoint, or the density barycenter which improves the
    convergence rate of the resulting kernel approximation.
    """

    n: int
    K: float
    node_rule: str = "barycentric"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.K <= 0.0:
            raise ValueError("K must be positive")
        if self.node_rule not in _NODE_RULES:
            raise ValueError(f"node_rule must be one of {_NODE_RULES}")


@dataclass(frozen=True)
class NewtonCotesConfig:
    """Interval rule on [0, K^beta) plus a composite J-point rule on [K^beta, K].

    ``J`` is the (even) Newton-Cotes order; J = 2 is Simpson's rule. The
    node rule applies to the lower, interval-based part only.
    """

    n: int
    K: float
    beta: float
    J: int = 2
    node_rule: str = "midpoint"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.K <= 1.0:
            raise ValueError("K must exceed 1 so that K^beta < K")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.J < 2 or self.J % 2 != 0:
            raise ValueError("J must be an even integer >= 2")
        if self.node_rule not in _NODE_RULES:
            raise ValueError(f"node_rule must be one of {_NODE_RULES}")


@dataclass(frozen=True)
class GeometricConfig:
    """n uniform intervals on [0, K) plus n geometric intervals above K.

    The geometric part covers [K, K A^n) with ratio A > 1, so the
    resulting kernel has 2n factors. All nodes are barycentric.
    """

    n: int
    K: float
    A: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.K <= 0.0:
            raise ValueError("K must be positive")
        if self.A <= 1.0:
            raise ValueError("geometric ratio A must exceed 1")


def _solve_rational(matrix, rhs):
    """Gaussian elimination over exact rationals."""
    m = len(rhs)
    aug = [row[:] + [rhs[i]] for i, row in enumerate(matrix)]
    for col in range(m):
        pivot_row = next(i for i in range(col, m) if aug[i][col] != 0)
        aug[col], aug[pivot_row] = aug[pivot_row], aug[col]
        pivot = aug[col][col]
        aug[col] = [x / pivot for x in aug[col]]
        for i in range(m):
            if i != col and aug[i][col] != 0:
                factor = aug[i][col]
                aug[i] = [a - factor * b for a, b in zip(aug[i], aug[col])]
    return [aug[i][m] for i in range(m)]


@lru_cache(maxsize=None)
def newton_cotes_coefficients(J: int) -> tuple:
    """Closed Newton-Cotes coefficients (c_0, ..., c_J) as exact Fractions.

    Defined by exactness of (b-a) sum_j c_j f(a + j (b-a)/J) for
    polynomials up to degree J, i.e. the moment equations
    sum_j c_j (j/J)^m = 1/(m+1) for m = 0..J, solved in rational
    arithmetic to avoid coefficient transcription errors.
    """
    if J < 2 or J % 2 != 0:
        raise ValueError("J must be an even integer >= 2")
    nodes = [Fraction(j, J) for j in range(J + 1)]
    matrix = [[node**m for node in nodes] for m in range(J + 1)]
    rhs = [Fraction(1, m + 1) for m in range(J + 1)]
    return tuple(_solve_rational(matrix, rhs))


def _interval_part(spec: RoughKernelSpec, n: int, upper: float, node_rule: str):
    edges = np.linspace(0.0, upper, n + 1)
    weights = np.array([lambda_mass(spec, edges[i], edges[i + 1]) for i in range(n)])
    if node_rule == "midpoint":
        rates = 0.5 * (edges[:-1] + edges[1:])
    else:
        rates = np.array([barycenter(spec, edges[i], edges[i + 1]) for i in range(n)])
    return weights, rates


def build_riemann(spec: RoughKernelSpec, cfg: RiemannConfig) -> ExpSumKernel:
    """Interval-rule kernel: weight = density mass, node per ``node_rule``."""
    weights, rates = _interval_part(spec, cfg.n, cfg.K, cfg.node_rule)
    return ExpSumKernel(weights, rates)


def build_newton_cotes(spec: RoughKernelSpec, cfg: NewtonCotesConfig) -> ExpSumKernel:
    """Interval rule below K^beta, composite Newton-Cotes on [K^beta, K].

    Panel i of the upper range carries J+1 equispaced nodes
    K^beta + (K - K^beta)/n * (i - 1 + j/J) weighted by
    c_H (K - K^beta)/n * c_j * rho^(-H-1/2). Coincident panel-boundary
    nodes are merged by summing their weights, leaving J n + 1 distinct
    upper nodes.
    """
    lower_w, lower_r = _interval_part(spec, cfg.n, cfg.K**cfg.beta, cfg.node_rule)
    coeffs = [float(c) for c in newton_cotes_coefficients(cfg.J)]
    split = cfg.K**cfg.beta
    span = cfg.K - split
    panel = span / cfg.n
    merged: dict[float, float] = {}
    prefactor = spec.density_const * span / cfg.n
    for i in range(1, cfg.n + 1):
        for j, c in enumerate(coeffs):
            rho = split + panel * (i - 1 + j / cfg.J)
            weight = prefactor * c * rho ** (-spec.H - 0.5)
            merged[rho] = merged.get(rho, 0.0) + weight
    upper_r = np.array(sorted(merged))
    upper_w = np.array([merged[r] for r in upper_r])
    return ExpSumKernel(
        np.concatenate([lower_w, upper_w]), np.concatenate([lower_r, upper_r])
    )


def build_simpson(spec: RoughKernelSpec, cfg: NewtonCotesConfig) -> ExpSumKernel:
    """Simpson variant of :func:`build_newton_cotes`; requires J = 2."""
    if cfg.J != 2:
        raise ValueError("Simpson rule is the J = 2 Newton-Cotes rule")
    return build_newton_cotes(spec, cfg)


def build_geometric(spec: RoughKernelSpec, cfg: GeometricConfig) -> ExpSumKernel:
    """Barycentric kernel on n uniform intervals plus n geometric ones."""
    edges = [i * cfg.K / cfg.n for i in range(cfg.n + 1)]
    top = cfg.K
    for _ in range(cfg.n):
        top *= cfg.A
        if not math.isfinite(top):
            raise OverflowError(
                f"geometric endpoint K*A^n overflows for K={cfg.K}, A={cfg.A}, n={cfg.n}"
            )
        edges.append(top)
    weights = np.array(
        [lambda_mass(spec, edges[i], edges[i + 1]) for i in range(2 * cfg.n)]
    )
    rates = np.array(
        [barycenter(spec, edges[i], edges[i + 1]) for i in range(2 * cfg.n)]
    )
    return ExpSumKernel(weights, rates)


def optimize_tail_ratio(
    spec: RoughKernelSpec,
    n: int,
    K: float,
    T: float,
    bracket=DEFAULT_TAIL_RATIO_BRACKET,
    tol: float = 1e-9,
):
    """Geometric ratio minimizing the exact L2 kernel error on (0, T).

    Golden-section search over the logarithm of the ratio; the objective
    is smooth, cheap (closed forms only) and empirically unimodal over
    the default bracket. Returns ``(ratio, error)``.
    """
    lo, hi = bracket
    if lo <= 1.0:
        raise ValueError("bracket lower end must exceed 1")

    def objective(log_ratio):
        cfg = GeometricConfig(n=n, K=K, A=math.exp(log_ratio))
        return l2_error_exact(spec, build_geometric(spec, cfg), T)

    log_best, err = minimize_scalar(objective, math.log(lo), math.log(hi), tol=tol)
    return math.exp(log_best), err


def rescale_weights(spec: RoughKernelSpec, kernel: ExpSumKernel, T: float):
    """Scale all weights by the L2-optimal factor on (0, T).

    The optimal scale is the ratio of the cross pairing to the kernel's
    own squared norm; the rescaled kernel is the L2 projection of the
    rough kernel onto the span of the given exponential sum. Returns
    ``(kernel, scale)``; the scale is >= 1 whenever the input kernel
    lies below the rough kernel pointwise.
    """
    self_product, cross_product, _ = expsum_inner_products(spec, kernel, T)
    if self_product <= 0.0:
        raise ValueError("cannot rescale a kernel with zero L2 norm")
    scale = cross_product / self_product
    return ExpSumKernel(kernel.weights * scale, kernel.rates), scale


def build_systematic(
    spec: RoughKernelSpec,
    n_total: int,
    T: float,
    bracket=DEFAULT_TAIL_RATIO_BRACKET,
) -> ExpSumKernel:
    """Systematic kernel with ``n_total`` factors on horizon T.

    Geometric construction with n = n_total/2, K = n^(4/5), the tail
    ratio optimized numerically and the weights rescaled to the best L2
    fit. This is the production kernel used by the multifactor
    simulation schemes.
    """
    if n_total < 2 or n_total % 2 != 0:
        raise ValueError("n_total must be an even integer >= 2")
    n = n_total // 2
    K = float(n) ** 0.8
    ratio, _ = optimize_tail_ratio(spec, n, K, T, bracket=bracket)
    geometric = build_geometric(spec, GeometricConfig(n=n, K=K, A=ratio))
    rescaled, _ = rescale_weights(spec, geometric, T)
    return rescaled


def truncate_factors(kernel: ExpSumKernel, T: float, N: int, beta: float = 1.0):
    """Drop fast factors that are negligible at the first grid point.

    Returns the smallest head of the kernel whose discarded tail
    satisfies sum_{i > k} w_i exp(-r_i T/N) <= (T/N)^beta, together with
    the retained factor count. Factors with enormous rates damp to
    nothing within a single step of size T/N, so simulating them is
    wasted work.
    """
    if T <= 0.0 or N < 1:
        raise ValueError("need T > 0 and N >= 1")
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    dt = T / N
    threshold = dt**beta
    damped = kernel.weights * np.exp(-kernel.rates * dt)
    # tail_after[k] = sum_{i >= k} damped[i]
    tail_after = np.concatenate([np.cumsum(damped[::-1])[::-1], [0.0]])
    for count in range(1, kernel.n + 1):
        if tail_after[count] <= threshold:
            return kernel.head(count), count
    return kernel, kernel.n
