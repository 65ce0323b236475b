"""Rough Bergomi simulation.

The lognormal variance process is driven by a fractional integral of a
Brownian motion. Two samplers are provided, both exact in law on the
grid: a reference sampler that draws the fractional integral jointly
with the Brownian path from its full covariance matrix, and a
multifactor sampler that replaces the fractional kernel by an
exponential sum whose factor integrals admit an exact per-step Gaussian
recursion. The variance compensator is computed in closed form in both
cases so the simulated variance is an exact exponential martingale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kernel import ExpSumKernel, RoughKernelSpec
from .numerics import QuadTolerance, integrate, psd_factorize
from .schemes import GridSpec, HestonPaths

__all__ = [
    "BergomiParams",
    "factor_step_law",
    "sample_factors_exact",
    "fractional_joint_covariance",
    "sample_fractional_exact",
    "simulate_bergomi",
    "bs_call_price",
    "implied_vol",
]


@dataclass(frozen=True)
class BergomiParams:
    """Rough Bergomi parameters with a flat forward variance v0."""

    S0: float = 1.0
    v0: float = 0.235**2
    eta: float = 1.9
    rho: float = -0.9
    H: float = 0.07

    def __post_init__(self):
        # eta = 0 is allowed: it degenerates to Black-Scholes, handy in tests
        if self.S0 <= 0.0 or self.v0 <= 0.0 or self.eta < 0.0:
            raise ValueError("S0 and v0 must be positive, eta nonnegative")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if not 0.0 < self.H < 0.5:
            raise ValueError("H must lie in (0, 1/2)")

    @property
    def spec(self) -> RoughKernelSpec:
        return RoughKernelSpec(self.H)

    @property
    def vol_scale(self) -> float:
        """eta sqrt(2H) Gamma(H+1/2), the factor-sum multiplier in the variance."""
        return self.eta * math.sqrt(2.0 * self.H) * self.spec.gamma_head


def factor_step_law(kernel: ExpSumKernel, dt: float):
    """Exact one-step law of the factor innovations given the Brownian increment.

    Writing the innovation of factor i over a step as its damped-kernel
    integral of the Brownian increment, the joint Gaussian law of
    (innovations, increment) is step-invariant on a regular grid. This
    returns ``(cross_coef, cond_factor)`` such that with z0 the
    standard normal driving the increment and z_extra an independent
    standard normal vector,

        increment  = sqrt(dt) z0
        innovation = cross_coef z0 + cond_factor @ z_extra

    reproduce that law exactly. The conditional covariance of the
    innovations is factorized with pivoting (it is numerically
    rank-deficient for near-collinear factors).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    r = kernel.rates
    with np.errstate(over="ignore"):
        pair = r[:, None] + r[None, :]
        cov = np.where(pair > 0.0, -np.expm1(-pair * dt) / np.where(pair > 0.0, pair, 1.0), dt)
        cross = np.where(r > 0.0, -np.expm1(-r * dt) / np.where(r > 0.0, r, 1.0), dt)
    cond_cov = cov - np.outer(cross, cross) / dt
    cond_factor = psd_factorize(cond_cov)
    return cross / math.sqrt(dt), cond_factor


def sample_factors_exact(
    kernel: ExpSumKernel,
    grid: GridSpec,
    n_paths: int | None = None,
    rng=None,
    normals=None,
):
    """Exact joint sample of factor integrals and Brownian increments.

    Factor i at grid time t_l is the integral of exp(-r_i (t_l - s))
    against the Brownian motion up to t_l; the recursion damps the
    previous value by exp(-r_i dt) and adds the one-step innovation
    drawn exactly via :func:`factor_step_law`.

    Supply either ``rng`` (a numpy Generator) with ``n_paths``, or a
    ``normals`` array of shape (paths, N, n+1) whose component 0 drives
    the Brownian increments. Returns ``(factors, dw)`` with shapes
    (paths, N, n) and (paths, N); ``factors[:, l-1]`` holds the values
    at t_l.
    """
    n = kernel.n
    if normals is None:
        if rng is None or n_paths is None:
            raise ValueError("supply either normals or (rng and n_paths)")
        normals = rng.standard_normal((n_paths, grid.N, n + 1))
    normals = np.asarray(normals, dtype=float)
    if normals.ndim != 3 or normals.shape[1:] != (grid.N, n + 1):
        raise ValueError(f"normals must have shape (paths, {grid.N}, {n + 1})")
    dt = grid.dt
    cross_coef, cond_factor = factor_step_law(kernel, dt)
    damp = np.exp(-kernel.rates * dt)
    n_paths = normals.shape[0]
    factors = np.empty((n_paths, grid.N, n))
    dw = normals[:, :, 0] * math.sqrt(dt)
    current = np.zeros((n_paths, n))
    for k in range(grid.N):
        innovation = (
            normals[:, k, 0][:, None] * cross_coef[None, :]
            + normals[:, k, 1:] @ cond_factor.T
        )
        current = damp[None, :] * current + innovation
        factors[:, k, :] = current
    return factors, dw


@lru_cache(maxsize=8)
def _fractional_joint_covariance_cached(H: float, T: float, N: int):
    spec = RoughKernelSpec(H)
    t = np.arange(1, N + 1) * (T / N)
    a = H + 0.5
    cov = np.empty((2 * N, 2 * N))
    # Brownian block
    cov[:N, :N] = np.minimum(t[:, None], t[None, :])
    # cross block: Cov(W at t_m, fractional integral at t_l)
    t_l = t[:, None]
    overlap = np.minimum(t_l, t[None, :])
    cov[N:, :N] = (t_l**a - (t_l - overlap) ** a) / a
    cov[:N, N:] = cov[N:, :N].T
    # fractional block: same-time entries in closed form, cross-time by quadrature
    tol = QuadTolerance(abs_tol=1e-12, rel_tol=1e-12, max_subdivisions=400)
    for l in range(N):
        cov[N + l, N + l] = t[l] ** (2.0 * H) / (2.0 * H)
        for m in range(l + 1, N):
            gap = t[m] - t[l]
            value = integrate(
                lambda u: u ** (H - 0.5) * (u + gap) ** (H - 0.5), 0.0, t[l], tol
            )
            cov[N + l, N + m] = cov[N + m, N + l] = value
    cov.setflags(write=False)
    return cov, spec


def fractional_joint_covariance(spec: RoughKernelSpec, grid: GridSpec) -> np.ndarray:
    """Covariance of (W at grid times, fractional integrals at grid times).

    Ordered with the Brownian block first so that an unpivoted Cholesky
    factor maps the first N standard normals to the Brownian path. The
    fractional integral here carries the bare power kernel (t-s)^(H-1/2)
    without the gamma normalization. Cross-time fractional entries have
    no elementary closed form and are computed once by adaptive
    quadrature; the result is cached per (H, T, N).
    """
    return _fractional_joint_covariance_cached(spec.H, grid.T, grid.N)[0]


def sample_fractional_exact(
    spec: RoughKernelSpec,
    grid: GridSpec,
    n_paths: int | None = None,
    rng=None,
    normals=None,
):
    """Exact joint sample of the fractional integral and Brownian increments.

    Factorizes the full 2N x 2N covariance once (suitable for the
    moderate N of short-maturity smiles). ``normals`` has shape
    (paths, N, 2): component 0 feeds the Brownian block, component 1 the
    fractional block. Returns ``(fractional, dw)`` of shapes
    (paths, N) and (paths, N).
    """
    if normals is None:
        if rng is None or n_paths is None:
            raise ValueError("supply either normals or (rng and n_paths)")
        normals = rng.standard_normal((n_paths, grid.N, 2))
    normals = np.asarray(normals, dtype=float)
    if normals.ndim != 3 or normals.shape[1:] != (grid.N, 2):
        raise ValueError(f"normals must have shape (paths, {grid.N}, 2)")
    cov = fractional_joint_covariance(spec, grid)
    factor = psd_factorize(cov, pivot=False)
    z = np.concatenate([normals[:, :, 0], normals[:, :, 1]], axis=1)
    joint = z @ factor.T
    w_path = joint[:, : grid.N]
    fractional = joint[:, grid.N :]
    dw = np.diff(w_path, axis=1, prepend=0.0)
    return fractional, dw


def _expsum_sq_integral(kernel: ExpSumKernel, t: float) -> float:
    """Integral of the squared exponential sum over (0, t), closed form."""
    r = kernel.rates
    pair = r[:, None] + r[None, :]
    with np.errstate(over="ignore"):
        gram = np.where(pair > 0.0, -np.expm1(-pair * t) / np.where(pair > 0.0, pair, 1.0), t)
    return float(kernel.weights @ gram @ kernel.weights)


def simulate_bergomi(
    params: BergomiParams,
    grid: GridSpec,
    kernel: ExpSumKernel | None = None,
    n_paths: int | None = None,
    rng=None,
    normals=None,
) -> HestonPaths:
    """Simulate rough Bergomi price and variance paths on the grid.

    With ``kernel=None`` the variance is sampled through the exact
    fractional-integral law (reference mode); with an exponential-sum
    kernel it is sampled through the factor recursion. In both modes the
    compensator is exact, making the variance an exponential martingale
    with mean v0 at every grid time.

    ``normals`` layout per step: component 0 drives the variance
    Brownian motion, component 1 the orthogonal price component, and the
    remaining components (1 in exact mode, n in multifactor mode) feed
    the variance sampler's conditional innovations.
    """
    exact_mode = kernel is None
    comps = 3 if exact_mode else kernel.n + 2
    if normals is None:
        if rng is None or n_paths is None:
            raise ValueError("supply either normals or (rng and n_paths)")
        normals = rng.standard_normal((n_paths, grid.N, comps))
    normals = np.asarray(normals, dtype=float)
    if normals.ndim != 3 or normals.shape[1:] != (grid.N, comps):
        raise ValueError(f"normals must have shape (paths, {grid.N}, {comps})")
    n_paths = normals.shape[0]
    t = np.arange(1, grid.N + 1) * grid.dt

    if exact_mode:
        fractional, dw = sample_fractional_exact(
            params.spec, grid, normals=normals[:, :, [0, 2]]
        )
        # variance exponent: eta sqrt(2H) I_t with Var = eta^2 t^{2H}
        exponent = params.eta * math.sqrt(2.0 * params.H) * fractional
        compensator = 0.5 * params.eta**2 * t ** (2.0 * params.H)
    else:
        factor_normals = np.concatenate(
            [normals[:, :, 0:1], normals[:, :, 2:]], axis=2
        )
        factors, dw = sample_factors_exact(kernel, grid, normals=factor_normals)
        scale = params.vol_scale
        exponent = scale * (factors @ kernel.weights)
        compensator = 0.5 * scale**2 * np.array(
            [_expsum_sq_integral(kernel, tl) for tl in t]
        )

    variance = np.empty((n_paths, grid.N + 1))
    variance[:, 0] = params.v0
    variance[:, 1:] = params.v0 * np.exp(exponent - compensator[None, :])

    dw_perp = normals[:, :, 1] * math.sqrt(grid.dt)
    rho = params.rho
    rho_perp = math.sqrt(1.0 - rho * rho)
    log_price = np.empty((n_paths, grid.N + 1))
    log_price[:, 0] = math.log(params.S0)
    vol_prev = np.sqrt(variance[:, :-1])
    log_increments = (
        vol_prev * (rho * dw + rho_perp * dw_perp) - 0.5 * variance[:, :-1] * grid.dt
    )
    log_price[:, 1:] = math.log(params.S0) + np.cumsum(log_increments, axis=1)
    return HestonPaths(log_price=log_price, variance=variance)


_SQRT2 = math.sqrt(2.0)


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def bs_call_price(S0: float, K: float, T: float, vol: float) -> float:
    """Black-Scholes call price with zero rates."""
    if S0 <= 0.0 or K <= 0.0 or T <= 0.0:
        raise ValueError("S0, K, T must be positive")
    if vol < 0.0:
        raise ValueError("vol must be nonnegative")
    if vol == 0.0:
        return max(S0 - K, 0.0)
    total = vol * math.sqrt(T)
    d1 = (math.log(S0 / K) + 0.5 * total * total) / total
    return S0 * _norm_cdf(d1) - K * _norm_cdf(d1 - total)


def implied_vol(price: float, S0: float, K: float, T: float, tol: float = 1e-8) -> float:
    """Black-Scholes implied volatility (zero rates) by bracketed bisection."""
    intrinsic = max(S0 - K, 0.0)
    if price < intrinsic or price >= S0:
        raise ValueError(
            f"price {price} outside the no-arbitrage range ({intrinsic}, {S0})"
        )
    if price == intrinsic:
        return 0.0
    lo, hi = 0.0, 1.0
    while bs_call_price(S0, K, T, hi) < price:
        hi *= 2.0
        if hi > 1e4:
            raise ValueError("implied volatility bracket exceeded")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bs_call_price(S0, K, T, mid) < price:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
