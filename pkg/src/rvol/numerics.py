"""Low-level numerical routines shared by the rest of the package.

Gamma functions, a one-dimensional golden-section minimizer, an adaptive
quadrature wrapper used as an independent cross-check in the test suite,
and a clipped Cholesky factorization for nearly positive semidefinite
covariance matrices.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _scipy_integrate

__all__ = [
    "QuadTolerance",
    "IntegrationError",
    "gamma_fn",
    "lower_incomplete_gamma",
    "minimize_scalar",
    "integrate",
    "psd_factorize",
]


@dataclass(frozen=True)
class QuadTolerance:
    """Accuracy request for the adaptive quadrature oracle."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.abs_tol <= 0.0 or self.rel_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


class IntegrationError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance.

    Carries the best available estimate in ``best_estimate``.
    """

    def __init__(self, message: str, best_estimate: float):
        super().__init__(message)
        self.best_estimate = best_estimate


def gamma_fn(a: float) -> float:
    """Gamma function for positive real arguments."""
    if a <= 0.0:
        raise ValueError(f"gamma_fn requires a > 0, got {a}")
    return math.gamma(a)


def lower_incomplete_gamma(a: float, x: float, tol: float = 1e-15) -> float:
    """Lower incomplete gamma integral of s^(a-1) exp(-s) over (0, x).

    Series expansion for x < a + 1, continued fraction (modified Lentz)
    for the upper tail otherwise; both converge quickly for the shape
    parameters a in (0, 2) used throughout this package.
    """
    if a <= 0.0:
        raise ValueError(f"lower_incomplete_gamma requires a > 0, got {a}")
    if x < 0.0:
        raise ValueError(f"lower_incomplete_gamma requires x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return gamma_fn(a)

    if x < a + 1.0:
        # gamma(a, x) = x^a e^-x sum_k x^k / (a (a+1) ... (a+k))
        term = 1.0 / a
        total = term
        denom = a
        for _ in range(500):
            denom += 1.0
            term *= x / denom
            total += term
            if abs(term) < abs(total) * tol:
                break
        else:
            raise ArithmeticError("incomplete gamma series did not converge")
        log_scale = a * math.log(x) - x
        return total * math.exp(log_scale)

    # Upper tail Q(a, x) via continued fraction, then gamma(a) - Q.
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            break
    else:
        raise ArithmeticError("incomplete gamma continued fraction did not converge")
    log_scale = a * math.log(x) - x
    upper = math.exp(log_scale) * h if log_scale > -745.0 else 0.0
    return gamma_fn(a) - upper


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def minimize_scalar(f, lo: float, hi: float, tol: float = 1e-9):
    """Golden-section search on [lo, hi].

    Returns ``(argmin, value)``. For a unimodal objective the argmin is
    within ``tol`` of the true minimizer; for general continuous
    objectives it converges to a local minimizer. Iterations are capped
    at 200, enough to shrink any practical bracket far below ``tol``.
    """
    if not lo < hi:
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(200):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def integrate(f, lo: float, hi: float, tol: QuadTolerance = QuadTolerance()) -> float:
    """Adaptive quadrature of ``f`` over (lo, hi].

    Thin wrapper over QUADPACK (scipy.integrate.quad) exposing the
    package-wide tolerance type. Integrable endpoint singularities of
    type s^beta with beta > -1 at ``lo`` are handled by the adaptive
    subdivision with extrapolation. This routine serves as an
    independent oracle for closed-form quantities; it is not used in
    simulation hot paths.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _scipy_integrate.IntegrationWarning)
        value, abserr, info, *rest = _scipy_integrate.quad(
            f,
            lo,
            hi,
            epsabs=tol.abs_tol,
            epsrel=tol.rel_tol,
            limit=tol.max_subdivisions,
            full_output=1,
        )
    achieved = max(tol.abs_tol, tol.rel_tol * abs(value))
    if rest and abserr > achieved:
        raise IntegrationError(
            f"quadrature did not converge within {tol.max_subdivisions} subdivisions "
            f"(estimated error {abserr:.3e})",
            best_estimate=value,
        )
    return value


def psd_factorize(
    matrix, neg_tol: float = 1e-6, zero_tol: float = 1e-12, pivot: bool = True
):
    """Square-root factor of a nearly positive semidefinite matrix.

    Cholesky elimination with diagonal pivoting: at each step the
    largest remaining conditional variance is eliminated, which keeps
    the factorization stable on the severely rank-deficient covariance
    matrices of near-collinear exponential factors. Remaining pivots at
    or below ``zero_tol`` times the largest diagonal entry are treated
    as exact zeros (their rows are left at zero), discarding only
    noise-level variance.

    Returns a factor ``L`` with ``L @ L.T`` equal to the input up to the
    discarded noise; ``L`` is lower triangular up to a row permutation
    (exactly lower triangular with ``pivot=False``, appropriate for
    comfortably definite matrices whose component ordering must be
    preserved). Raises ``ValueError`` if any candidate pivot falls below
    ``-neg_tol`` times the largest diagonal entry, i.e. the matrix is
    indefinite beyond rounding noise.
    """
    work = np.array(matrix, dtype=float, copy=True)
    if work.ndim != 2 or work.shape[0] != work.shape[1]:
        raise ValueError("matrix must be square")
    m = work.shape[0]
    scale = float(np.max(np.abs(work))) if m else 0.0
    if not np.allclose(work, work.T, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
        raise ValueError("matrix must be symmetric")
    factor = np.zeros_like(work)
    perm = np.arange(m)
    max_diag = max(float(work.diagonal().max(initial=0.0)), 0.0)
    for j in range(m):
        p = j + int(np.argmax(work.diagonal()[j:])) if pivot else j
        d = work[p, p]
        if d < -neg_tol * max_diag:
            raise ValueError(
                f"matrix not PSD within tolerance: pivot {d:.3e} "
                f"below {-neg_tol * max_diag:.3e}"
            )
        if d <= zero_tol * max_diag:
            if pivot:
                break  # everything left is noise-level; rows stay zero
            continue
        if p != j:
            work[[j, p], :] = work[[p, j], :]
            work[:, [j, p]] = work[:, [p, j]]
            factor[[j, p], :] = factor[[p, j], :]
            perm[[j, p]] = perm[[p, j]]
        factor[j, j] = math.sqrt(d)
        factor[j + 1 :, j] = work[j + 1 :, j] / factor[j, j]
        work[j + 1 :, j + 1 :] -= np.outer(factor[j + 1 :, j], factor[j + 1 :, j])
    inverse_perm = np.empty(m, dtype=int)
    inverse_perm[perm] = np.arange(m)
    return factor[inverse_perm, :]
