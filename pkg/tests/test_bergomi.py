import math

import numpy as np
import pytest
from scipy.special import hyp2f1

from rvol.bergomi import (
    BergomiParams,
    bs_call_price,
    factor_step_law,
    fractional_joint_covariance,
    implied_vol,
    sample_factors_exact,
    sample_fractional_exact,
    simulate_bergomi,
)
from rvol.kernel import ExpSumKernel
from rvol.numerics import QuadTolerance, integrate
from rvol.schemes import GridSpec

TIGHT = QuadTolerance(abs_tol=1e-13, rel_tol=1e-13, max_subdivisions=400)

# 30-digit arbitrary-precision Black-Scholes call value, S0=K=T=1, vol=0.2
BS_1_1_1_02 = 0.07965567455405796293080923648


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            BergomiParams(S0=0.0)
        with pytest.raises(ValueError):
            BergomiParams(eta=-1.0)
        with pytest.raises(ValueError):
            BergomiParams(rho=1.5)
        with pytest.raises(ValueError):
            BergomiParams(H=0.6)

    def test_vol_scale(self):
        p = BergomiParams(eta=1.9, H=0.07)
        expected = 1.9 * math.sqrt(0.14) * math.gamma(0.57)
        assert math.isclose(p.vol_scale, expected, rel_tol=1e-14)


class TestFactorSampling:
    def test_flat_factor_reduces_to_brownian(self):
        kernel = ExpSumKernel([1.0], [0.0])
        grid = GridSpec(T=1.0, N=8)
        rng = np.random.default_rng(0)
        factors, dw = sample_factors_exact(kernel, grid, n_paths=500, rng=rng)
        cum = np.cumsum(dw, axis=1)
        assert np.allclose(factors[:, :, 0], cum, atol=1e-12)

    def test_step_law_moments(self):
        kernel = ExpSumKernel([0.8, 0.4], [0.5, 6.0])
        dt = 0.125
        cross_coef, cond_factor = factor_step_law(kernel, dt)
        # reconstruct the joint covariance of (innovations, increment)
        n = kernel.n
        joint = np.zeros((n + 1, n + 1))
        joint[:n, :n] = np.outer(cross_coef, cross_coef) + cond_factor @ cond_factor.T
        joint[:n, n] = joint[n, :n] = cross_coef * math.sqrt(dt)
        joint[n, n] = dt
        r = kernel.rates
        pair = r[:, None] + r[None, :]
        want_cov = -np.expm1(-pair * dt) / pair
        want_cross = -np.expm1(-r * dt) / r
        assert np.allclose(joint[:n, :n], want_cov, atol=1e-14)
        assert np.allclose(joint[:n, n], want_cross, atol=1e-14)

    def test_marginal_moments_monte_carlo(self):
        kernel = ExpSumKernel([1.0, 1.0], [0.7, 4.0])
        grid = GridSpec(T=1.0, N=16)
        rng = np.random.default_rng(1)
        n_paths = 100_000
        factors, dw = sample_factors_exact(kernel, grid, n_paths=n_paths, rng=rng)
        w_path = np.cumsum(dw, axis=1)
        t_end = grid.T
        for i, rate in enumerate(kernel.rates):
            sample = factors[:, -1, i]
            want_var = -math.expm1(-2.0 * rate * t_end) / (2.0 * rate)
            got_var = sample.var(ddof=1)
            se = want_var * math.sqrt(2.0 / (n_paths - 1))
            assert abs(got_var - want_var) <= 3.0 * se
            want_cov = -math.expm1(-rate * t_end) / rate
            prod = sample * w_path[:, -1]
            got_cov = prod.mean()
            se_cov = prod.std(ddof=1) / math.sqrt(n_paths)
            assert abs(got_cov - want_cov) <= 3.0 * se_cov


class TestFractionalSampling:
    def test_same_time_variances(self):
        params = BergomiParams()
        grid = GridSpec(T=0.041, N=20)
        cov = fractional_joint_covariance(params.spec, grid)
        t = np.arange(1, 21) * grid.dt
        for l in range(20):
            want = t[l] ** (2.0 * params.H) / (2.0 * params.H)
            assert math.isclose(cov[20 + l, 20 + l], want, rel_tol=1e-14)
            assert math.isclose(cov[l, l], t[l], rel_tol=1e-14)

    def test_cross_time_against_hypergeometric(self):
        # independent closed form for the cross-time fractional covariance
        from rvol.kernel import RoughKernelSpec

        H = 0.07
        spec = RoughKernelSpec(H)
        grid = GridSpec(T=1.0, N=6)
        cov = fractional_joint_covariance(spec, grid)
        t = np.arange(1, 7) * grid.dt
        a = H + 0.5
        for l in range(6):
            for m in range(l + 1, 6):
                closed = t[l] ** a * t[m] ** (H - 0.5) * hyp2f1(
                    1.0, 0.5 - H, 1.5 + H, t[l] / t[m]
                ) / a
                assert math.isclose(cov[6 + l, 6 + m], closed, rel_tol=1e-9)

    def test_near_half_hurst_degenerates_to_brownian(self):
        from rvol.kernel import RoughKernelSpec

        spec = RoughKernelSpec(0.4999)
        grid = GridSpec(T=1.0, N=4)
        cov = fractional_joint_covariance(spec, grid)
        t = np.arange(1, 5) * grid.dt
        brownian = np.minimum(t[:, None], t[None, :])
        assert np.allclose(cov[4:, 4:], brownian, rtol=5e-3)

    def test_cross_time_against_brute_monte_carlo(self):
        # piecewise-averaged kernel weights on a fine Brownian grid
        from rvol.kernel import RoughKernelSpec

        H = 0.07
        spec = RoughKernelSpec(H)
        grid = GridSpec(T=1.0, N=4)
        cov = fractional_joint_covariance(spec, grid)
        fine = 256
        delta = grid.T / fine
        s = np.arange(fine + 1) * delta
        t = np.arange(1, 5) * grid.dt
        a = H + 0.5
        weights = np.zeros((fine, 4))
        for l in range(4):
            spans = np.clip(t[l] - s, 0.0, None)
            weights[:, l] = (spans[:-1] ** a - spans[1:] ** a) / (a * delta)
        rng = np.random.default_rng(2)
        total = 1_000_000
        chunk = 50_000
        sums = np.zeros((4, 4))
        sq_sums = np.zeros((4, 4))
        for _ in range(total // chunk):
            dw = rng.standard_normal((chunk, fine)) * math.sqrt(delta)
            samples = dw @ weights
            prods = np.einsum("pi,pj->ij", samples, samples)
            sums += prods
            sq = np.einsum("pi,pj->ij", samples**2, samples**2)
            sq_sums += sq
        est = sums / total
        for l in range(4):
            for m in range(l + 1, 4):
                se = math.sqrt(
                    max(sq_sums[l, m] / total - est[l, m] ** 2, 0.0) / total
                )
                assert abs(est[l, m] - cov[4 + l, 4 + m]) <= 3.0 * se + 2e-4

    def test_sampler_variance(self):
        from rvol.kernel import RoughKernelSpec

        spec = RoughKernelSpec(0.07)
        grid = GridSpec(T=0.041, N=10)
        rng = np.random.default_rng(3)
        frac, dw = sample_fractional_exact(spec, grid, n_paths=80_000, rng=rng)
        t_end = grid.T
        want = t_end ** (2.0 * 0.07) / (2.0 * 0.07)
        got = frac[:, -1].var(ddof=1)
        se = want * math.sqrt(2.0 / 80_000)
        assert abs(got - want) <= 3.0 * se
        assert np.allclose(dw.sum(axis=1).var(ddof=1), t_end, rtol=0.05)


class TestSimulate:
    def test_zero_vol_of_vol_is_black_scholes(self):
        params = BergomiParams(v0=0.04, eta=0.0, rho=-0.5, H=0.1)
        grid = GridSpec(T=1.0, N=8)
        kernel = ExpSumKernel([1.0], [1.0])
        rng = np.random.default_rng(4)
        normals = rng.standard_normal((64, 8, 3))
        paths = simulate_bergomi(params, grid, kernel=kernel, normals=normals)
        assert np.allclose(paths.variance, 0.04)
        # log increments are exactly -v dt / 2 + sqrt(v) dW
        incs = np.diff(paths.log_price, axis=1)
        assert np.allclose(incs.mean(), -0.5 * 0.04 * grid.dt, atol=0.2 * math.sqrt(0.04 * grid.dt))

    def test_variance_martingale_multifactor(self):
        from rvol.mc import systematic_kernel

        params = BergomiParams()
        grid = GridSpec(T=0.041, N=20)
        kernel = systematic_kernel(params.H, 20, grid.T)
        rng = np.random.default_rng(5)
        paths = simulate_bergomi(params, grid, kernel=kernel, n_paths=100_000, rng=rng)
        for col in (1, 10, 20):
            sample = paths.variance[:, col]
            se = sample.std(ddof=1) / math.sqrt(sample.size)
            assert abs(sample.mean() - params.v0) <= 3.0 * se

    def test_variance_martingale_exact(self):
        params = BergomiParams()
        grid = GridSpec(T=0.041, N=20)
        rng = np.random.default_rng(6)
        paths = simulate_bergomi(params, grid, n_paths=100_000, rng=rng)
        for col in (1, 10, 20):
            sample = paths.variance[:, col]
            se = sample.std(ddof=1) / math.sqrt(sample.size)
            assert abs(sample.mean() - params.v0) <= 3.0 * se

    def test_negative_skew_with_ci_separation(self):
        from rvol.mc import McConfig, bergomi_smile

        params = BergomiParams()  # rho = -0.9
        grid = GridSpec(T=0.041, N=20)
        rows = bergomi_smile(
            params, grid, McConfig(paths=30_000, seed=9), [-0.05, 0.03], kernel_factors=20
        )
        for mode in ("exact", "multifactor"):
            picked = {round(k, 4): (mean, half, vol) for m, k, mean, half, vol in rows if m == mode}
            mean_lo, half_lo, vol_lo = picked[-0.05]
            mean_hi, half_hi, vol_hi = picked[0.03]
            assert vol_lo > vol_hi
            # vol gap far exceeds what the price CIs can explain
            lo_band = implied_vol(mean_lo - half_lo, params.S0, math.exp(-0.05), grid.T)
            hi_band = implied_vol(mean_hi + half_hi, params.S0, math.exp(0.03), grid.T)
            assert lo_band > hi_band

    def test_compensator_matches_quadrature(self):
        from rvol.bergomi import _expsum_sq_integral
        from rvol.kernel import expsum_eval

        kernel = ExpSumKernel([0.7, 0.5, 0.1], [0.0, 2.0, 15.0])
        for t in (0.25, 1.0):
            oracle = integrate(lambda s: expsum_eval(kernel, s) ** 2, 0.0, t, TIGHT)
            assert abs(_expsum_sq_integral(kernel, t) - oracle) <= 1e-10


class TestImpliedVol:
    def test_round_trip(self):
        price = bs_call_price(1.0, 1.0, 1.0, 0.2)
        assert math.isclose(price, BS_1_1_1_02, rel_tol=1e-12)
        assert abs(implied_vol(price, 1.0, 1.0, 1.0) - 0.2) <= 1e-7

    def test_intrinsic_maps_to_zero(self):
        assert implied_vol(0.5, 1.5, 1.0, 0.5) == 0.0

    def test_random_round_trips(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            vol = rng.uniform(0.05, 1.0)
            strike = rng.uniform(0.5, 2.0)
            horizon = rng.uniform(0.05, 2.0)
            price = bs_call_price(1.0, strike, horizon, vol)
            back = implied_vol(price, 1.0, strike, horizon, tol=1e-10)
            assert abs(back - vol) <= 1e-6

    def test_out_of_bounds(self):
        with pytest.raises(ValueError):
            implied_vol(1.1, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            implied_vol(0.1, 1.2, 1.0, 1.0)
