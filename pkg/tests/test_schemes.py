import math

import numpy as np
import pytest

from rvol.kernel import ExpSumKernel, RoughKernelSpec, expsum_eval, rough_kernel_eval
from rvol.numerics import QuadTolerance, integrate
from rvol.schemes import (
    GridSpec,
    HestonParams,
    SvePlant,
    heston_hybrid_multifactor,
    heston_integrated_multifactor,
    heston_integrated_volterra,
    heston_multifactor_euler,
    heston_volterra_euler,
    hybrid_step_covariance,
    multifactor_euler,
    volterra_euler,
)


def _timed(fn):
    # CPU time: immune to scheduling noise for single-threaded work
    import time

    start = time.process_time()
    fn()
    return time.process_time() - start


def random_kernels(rng, n_max=8, shared=True):
    n = int(rng.integers(1, n_max + 1))
    rates = np.sort(rng.uniform(0.0, 30.0, n))
    while n > 1 and np.any(np.diff(rates) <= 0):
        rates = np.sort(rng.uniform(0.0, 30.0, n))
    weights = rng.uniform(0.0, 2.0, n)
    k1 = ExpSumKernel(weights, rates)
    if shared:
        return k1, k1
    return k1, ExpSumKernel(rng.uniform(0.0, 2.0, n), rates)


def random_plant(rng, d):
    A = rng.standard_normal((d, d)) * 0.5
    c = rng.standard_normal(d) * 0.3
    C = rng.standard_normal((d, d)) * 0.4
    D = rng.standard_normal((d, d)) * 0.5
    x0 = rng.standard_normal(d)
    return SvePlant(
        x0=x0,
        drift=lambda x: np.tanh(A @ x) + c,
        diffusion=lambda x: C + 0.3 * np.tanh(D @ x)[:, None] * np.ones(d)[None, :],
    )


class TestGridAndTypes:
    def test_grid_validation(self):
        with pytest.raises(ValueError):
            GridSpec(T=0.0, N=10)
        with pytest.raises(ValueError):
            GridSpec(T=1.0, N=0)

    def test_grid_times(self):
        grid = GridSpec(T=2.0, N=4)
        assert np.allclose(grid.times(), [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_heston_params_validation(self):
        with pytest.raises(ValueError):
            HestonParams(V0=-0.1)
        with pytest.raises(ValueError):
            HestonParams(rho=-1.5)
        with pytest.raises(ValueError):
            HestonParams(S0=0.0)


class TestVolterraEuler:
    def test_flat_kernel_recovers_brownian(self):
        rng = np.random.default_rng(0)
        grid = GridSpec(T=1.0, N=32)
        dw = rng.standard_normal((32, 1)) * math.sqrt(grid.dt)
        plant = SvePlant(
            x0=np.array([0.4]),
            drift=lambda x: np.zeros(1),
            diffusion=lambda x: np.eye(1),
        )
        path = volterra_euler(plant, lambda t: 1.0, lambda t: 1.0, grid, dw)
        expected = 0.4 + np.concatenate([[0.0], np.cumsum(dw[:, 0])])
        assert np.allclose(path.states[:, 0], expected, atol=1e-14)

    def test_degenerate_constant_path(self):
        grid = GridSpec(T=1.0, N=8)
        plant = SvePlant(
            x0=np.array([1.5, -2.0]),
            drift=lambda x: np.zeros(2),
            diffusion=lambda x: np.zeros((2, 2)),
        )
        dw = np.ones((8, 2))
        path = volterra_euler(plant, lambda t: 1.0, lambda t: 1.0, grid, dw)
        assert np.allclose(path.states, plant.x0[None, :])

    def test_two_step_hand_expansion(self):
        grid = GridSpec(T=1.0, N=2)
        b0, s0, x0 = 0.3, 0.7, 0.1
        plant = SvePlant(
            x0=np.array([x0]),
            drift=lambda x: np.array([b0]),
            diffusion=lambda x: np.array([[s0]]),
        )
        dw = np.array([[0.2], [-0.1]])
        g = lambda t: math.exp(-t)
        path = volterra_euler(plant, g, g, grid, dw)
        x1 = x0 + g(0.5) * b0 * 0.5 + g(0.5) * s0 * 0.2
        x2 = (
            x0
            + g(1.0) * b0 * 0.5
            + g(0.5) * b0 * 0.5
            + g(1.0) * s0 * 0.2
            + g(0.5) * s0 * (-0.1)
        )
        assert np.allclose(path.states[:, 0], [x0, x1, x2], atol=1e-15)

    def test_shape_validation(self):
        grid = GridSpec(T=1.0, N=4)
        plant = SvePlant(
            x0=np.zeros(2), drift=lambda x: np.zeros(2), diffusion=lambda x: np.eye(2)
        )
        with pytest.raises(ValueError):
            volterra_euler(plant, lambda t: 1.0, lambda t: 1.0, grid, np.zeros((4, 1)))


class TestMultifactorEuler:
    def test_single_flat_factor_recovers_brownian(self):
        rng = np.random.default_rng(1)
        grid = GridSpec(T=1.0, N=16)
        dw = rng.standard_normal((16, 1)) * math.sqrt(grid.dt)
        plant = SvePlant(
            x0=np.array([0.2]),
            drift=lambda x: np.zeros(1),
            diffusion=lambda x: np.eye(1),
        )
        kernel = ExpSumKernel([1.0], [0.0])
        path = multifactor_euler(plant, kernel, kernel, grid, dw)
        expected = 0.2 + np.concatenate([[0.0], np.cumsum(dw[:, 0])])
        assert np.allclose(path.states[:, 0], expected, atol=1e-14)

    def test_rate_mismatch_rejected(self):
        grid = GridSpec(T=1.0, N=4)
        plant = SvePlant(
            x0=np.zeros(1), drift=lambda x: np.zeros(1), diffusion=lambda x: np.eye(1)
        )
        k1 = ExpSumKernel([1.0], [1.0])
        k2 = ExpSumKernel([1.0], [2.0])
        with pytest.raises(ValueError):
            multifactor_euler(plant, k1, k2, grid, np.zeros((4, 1)))

    def test_matches_direct_scheme_shared_kernel(self):
        rng = np.random.default_rng(2)
        for case in range(10):
            d = int(rng.integers(1, 4))
            grid = GridSpec(T=float(rng.uniform(0.25, 2.0)), N=int(rng.integers(2, 65)))
            k1, k2 = random_kernels(rng, shared=True)
            plant = random_plant(rng, d)
            dw = rng.standard_normal((grid.N, d)) * math.sqrt(grid.dt)
            direct = volterra_euler(plant, k1, k2, grid, dw)
            fast = multifactor_euler(plant, k1, k2, grid, dw)
            gap = np.max(np.abs(direct.states - fast.states))
            assert gap <= 1e-10 * (1.0 + np.max(np.abs(plant.x0)))

    def test_matches_direct_scheme_two_kernels(self):
        rng = np.random.default_rng(3)
        for case in range(10):
            d = int(rng.integers(1, 4))
            grid = GridSpec(T=1.0, N=int(rng.integers(2, 65)))
            k1, k2 = random_kernels(rng, shared=False)
            plant = random_plant(rng, d)
            dw = rng.standard_normal((grid.N, d)) * math.sqrt(grid.dt)
            direct = volterra_euler(plant, k1, k2, grid, dw)
            fast = multifactor_euler(plant, k1, k2, grid, dw)
            gap = np.max(np.abs(direct.states - fast.states))
            assert gap <= 1e-10 * (1.0 + np.max(np.abs(plant.x0)))

    def test_records_factors(self):
        grid = GridSpec(T=1.0, N=4)
        plant = SvePlant(
            x0=np.array([0.1]), drift=lambda x: np.ones(1), diffusion=lambda x: np.eye(1)
        )
        kernel = ExpSumKernel([0.5, 0.5], [1.0, 2.0])
        path = multifactor_euler(
            plant, kernel, kernel, grid, np.zeros((4, 1)), record_factors=True
        )
        assert path.factors is not None
        assert path.factors.shape == (5, 2)
        recon = 0.1 + path.factors @ kernel.weights
        assert np.allclose(recon, path.states[:, 0], atol=1e-14)


class TestHestonVariance:
    def test_degenerate_black_scholes(self):
        params = HestonParams(V0=0.04, theta=0.0, lam=0.0, sigma=0.0, rho=-0.5)
        grid = GridSpec(T=1.0, N=16)
        rng = np.random.default_rng(4)
        dw = rng.standard_normal((100, 16)) * math.sqrt(grid.dt)
        dwp = rng.standard_normal((100, 16)) * math.sqrt(grid.dt)
        paths = heston_volterra_euler(params, RoughKernelSpec(0.1), grid, dw, dwp)
        assert np.allclose(paths.variance, 0.04)
        mix = params.rho * dw + math.sqrt(1 - params.rho**2) * dwp
        expected = np.cumsum(-0.5 * 0.04 * grid.dt + 0.2 * mix, axis=1)
        assert np.allclose(paths.log_price[:, 1:], expected, atol=1e-13)

    def test_two_step_hand_expansion(self):
        params = HestonParams(V0=0.02, theta=0.03, lam=0.4, sigma=0.25, rho=-0.6)
        spec = RoughKernelSpec(0.1)
        grid = GridSpec(T=1.0, N=2)
        dt = 0.5
        dw = np.array([[0.11, -0.22]])
        dwp = np.array([[0.05, 0.07]])
        paths = heston_volterra_euler(params, spec, grid, dw, dwp)
        g1 = rough_kernel_eval(spec, dt)
        g2 = rough_kernel_eval(spec, 2 * dt)
        rho_perp = math.sqrt(1 - params.rho**2)
        u0 = (params.theta - params.lam * params.V0) * dt + params.sigma * math.sqrt(
            params.V0
        ) * dw[0, 0]
        v1 = params.V0 + g1 * u0
        y1 = -0.5 * params.V0 * dt + math.sqrt(params.V0) * (
            params.rho * dw[0, 0] + rho_perp * dwp[0, 0]
        )
        v1p = max(v1, 0.0)
        u1 = (params.theta - params.lam * v1p) * dt + params.sigma * math.sqrt(v1p) * dw[0, 1]
        v2 = params.V0 + g2 * u0 + g1 * u1
        y2 = (
            y1
            - 0.5 * v1p * dt
            + math.sqrt(v1p) * (params.rho * dw[0, 1] + rho_perp * dwp[0, 1])
        )
        assert np.allclose(paths.variance[0], [params.V0, v1, v2], atol=1e-15)
        assert np.allclose(paths.log_price[0], [0.0, y1, y2], atol=1e-15)

    def test_multifactor_matches_direct_on_expsum(self):
        params = HestonParams()
        kernel = ExpSumKernel([0.9, 0.6, 0.3], [0.2, 3.0, 25.0])
        grid = GridSpec(T=1.0, N=40)
        rng = np.random.default_rng(5)
        dw = rng.standard_normal((64, 40)) * math.sqrt(grid.dt)
        dwp = rng.standard_normal((64, 40)) * math.sqrt(grid.dt)
        direct = heston_volterra_euler(params, kernel, grid, dw, dwp)
        fast = heston_multifactor_euler(params, kernel, grid, dw, dwp)
        assert np.max(np.abs(direct.variance - fast.variance)) <= 1e-10
        assert np.max(np.abs(direct.log_price - fast.log_price)) <= 1e-10

    def test_no_nan_for_extreme_draws(self):
        params = HestonParams()
        kernel = ExpSumKernel([1.0, 0.5], [0.5, 10.0])
        grid = GridSpec(T=1.0, N=20)
        dw = np.full((4, 20), -10.0) * math.sqrt(grid.dt)
        dwp = np.full((4, 20), 10.0) * math.sqrt(grid.dt)
        paths = heston_multifactor_euler(params, kernel, grid, dw, dwp)
        assert np.all(np.isfinite(paths.variance))
        assert np.all(np.isfinite(paths.log_price))

    def test_step_count_scaling_slopes(self):
        # quadratic vs linear growth of the recursion operation counts,
        # measured on the uniform-cost scalar steppers
        from reference_steppers import scalar_multifactor_variance, scalar_volterra_variance

        params = HestonParams()
        kernel = ExpSumKernel(np.full(40, 0.05), np.linspace(0.1, 200.0, 40))
        rng = np.random.default_rng(12)
        timings = {}
        for N in (100, 400):
            dt = 1.0 / N
            g_tab = [float(expsum_eval(kernel, m * dt)) for m in range(1, N + 1)]
            draws = [list(r) for r in rng.standard_normal((30, N)) * math.sqrt(dt)]
            for name, run in (
                ("direct", lambda dw: scalar_volterra_variance(params, g_tab, dt, dw)),
                (
                    "factor",
                    lambda dw: scalar_multifactor_variance(
                        params, list(kernel.weights), list(kernel.rates), dt, dw
                    ),
                ),
            ):
                best = min(
                    _timed(lambda: [run(dw) for dw in draws]) for _ in range(3)
                )
                timings[(name, N)] = best
        direct_slope = math.log(timings[("direct", 400)] / timings[("direct", 100)]) / math.log(4.0)
        factor_slope = math.log(timings[("factor", 400)] / timings[("factor", 100)]) / math.log(4.0)
        assert abs(direct_slope - 2.0) <= 0.6
        assert abs(factor_slope - 1.0) <= 0.3

    def test_engines_match_scalar_references(self):
        from reference_steppers import scalar_multifactor_variance, scalar_volterra_variance

        params = HestonParams(V0=0.02, theta=0.03, lam=0.6, sigma=0.4, rho=-0.6)
        kernel = ExpSumKernel([0.8, 0.5, 0.3], [0.2, 2.0, 15.0])
        grid = GridSpec(T=1.0, N=24)
        rng = np.random.default_rng(10)
        dw = rng.standard_normal((3, 24)) * math.sqrt(grid.dt)
        dwp = rng.standard_normal((3, 24)) * math.sqrt(grid.dt)
        g_tab = [float(expsum_eval(kernel, m * grid.dt)) for m in range(1, 25)]
        direct = heston_volterra_euler(params, kernel, grid, dw, dwp)
        fast = heston_multifactor_euler(params, kernel, grid, dw, dwp)
        for p in range(3):
            ref_direct = scalar_volterra_variance(params, g_tab, grid.dt, list(dw[p]))
            ref_fast = scalar_multifactor_variance(
                params, list(kernel.weights), list(kernel.rates), grid.dt, list(dw[p])
            )
            assert np.allclose(direct.variance[p], ref_direct, atol=1e-12)
            assert np.allclose(fast.variance[p], ref_fast, atol=1e-12)


class TestHybrid:
    def test_step_covariance_against_quadrature(self):
        spec = RoughKernelSpec(0.1)
        dt = 1.0 / 160.0
        cov = hybrid_step_covariance(spec, dt)
        tol = QuadTolerance(abs_tol=1e-13, rel_tol=1e-13, max_subdivisions=400)
        var = integrate(lambda s: rough_kernel_eval(spec, s) ** 2, 0.0, dt, tol)
        cross = integrate(lambda s: rough_kernel_eval(spec, s), 0.0, dt, tol)
        assert math.isclose(cov[1, 1], var, rel_tol=1e-10)
        assert math.isclose(cov[0, 1], cross, rel_tol=1e-10)
        assert cov[0, 0] == dt
        assert np.all(np.linalg.eigvalsh(cov) > 0.0)

    def test_deterministic_recursion(self):
        # no diffusion: the engine must reproduce a hand-rolled recursion
        params = HestonParams(V0=0.02, theta=0.03, lam=0.5, sigma=0.0)
        spec = RoughKernelSpec(0.1)
        kernel = ExpSumKernel([0.8, 0.4], [1.0, 12.0])
        grid = GridSpec(T=0.3, N=3)
        dt = grid.dt
        zeros = np.zeros((1, 3))
        paths = heston_hybrid_multifactor(params, spec, kernel, grid, zeros, zeros, zeros)
        a = spec.H + 0.5
        drift_weight = dt**a / (a * spec.gamma_head)
        f = np.zeros(2)
        v = params.V0
        expected = [v]
        for _ in range(3):
            vp = max(v, 0.0)
            predicted = params.V0 + (kernel.weights * np.exp(-kernel.rates * dt)) @ f
            v_next = predicted + (params.theta - params.lam * vp) * drift_weight
            f = (f + (params.theta - params.lam * vp) * dt) / (1.0 + kernel.rates * dt)
            v = v_next
            expected.append(v)
        assert np.allclose(paths.variance[0], expected, atol=1e-14)


class TestIntegratedSchemes:
    def test_degenerate_linear_growth(self):
        params = HestonParams(V0=0.05, theta=0.0, lam=0.0, sigma=0.0)
        spec = RoughKernelSpec(0.1)
        grid = GridSpec(T=1.0, N=10)
        rng = np.random.default_rng(6)
        z = rng.standard_normal((32, 10))
        zp = rng.standard_normal((32, 10))
        paths = heston_integrated_volterra(params, spec, grid, z, zp)
        times = grid.times()
        assert np.allclose(paths.raw_integrated, 0.05 * times[None, :], atol=1e-14)
        # martingale increments have deterministic scale sqrt(V0 dt)
        scale = math.sqrt(0.05 * grid.dt)
        mart = (paths.log_price + 0.5 * paths.integrated_variance) / 1.0
        recon = params.rho * scale * np.cumsum(z, axis=1) + math.sqrt(
            1 - params.rho**2
        ) * scale * np.cumsum(zp, axis=1)
        assert np.allclose(mart[:, 1:], recon, atol=1e-13)

    def test_running_max_nondecreasing(self):
        params = HestonParams()
        spec = RoughKernelSpec(0.1)
        grid = GridSpec(T=1.0, N=32)
        rng = np.random.default_rng(7)
        z = rng.standard_normal((64, 32))
        zp = rng.standard_normal((64, 32))
        paths = heston_integrated_volterra(params, spec, grid, z, zp)
        assert np.all(np.diff(paths.integrated_variance, axis=1) >= 0.0)
        assert np.all(np.isfinite(paths.log_price))

    @pytest.mark.parametrize("floor", ["runmax", "positive_part"])
    def test_multifactor_matches_direct_on_expsum(self, floor):
        params = HestonParams()
        kernel = ExpSumKernel([0.9, 0.5, 0.2], [0.4, 5.0, 30.0])
        grid = GridSpec(T=1.0, N=32)
        rng = np.random.default_rng(8)
        z = rng.standard_normal((64, 32))
        zp = rng.standard_normal((64, 32))
        direct = heston_integrated_volterra(params, kernel, grid, z, zp, drift_floor=floor)
        fast = heston_integrated_multifactor(params, kernel, grid, z, zp, drift_floor=floor)
        assert np.max(np.abs(direct.raw_integrated - fast.raw_integrated)) <= 1e-10
        assert np.max(np.abs(direct.log_price - fast.log_price)) <= 1e-10

    def test_floor_validation(self):
        params = HestonParams()
        grid = GridSpec(T=1.0, N=4)
        with pytest.raises(ValueError):
            heston_integrated_volterra(
                params, RoughKernelSpec(0.1), grid, np.zeros((1, 4)), np.zeros((1, 4)),
                drift_floor="clip",
            )
