import numpy as np
import pytest

from gcpower import sde


class TestSimulate:
    def test_zero_noise_linear_closed_form(self, gradient_only):
        dt = 0.01
        traj = sde.simulate(gradient_only, 0.0, (1.0, 0.0), T=1.0, dt=dt, seed=0)
        k = np.arange(traj.states.shape[0])
        np.testing.assert_allclose(traj.states[:, 0], (1 - dt) ** k, rtol=1e-12)
        np.testing.assert_allclose(traj.states[:, 1], 0.0, atol=1e-14)

    def test_determinism_bitwise(self, circle):
        a = sde.simulate(circle, 0.5, (1.0, 0.0), T=2.0, dt=0.004, seed=42)
        b = sde.simulate(circle, 0.5, (1.0, 0.0), T=2.0, dt=0.004, seed=42)
        assert a.states.tobytes() == b.states.tobytes()
        c = sde.simulate(circle, 0.5, (1.0, 0.0), T=2.0, dt=0.004, seed=43)
        assert a.states.tobytes() != c.states.tobytes()

    def test_zero_noise_orbit_stays_near_circle(self, circle):
        dt = 0.002
        traj = sde.simulate(circle, 0.0, (1.0, 0.0), T=4.0, dt=dt, seed=0)
        ref = sde.flow(circle, (1.0, 0.0), T=4.0, dt=dt)
        err = np.linalg.norm(traj.states - ref.states, axis=1).max()
        assert err <= 100.0 * dt  # Euler is first order; RK4 is the oracle

    def test_invalid_dt_rejected(self, circle):
        with pytest.raises(sde.InvalidTimeStep):
            sde.simulate(circle, 0.5, (1.0, 0.0), T=1.0, dt=0.3, seed=0)
        with pytest.raises(sde.InvalidTimeStep):
            sde.simulate(circle, 0.5, (1.0, 0.0), T=1.0, dt=0.007, seed=0)

    def test_weak_order_richardson(self, gradient_only):
        # E X_T for dX = -X dt + dB has O(dt) bias under Euler; the
        # Richardson ratio between dt and dt/2 errors should be near 2.
        # Small eps keeps the Monte-Carlo error well below the bias gap.
        n = 500
        T = 1.0
        exact = np.exp(-T)

        def mean_at(dt):
            vals = np.empty(n)
            for i in range(n):
                tr = sde.simulate(
                    gradient_only, 1e-3, (1.0, 0.0), T, dt, seed=7, trajectory_index=i
                )
                vals[i] = tr.states[-1, 0]
            return vals.mean()

        e1 = abs(mean_at(0.1) - exact)
        e2 = abs(mean_at(0.05) - exact)
        assert 1.5 <= e1 / e2 <= 3.0


class TestFlow:
    def test_orbit_period_return(self, circle):
        period = circle.circle.period
        dt = period / 4096
        traj = sde.flow(circle, (1.0, 0.0), T=period, dt=dt)
        assert np.linalg.norm(traj.states[-1] - [1.0, 0.0]) <= 1e-6

    def test_linear_flow_exact(self, gradient_only):
        traj = sde.flow(gradient_only, (1.0, 0.0), T=1.0, dt=0.01)
        assert traj.states[-1, 0] == pytest.approx(np.exp(-1.0), abs=1e-8)

    def test_single_well_attracts_to_origin(self, single_well):
        traj = sde.flow(single_well, (2.0, 1.0), T=20.0, dt=0.01)
        assert np.linalg.norm(traj.states[-1]) <= 1e-6

    def test_rk4_order_four(self, gradient_only):
        exact = np.exp(-1.0)
        e1 = abs(sde.flow(gradient_only, (1.0, 0.0), 1.0, 0.1).states[-1, 0] - exact)
        e2 = abs(sde.flow(gradient_only, (1.0, 0.0), 1.0, 0.05).states[-1, 0] - exact)
        assert 10.0 <= e1 / e2 <= 22.0


class TestHittingTime:
    def test_inside_is_zero(self, circle):
        assert sde.hitting_time(circle, (0.5, 0.0), K_radius=2.0, dt=0.01, T_max=10.0) == 0.0

    def test_linear_closed_form(self, gradient_only):
        # flow radius is |y| e^{-t}; crossing K=1 from |y|=e at t=1
        y = (np.e, 0.0)
        t = sde.hitting_time(gradient_only, y, K_radius=1.0, dt=0.01, T_max=10.0)
        assert t == pytest.approx(1.0, abs=2e-3)

    def test_not_hit_returns_none(self, gradient_only):
        assert sde.hitting_time(gradient_only, (np.e, 0.0), K_radius=1.0, dt=0.01, T_max=0.5) is None

    def test_sublinearity_proxy(self, circle):
        K = sde.default_k_radius(circle)
        ratios = []
        for scale in (10.0, 20.0, 40.0, 80.0):
            t = sde.hitting_time(circle, (scale, 0.0), K_radius=K, dt=0.01, T_max=100.0)
            ratios.append(t / scale)
        assert all(a > b for a, b in zip(ratios, ratios[1:]))


class TestSampleStationary:
    def test_ou_covariance(self, gradient_only):
        # dX = -X dt + dB (eps=1): stationary Gaussian with variance 1/2 per axis
        pts = sde.sample_stationary(
            gradient_only, 1.0, burn_in_T=10.0, n_samples=4000, spacing_T=1.0, dt=0.01, seed=3
        )
        cov = np.cov(pts.T)
        se = 3.0 * 0.5 * np.sqrt(2.0 / 4000) * 3  # generous 3-sigma with spacing correlation
        assert abs(cov[0, 0] - 0.5) <= se
        assert abs(cov[1, 1] - 0.5) <= se
        assert abs(cov[0, 1]) <= se

    def test_circle_mean_power_vs_quadrature(self, circle):
        from oracles import gibbs_mean_power

        eps = 0.5
        pts = sde.sample_stationary(
            circle, eps, burn_in_T=25.0, n_samples=3000, spacing_T=2.0, dt=0.004, seed=11
        )
        obs = 2.0 * np.sum(circle.nonconservative(pts) ** 2, axis=-1)
        ref = gibbs_mean_power(circle, eps, half_width=2.5)
        stderr = obs.std(ddof=1) / np.sqrt(obs.size)
        assert abs(obs.mean() - ref) <= 3.0 * stderr

    def test_seed_ranges_consistent(self, circle):
        kw = dict(burn_in_T=25.0, n_samples=1500, spacing_T=2.0, dt=0.004)
        a = sde.sample_stationary(circle, 0.5, seed=21, **kw)
        b = sde.sample_stationary(circle, 0.5, seed=22, **kw)
        ra, rb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
        pooled = np.sqrt(ra.var(ddof=1) / ra.size + rb.var(ddof=1) / rb.size)
        assert abs(ra.mean() - rb.mean()) <= 3.0 * pooled


class TestTrajectoryRng:
    def test_streams_are_distinct_and_reproducible(self):
        a = sde.trajectory_rng(5, 0).standard_normal(4)
        b = sde.trajectory_rng(5, 1).standard_normal(4)
        a2 = sde.trajectory_rng(5, 0).standard_normal(4)
        assert not np.allclose(a, b)
        np.testing.assert_array_equal(a, a2)
