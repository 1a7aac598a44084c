import numpy as np
import pytest

from gcpower import mc, sde, spectral

from oracles import gibbs_mean_power


class TestMcEstimate:
    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            mc.McEstimate(value=0.0, std_error=-1.0, n_samples=10, ess=10.0)
        with pytest.raises(ValueError):
            mc.McEstimate(value=0.0, std_error=0.1, n_samples=10, ess=11.0)


class TestEnsembleFunctionals:
    def test_chunk_size_invariance(self, circle, rng):
        x0s = rng.normal(scale=0.8, size=(300, 2))
        a = mc.ensemble_functionals(circle, 0.5, T=1.0, dt=0.004, x0s=x0s, master_seed=3, chunk=37)
        b = mc.ensemble_functionals(circle, 0.5, T=1.0, dt=0.004, x0s=x0s, master_seed=3, chunk=300)
        assert a.w_ito.tobytes() == b.w_ito.tobytes()
        assert a.martingale.tobytes() == b.martingale.tobytes()

    def test_matches_scalar_integrator(self, circle):
        from gcpower import functional

        x0s = np.tile([1.0, 0.0], (4, 1))
        ens = mc.ensemble_functionals(circle, 0.5, T=1.0, dt=0.004, x0s=x0s, master_seed=5)
        for i in range(4):
            traj = sde.simulate(circle, 0.5, (1.0, 0.0), T=1.0, dt=0.004, seed=5, trajectory_index=i)
            assert ens.w_ito[i] == pytest.approx(functional.w_ito(traj, circle), rel=1e-12)
            assert ens.martingale[i] == pytest.approx(
                functional.martingale_part(traj, circle), rel=1e-12
            )

    def test_generic_path_agrees_with_fused(self, circle):
        # force the generic (non-fused) branch through a trivial subclass
        class Wrapped(type(circle)):
            pass

        generic = Wrapped(**{f.name: getattr(circle, f.name) for f in circle.__dataclass_fields__.values()})
        x0s = np.tile([1.0, 0.0], (8, 1))
        a = mc.ensemble_functionals(circle, 0.5, T=1.0, dt=0.004, x0s=x0s, master_seed=7)
        b = mc.ensemble_functionals(generic, 0.5, T=1.0, dt=0.004, x0s=x0s, master_seed=7)
        np.testing.assert_allclose(a.w_ito, b.w_ito, rtol=1e-10)

    def test_rejects_nonpositive_epsilon(self, circle):
        with pytest.raises(ValueError):
            mc.ensemble_functionals(circle, 0.0, T=1.0, dt=0.004, x0s=np.zeros((2, 2)), master_seed=0)


class TestEstimateMeanW:
    def test_pure_gradient_is_exactly_zero(self, gradient_only):
        est = mc.estimate_mean_w(
            gradient_only, 0.5, T=2.0, dt=0.01, init=(1.0, 0.0), n_samples=200, seed=1
        )
        assert est.value == 0.0
        assert est.std_error == 0.0

    def test_stationary_mean_matches_quadrature(self, circle):
        eps = 0.5
        est = mc.estimate_mean_w(
            circle, eps, T=4.0, dt=0.004, init="stationary", n_samples=3000, seed=8
        )
        ref = gibbs_mean_power(circle, eps, half_width=2.5)
        assert abs(est.value - ref) <= 3.0 * est.std_error

    def test_single_well_small_noise_mean_near_zero(self, single_well):
        est = mc.estimate_mean_w(
            single_well, 0.05, T=50.0, dt=0.004, init=(0.0, 0.0), n_samples=400, seed=4
        )
        assert abs(est.value) <= 0.05


class TestEstimateScgf:
    def test_lambda_zero_exact(self, circle):
        curve = mc.estimate_scgf(
            circle, 0.5, T=4.0, dt=0.004, lambda_grid=[-0.25, 0.0, 0.25],
            n_samples=500, seed=2,
        )
        i0 = list(curve.lambdas).index(0.0)
        assert curve.values[i0] == 0.0
        assert curve.stderr[i0] == 0.0

    def test_pure_gradient_identically_zero(self, gradient_only):
        curve = mc.estimate_scgf(
            gradient_only, 0.5, T=2.0, dt=0.01, lambda_grid=[-0.5, 0.0, 0.5],
            n_samples=200, seed=2,
        )
        np.testing.assert_array_equal(curve.values, 0.0)

    def test_matches_spectral_on_reliable_points(self, circle):
        eps, T = 1.0, 8.0
        lams = np.array([-0.4, -0.2, 0.2, 0.4])
        emp = mc.estimate_scgf(circle, eps, T, dt=0.002, lambda_grid=lams, n_samples=4000, seed=6)
        ref = spectral.scgf_curve_spectral(
            circle, eps, lams, grid=spectral.default_grid(circle, eps, target_m=101)
        )
        checked = 0
        for i in range(lams.size):
            if emp.reliable[i]:
                tol = max(0.05, 3.0 * emp.stderr[i])  # finite-T bias dominates at T=8
                assert abs(emp.values[i] - ref.values[i]) <= tol
                checked += 1
        assert checked >= 2

    def test_convexity_up_to_noise(self, circle):
        lams = np.linspace(-0.4, 0.4, 9)
        curve = mc.estimate_scgf(circle, 0.5, T=4.0, dt=0.004, lambda_grid=lams, n_samples=3000, seed=12)
        sd = curve.second_differences()
        prop = np.sqrt(curve.stderr[:-2] ** 2 + 4 * curve.stderr[1:-1] ** 2 + curve.stderr[2:] ** 2)
        ok = curve.reliable[:-2] & curve.reliable[1:-1] & curve.reliable[2:]
        assert np.all(sd[ok] >= -3.0 * prop[ok] - 1e-9)


class TestEmpiricalRateRatio:
    def test_pure_gradient_no_rows(self, gradient_only):
        rows = mc.empirical_rate_ratio(
            gradient_only, 0.5, T=2.0, dt=0.01, n_samples=300, bins=10, seed=3
        )
        assert rows.shape[0] == 0

    def test_ft_slope(self, circle):
        eps, T = 0.6, 8.0
        rows = mc.empirical_rate_ratio(
            circle, eps, T, dt=0.004, n_samples=20000, bins=24, seed=14
        )
        assert rows.shape[0] >= 3
        q, logr, se = rows[:, 0], rows[:, 1], rows[:, 2]
        slope = np.sum(q * logr / se**2) / np.sum(q * q / se**2)
        assert slope == pytest.approx(T / eps, rel=0.15)


class TestTightness:
    def test_bound_holds_and_l0_row(self, circle):
        eps, T = 0.5, 4.0
        ells = np.concatenate([[0.0], mc.default_ell_grid(circle, eps, T)])
        rows = mc.tightness_check(
            circle, eps, T, dt=0.004, ell_grid=ells, n_samples=4000, seed=9
        )
        # ell = 0: empirical ~ 1, bound = 2
        assert rows[0, 1] == pytest.approx(1.0, abs=1e-6)
        assert rows[0, 3] == 2.0
        assert np.all(rows[:, 2] <= rows[:, 3])

    def test_bound_log_linear_in_ell_sq(self, circle):
        eps, T = 0.5, 4.0
        ells = mc.default_ell_grid(circle, eps, T)
        rows = mc.tightness_check(circle, eps, T, dt=0.004, ell_grid=ells, n_samples=200, seed=9)
        slopes = np.diff(np.log(rows[:, 3])) / np.diff(rows[:, 0] ** 2)
        np.testing.assert_allclose(slopes, -T / (2 * eps * circle.b_sup_sq), rtol=1e-10)


class TestScgfFromSamples:
    def test_ess_flags(self, rng):
        w = rng.normal(size=500)
        curve = mc.scgf_from_samples(w, T=4.0, lambda_grid=np.array([-3.0, 0.0, 3.0]))
        assert curve.reliable[1]
        assert not curve.reliable[0] or curve.metadata["ess"][0] >= 100
