import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcpower import models

from oracles import qbar_loop_quadrature


def lattice(half_width=3.0, n=41):
    ax = np.linspace(-half_width, half_width, n)
    gx, gy = np.meshgrid(ax, ax, indexing="ij")
    return np.stack([gx, gy], axis=-1)


class TestEvalDrift:
    def test_pure_gradient_unit_point(self, gradient_only):
        np.testing.assert_allclose(
            models.eval_drift(gradient_only, (1.0, 0.0)), (-1.0, 0.0), atol=1e-14
        )

    def test_circle_orbit_point_is_rotational(self, circle):
        r0 = circle.params["orbit_radius"]
        a = circle.params["amplitude"]
        np.testing.assert_allclose(
            models.eval_drift(circle, (r0, 0.0)), (0.0, -a * r0), atol=1e-13
        )

    @given(
        x1=st.floats(-3, 3, allow_nan=False),
        x2=st.floats(-3, 3, allow_nan=False),
    )
    @settings(max_examples=50, deadline=None)
    def test_gradient_part_identity(self, x1, x2):
        m = models.builtin("circle_double_well")
        x = np.array([x1, x2])
        grad = m.grad_potential(x)
        lhs = float(grad @ (models.eval_drift(m, x) - m.nonconservative(x)))
        assert lhs == pytest.approx(-0.5 * float(grad @ grad), abs=1e-10)

    def test_rejects_non_finite_point(self, circle):
        with pytest.raises(models.ModelError):
            models.eval_drift(circle, (np.nan, 0.0))


class TestBuiltin:
    def test_qbar_value_and_quadrature(self, circle):
        assert circle.circle.qbar == pytest.approx(2.0, abs=1e-12)
        assert qbar_loop_quadrature(circle) == pytest.approx(2.0, rel=1e-6)

    def test_pure_gradient_drift_is_minus_x(self, gradient_only, rng):
        x = rng.normal(size=(16, 2))
        np.testing.assert_allclose(gradient_only.drift(x), -x, atol=1e-13)

    def test_single_well_unique_equilibrium(self, single_well):
        np.testing.assert_allclose(single_well.drift(np.zeros(2)), 0.0, atol=1e-14)
        np.testing.assert_allclose(
            single_well.nonconservative(np.zeros(2)), 0.0, atol=1e-14
        )
        # drift vanishes nowhere else on a radial probe
        r = np.linspace(0.05, 4.0, 200)
        pts = np.stack([r, np.zeros_like(r)], axis=-1)
        assert np.all(np.linalg.norm(single_well.drift(pts), axis=-1) > 1e-4)

    def test_unknown_name_rejected(self):
        with pytest.raises(models.ModelError):
            models.builtin("triple_well")

    def test_invalid_amplitude_rejected(self):
        with pytest.raises(models.ModelError):
            models.builtin("circle_double_well", {"amplitude": -1.0})

    def test_unknown_parameter_rejected(self):
        with pytest.raises(models.ModelError):
            models.builtin("circle_double_well", {"frequency": 2.0})


class TestLatticeInvariants:
    def test_orthogonality(self, circle):
        pts = lattice()
        inner = np.sum(circle.grad_potential(pts) * circle.nonconservative(pts), axis=-1)
        assert np.abs(inner).max() <= 1e-10

    def test_divergence_free(self, circle):
        pts = lattice()
        assert np.abs(circle.div_nonconservative(pts)).max() <= 1e-10
        # central-difference divergence of b itself
        h = 1e-5
        ex, ey = np.array([h, 0.0]), np.array([0.0, h])
        div_fd = (
            circle.nonconservative(pts + ex)[..., 0]
            - circle.nonconservative(pts - ex)[..., 0]
            + circle.nonconservative(pts + ey)[..., 1]
            - circle.nonconservative(pts - ey)[..., 1]
        ) / (2 * h)
        assert np.abs(div_fd).max() <= 1e-5

    def test_gradient_fd_consistency(self, circle):
        pts = lattice()
        h = 1e-4
        ex, ey = np.array([h, 0.0]), np.array([0.0, h])
        fd = np.stack(
            [
                (circle.potential(pts + ex) - circle.potential(pts - ex)) / (2 * h),
                (circle.potential(pts + ey) - circle.potential(pts - ey)) / (2 * h),
            ],
            axis=-1,
        )
        grad = circle.grad_potential(pts)
        rel = np.abs(fd - grad) / (1.0 + np.abs(grad))
        assert rel.max() <= 1e-6

    def test_b_bounded_by_certified_sup(self, circle):
        pts = lattice(half_width=2.5, n=201)
        bsq = np.sum(circle.nonconservative(pts) ** 2, axis=-1)
        assert bsq.max() <= circle.b_sup_sq * (1 + 1e-12)

    def test_jacobians_match_fd(self, circle, rng):
        pts = rng.normal(scale=1.2, size=(32, 2))
        h = 1e-6
        for jac_fn, field in (
            (circle.jac_nonconservative, circle.nonconservative),
            (circle.jac_drift, circle.drift),
            (circle.hess_potential, circle.grad_potential),
        ):
            jac = jac_fn(pts)
            for axis, e in enumerate((np.array([h, 0.0]), np.array([0.0, h]))):
                fd = (field(pts + e) - field(pts - e)) / (2 * h)
                np.testing.assert_allclose(jac[..., axis], fd, atol=5e-7)


class TestCheckAssumptions:
    def test_circle_passes(self, circle):
        rep = models.check_assumptions(circle, (-3, 3, -3, 3), 0.15)
        assert rep.passed
        expected = circle.circle.qbar * circle.circle.period / 2.0
        # midpoint quadrature on the 256-node reference loop
        assert rep.loop_circulation == pytest.approx(expected, rel=5e-4)

    def test_pure_gradient_fails_nonconservativity(self, gradient_only):
        rep = models.check_assumptions(gradient_only, (-3, 3, -3, 3), 0.15)
        assert not rep.nonconservative_ok
        assert not rep.passed

    def test_gradient_injected_fails_orthogonality(self):
        bad = models.builtin("circle_double_well", {"b_from_gradient": True})
        rep = models.check_assumptions(bad, (-3, 3, -3, 3), 0.15)
        assert not rep.orthogonality_ok

    def test_circulation_sign_flips_under_reversal(self, circle):
        from gcpower.paths import reverse_path

        fwd = models.loop_work(circle, circle.reference_loop)
        bwd = models.loop_work(circle, reverse_path(circle.reference_loop))
        assert fwd != 0.0
        assert bwd == pytest.approx(-fwd, rel=1e-12)

    def test_aborts_on_non_finite_field(self, circle):
        with pytest.raises(models.ModelError):
            models.check_assumptions(circle, (-1e160, 1e160, -1, 1), 1e159)
