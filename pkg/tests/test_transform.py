import numpy as np
import pytest

from gcpower import transform
from gcpower.curves import RateCurve, ScgfCurve


def scgf(lams, values, **kw):
    return ScgfCurve(lambdas=np.asarray(lams, float), values=np.asarray(values, float),
                     provenance="spectral", **kw)


class TestLegendre:
    def test_quadratic_self_duality(self):
        lams = np.linspace(-3, 3, 601)
        curve = scgf(lams, lams**2 / 2)
        qs = np.linspace(-2, 2, 41)
        rate = transform.legendre(curve, qs)
        assert np.abs(rate.values - qs**2 / 2).max() <= 1e-3
        assert not rate.boundary_active[np.abs(qs) <= 2.0].any()

    def test_zero_scgf_boundary_flags(self):
        lams = np.linspace(-1, 1, 41)
        rate = transform.legendre(scgf(lams, np.zeros(41)), np.array([-1.0, 0.0, 1.0]))
        assert rate.values[1] == 0.0
        assert not rate.boundary_active[1]
        assert rate.boundary_active[0] and rate.boundary_active[2]

    def test_symmetric_input_gives_ft(self):
        lams = np.linspace(-4, 3, 1401)
        curve = scgf(lams, lams * (1 + lams))  # e(lambda) = e(-1-lambda)
        qs = np.linspace(-2, 2, 21)
        rate = transform.legendre(curve, qs)
        assert transform.ft_residual(rate, scale=1.0) <= 5e-3

    def test_requires_three_reliable_points(self):
        lams = np.array([-1.0, 0.0, 1.0])
        rel = np.array([True, True, False])
        with pytest.raises(transform.TransformError):
            transform.legendre(scgf(lams, lams**2, reliable=rel), np.array([0.0]))

    def test_unreliable_points_ignored(self):
        lams = np.linspace(-2, 2, 81)
        vals = lams**2 / 2
        vals[0] = -100.0  # a corrupt flagged point must not affect the sup
        rel = np.ones(81, bool)
        rel[0] = False
        rate = transform.legendre(scgf(lams, vals, reliable=rel), np.array([0.0, 1.0]))
        assert np.abs(rate.values - np.array([0.0, 0.5])).max() <= 1e-3

    def test_output_is_convex(self, rng):
        lams = np.linspace(-2, 2, 201)
        vals = np.abs(lams) + 0.3 * np.cos(3 * lams)  # non-convex input is fine
        rate = transform.legendre(scgf(lams, vals), np.linspace(-0.9, 0.9, 31))
        assert transform.convexity_residual(rate) >= -1e-12

    def test_biconjugate_recovers_convex_input(self):
        lams = np.linspace(-2.5, 2.5, 501)
        curve = scgf(lams, np.cosh(lams) - 1.0)
        qs = np.linspace(-5, 5, 801)
        rate = transform.legendre(curve, qs)
        back = transform.legendre(
            ScgfCurve(lambdas=rate.q_grid, values=rate.values, provenance="spectral"),
            np.linspace(-1.5, 1.5, 41),
        )
        ref = np.cosh(np.linspace(-1.5, 1.5, 41)) - 1.0
        assert np.abs(back.values - ref).max() <= 5e-3


class TestFtResidual:
    def test_requires_symmetric_grid(self):
        rate = RateCurve(q_grid=np.array([0.0, 1.0]), values=np.zeros(2), provenance="variational")
        with pytest.raises(transform.TransformError):
            transform.ft_residual(rate, scale=1.0)

    def test_exact_ft_curve_zero_residual(self):
        qs = np.linspace(-2, 2, 21)
        vals = np.where(qs >= 0, 0.0, -qs)  # s(q) = 0 on [0, inf), -q below
        rate = RateCurve(q_grid=qs, values=vals, provenance="variational")
        assert transform.ft_residual(rate, scale=1.0) <= 1e-14

    def test_negative_control_abs(self):
        qs = np.linspace(-2, 2, 21)
        rate = RateCurve(q_grid=qs, values=np.abs(qs), provenance="variational")
        assert transform.ft_residual(rate, scale=1.0) == pytest.approx(2.0)

    def test_boundary_active_pairs_skipped(self):
        qs = np.linspace(-2, 2, 5)
        vals = np.array([99.0, 1.0, 0.0, 1.0, 99.0])  # wild endpoints
        flags = np.array([True, False, False, False, True])
        rate = RateCurve(
            q_grid=qs, values=vals, provenance="legendre-of-scgf", boundary_active=flags
        )
        # only the inner pair (±1) counts: |1 - 1 + 1| = 1
        assert transform.ft_residual(rate, scale=1.0) == pytest.approx(1.0)


class TestConvexityResidual:
    def test_quadratic_nonnegative(self):
        qs = np.linspace(-2, 2, 41)
        rate = RateCurve(q_grid=qs, values=qs**2, provenance="variational")
        assert transform.convexity_residual(rate) >= 0.0

    def test_sine_negative_control(self):
        qs = np.linspace(0, 6, 61)
        rate = RateCurve(q_grid=qs, values=np.sin(qs) + 1.1, provenance="empirical")
        assert transform.convexity_residual(rate) < 0.0

    def test_works_on_scgf_curves(self):
        lams = np.linspace(-1, 1, 21)
        assert transform.convexity_residual(scgf(lams, lams**2)) >= 0.0
