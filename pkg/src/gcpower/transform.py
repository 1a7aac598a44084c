"""Legendre transforms between SCGF and rate curves, convexity and FT verdicts."""
from __future__ import annotations

import numpy as np

from .curves import RateCurve, ScgfCurve

__all__ = [
    "TransformError",
    "legendre",
    "ft_residual",
    "convexity_residual",
]


class TransformError(ValueError):
    pass


def legendre(curve: ScgfCurve, q_grid) -> RateCurve:
    """Grid-sup Legendre transform R(q) = max over sampled lambda of lambda q - e.

    No interpolation between lambda samples, so every output value is a
    rigorous lower bound of the true transform.  Points where the max is
    attained at a lambda-grid endpoint are flagged boundary-active: there the
    true supremum may lie outside the sampled window.
    """
    mask = np.asarray(curve.reliable, dtype=bool)
    lam = curve.lambdas[mask]
    e = curve.values[mask]
    if lam.size < 3:
        raise TransformError("need at least 3 reliable SCGF points")
    q_grid = np.asarray(q_grid, dtype=float)
    # objective[i, j] = lam_j * q_i - e_j
    objective = q_grid[:, None] * lam[None, :] - e[None, :]
    values = np.max(objective, axis=1)
    # ties resolved toward interior lambda, so flat objectives (e.g. e == 0 at
    # q = 0) are not misreported as window-limited
    tie_tol = 1e-12 * (1.0 + np.abs(values))
    ties = objective >= (values - tie_tol)[:, None]
    boundary = ~np.any(ties[:, 1:-1], axis=1)
    arg = np.argmax(np.where(ties, -np.abs(np.arange(lam.size) - (lam.size - 1) / 2.0), -np.inf), axis=1)
    return RateCurve(
        q_grid=q_grid,
        values=values,
        provenance="legendre-of-scgf",
        boundary_active=boundary,
        metadata={
            "source_provenance": curve.provenance,
            "lambda_window": (float(lam[0]), float(lam[-1])),
        },
        columns={"argmax_lambda": lam[arg]},
    )


def ft_residual(rate: RateCurve, scale: float = 1.0) -> float:
    """max over q of |rate(q) - rate(-q) + scale * q| on usable grid pairs.

    Requires a q grid symmetric about 0.  Pairs where either side is
    boundary-active or non-finite are skipped.
    """
    q = rate.q_grid
    if not np.allclose(q + q[::-1], 0.0, atol=1e-12 * max(1.0, np.abs(q).max())):
        raise TransformError("ft_residual requires a q grid symmetric about 0")
    v = rate.values
    usable = np.isfinite(v) & ~rate.boundary_active
    usable = usable & usable[::-1]
    if not np.any(usable):
        raise TransformError("no usable symmetric pairs")
    res = v - v[::-1] + scale * q
    return float(np.abs(res[usable]).max())


def convexity_residual(curve) -> float:
    """Smallest discrete second difference (>= 0 means convex on the grid)."""
    d2 = curve.second_differences()
    d2 = d2[np.isfinite(d2)]
    if d2.size == 0:
        return 0.0
    return float(d2.min())
