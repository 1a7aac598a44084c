"""Drift decompositions c = -1/2 grad V + b with orthogonal rotational part.

All built-in models are two-dimensional and radially structured: the potential
is V(x) = U(|x|) for a confining radial profile U, and the non-gradient part is
b(x) = A(|x|) (x2, -x1) for a compactly supported radial amplitude A.  This
construction makes <grad V, b> = 0 and div b = 0 hold identically, which is
what the rest of the toolkit leans on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .paths import DiscretePath

_ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])  # P x = (x2, -x1)


class ModelError(ValueError):
    pass


class DoubleWellRadial:
    """U(r) = k r^2 (r - R0)^2: local minima at 0 and R0, quartic growth."""

    def __init__(self, well_radius: float = 1.0, stiffness: float = 1.0):
        if well_radius <= 0 or stiffness <= 0:
            raise ModelError("well_radius and stiffness must be positive")
        self.well_radius = float(well_radius)
        self.stiffness = float(stiffness)

    def value(self, r):
        k, r0 = self.stiffness, self.well_radius
        return k * r**2 * (r - r0) ** 2

    def deriv(self, r):
        k, r0 = self.stiffness, self.well_radius
        return 2.0 * k * r * (r - r0) * (2.0 * r - r0)

    def deriv_over_r(self, r):
        k, r0 = self.stiffness, self.well_radius
        return 2.0 * k * (r - r0) * (2.0 * r - r0)

    def second(self, r):
        k, r0 = self.stiffness, self.well_radius
        return 2.0 * k * (6.0 * r**2 - 6.0 * r0 * r + r0**2)


class QuadraticRadial:
    """U(r) = k r^2: single minimum at the origin."""

    def __init__(self, stiffness: float = 1.0):
        if stiffness <= 0:
            raise ModelError("stiffness must be positive")
        self.stiffness = float(stiffness)

    def value(self, r):
        return self.stiffness * np.asarray(r) ** 2

    def deriv(self, r):
        return 2.0 * self.stiffness * np.asarray(r)

    def deriv_over_r(self, r):
        return 2.0 * self.stiffness * np.ones_like(np.asarray(r, dtype=float))

    def second(self, r):
        return 2.0 * self.stiffness * np.ones_like(np.asarray(r, dtype=float))


class BumpAmplitude:
    """C^inf amplitude a * exp(1 - 1/(1-s^2)), s = (r-center)/width, zero outside."""

    def __init__(self, height: float = 1.0, center: float = 1.0, width: float = 0.35):
        if height <= 0:
            raise ModelError("amplitude height must be positive")
        if not 0 < width < center:
            raise ModelError("bump width must lie in (0, center) so the support avoids 0")
        self.height = float(height)
        self.center = float(center)
        self.width = float(width)

    def value(self, r):
        s = (np.asarray(r, dtype=float) - self.center) / self.width
        out = np.zeros_like(s)
        inside = np.abs(s) < 1.0
        si = s[inside]
        out[inside] = self.height * np.exp(1.0 - 1.0 / (1.0 - si**2))
        return out if out.ndim else float(out)

    def deriv(self, r):
        s = (np.asarray(r, dtype=float) - self.center) / self.width
        out = np.zeros_like(s)
        inside = np.abs(s) < 1.0
        si = s[inside]
        a = self.height * np.exp(1.0 - 1.0 / (1.0 - si**2))
        out[inside] = a * (-2.0 * si / (1.0 - si**2) ** 2) / self.width
        return out if out.ndim else float(out)

    def value_scalar(self, r: float) -> float:
        s = (r - self.center) / self.width
        if abs(s) >= 1.0:
            return 0.0
        return self.height * math.exp(1.0 - 1.0 / (1.0 - s * s))


class ZeroAmplitude:
    height = 0.0

    def value(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def deriv(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def value_scalar(self, r: float) -> float:
        return 0.0


@dataclass(frozen=True)
class CircleModelParams:
    """Periodic-orbit data of the double-well circle model."""

    orbit_radius: float
    angular_speed: float  # = A(R0); the orbit runs clockwise at this rate

    @property
    def qbar(self) -> float:
        # On the orbit x' = b, so <b, x'> = |b|^2 and the mean dissipated
        # power is 2 |b(R0)|^2 = 2 (A(R0) R0)^2.
        return 2.0 * (self.angular_speed * self.orbit_radius) ** 2

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.angular_speed

    def orbit_point(self, t):
        r0, w = self.orbit_radius, self.angular_speed
        t = np.asarray(t, dtype=float)
        return np.stack([r0 * np.cos(w * t), -r0 * np.sin(w * t)], axis=-1)


@dataclass(frozen=True)
class VectorFieldModel:
    """The pair (V, b) with derivatives and certified bounds."""

    name: str
    radial_potential: object
    amplitude: object
    b_sup: float
    b_sup_sq: float
    reference_loop: Optional[DiscretePath]
    circle: Optional[CircleModelParams] = None
    params: dict = field(default_factory=dict)
    dim: int = 2

    # -- scalar fields ------------------------------------------------------

    def _radius(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2)

    def potential(self, x):
        return self.radial_potential.value(self._radius(x))

    def grad_potential(self, x):
        x = np.asarray(x, dtype=float)
        g = self.radial_potential.deriv_over_r(self._radius(x))
        return g[..., None] * x

    def laplacian_potential(self, x):
        r = self._radius(x)
        return self.radial_potential.second(r) + self.radial_potential.deriv_over_r(r)

    def hess_potential(self, x):
        x = np.asarray(x, dtype=float)
        r = self._radius(x)
        g = self.radial_potential.deriv_over_r(r)
        s = self.radial_potential.second(r)
        r2 = np.where(r > 0, r * r, 1.0)
        outer = x[..., :, None] * x[..., None, :] / r2[..., None, None]
        eye = np.eye(2)
        return g[..., None, None] * eye + (s - g)[..., None, None] * outer

    def nonconservative(self, x):
        x = np.asarray(x, dtype=float)
        a = self.amplitude.value(self._radius(x))
        return np.asarray(a)[..., None] * (x @ _ROT.T)

    def div_nonconservative(self, x):
        # Identically zero for the radial-times-rotational family.
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1])

    def jac_nonconservative(self, x):
        x = np.asarray(x, dtype=float)
        r = self._radius(x)
        a = np.asarray(self.amplitude.value(r))
        da = np.asarray(self.amplitude.deriv(r))
        rsafe = np.where(r > 0, r, 1.0)
        perp = x @ _ROT.T
        outer = perp[..., :, None] * x[..., None, :] / rsafe[..., None, None]
        return da[..., None, None] * outer + a[..., None, None] * _ROT

    def drift(self, x):
        return -0.5 * self.grad_potential(x) + self.nonconservative(x)

    def jac_drift(self, x):
        return -0.5 * self.hess_potential(x) + self.jac_nonconservative(x)

    def drift_scalar(self, x1: float, x2: float):
        """Fast scalar drift for tight integrator loops."""
        r = math.hypot(x1, x2)
        g = -0.5 * float(self.radial_potential.deriv_over_r(r))
        a = self.amplitude.value_scalar(r)
        return g * x1 + a * x2, g * x2 - a * x1

    # -- derived bounds -----------------------------------------------------

    def drift_lipschitz(self, radius: float, n: int = 2001) -> float:
        """Max spectral norm of the drift Jacobian over |x| <= radius.

        The field is rotation-equivariant, so a radial sweep suffices.
        """
        r = np.linspace(0.0, radius, n)
        pts = np.stack([r, np.zeros_like(r)], axis=-1)
        jac = self.jac_drift(pts)
        return float(np.linalg.norm(jac, ord=2, axis=(-2, -1)).max())

    def sampling_radius(self, epsilon: float = 1.0) -> float:
        """Radius of {V <= min V + 25 eps}, the region simulations inhabit."""
        level = 25.0 * max(epsilon, 0.04)
        r = np.linspace(0.0, 50.0, 20001)
        v = self.radial_potential.value(r)
        above = np.nonzero(v > v.min() + level)[0]
        inside = above[above > int(np.argmin(v))]
        return float(r[inside[0]]) if inside.size else 50.0


def eval_drift(model: VectorFieldModel, x):
    """c(x) = -1/2 grad V(x) + b(x)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ModelError("drift evaluation at non-finite point")
    return model.drift(x)


# -- assumption checking ----------------------------------------------------


@dataclass
class AssumptionReport:
    orthogonality_ok: bool
    boundedness_ok: bool
    coercivity_ok: bool
    finite_difference_ok: bool
    nonconservative_ok: bool
    worst_orthogonality: float
    worst_orthogonality_at: tuple
    loop_circulation: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (
            self.orthogonality_ok
            and self.boundedness_ok
            and self.coercivity_ok
            and self.finite_difference_ok
            and self.nonconservative_ok
        )


def loop_work(model: VectorFieldModel, path: DiscretePath) -> float:
    """Midpoint quadrature of the work of b along a path."""
    nodes = path.nodes
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    delta = nodes[1:] - nodes[:-1]
    return float(np.sum(model.nonconservative(mid) * delta))


def check_assumptions(
    model: VectorFieldModel,
    box: tuple,
    lattice_step: float,
    tol_orth: float = 1e-10,
) -> AssumptionReport:
    if lattice_step <= 0:
        raise ModelError("lattice_step must be positive")
    xlo, xhi, ylo, yhi = box
    if not (xhi > xlo and yhi > ylo):
        raise ModelError("box must be nonempty")
    xs = np.arange(xlo, xhi + 0.5 * lattice_step, lattice_step)
    ys = np.arange(ylo, yhi + 0.5 * lattice_step, lattice_step)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx, gy], axis=-1)

    grad = model.grad_potential(pts)
    bfield = model.nonconservative(pts)
    if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(bfield))):
        raise ModelError("non-finite field evaluation inside the box")

    inner = np.abs(np.sum(grad * bfield, axis=-1))
    worst = float(inner.max())
    worst_idx = np.unravel_index(int(np.argmax(inner)), inner.shape)
    worst_at = (float(xs[worst_idx[0]]), float(ys[worst_idx[1]]))
    orth_ok = worst <= tol_orth

    bsq = np.sum(bfield**2, axis=-1)
    bound_ok = float(bsq.max()) <= model.b_sup_sq * (1.0 + 1e-12)

    # Coercivity along rays: the radial derivative of V must be eventually
    # increasing and strictly positive at the box edge (assumption of a
    # confining potential).
    rmax = min(abs(xlo), abs(xhi), abs(ylo), abs(yhi))
    r_start = 1.05 * _outer_scale(model)
    coer_ok = True
    coer_worst = 0.0
    if rmax > r_start:
        radii = np.linspace(r_start, rmax, 64)
        for theta in np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False):
            ray = np.stack([radii * math.cos(theta), radii * math.sin(theta)], axis=-1)
            gr = np.sum(model.grad_potential(ray) * ray, axis=-1) / radii
            drops = np.diff(gr)
            if drops.min() < -1e-9 or gr[-1] <= 0:
                coer_ok = False
                coer_worst = min(coer_worst, float(drops.min()))

    # Finite-difference self-checks on a thinned lattice.
    sub = pts.reshape(-1, 2)[:: max(1, pts.size // 2 // 400)]
    fd_ok, fd_err = _fd_consistency(model, sub)

    if model.reference_loop is not None:
        circ = loop_work(model, model.reference_loop)
    else:
        circ = 0.0
    noncons_ok = abs(circ) > 1e-8

    return AssumptionReport(
        orthogonality_ok=orth_ok,
        boundedness_ok=bound_ok,
        coercivity_ok=coer_ok,
        finite_difference_ok=fd_ok,
        nonconservative_ok=noncons_ok,
        worst_orthogonality=worst,
        worst_orthogonality_at=worst_at,
        loop_circulation=circ,
        details={
            "max_b_sq": float(bsq.max()),
            "b_sup_sq": model.b_sup_sq,
            "fd_rel_error": fd_err,
            "coercivity_worst_drop": coer_worst,
        },
    )


def _outer_scale(model: VectorFieldModel) -> float:
    amp = model.amplitude
    if isinstance(amp, BumpAmplitude):
        return amp.center + amp.width
    return 1.0


def _fd_consistency(model: VectorFieldModel, pts: np.ndarray, h: float = 1e-4):
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    gfd = np.stack(
        [
            (model.potential(pts + ex) - model.potential(pts - ex)) / (2 * h),
            (model.potential(pts + ey) - model.potential(pts - ey)) / (2 * h),
        ],
        axis=-1,
    )
    grad = model.grad_potential(pts)
    scale = 1.0 + np.abs(grad)
    err_g = float(np.max(np.abs(gfd - grad) / scale))

    divfd = (model.nonconservative(pts + ex)[..., 0] - model.nonconservative(pts - ex)[..., 0]) / (
        2 * h
    ) + (model.nonconservative(pts + ey)[..., 1] - model.nonconservative(pts - ey)[..., 1]) / (2 * h)
    err_d = float(np.max(np.abs(divfd - model.div_nonconservative(pts))))
    # The bump amplitude has large third derivatives near its support edge, so
    # the divergence check gets a looser (still O(h^2)-sized) tolerance.
    return err_g <= 1e-6 and err_d <= 1e-4, max(err_g, err_d)


# -- built-in models --------------------------------------------------------


def _certified_b_sup(amplitude, n: int = 40001) -> tuple[float, float]:
    """Upper bound on sup |b| = sup_r A(r) r via grid max plus derivative slack."""
    if isinstance(amplitude, ZeroAmplitude):
        return 0.0, 0.0
    lo = amplitude.center - amplitude.width
    hi = amplitude.center + amplitude.width
    r = np.linspace(lo, hi, n)
    g = amplitude.value(r) * r
    dg = amplitude.deriv(r) * r + amplitude.value(r)
    step = (hi - lo) / (n - 1)
    sup = float(g.max() + 0.5 * step * np.abs(dg).max() * 1.05)
    return sup, sup * sup


def _circle_reference_loop(radius: float, speed: float, n_nodes: int = 256) -> DiscretePath:
    period = 2.0 * math.pi / speed
    theta = -2.0 * math.pi * np.arange(n_nodes + 1) / n_nodes  # clockwise, with b
    nodes = radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    nodes[-1] = nodes[0]
    return DiscretePath(dt=period / n_nodes, nodes=nodes)


BUILTIN_NAMES = ("circle_double_well", "single_well_rotational", "pure_gradient")


@dataclass(frozen=True)
class GradientInjectedModel(VectorFieldModel):
    """Negative control: b := grad V, deliberately violating orthogonality."""

    def nonconservative(self, x):
        return self.grad_potential(x)

    def div_nonconservative(self, x):
        return self.laplacian_potential(x)

    def jac_nonconservative(self, x):
        return self.hess_potential(x)

    def drift_scalar(self, x1, x2):
        r = math.hypot(x1, x2)
        g = 0.5 * float(self.radial_potential.deriv_over_r(r))
        return g * x1, g * x2


def builtin(name: str, params: Optional[dict] = None) -> VectorFieldModel:
    """Construct one of the built-in models.

    circle_double_well      U with minima at 0 and R0, rotational b peaked at R0
    single_well_rotational  same b, single potential minimum at the origin
    pure_gradient           b = 0 (reversible diffusion)
    """
    params = dict(params or {})
    r0 = float(params.pop("orbit_radius", 1.0))
    stiffness = float(params.pop("stiffness", 1.0))
    height = float(params.pop("amplitude", 1.0))
    width = float(params.pop("width", 0.35))
    b_from_gradient = bool(params.pop("b_from_gradient", False))
    if params:
        raise ModelError(f"unknown model parameters: {sorted(params)}")

    if name == "circle_double_well":
        u = DoubleWellRadial(well_radius=r0, stiffness=stiffness)
        a = BumpAmplitude(height=height, center=r0, width=width)
        circle = CircleModelParams(orbit_radius=r0, angular_speed=height)
        loop = _circle_reference_loop(r0, height)
    elif name == "single_well_rotational":
        u = QuadraticRadial(stiffness=stiffness)
        a = BumpAmplitude(height=height, center=r0, width=width)
        circle = None
        loop = _circle_reference_loop(r0, height)
    elif name == "pure_gradient":
        u = QuadraticRadial(stiffness=stiffness)
        a = ZeroAmplitude()
        circle = None
        loop = None
    else:
        raise ModelError(f"unknown model name {name!r}; expected one of {BUILTIN_NAMES}")

    b_sup, b_sup_sq = _certified_b_sup(a)
    cls = VectorFieldModel
    if b_from_gradient:
        # negative control; |grad V| is unbounded, so report a box-local sup
        cls = GradientInjectedModel
        r = np.linspace(0.0, 5.0, 20001)
        b_sup = float(np.abs(u.deriv(r)).max())
        b_sup_sq = b_sup * b_sup
    return cls(
        name=name,
        radial_potential=u,
        amplitude=a,
        b_sup=b_sup,
        b_sup_sq=b_sup_sq,
        reference_loop=loop,
        circle=circle,
        params={
            "orbit_radius": r0,
            "stiffness": stiffness,
            "amplitude": getattr(a, "height", 0.0),
            "width": width if not isinstance(a, ZeroAmplitude) else None,
        },
    )
