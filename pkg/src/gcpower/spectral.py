"""Tilted-generator assembly on a 2-D grid and its Perron eigenvalue.

The generator at tilt lam and noise eps acts as

    (eps/2) Lap f + <-(1/2) grad V + (1+2*lam*eps) b, grad f>
        + [2*lam*(1+lam*eps)|b|^2 + lam*eps*div b] f

The principal eigenvalue is the scaled cumulant generating function of the
dissipated power, and the operator family satisfies the weighted-adjoint
symmetry  A(lam)' = A(-1/eps - lam)  in the reference space with weight
exp(-V/eps).

Two advection discretizations are provided:

* "adjoint": face-centered b with the same face weights as the diffusion
  part.  This makes the weighted-adjoint symmetry (and the zero row sums at
  lam = 0) hold exactly at the matrix level, so the eigenvalue symmetry is
  limited only by round-off.
* "central": textbook central differences with the analytic divergence in the
  potential term.  Here the adjoint identity holds only up to O(h^2), which is
  what the order-of-accuracy self-check measures.

The gradient part is always assembled in divergence form with face weights
exp(-V(face)/eps), making it exactly self-adjoint in the weighted space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .curves import ScgfCurve
from .models import VectorFieldModel


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    half_width: float
    spacing: float

    def __post_init__(self):
        if self.half_width <= 0 or self.spacing <= 0:
            raise ValueError("half_width and spacing must be positive")

    @property
    def points_per_axis(self) -> int:
        return int(round(2.0 * self.half_width / self.spacing)) + 1

    def axis(self) -> np.ndarray:
        m = self.points_per_axis
        return -self.half_width + self.spacing * np.arange(m)

    def refined(self) -> "GridSpec":
        return GridSpec(self.half_width, self.spacing / 2.0)


def default_grid(model: VectorFieldModel, epsilon: float, target_m: int = 201) -> GridSpec:
    """Box covering {V <= min V + 20 eps} with a 25% margin."""
    r = np.linspace(0.0, 50.0, 20001)
    v = model.radial_potential.value(r)
    level = v.min() + 20.0 * epsilon
    above = np.nonzero(v > level)[0]
    above = above[above > int(np.argmin(v))]
    radius = float(r[above[0]]) if above.size else 50.0
    L = 1.25 * radius
    m = min(max(target_m, 41), 401)
    if m % 2 == 0:
        m += 1
    h = 2.0 * L / (m - 1)
    return GridSpec(half_width=L, spacing=h)


@dataclass
class SpectralOperator:
    matrix: sp.csr_matrix  # interior-node discretization
    weight: np.ndarray  # reference-measure quadrature weights exp(-(V-minV)/eps) h^2
    v_interior: np.ndarray  # V at interior nodes (for weighted transposes)
    epsilon: float
    lam: float
    grid: GridSpec
    advection: str
    warnings: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass
class EigResult:
    eigenvalue: float
    eigenvector: np.ndarray
    residual: float
    iterations: int


def _interior_points(grid: GridSpec):
    ax = grid.axis()
    xi = ax[1:-1]
    gx, gy = np.meshgrid(xi, xi, indexing="ij")
    return np.stack([gx, gy], axis=-1), xi


class _Parts:
    """lam-independent building blocks for one (model, eps, grid)."""

    def __init__(self, model: VectorFieldModel, epsilon: float, grid: GridSpec):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        mi = grid.points_per_axis - 2
        if mi < 3:
            raise ValueError("grid too coarse")
        if (mi + 2) ** 2 > 4 * 10**5:
            raise SpectralError("grid exceeds the memory guard of 4e5 nodes")
        self.grid = grid
        self.epsilon = epsilon
        h = grid.spacing
        pts, xi = _interior_points(grid)
        self.pts = pts
        n = mi * mi
        self.n = n
        V = model.potential(pts)  # (mi, mi)
        self.v_interior = V.reshape(n)
        self.weight = np.exp(-(self.v_interior - self.v_interior.min()) / epsilon) * h * h
        self.bsq = np.sum(model.nonconservative(pts) ** 2, axis=-1).reshape(n)
        self.divb = model.div_nonconservative(pts).reshape(n)
        self.b_node = model.nonconservative(pts).reshape(n, 2)

        idx = np.arange(n).reshape(mi, mi)

        rows0, cols0, dat0 = [], [], []  # diffusion + potential drift (divergence form)
        rowsA, colsA, datA = [], [], []  # face-centered advection
        diag0 = np.zeros(n)

        def face_blocks(axis):
            # faces between interior node (i) and its +axis neighbor, plus the
            # two boundary-adjacent faces handled through the diagonal only.
            if axis == 0:
                a, bn = idx[:-1, :], idx[1:, :]
                mid = 0.5 * (pts[:-1, :, :] + pts[1:, :, :])
                lo_nodes, lo_mid = idx[0, :], pts[0, :, :] - np.array([h / 2, 0.0])
                hi_nodes, hi_mid = idx[-1, :], pts[-1, :, :] + np.array([h / 2, 0.0])
            else:
                a, bn = idx[:, :-1], idx[:, 1:]
                mid = 0.5 * (pts[:, :-1, :] + pts[:, 1:, :])
                lo_nodes, lo_mid = idx[:, 0], pts[:, 0, :] - np.array([0.0, h / 2])
                hi_nodes, hi_mid = idx[:, -1], pts[:, -1, :] + np.array([0.0, h / 2])
            return a.ravel(), bn.ravel(), mid.reshape(-1, 2), (
                lo_nodes.ravel(), lo_mid.reshape(-1, 2), hi_nodes.ravel(), hi_mid.reshape(-1, 2))

        diff_coef = epsilon / (2.0 * h * h)
        for axis in (0, 1):
            ia, ib, mid, (lo_n, lo_m, hi_n, hi_m) = face_blocks(axis)
            Vmid = model.potential(mid)
            bmid = model.nonconservative(mid)[:, axis]
            # diffusion, divergence form: coefficient exp((V_node - V_face)/eps)
            ca = diff_coef * np.exp((self.v_interior[ia] - Vmid) / epsilon)
            cb = diff_coef * np.exp((self.v_interior[ib] - Vmid) / epsilon)
            rows0 += [ia, ib]
            cols0 += [ib, ia]
            dat0 += [ca, cb]
            np.subtract.at(diag0, ia, ca)
            np.subtract.at(diag0, ib, cb)
            # advection flux through the same face, antisymmetric orientation
            fa = ca / diff_coef * bmid / (2.0 * h)  # exp((V_a - V_face)/eps) b/(2h)
            fb = cb / diff_coef * bmid / (2.0 * h)
            rowsA += [ia, ib]
            colsA += [ib, ia]
            datA += [fa, -fb]
            # Dirichlet faces: diffusion leaks through the diagonal; the
            # advection flux to a zero boundary value drops entirely.
            for nodes, mids in ((lo_n, lo_m), (hi_n, hi_m)):
                Vb = model.potential(mids)
                cb_ = diff_coef * np.exp((self.v_interior[nodes] - Vb) / epsilon)
                np.subtract.at(diag0, nodes, cb_)

        rows0.append(np.arange(n))
        cols0.append(np.arange(n))
        dat0.append(diag0)
        self.m0 = sp.csr_matrix(
            (np.concatenate(dat0), (np.concatenate(rows0), np.concatenate(cols0))),
            shape=(n, n),
        )
        self.badv = sp.csr_matrix(
            (np.concatenate(datA), (np.concatenate(rowsA), np.concatenate(colsA))),
            shape=(n, n),
        )
        self.kappa = np.asarray(self.badv.sum(axis=1)).ravel()

        # central-difference advection (for the O(h^2) adjoint check)
        rowsC, colsC, datC = [], [], []
        for axis in (0, 1):
            if axis == 0:
                ia, ib = idx[:-1, :].ravel(), idx[1:, :].ravel()
            else:
                ia, ib = idx[:, :-1].ravel(), idx[:, 1:].ravel()
            bnode = self.b_node[:, axis]
            rowsC += [ia, ib]
            colsC += [ib, ia]
            datC += [bnode[ia] / (2.0 * h), -bnode[ib] / (2.0 * h)]
        self.bcentral = sp.csr_matrix(
            (np.concatenate(datC), (np.concatenate(rowsC), np.concatenate(colsC))),
            shape=(n, n),
        )

        cmax = float(np.max(np.linalg.norm(model.drift(pts), axis=-1)))
        self.peclet = h * cmax / epsilon


def _assemble_from_parts(parts: _Parts, lam: float, advection: str) -> SpectralOperator:
    eps = parts.epsilon
    tilt = 1.0 + 2.0 * lam * eps
    if advection == "adjoint":
        adv = tilt * (parts.badv - sp.diags(parts.kappa))
        pot = 2.0 * lam * (1.0 + lam * eps) * parts.bsq + lam * eps * (2.0 * parts.kappa)
    elif advection == "central":
        adv = tilt * parts.bcentral
        pot = 2.0 * lam * (1.0 + lam * eps) * parts.bsq + lam * eps * parts.divb
    else:
        raise ValueError("advection must be 'adjoint' or 'central'")
    matrix = (parts.m0 + adv + sp.diags(pot)).tocsr()
    warnings = []
    if parts.peclet > 2.0:
        warnings.append(f"Peclet number {parts.peclet:.2f} exceeds 2 on the box")
    return SpectralOperator(
        matrix=matrix,
        weight=parts.weight,
        v_interior=parts.v_interior,
        epsilon=eps,
        lam=lam,
        grid=parts.grid,
        advection=advection,
        warnings=warnings,
    )


def assemble(
    model: VectorFieldModel,
    epsilon: float,
    lam: float,
    grid: GridSpec,
    advection: str = "adjoint",
) -> SpectralOperator:
    return _assemble_from_parts(_Parts(model, epsilon, grid), lam, advection)


def weighted_transpose(op: SpectralOperator) -> sp.csr_matrix:
    """W M^T W^{-1} computed entrywise via exponent differences.

    Safe for small eps where the weights themselves would underflow.
    """
    mt = op.matrix.T.tocoo()
    scale = np.exp((op.v_interior[mt.row] - op.v_interior[mt.col]) / op.epsilon)
    return sp.csr_matrix((mt.data * scale, (mt.row, mt.col)), shape=mt.shape)


def dominant_eig(op: SpectralOperator, tol_eig: float = 1e-9, max_iter: int = 400) -> EigResult:
    """Perron eigenpair by resolvent (shift-inverted) power iteration.

    The shift sits strictly above the Gershgorin bound, so the resolvent is a
    nonnegative M-matrix inverse and the iteration preserves positivity; the
    shift is moved next to the current Rayleigh estimate once it stabilizes.
    """
    A = op.matrix
    n = A.shape[0]
    absA = abs(A)
    upper = float((A.diagonal() + (np.asarray(absA.sum(axis=1)).ravel() - abs(A.diagonal()))).max())
    w = op.weight
    v = w / np.linalg.norm(w)

    def rayleigh(v):
        av = A @ v
        e = float(np.dot(w * v, av) / np.dot(w * v, v))
        res = float(np.linalg.norm(av - e * v) / np.linalg.norm(v))
        return e, res

    mu = upper + 1e-2 * (1.0 + abs(upper))
    lu = spla.splu((sp.identity(n, format="csc") * mu - A).tocsc())
    iters = 0
    e, res = rayleigh(v)
    stage = 0
    while iters < max_iter:
        v = lu.solve(v)
        nv = np.linalg.norm(v)
        if nv == 0 or not np.isfinite(nv):
            raise SpectralError("resolvent iteration broke down")
        v = v / nv
        if v[int(np.argmax(np.abs(v)))] < 0:
            v = -v
        iters += 1
        e, res = rayleigh(v)
        if res <= tol_eig * (1.0 + abs(e)):
            break
        if stage < 2 and iters % 12 == 0:
            # move the shift next to the estimate to sharpen the convergence rate
            mu = e + max(20.0 * res, 1e-4 * (1.0 + abs(e)))
            lu = spla.splu((sp.identity(n, format="csc") * mu - A).tocsc())
            stage += 1
    else:
        raise SpectralError(f"no convergence after {max_iter} iterations (residual {res:.2e})")
    if float(v.min()) < -1e-10 * float(np.abs(v).max()):
        raise SpectralError("loss of Perron positivity; check the grid Peclet condition")
    return EigResult(eigenvalue=e, eigenvector=v, residual=res, iterations=iters)


def scgf_curve_spectral(
    model: VectorFieldModel,
    epsilon: float,
    lambda_grid,
    grid: Optional[GridSpec] = None,
    tol_eig: float = 1e-9,
    advection: str = "adjoint",
) -> ScgfCurve:
    if grid is None:
        grid = default_grid(model, epsilon)
    parts = _Parts(model, epsilon, grid)
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    values = np.empty_like(lambda_grid)
    residuals = np.empty_like(lambda_grid)
    iterations = np.empty_like(lambda_grid, dtype=int)
    ok = np.ones_like(lambda_grid, dtype=bool)
    for i, lam in enumerate(lambda_grid):
        try:
            r = dominant_eig(_assemble_from_parts(parts, float(lam), advection), tol_eig=tol_eig)
            values[i], residuals[i], iterations[i] = r.eigenvalue, r.residual, r.iterations
        except SpectralError:
            values[i], residuals[i], iterations[i] = np.nan, np.nan, -1
            ok[i] = False
    curve = ScgfCurve(
        lambdas=lambda_grid,
        values=values,
        provenance="spectral",
        reliable=ok,
        metadata={
            "epsilon": epsilon,
            "half_width": grid.half_width,
            "spacing": grid.spacing,
            "advection": advection,
            "residuals": residuals,
            "iterations": iterations,
            "min_second_difference": float(np.min(np.diff(values[ok], 2))) if ok.sum() > 2 else None,
        },
    )
    return curve


@dataclass
class AdjointReport:
    epsilon: float
    lam: float
    residual_adjoint: float
    residual_central_h: float
    residual_central_h2: float

    @property
    def central_ratio(self) -> float:
        return self.residual_central_h / self.residual_central_h2


def _adjoint_residual(parts: _Parts, lam: float, advection: str) -> float:
    eps = parts.epsilon
    op = _assemble_from_parts(parts, lam, advection)
    target = _assemble_from_parts(parts, -1.0 / eps - lam, advection)
    diff = weighted_transpose(op) - target.matrix
    # Restrict to the bulk {V <= min V + 15 eps}: outside it the conjugation
    # weights grow like exp(h |grad V| / eps) and would swamp the stencil-order
    # signal with boundary-region noise.
    mask = parts.v_interior <= parts.v_interior.min() + 15.0 * eps
    keep = np.nonzero(mask)[0]
    diff = diff[keep][:, keep]
    denom = spla.norm(op.matrix[keep][:, keep], "fro")
    return float(spla.norm(diff, "fro") / denom)


def adjoint_check(
    model: VectorFieldModel,
    epsilon: float,
    lam: float,
    grid: GridSpec,
) -> AdjointReport:
    parts_h = _Parts(model, epsilon, grid)
    parts_h2 = _Parts(model, epsilon, grid.refined())
    return AdjointReport(
        epsilon=epsilon,
        lam=lam,
        residual_adjoint=_adjoint_residual(parts_h, lam, "adjoint"),
        residual_central_h=_adjoint_residual(parts_h, lam, "central"),
        residual_central_h2=_adjoint_residual(parts_h2, lam, "central"),
    )


def ground_state_check(
    model: VectorFieldModel,
    epsilon: float,
    grid: GridSpec,
    k: int = 3,
):
    """Top-k spectrum of the weighted H0 vs its Schroedinger conjugate.

    H0 = (eps/2) Lap - (1/2) <grad V, grad .> is unitarily equivalent to
    -[-(eps/2) Lap + (1/(8 eps)) |grad V|^2 - (1/4) Lap V]; both are
    discretized independently and their leading eigenvalues compared.
    """
    parts = _Parts(model, epsilon, grid)
    n = parts.n
    # symmetrized weighted form D^{1/2} M0 D^{-1/2}, exact via exponent halves
    m0 = parts.m0.tocoo()
    scale = np.exp((parts.v_interior[m0.col] - parts.v_interior[m0.row]) / (2.0 * epsilon))
    sym = sp.csr_matrix((m0.data * scale, (m0.row, m0.col)), shape=(n, n))
    sym = 0.5 * (sym + sym.T)  # kill round-off asymmetry

    h = parts.grid.spacing
    pts = parts.pts
    gradsq = np.sum(model.grad_potential(pts) ** 2, axis=-1).reshape(n)
    lap_v = model.laplacian_potential(pts).reshape(n)
    lap = _dirichlet_laplacian(parts)
    schrod = (epsilon / 2.0) * lap - sp.diags(gradsq / (8.0 * epsilon) - lap_v / 4.0)

    ev_weighted = _top_eigs(sym, k)
    ev_schrod = _top_eigs(schrod.tocsr(), k)
    return ev_weighted, ev_schrod


def _dirichlet_laplacian(parts: _Parts) -> sp.csr_matrix:
    mi = int(round(math.sqrt(parts.n)))
    h = parts.grid.spacing
    one = sp.identity(mi)
    d2 = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(mi, mi)) / (h * h)
    return (sp.kron(d2, one) + sp.kron(one, d2)).tocsr()


def _top_eigs(matrix: sp.csr_matrix, k: int) -> np.ndarray:
    vals = spla.eigsh(matrix, k=k, sigma=0.5, which="LM", return_eigenvectors=False)
    return np.sort(vals)[::-1]
