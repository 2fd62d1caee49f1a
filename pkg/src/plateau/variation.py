"""First and second variation of area and the constrained stability spectrum.

Fields are continuous piecewise-linear functions on each patch; the three
(or six) values at a junction vertex (T-point) are coupled only through the
compatibility rows. The quadratic form is the exact integral of

    |grad phi|^2 - |A|^2 phi^2            over every patch
    - (phi_i)^2 (curvature vector . conormal_i)   along every junction curve

with |A|^2 and the curve weight interpolated linearly between vertices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .complex import PlateauComplex, SignAssignment, assign_signs
from .errors import EmptySubspaceError, SolverError
from .funcspace import ScalarField, VectorField, _curve_dofs, constraint_matrix, null_space_basis
from .geometry import CurvatureData, JunctionFrame, compute_curvature, compute_frames

DENSE_LIMIT = 2500
TOL_EIG_REL = 1e-8
TOL_STAT_REL = 1e-6


# ------------------------------------------------------------ first variation
def first_variation_gradient(c: PlateauComplex, frames: JunctionFrame | None = None, curv: CurvatureData | None = None) -> np.ndarray:
    """Vector g with first_variation(V) = sum_v g_v . V_v (zero on the boundary)."""
    frames = compute_frames(c) if frames is None else frames
    curv = compute_curvature(c) if curv is None else curv
    g = np.zeros((c.n_vertices, 3))
    w = -curv.mean_curvature * curv.area_weight
    np.add.at(g, c.dof_vertex, w[:, None] * c.dof_normals)
    for fr in frames.curves:
        verts = fr.vertices
        wts = fr.weights
        tau = fr.conormals.sum(axis=1)
        if c.junction_closed[fr.curve]:
            verts, wts, tau = verts[:-1], wts[:-1], tau[:-1]
        np.add.at(g, verts, wts[:, None] * tau)
    g[c.boundary_vertices] = 0.0
    return g


def first_variation(c: PlateauComplex, s: SignAssignment | None, V: VectorField, frames=None, curv=None) -> float:
    """-sum_patches int H (V.nu) + sum_curves sum_i int tau_i . V."""
    g = first_variation_gradient(c, frames, curv)
    return float(np.sum(g * V.values))


@dataclass(frozen=True)
class StationarityReport:
    residual: float
    tol: float
    stationary: bool
    max_abs_H: float
    max_conormal_sum: float

    def as_dict(self) -> dict:
        return {
            "first_variation_residual": self.residual,
            "tol_stat": self.tol,
            "stationary": self.stationary,
            "max_abs_H": self.max_abs_H,
            "max_conormal_sum": self.max_conormal_sum,
        }


def stationarity(c: PlateauComplex, tol_stat: float | None = None) -> StationarityReport:
    """Largest first variation over unit-norm test fields, against tol_stat."""
    frames = compute_frames(c)
    curv = compute_curvature(c)
    g = first_variation_gradient(c, frames, curv)
    tol = TOL_STAT_REL * float(c.tri_areas.sum()) if tol_stat is None else float(tol_stat)
    res = float(np.linalg.norm(g))
    return StationarityReport(res, tol, res <= tol, curv.max_abs_H, frames.stationarity_residual)


# ----------------------------------------------------------- element matrices
def stiffness_matrix(c: PlateauComplex) -> sp.csr_matrix:
    """P1 cotangent stiffness on the per-patch dofs."""
    V, T, D = c.vertices, c.triangles, c.tri_dofs
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = (k + 1) % 3, (k + 2) % 3, k
        u = V[T[:, i]] - V[T[:, o]]
        w = V[T[:, j]] - V[T[:, o]]
        cot = np.sum(u * w, axis=1) / np.linalg.norm(np.cross(u, w), axis=1)
        half = 0.5 * cot
        a, b = D[:, i], D[:, j]
        rows += [a, b, a, b]
        cols += [b, a, a, b]
        vals += [-half, -half, half, half]
    n = c.n_dofs
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def mass_matrix(c: PlateauComplex, weight=None) -> sp.csr_matrix:
    """Consistent P1 mass; with ``weight`` (per dof) the exact int w phi_i phi_j."""
    A, D = c.tri_areas, c.tri_dofs
    rows, cols, vals = [], [], []
    for a in range(3):
        for b in range(3):
            if weight is None:
                v = A * (1.0 / 6.0 if a == b else 1.0 / 12.0)
            else:
                wa = weight[D[:, a]]
                wb = weight[D[:, b]]
                if a == b:
                    wk = weight[D].sum(axis=1) - wa
                    v = A * (wa / 10.0 + wk / 30.0)
                else:
                    third = weight[D[:, 3 - a - b]]
                    v = A * ((wa + wb) / 30.0 + third / 60.0)
            rows.append(D[:, a])
            cols.append(D[:, b])
            vals.append(v)
    n = c.n_dofs
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def curve_matrix(c: PlateauComplex, frames: JunctionFrame) -> sp.csr_matrix:
    """Exact int_L g_i phi_i^2 with g_i = (curvature vector . tau_i) linear on segments."""
    rows, cols, vals = [], [], []
    for fr in frames.curves:
        d = _curve_dofs(c, fr.curve)
        pts = c.vertices[fr.vertices]
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        g = np.einsum("nj,nij->ni", fr.curvature, fr.conormals)
        for i in range(3):
            ga, gb = g[:-1, i], g[1:, i]
            a, b = d[:-1, i], d[1:, i]
            rows += [a, b, a, b]
            cols += [a, b, b, a]
            vals += [
                seg * (ga / 4.0 + gb / 12.0),
                seg * (ga / 12.0 + gb / 4.0),
                seg * (ga + gb) / 12.0,
                seg * (ga + gb) / 12.0,
            ]
    n = c.n_dofs
    if not rows:
        return sp.csr_matrix((n, n))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


# ---------------------------------------------------------- second variation
@dataclass
class VariationForm:
    """Quadratic form Q, mass M and constraints over per-patch dofs.

    ``Z`` spans the fields that satisfy every row of ``B`` and vanish on the
    artificial boundary.
    """

    Q: sp.csr_matrix
    M: sp.csr_matrix
    B: sp.csr_matrix
    Z: sp.csc_matrix
    stiffness: sp.csr_matrix
    potential: sp.csr_matrix
    curve: sp.csr_matrix
    boundary: np.ndarray
    length_scale: float = 1.0
    meta: dict = field(default_factory=dict)

    def energy(self, phi) -> float:
        phi = np.asarray(getattr(phi, "values", phi), dtype=float)
        return float(phi @ (self.Q @ phi))

    @property
    def spectral_norm(self) -> float:
        if "norm" not in self.meta:
            n = self.Q.shape[0]
            if n <= 2:
                val = float(np.abs(np.linalg.eigvalsh(self.Q.toarray())).max(initial=0.0))
            else:
                val = float(abs(spla.eigsh(self.Q, k=1, which="LM", return_eigenvectors=False, tol=1e-6)[0]))
            self.meta["norm"] = val
        return self.meta["norm"]


def assemble_second_variation(c: PlateauComplex, s: SignAssignment | None = None, norm_A2=None) -> VariationForm:
    """Second variation of area over compatible, boundary-vanishing fields.

    ``norm_A2`` optionally overrides the per-dof |A|^2 (e.g. to probe the
    spectrum under an inflated potential).
    """
    s = assign_signs(c) if s is None else s
    frames = compute_frames(c, s)
    if norm_A2 is None:
        norm_A2 = compute_curvature(c).norm_A2
    a2 = np.broadcast_to(np.asarray(norm_A2, dtype=float), (c.n_dofs,)).copy()
    K = stiffness_matrix(c)
    Pm = mass_matrix(c, a2)
    C = curve_matrix(c, frames)
    Q = (K - Pm - C).tocsr()
    Q = (0.5 * (Q + Q.T)).tocsr()
    B = constraint_matrix(c, s)
    Z = null_space_basis(c, s)
    return VariationForm(
        Q=Q,
        M=mass_matrix(c),
        B=B,
        Z=Z,
        stiffness=K,
        potential=Pm,
        curve=C,
        boundary=c.dof_boundary.copy(),
        length_scale=c.diameter,
    )


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # (n_dofs, k) in full dof space
    tol_eig: float
    stable: bool
    method: str
    dimension: int

    def as_dict(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "lambda_1": float(self.eigenvalues[0]),
            "tol_eig": self.tol_eig,
            "stable": self.stable,
            "method": self.method,
            "constrained_dimension": self.dimension,
        }


def stability_spectrum(form: VariationForm, k: int = 6, tol_eig: float | None = None, dense_limit: int = DENSE_LIMIT) -> Spectrum:
    """Smallest generalized eigenvalues of (Z^T Q Z, Z^T M Z)."""
    Z = form.Z
    m = Z.shape[1]
    if m == 0:
        raise EmptySubspaceError("no compatible field vanishes on the boundary")
    Qz = (Z.T @ form.Q @ Z).tocsc()
    Mz = (Z.T @ form.M @ Z).tocsc()
    Qz = 0.5 * (Qz + Qz.T)
    Mz = 0.5 * (Mz + Mz.T)
    k = max(1, min(int(k), m))
    tol = TOL_EIG_REL * form.spectral_norm if tol_eig is None else float(tol_eig)
    if m <= dense_limit:
        try:
            w, y = sla.eigh(Qz.toarray(), Mz.toarray(), subset_by_index=[0, k - 1])
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverError(f"dense eigensolver failed: {exc}") from exc
        method = "dense"
    else:
        # shift below the spectrum: the Dirichlet part is bounded below by 0
        pot = float(np.abs(form.potential.diagonal()).max(initial=0.0) / max(form.M.diagonal().min(), 1e-300))
        sigma = -(pot + 1.0 / form.length_scale**2)
        try:
            w, y = spla.eigsh(Qz, k=k, M=Mz, sigma=sigma, which="LM", tol=1e-10, maxiter=5000)
        except (spla.ArpackNoConvergence, RuntimeError) as exc:
            raise SolverError(f"shift-invert eigensolver failed: {exc}") from exc
        order = np.argsort(w)
        w, y = w[order], y[:, order]
        method = "shift-invert"
    vecs = Z @ y
    return Spectrum(np.asarray(w), np.asarray(vecs), tol, bool(w[0] >= -tol), method, m)


def form_value(form: VariationForm, f: ScalarField) -> float:
    return form.energy(f.values)
