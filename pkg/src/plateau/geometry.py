"""Normals, curvature, junction frames, areas and area growth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from . import _mesh, kernels
from .complex import P, PlateauComplex, SignAssignment, assign_signs, curve_frames
from .errors import DegenerateTriangleError, FitRankError


@dataclass(frozen=True)
class CurveFrame:
    """Frame data along one junction curve.

    Arrays are indexed ``[vertex along curve, local patch]`` with the patch
    axis following ``c.junction_patches[curve]``.
    """

    curve: int
    vertices: np.ndarray
    tangent: np.ndarray  # (n, 3)
    normals: np.ndarray  # (n, 3, 3)
    conormals: np.ndarray  # (n, 3, 3)
    signs: np.ndarray  # (3,)
    curvature: np.ndarray  # (n, 3) curvature vector of the polyline
    weights: np.ndarray  # (n,) trapezoid weights


@dataclass(frozen=True)
class JunctionFrame:
    curves: tuple

    @property
    def stationarity_residual(self) -> float:
        """max over junction vertices of |sum_i tau_i|."""
        vals = [np.linalg.norm(f.conormals.sum(axis=1), axis=1).max() for f in self.curves]
        return float(max(vals, default=0.0))

    @property
    def sign_normal_residual(self) -> float:
        vals = [np.linalg.norm(np.einsum("i,nij->nj", f.signs, f.normals), axis=1).max() for f in self.curves]
        return float(max(vals, default=0.0))

    def orthogonality_residual(self) -> float:
        worst = 0.0
        for f in self.curves:
            worst = max(
                worst,
                float(np.abs(np.einsum("nij,nij->ni", f.conormals, f.normals)).max()),
                float(np.abs(np.einsum("nij,nj->ni", f.conormals, f.tangent)).max()),
            )
        return worst


def compute_frames(c: PlateauComplex, s: SignAssignment | None = None) -> JunctionFrame:
    """Tangent, normals, conormals and curvature vector along every junction curve.

    The conormal of patch i is ``sign_i * (t x nu_i)``: with the sign
    convention used here this is the unit vector tangent to the patch,
    orthogonal to the curve and pointing out of the patch.
    """
    s = assign_signs(c) if s is None else s
    if np.any(c.tri_areas <= c.tol_geom**2):
        raise DegenerateTriangleError(f"{int(np.sum(c.tri_areas <= c.tol_geom ** 2))} triangles below area tolerance")
    out = []
    for ci, curve in enumerate(c.junctions):
        t, nu = curve_frames(c, ci)
        sg = np.asarray(s.curve_signs[ci], dtype=float)
        tau = sg[None, :, None] * np.cross(t[:, None, :], nu)
        pts = c.vertices[curve]
        out.append(
            CurveFrame(
                curve=ci,
                vertices=curve,
                tangent=t,
                normals=nu,
                conormals=tau,
                signs=sg,
                curvature=_mesh.polyline_curvature(pts, closed=c.junction_closed[ci]),
                weights=_curve_weights(pts, c.junction_closed[ci]),
            )
        )
    return JunctionFrame(tuple(out))


def _curve_weights(pts, closed):
    w = _mesh.polyline_weights(pts)
    if closed:
        # first and last entries are the same vertex
        w[0] += w[-1]
        w[-1] = w[0]
    return w


# ------------------------------------------------------------- curvature
@dataclass(frozen=True)
class CurvatureData:
    """Per-dof curvature data (a dof is a (patch, vertex) pair).

    ``shape_operator`` is expressed in the tangent basis ``(e1, e2)``;
    ``fitted`` marks patch-interior dofs where it was measured, other dofs
    carry |A|^2 copied from the nearest fitted dof of the same patch and
    zero mean curvature.
    """

    shape_operator: np.ndarray  # (D, 2, 2)
    basis: np.ndarray  # (D, 2, 3)
    mean_curvature: np.ndarray  # (D,)
    norm_A2: np.ndarray  # (D,)
    fitted: np.ndarray  # (D,) bool
    area_weight: np.ndarray  # (D,) mixed Voronoi area
    patch_area: dict

    @property
    def max_abs_H(self) -> float:
        return float(np.abs(self.mean_curvature[self.fitted]).max(initial=0.0))

    @property
    def max_A2(self) -> float:
        return float(self.norm_A2[self.fitted].max(initial=0.0))


def dof_adjacency(c: PlateauComplex) -> sp.csr_matrix:
    """Symmetric dof-dof adjacency from triangle edges (within patches)."""
    td = c.tri_dofs
    rows = np.concatenate([td[:, 0], td[:, 1], td[:, 2], td[:, 1], td[:, 2], td[:, 0]])
    cols = np.concatenate([td[:, 1], td[:, 2], td[:, 0], td[:, 0], td[:, 1], td[:, 2]])
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(c.n_dofs, c.n_dofs))
    A.data[:] = 1.0
    return A


def _tangent_basis(n):
    a = np.where(np.abs(n[:, [0]]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    e1 = np.cross(n, a)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(n, e1)
    return e1, e2


def mixed_area(c: PlateauComplex) -> np.ndarray:
    """Mixed Voronoi area of every dof (obtuse triangles split by halves/quarters)."""
    V = c.vertices
    T = c.triangles
    p = [V[T[:, k]] for k in range(3)]
    area = c.tri_areas
    out = np.zeros((len(T), 3))
    # cotangent of the angle at corner k
    cot = np.empty((len(T), 3))
    sq = np.empty((len(T), 3))  # squared length of the edge opposite corner k
    for k in range(3):
        u = p[(k + 1) % 3] - p[k]
        w = p[(k + 2) % 3] - p[k]
        cot[:, k] = np.sum(u * w, axis=1) / np.linalg.norm(np.cross(u, w), axis=1)
        sq[:, k] = np.sum((p[(k + 2) % 3] - p[(k + 1) % 3]) ** 2, axis=1)
    obtuse = cot < 0
    any_obtuse = obtuse.any(axis=1)
    for k in range(3):
        # Voronoi part at corner k uses the two edges adjacent to it
        out[:, k] = (sq[:, (k + 1) % 3] * cot[:, (k + 1) % 3] + sq[:, (k + 2) % 3] * cot[:, (k + 2) % 3]) / 8.0
    out[any_obtuse] = np.where(obtuse[any_obtuse], 0.5, 0.25) * area[any_obtuse, None]
    w = np.zeros(c.n_dofs)
    np.add.at(w, c.tri_dofs.ravel(), out.ravel())
    return w


def _fit(X, y):
    """Batched least squares with a rank check; returns (coef, ok)."""
    U, S, Vt = np.linalg.svd(X, full_matrices=False)
    ok = (S[:, -1] > 1e-10 * S[:, 0]) & (X.shape[1] >= 5)
    Sinv = np.where(S > 1e-14 * S[:, :1], 1.0 / np.where(S == 0, 1, S), 0.0)
    coef = np.einsum("gji,gj,gkj,gk->gi", Vt, Sinv, U, y)
    return coef, ok


def compute_curvature(c: PlateauComplex) -> CurvatureData:
    """Shape operator at patch-interior dofs by local quadric fitting."""
    cached = c.__dict__.get("_curvature")
    if cached is not None:
        return cached
    D = c.n_dofs
    roles = c.roles[c.dof_vertex]
    interior = roles == P
    n = c.dof_normals
    e1, e2 = _tangent_basis(n)
    A = dof_adjacency(c)
    A2 = (A @ A).tocsr()
    S = np.zeros((D, 2, 2))
    coef_ok = np.zeros(D, dtype=bool)
    V = c.vertices
    todo = np.flatnonzero(interior)
    ring = [A[i].indices for i in range(D)] if len(todo) else []
    # group by ring size so the fits run batched
    sizes = np.array([len(ring[i]) for i in todo], dtype=int)
    retry = []
    for k in np.unique(sizes):
        grp = todo[sizes == k]
        if k < 5:
            retry.extend(grp.tolist())
            continue
        nb = np.array([ring[i] for i in grp])
        coef, ok = _fit_group(V, c.dof_vertex, grp, nb, n, e1, e2)
        S[grp] = _shape(coef)
        coef_ok[grp] = ok
        retry.extend(grp[~ok].tolist())
    for i in retry:
        nb = A2[i].indices
        nb = nb[nb != i]
        nb = nb[c.dof_patch[nb] == c.dof_patch[i]]
        coef, ok = _fit_group(V, c.dof_vertex, np.array([i]), nb[None, :], n, e1, e2)
        if not ok[0]:
            raise FitRankError(f"quadric fit is rank deficient at vertex {int(c.dof_vertex[i])}")
        S[i] = _shape(coef)[0]
        coef_ok[i] = True
    H = np.trace(S, axis1=1, axis2=2)
    eig = np.linalg.eigvals(S).real if D else np.zeros((0, 2))
    normA2 = np.sum(eig**2, axis=1)
    normA2 = _extend_from_fitted(c, normA2, interior)
    H = np.where(interior, H, 0.0)
    patch_area = {p: float(c.tri_areas[c.tri_patch == p].sum()) for p in c.patch_ids}
    out = CurvatureData(
        shape_operator=S,
        basis=np.stack([e1, e2], axis=1),
        mean_curvature=H,
        norm_A2=normA2,
        fitted=interior,
        area_weight=mixed_area(c),
        patch_area=patch_area,
    )
    object.__setattr__(c, "_curvature", out)
    return out


def _fit_group(V, dof_vertex, grp, nb, n, e1, e2):
    d = V[dof_vertex[nb]] - V[dof_vertex[grp]][:, None, :]
    x = np.einsum("gkj,gj->gk", d, e1[grp])
    y = np.einsum("gkj,gj->gk", d, e2[grp])
    h = np.einsum("gkj,gj->gk", d, n[grp])
    X = np.stack([x * x, x * y, y * y, x, y], axis=2)
    return _fit(X, h)


def _shape(coef):
    a, b, cc, d, e = (coef[:, k] for k in range(5))
    I = np.stack([np.stack([1 + d * d, d * e], -1), np.stack([d * e, 1 + e * e], -1)], -2)
    w = 1.0 / np.sqrt(1 + d * d + e * e)
    II = np.stack([np.stack([2 * a, b], -1), np.stack([b, 2 * cc], -1)], -2) * w[:, None, None]
    return np.linalg.solve(I, II)


def _extend_from_fitted(c, vals, fitted):
    out = vals.copy()
    out[~fitted] = 0.0
    P_ = c.dof_vertex
    for p in c.patch_ids:
        mask = c.dof_patch == p
        src = np.flatnonzero(mask & fitted)
        dst = np.flatnonzero(mask & ~fitted)
        if len(dst) == 0 or len(src) == 0:
            continue
        tree = cKDTree(c.vertices[P_[src]])
        _, k = tree.query(c.vertices[P_[dst]])
        out[dst] = vals[src[k]]
    return out


# ------------------------------------------------------------------ areas
def total_area(c: PlateauComplex) -> float:
    return float(c.tri_areas.sum())


def area_in_ball(c: PlateauComplex, p0, r: float) -> float:
    """Area of the complex inside the closed ball B_r(p0)."""
    if r <= 0:
        raise ValueError("radius must be positive")
    vals = kernels.shell_integrals(c.vertices, c.triangles, np.asarray(p0, float), 0.0, float(r), 0.0)
    return float(np.sum(np.sort(vals)))


def shell_integral(c: PlateauComplex, p0, r_in: float, r_out: float, power: float) -> float:
    """Integral of |x - p0|**power over the part of the complex in the shell."""
    vals = kernels.shell_integrals(c.vertices, c.triangles, np.asarray(p0, float), float(r_in), float(r_out), float(power))
    return float(np.sum(np.sort(vals)))


def area_growth_constant(c: PlateauComplex, p0, radii) -> float:
    """Smallest C with area(B_r) <= C r^2 over the probed radii."""
    return float(max(area_in_ball(c, p0, r) / (r * r) for r in radii))


def measure(c: PlateauComplex, center, radii) -> dict:
    """Summary used by the ``measure`` command."""
    s = assign_signs(c)
    fr = compute_frames(c, s)
    cd = compute_curvature(c)
    areas = [area_in_ball(c, center, r) for r in radii]
    return {
        "center": [float(x) for x in center],
        "radii": [float(r) for r in radii],
        "areas": areas,
        "C_fit": max(a / (r * r) for a, r in zip(areas, radii)) if radii else None,
        "total_area": total_area(c),
        "stationarity_residual": fr.stationarity_residual,
        "sign_normal_residual": fr.sign_normal_residual,
        "max_abs_H": cd.max_abs_H,
        "max_A2": cd.max_A2,
    }


def fitted_conormals(c: PlateauComplex, ci: int) -> np.ndarray:
    """(n, 3, 3) conormals along curve ``ci`` from one-sided quadric fits.

    Each sheet is fitted over its dofs within two rings of the junction
    vertex; the fitted tangent plane at the vertex is second-order accurate,
    unlike the plane of the single hinge triangle.
    """
    from .funcspace import _curve_dofs

    dofs = _curve_dofs(c, ci)
    verts = c.junctions[ci]
    t = _mesh.polyline_tangents(c.vertices[verts], closed=bool(c.junction_closed[ci]))
    A = dof_adjacency(c)
    A2 = (A @ A).tocsr()
    V = c.vertices
    out = np.zeros((len(verts), 3, 3))
    for k in range(len(verts)):
        for i in range(3):
            d0 = int(dofs[k, i])
            nb = A2[d0].indices
            nb = nb[(nb != d0) & (c.dof_patch[nb] == c.dof_patch[d0])]
            nrm = c.hinge_normals[d0]
            nrm = nrm - np.dot(nrm, t[k]) * t[k]
            nrm /= np.linalg.norm(nrm)
            e2 = np.cross(t[k], nrm)
            rel = V[c.dof_vertex[nb]] - V[verts[k]]
            x, y, h = rel @ t[k], rel @ e2, rel @ nrm
            X = np.stack([x * x, x * y, y * y, x, y], axis=1)
            coef, ok = _fit(X[None], h[None])
            if not ok[0]:
                raise FitRankError(f"one-sided quadric fit is rank deficient at junction vertex {int(verts[k])}")
            dx, dy = coef[0, 3], coef[0, 4]
            fit_n = nrm - dx * t[k] - dy * e2
            fit_n -= np.dot(fit_n, t[k]) * t[k]
            fit_n /= np.linalg.norm(fit_n)
            tau = np.cross(t[k], fit_n)
            # point into the sheet
            if np.dot(tau, rel.mean(axis=0)) < 0:
                tau = -tau
            out[k, i] = tau
    return out
