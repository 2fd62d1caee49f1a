"""Area-gradient descent that drives a complex toward a minimal one.

Boundary vertices are pinned (optionally allowed to slide in a plane),
junction vertices move only across their curve, T-points and patch
interior vertices move freely. Each step is normalized by the lumped vertex
mass so that the step size is measured in squared length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _mesh
from .complex import PlateauComplex, build_complex
from .errors import StepDivergenceError
from .geometry import compute_curvature, compute_frames, fitted_conormals


def area_gradient(vertices, triangles) -> np.ndarray:
    """Exact gradient of total triangle area with respect to vertex positions."""
    V = vertices
    T = triangles
    n, area = _mesh.triangle_frames(V, T)
    g = np.zeros_like(V)
    for k in range(3):
        a = V[T[:, (k + 1) % 3]]
        b = V[T[:, (k + 2) % 3]]
        # d area / d x_k = 1/2 n x (b - a)
        np.add.at(g, T[:, k], 0.5 * np.cross(n, b - a))
    return g


def vertex_mass(vertices, triangles) -> np.ndarray:
    _, area = _mesh.triangle_frames(vertices, triangles)
    m = np.zeros(len(vertices))
    np.add.at(m, triangles.ravel(), np.repeat(area / 3.0, 3))
    return m


@dataclass
class RelaxResult:
    complex: PlateauComplex
    steps: int
    area_history: list
    initial: dict
    final: dict
    max_step_motion: float
    history: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "area_initial": self.area_history[0],
            "area_final": self.area_history[-1],
            "initial": self.initial,
            "final": self.final,
            "max_step_motion": self.max_step_motion,
        }


def _metrics(c: PlateauComplex) -> dict:
    fr = compute_frames(c)
    cd = compute_curvature(c)
    return {
        "max_abs_H": cd.max_abs_H,
        "max_conormal_sum": fr.stationarity_residual,
        "max_conormal_sum_interior": interior_conormal_residual(c, fr),
        "max_junction_angle_error_deg": junction_angle_error(c, fr),
        "max_junction_angle_error_hinge_deg": junction_angle_error(c, fr, fitted=False),
    }


def interior_conormal_residual(c: PlateauComplex, frames=None) -> float:
    """max |sum_i tau_i| over junction vertices not on the boundary."""
    frames = compute_frames(c) if frames is None else frames
    out = 0.0
    for f in frames.curves:
        keep = ~c.boundary_vertices[f.vertices]
        if np.any(keep):
            out = max(out, float(np.linalg.norm(f.conormals.sum(axis=1)[keep], axis=1).max()))
    return out


def junction_angles(c: PlateauComplex, frames=None, fitted: bool = True) -> list:
    """Per curve, (n, 3) angles in degrees between conormal pairs (01, 12, 20).

    ``fitted`` measures the sheets by one-sided quadric fits; otherwise the
    hinge-triangle conormals are used (first-order accurate in h).
    """
    frames = compute_frames(c) if frames is None else frames
    out = []
    for f in frames.curves:
        tau = fitted_conormals(c, f.curve) if fitted else f.conormals
        ang = []
        for i, j in ((0, 1), (1, 2), (2, 0)):
            cosv = np.clip(np.einsum("nk,nk->n", tau[:, i], tau[:, j]), -1.0, 1.0)
            ang.append(np.degrees(np.arccos(cosv)))
        out.append(np.stack(ang, axis=1))
    return out


def junction_angle_error(c: PlateauComplex, frames=None, interior_only: bool = True, fitted: bool = True) -> float:
    frames = compute_frames(c) if frames is None else frames
    worst = 0.0
    for f, ang in zip(frames.curves, junction_angles(c, frames, fitted)):
        keep = ~c.boundary_vertices[f.vertices] if interior_only else np.ones(len(f.vertices), bool)
        if np.any(keep):
            worst = max(worst, float(np.abs(ang[keep] - 120.0).max()))
    return worst


def relax_to_minimal(
    c: PlateauComplex,
    steps: int = 500,
    step_size: float | None = None,
    sliding: dict | None = None,
    tangential_smoothing: float = 0.0,
    divergence_window: int = 10,
    record_every: int = 0,
) -> RelaxResult:
    """Move vertices down the area gradient.

    ``step_size`` defaults to 0.1 * (mean edge length)^2. ``sliding`` maps a
    boundary vertex to the unit normal of a plane it may slide in (all other
    boundary vertices stay fixed). ``tangential_smoothing`` adds a fraction of
    the uniform-Laplacian tangential motion at patch-interior vertices to keep
    the mesh regular; it defaults to 0 so exact minimal complexes are fixed
    points.
    """
    V = c.vertices.copy()
    T = c.triangles
    dt = 0.1 * c.mean_edge_length**2 if step_size is None else float(step_size)
    free = ~c.boundary_vertices
    slide_idx = np.array(sorted(sliding), dtype=np.int64) if sliding else np.zeros(0, dtype=np.int64)
    slide_n = np.array([sliding[k] for k in slide_idx.tolist()], float).reshape(-1, 3) if sliding else np.zeros((0, 3))
    jcurves = [(cv, closed) for cv, closed in zip(c.junctions, c.junction_closed)]
    tset = set(c.t_points)
    interior = c.roles == "P"

    if tangential_smoothing > 0:
        nbr_sum, nbr_cnt = _neighbor_ops(c)

    def area(X):
        return float(_mesh.triangle_frames(X, T)[1].sum())

    hist = [area(V)]
    initial = _metrics(c)
    ups = 0
    max_motion = 0.0
    for it in range(int(steps)):
        g = area_gradient(V, T)
        m = vertex_mass(V, T)
        d = -g / m[:, None]
        # explicit steps are stable below 2 / lambda_max(M^-1 K); stay at half that
        h_k = min(dt, 1.0 / _gershgorin_bound(V, T, m))
        for cv, closed in jcurves:
            t = _mesh.polyline_tangents(V[cv], closed=closed)
            inner = np.array([int(v) not in tset for v in cv])
            dv = d[cv[inner]]
            d[cv[inner]] = dv - np.sum(dv * t[inner], axis=1)[:, None] * t[inner]
        if tangential_smoothing > 0:
            lap = nbr_sum(V) / nbr_cnt[:, None] - V
            nrm = _vertex_normals(V, T)
            lap -= np.sum(lap * nrm, axis=1)[:, None] * nrm
            d[interior] += (tangential_smoothing / dt) * lap[interior]
        step = h_k * d
        step[~free] = 0.0
        if len(slide_idx):
            s_ = h_k * d[slide_idx]
            step[slide_idx] = s_ - np.sum(s_ * slide_n, axis=1)[:, None] * slide_n
        V = V + step
        max_motion = float(np.abs(step).max())
        a = area(V)
        ups = ups + 1 if a > hist[-1] else 0
        hist.append(a)
        if ups >= divergence_window:
            raise StepDivergenceError(f"area increased for {ups} consecutive steps at step {it + 1}; reduce step size")
    out = build_complex(
        V,
        T,
        patch=c.tri_patch,
        junctions=[j.tolist() for j in c.junctions],
        normal_side=c.normal_side,
        fixed_edges=c.fixed_edges,
    )
    return RelaxResult(out, int(steps), hist, initial, _metrics(out), max_motion)


def _gershgorin_bound(V, T, mass) -> float:
    """Upper bound on the largest eigenvalue of the lumped cotangent Laplacian."""
    row = np.zeros(len(V))
    for k in range(3):
        i, j = T[:, (k + 1) % 3], T[:, (k + 2) % 3]
        u = V[i] - V[T[:, k]]
        w = V[j] - V[T[:, k]]
        cot = np.abs(np.sum(u * w, axis=1)) / np.maximum(np.linalg.norm(np.cross(u, w), axis=1), 1e-300)
        # |K_ij| = cot/2 off the diagonal, and the diagonal absorbs the same amount
        np.add.at(row, i, cot)
        np.add.at(row, j, cot)
    return float(np.max(row / np.maximum(mass, 1e-300)))


def _vertex_normals(V, T):
    n, area = _mesh.triangle_frames(V, T)
    acc = np.zeros_like(V)
    for k in range(3):
        np.add.at(acc, T[:, k], n * area[:, None])
    nn = np.linalg.norm(acc, axis=1)
    nn[nn == 0] = 1.0
    return acc / nn[:, None]


def _neighbor_ops(c: PlateauComplex):
    import scipy.sparse as sp

    e = c.edges
    n = c.n_vertices
    A = sp.csr_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))
    cnt = np.asarray(A.sum(axis=1)).ravel()
    cnt[cnt == 0] = 1.0
    return (lambda X: A @ X), cnt
