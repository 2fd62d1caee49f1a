"""Logarithmic cutoff fields and the cutoff test of the curvature bound.

For a base point p0 and scale n the cutoff is 1 on the unit ball, decays
like ``1 - log(rho)/n`` out to radius e^n and vanishes beyond. Plugging
``f_region * cutoff`` into the stability inequality for every complement
region, summing over regions and halving bounds the curvature integral on
the unit ball by the Dirichlet energy of the cutoff, which decays like 1/n
under quadratic area growth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .complex import PlateauComplex, SignAssignment, assign_signs
from .errors import ExtentError, NotConeError, NotStationaryError
from .funcspace import _curve_dofs, locally_constant_field
from .geometry import compute_curvature, compute_frames
from .regions import complement_regions
from .variation import stationarity


@dataclass(frozen=True)
class CutoffField:
    p0: np.ndarray
    n: float

    def __call__(self, points) -> np.ndarray:
        rho = np.linalg.norm(np.atleast_2d(np.asarray(points, float)) - self.p0, axis=1)
        with np.errstate(divide="ignore"):
            z = 1.0 - np.log(np.maximum(rho, 1e-300)) / self.n
        return np.clip(np.where(rho <= 1.0, 1.0, z), 0.0, 1.0)

    def on(self, c: PlateauComplex) -> np.ndarray:
        return self(c.vertices)


def log_cutoff(c: PlateauComplex | None, p0, n: float, mesh_mode: bool = False) -> CutoffField:
    """Cutoff at p0 with scale n; ``mesh_mode`` demands that the mesh covers B_{e^n}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p0 = np.asarray(p0, dtype=float)
    if mesh_mode and c is not None:
        reach = boundary_reach(c, p0)
        if reach < math.exp(n):
            raise ExtentError(f"mesh reaches radius {reach:.4g} around p0, cutoff needs {math.exp(n):.4g}")
    return CutoffField(p0, float(n))


def boundary_reach(c: PlateauComplex, p0) -> float:
    b = c.boundary_vertices
    if not np.any(b):
        return math.inf
    return float(np.min(np.linalg.norm(c.vertices[b] - np.asarray(p0, float), axis=1)))


# ------------------------------------------------------------- cone helpers
def apex_angles(c: PlateauComplex, p0, tol: float | None = None) -> dict:
    """Per-patch sum of triangle angles at p0 (the link length of each sector).

    Raises :class:`NotConeError` if some triangle plane misses p0.
    """
    p0 = np.asarray(p0, dtype=float)
    tol = 1e3 * c.tol_geom if tol is None else tol
    V, T = c.vertices, c.triangles
    off = np.abs(np.einsum("ij,ij->i", c.tri_normals, V[T[:, 0]] - p0))
    if off.max() > tol:
        raise NotConeError(f"triangle planes miss p0 by up to {off.max():.3e}")
    d = np.linalg.norm(V - p0, axis=1)
    apex = np.flatnonzero(d <= tol)
    if len(apex) != 1:
        raise NotConeError("p0 is not a vertex of the complex")
    q = int(apex[0])
    out = {p: 0.0 for p in c.patch_ids}
    for t in np.flatnonzero(np.any(T == q, axis=1)):
        row = T[t].tolist()
        k = row.index(q)
        u = V[row[(k + 1) % 3]] - V[q]
        w = V[row[(k + 2) % 3]] - V[q]
        ang = math.atan2(np.linalg.norm(np.cross(u, w)), float(np.dot(u, w)))
        out[c.tri_patch[t].item()] += ang
    return out


# -------------------------------------------------------------- the test
@dataclass(frozen=True)
class BernsteinReport:
    n: list
    lhs: list
    rhs: list
    rhs_times_n: list
    curve_term: list
    slope: float
    mode: str
    link_length: float | None
    regions: int

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n": self.n,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "rhs_times_n": self.rhs_times_n,
            "curve_term": self.curve_term,
            "loglog_slope": self.slope,
            "link_length": self.link_length,
            "regions": self.regions,
        }


def loglog_slope(ns, vals) -> float:
    x = np.log(np.asarray(ns, float))
    y = np.log(np.asarray(vals, float))
    if len(x) < 2:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


def _curvature_term(c: PlateauComplex, p0, indicator) -> float:
    """int_{B1} |A|^2 f^2 for one indicator field."""
    curv = compute_curvature(c)
    d = np.linalg.norm(c.vertices[c.dof_vertex] - p0, axis=1)
    inside = d <= 1.0
    return float(np.sum((curv.norm_A2 * curv.area_weight * indicator**2)[inside]))


def _junction_term(c: PlateauComplex, frames, zeta: CutoffField, indicator) -> float:
    """sum_L sum_i int zeta^2 f_i^2 (curvature vector . tau_i) for one indicator."""
    acc = 0.0
    for fr in frames.curves:
        dofs = _curve_dofs(c, fr.curve)
        g = np.einsum("nj,nij->ni", fr.curvature, fr.conormals)
        z2 = zeta(c.vertices[fr.vertices]) ** 2
        w = fr.weights.copy()
        if c.junction_closed[fr.curve]:
            w[-1] = 0.0
        acc += float(np.sum(w[:, None] * z2[:, None] * indicator[dofs] ** 2 * g))
    return acc


def bernstein_test(
    c: PlateauComplex,
    s: SignAssignment | None = None,
    p0=(0.0, 0.0, 0.0),
    n_list=(1, 2, 3, 4, 5, 6, 7, 8),
    analytic_cone: bool = False,
    regions=None,
    tol_stat: float | None = None,
) -> BernsteinReport:
    """Evaluate both sides of the cutoff inequality for each n.

    Region-indexed inequalities (test field ``f_region * cutoff``) are summed
    over all complement regions and halved, since every patch faces two
    regions. In analytic mode the cutoff energy is integrated in closed form
    over the exact cone, so n is not limited by the mesh extent.
    """
    s = assign_signs(c) if s is None else s
    p0 = np.asarray(p0, dtype=float)
    ns = [int(n) for n in n_list]
    if analytic_cone:
        angles = apex_angles(c, p0)
    else:
        st = stationarity(c, tol_stat)
        if not st.stationary:
            raise NotStationaryError(
                f"first variation residual {st.residual:.3e} exceeds tol_stat {st.tol:.3e}"
            )
        reach = boundary_reach(c, p0)
        if math.exp(max(ns)) > reach:
            raise ExtentError(f"mesh reaches radius {reach:.4g} around p0, n={max(ns)} needs {math.exp(max(ns)):.4g}")
    regions = complement_regions(c) if regions is None else regions
    indicators = [locally_constant_field(c, regions, j) for j in range(regions.n_regions)]

    frames = compute_frames(c, s)
    # each patch faces two regions, so the region sum is halved
    lhs_A = 0.5 * sum(_curvature_term(c, p0, f.values) for f in indicators)
    lhs_list, curve_list, rhs_list = [], [], []
    for n in ns:
        zeta = CutoffField(p0, float(n))
        curve = 0.5 * sum(_junction_term(c, frames, zeta, f.values) for f in indicators)
        acc = 0.0
        for f in indicators:
            # the indicator is constant on each patch, so the cutoff energy factors per patch
            per_patch = dict(zip(c.dof_patch.tolist(), f.values.tolist()))
            for p, val in per_patch.items():
                if val == 0.0:
                    continue
                if analytic_cone:
                    # int_1^{e^n} (1/(n rho))^2 * angle * rho d rho = angle / n
                    e = angles[p] / n
                else:
                    e = _patch_shell(c, p, p0, n) / (n * n)
                acc += val * val * e
        lhs_list.append(lhs_A + curve)
        curve_list.append(curve)
        rhs_list.append(0.5 * acc)
    link = float(sum(angles.values())) if analytic_cone else None
    return BernsteinReport(
        n=ns,
        lhs=lhs_list,
        rhs=rhs_list,
        rhs_times_n=[r * n for r, n in zip(rhs_list, ns)],
        curve_term=curve_list,
        slope=loglog_slope(ns, rhs_list) if all(r > 0 for r in rhs_list) else float("nan"),
        mode="analytic-cone" if analytic_cone else "mesh",
        link_length=link,
        regions=regions.n_regions,
    )


def _patch_shell(c: PlateauComplex, patch, p0, n) -> float:
    sub = c.triangles[c.patch_triangles(patch)]
    vals = kernels.shell_integrals(c.vertices, sub, p0, 1.0, math.exp(n), -2.0)
    return float(np.sum(np.sort(vals)))
