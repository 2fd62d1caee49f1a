"""Per-patch scalar fields, ambient vector fields and the compatibility condition.

A scalar field stores one value per (patch, vertex) dof, so a junction
vertex carries three values and a T-point six. A vector field stores one
ambient vector per vertex.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .complex import PlateauComplex, SignAssignment, assign_signs, curve_frames
from .errors import IncompatibleFieldError, ParseError, RegionUnknownError

TOL_COMPAT = 1e-9


@dataclass
class ScalarField:
    complex: PlateauComplex
    values: np.ndarray  # (n_dofs,)

    @classmethod
    def zeros(cls, c: PlateauComplex) -> "ScalarField":
        return cls(c, np.zeros(c.n_dofs))

    @classmethod
    def from_entries(cls, c: PlateauComplex, entries) -> "ScalarField":
        vals = np.zeros(c.n_dofs)
        for p, v, x in entries:
            vals[c.dof(_patch_key(p, c), int(v))] = float(x)
        return cls(c, vals)

    def entries(self) -> list:
        c = self.complex
        return [[_jsonable(p), int(v), float(x)] for p, v, x in zip(c.dof_patch.tolist(), c.dof_vertex.tolist(), self.values.tolist())]

    def at(self, patch, vertex: int) -> float:
        return float(self.values[self.complex.dof(patch, vertex)])

    @property
    def support(self) -> np.ndarray:
        return self.values != 0

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.complex, self.values + other.values)

    def __mul__(self, a: float) -> "ScalarField":
        return ScalarField(self.complex, a * self.values)

    __rmul__ = __mul__


@dataclass
class VectorField:
    complex: PlateauComplex
    values: np.ndarray  # (n_vertices, 3)

    @classmethod
    def constant(cls, c: PlateauComplex, vec) -> "VectorField":
        return cls(c, np.tile(np.asarray(vec, float), (c.n_vertices, 1)))

    def entries(self) -> list:
        return [[int(i), *map(float, v)] for i, v in enumerate(self.values.tolist())]

    @property
    def support(self) -> np.ndarray:
        return np.any(self.values != 0, axis=1)


def _patch_key(p, c):
    if p in c.patch_ids:
        return p
    for q in c.patch_ids:
        if str(q) == str(p):
            return q
    raise ParseError(f"unknown patch id {p!r}")


def _jsonable(p):
    return p.item() if hasattr(p, "item") else p


# ----------------------------------------------------------- compatibility
@dataclass(frozen=True)
class CompatibilityReport:
    junction_residual: float
    t_residual: float
    boundary_residual: float
    tol: float
    compatible: bool

    def as_dict(self) -> dict:
        return {
            "junction_residual": self.junction_residual,
            "t_residual": self.t_residual,
            "boundary_residual": self.boundary_residual,
            "tol_compat": self.tol,
            "compatible": self.compatible,
        }


def _curve_dofs(c: PlateauComplex, ci: int) -> np.ndarray:
    """(n, 3) dof indices along curve ``ci`` in junction-patch order."""
    curve = c.junctions[ci]
    cols = []
    for p in c.junction_patches[ci]:
        k = c.patch_ids.index(p)
        cols.append(np.searchsorted(c._dofs[0], k * c.n_vertices + curve))
    return np.stack(cols, axis=1)


def check_compatible(f: ScalarField, s: SignAssignment | None = None, tol: float = TOL_COMPAT, relative: bool = False) -> CompatibilityReport:
    """Residuals of sum_i sign_i f_i along junctions and at T-points."""
    c = f.complex
    s = assign_signs(c) if s is None else s
    jr = 0.0
    for ci in range(len(c.junctions)):
        d = _curve_dofs(c, ci)
        r = f.values[d] @ np.asarray(s.curve_signs[ci], float)
        jr = max(jr, float(np.abs(r).max(initial=0.0)))
    tr = 0.0
    for q_idx, q in enumerate(c.t_points):
        for j in range(4):
            acc = 0.0
            for i in range(4):
                if i == j:
                    continue
                p = s.t_patches[q_idx][(min(i, j), max(i, j))]
                acc += s.t_signs[q_idx][(i, j)] * f.at(p, q)
            tr = max(tr, abs(acc))
    br = float(np.abs(f.values[c.dof_boundary]).max(initial=0.0))
    scale = float(np.abs(f.values).max(initial=0.0)) if relative else 1.0
    t = tol * max(scale, 1e-300) if relative else tol
    return CompatibilityReport(jr, tr, br, t, bool(jr <= t and tr <= t))


def is_c1(f: ScalarField, tol: float = TOL_COMPAT) -> bool:
    """True when all patches take the same value at every junction vertex."""
    c = f.complex
    for ci in range(len(c.junctions)):
        v = f.values[_curve_dofs(c, ci)]
        if np.any(np.abs(v - v[:, :1]) > tol):
            return False
    return True


# ------------------------------------------------------------ lift/restrict
def field_normals(c: PlateauComplex) -> np.ndarray:
    """Unit normal attached to every dof (area-weighted patch normal)."""
    return c.dof_normals


def restrict_normal_component(V: VectorField) -> ScalarField:
    """f_patch(v) = V(v) . nu_patch(v) for every dof."""
    c = V.complex
    vals = np.einsum("ij,ij->i", V.values[c.dof_vertex], field_normals(c))
    return ScalarField(c, vals)


def _blend_sources(c: PlateauComplex, radius: float):
    """Nearest junction/T vertex and blend weight for every vertex.

    T-points take priority inside one blend radius of them.
    """
    n = c.n_vertices
    src = np.full(n, -1, dtype=np.int64)
    w = np.zeros(n)
    jv = np.flatnonzero(c.junction_vertices)
    if len(jv) == 0:
        return src, w
    pts = c.vertices
    d_j, k_j = cKDTree(pts[jv]).query(pts)
    src[:] = jv[k_j]
    dist = d_j
    if c.t_points:
        tp = np.asarray(c.t_points)
        d_t, k_t = cKDTree(pts[tp]).query(pts)
        near_t = d_t <= radius
        src[near_t] = tp[k_t[near_t]]
        dist = np.where(near_t, d_t, d_j)
    w = np.clip(1.0 - dist / radius, 0.0, 1.0)
    return src, w


def lift_to_vector_field(f: ScalarField, s: SignAssignment | None = None, blend_radius: float | None = None, tol: float = TOL_COMPAT) -> VectorField:
    """Ambient vector field V with V . nu_patch = f_patch at every dof.

    Junction vertices use V = (2/3) sum_i f_i nu_i, T-points use
    V = (1/2) sum_{i<j} f_ij nu_ij; elsewhere V = f nu plus the tangential
    part of the nearest singular vector, faded out over ``blend_radius``
    (default two mean edge lengths).
    """
    c = f.complex
    s = assign_signs(c) if s is None else s
    rep = check_compatible(f, s, tol=tol * max(1.0, float(np.abs(f.values).max(initial=0.0))))
    if not rep.compatible:
        raise IncompatibleFieldError(
            f"field violates the compatibility condition (junction {rep.junction_residual:.3e}, T {rep.t_residual:.3e})"
        )
    nu = field_normals(c)
    V = np.zeros((c.n_vertices, 3))
    for ci in range(len(c.junctions)):
        d = _curve_dofs(c, ci)
        V[c.junctions[ci]] = (2.0 / 3.0) * np.einsum("ni,nij->nj", f.values[d], nu[d])
    for q_idx, q in enumerate(c.t_points):
        acc = np.zeros(3)
        for (i, j), p in sorted(s.t_patches[q_idx].items()):
            k = c.dof(p, q)
            acc += f.values[k] * nu[k]
        V[q] = 0.5 * acc

    radius = 2.0 * c.mean_edge_length if blend_radius is None else float(blend_radius)
    src, w = _blend_sources(c, radius)
    regular = np.flatnonzero(~c.junction_vertices)
    # regular vertices have exactly one dof
    first = np.full(c.n_vertices, -1, dtype=np.int64)
    first[c.dof_vertex[::-1]] = np.arange(c.n_dofs)[::-1]
    dr = first[regular]
    n_r = nu[dr]
    V[regular] = f.values[dr][:, None] * n_r
    has = (src[regular] >= 0) & (w[regular] > 0) & ~c.boundary_vertices[regular]
    if np.any(has):
        rr = regular[has]
        W = V[src[rr]]
        tang = W - np.sum(W * n_r[has], axis=1)[:, None] * n_r[has]
        V[rr] += w[rr][:, None] * tang
    return VectorField(c, V)


# --------------------------------------------------------- inner products
@dataclass(frozen=True)
class InnerProductReport:
    y_residual: float
    t_residual: float
    t_tables: tuple  # per T-point: (6, 6) measured, (6, 6) expected

    def as_dict(self) -> dict:
        return {"y_residual": self.y_residual, "t_residual": self.t_residual}


def expected_t_table(s: SignAssignment, q_idx: int):
    """Expected Gram matrix of the six normals at a T-point, pairs in lexicographic order."""
    pairs = sorted(s.t_patches[q_idx])
    sg = s.t_signs[q_idx]
    G = np.zeros((6, 6))
    for a, (i, j) in enumerate(pairs):
        for b, (k, l) in enumerate(pairs):
            shared = {i, j} & {k, l}
            if len(shared) == 2:
                G[a, b] = 1.0
            elif len(shared) == 1:
                m = shared.pop()
                x = ({i, j} - {m}).pop()
                y = ({k, l} - {m}).pop()
                G[a, b] = -0.5 * sg[(x, m)] * sg[(y, m)]
    return pairs, G


def verify_inner_product_tables(c: PlateauComplex, s: SignAssignment | None = None) -> InnerProductReport:
    """Deviation of measured normal inner products from the Y and T tables."""
    s = assign_signs(c) if s is None else s
    yr = 0.0
    for ci in range(len(c.junctions)):
        _, nu = curve_frames(c, ci)
        sg = np.asarray(s.curve_signs[ci], float)
        for i, j in itertools.combinations(range(3), 2):
            dev = np.einsum("nk,nk->n", nu[:, i], nu[:, j]) + 0.5 * sg[i] * sg[j]
            yr = max(yr, float(np.abs(dev).max()))
    tr = 0.0
    tables = []
    for q_idx, q in enumerate(c.t_points):
        pairs, G = expected_t_table(s, q_idx)
        N = np.array([c.dof_normals[c.dof(s.t_patches[q_idx][pq], q)] for pq in pairs])
        M = N @ N.T
        tr = max(tr, float(np.abs(M - G).max()))
        tables.append((M, G))
    return InnerProductReport(yr, tr, tuple(tables))


# ------------------------------------------------------ constraints, basis
def constraint_matrix(c: PlateauComplex, s: SignAssignment | None = None) -> sp.csr_matrix:
    """Rows sum_i sign_i f_i = 0, one per (junction curve, vertex)."""
    s = assign_signs(c) if s is None else s
    rows, cols, vals = [], [], []
    r = 0
    for ci in range(len(c.junctions)):
        d = _curve_dofs(c, ci)
        if c.junction_closed[ci]:
            d = d[:-1]
        sg = np.asarray(s.curve_signs[ci], float)
        n = len(d)
        rows.append(np.repeat(np.arange(r, r + n), 3))
        cols.append(d.ravel())
        vals.append(np.tile(sg, n))
        r += n
    if r == 0:
        return sp.csr_matrix((0, c.n_dofs))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(r, c.n_dofs)
    )


def null_space_basis(c: PlateauComplex, s: SignAssignment | None = None) -> sp.csr_matrix:
    """Sparse orthonormal basis Z of compatible fields vanishing on the boundary.

    Constraints only couple dofs at the same vertex, so the null space is
    assembled block by block with a dense SVD per constrained vertex.
    """
    s = assign_signs(c) if s is None else s
    B = constraint_matrix(c, s).tocoo()
    free = ~c.dof_boundary
    # group constraint rows by the vertex they live on
    row_vertex = np.full(B.shape[0], -1, dtype=np.int64)
    row_vertex[B.row] = c.dof_vertex[B.col]
    Bc = B.tocsr()
    constrained_dofs = np.zeros(c.n_dofs, dtype=bool)
    constrained_dofs[B.col] = True
    zr, zc, zv = [], [], []
    col = 0
    plain = np.flatnonzero(free & ~constrained_dofs)
    zr.append(plain)
    zc.append(np.arange(col, col + len(plain)))
    zv.append(np.ones(len(plain)))
    col += len(plain)
    order = np.argsort(row_vertex, kind="stable")
    rv = row_vertex[order]
    splits = np.flatnonzero(np.diff(rv)) + 1
    for grp in np.split(order, splits) if len(order) else []:
        v = row_vertex[grp[0]]
        dofs = np.flatnonzero((c.dof_vertex == v) & free)
        if len(dofs) == 0:
            continue
        block = Bc[grp][:, dofs].toarray()
        _, S, Vt = np.linalg.svd(block)
        rank = int(np.sum(S > 1e-12 * max(S.max(initial=0.0), 1.0)))
        N = Vt[rank:].T
        N[np.abs(N) < 1e-15] = 0.0
        for k in range(N.shape[1]):
            nz = np.flatnonzero(N[:, k])
            zr.append(dofs[nz])
            zc.append(np.full(len(nz), col))
            zv.append(N[nz, k])
            col += 1
    return sp.csc_matrix((np.concatenate(zv), (np.concatenate(zr), np.concatenate(zc))), shape=(c.n_dofs, col))


def random_compatible_field(c: PlateauComplex, rng, s: SignAssignment | None = None, Z=None) -> ScalarField:
    Z = null_space_basis(c, s) if Z is None else Z
    return ScalarField(c, Z @ rng.standard_normal(Z.shape[1]))


def t_point_compatible_rank(c: PlateauComplex, s: SignAssignment, q_idx: int) -> tuple[int, int]:
    """(rank of the four curve conditions, dimension of compatible values) at a T-point."""
    q = c.t_points[q_idx]
    B = constraint_matrix(c, s)
    dofs = np.flatnonzero(c.dof_vertex == q)
    rows = np.unique(B[:, dofs].nonzero()[0])
    block = B[rows][:, dofs].toarray()
    r = int(np.linalg.matrix_rank(block))
    return r, len(dofs) - r


# ------------------------------------------------------ region indicators
def locally_constant_field(c: PlateauComplex, regions, region: int) -> ScalarField:
    """+1 where the patch normal points into the region, -1 where it points out, 0 elsewhere."""
    if not 0 <= int(region) < regions.n_regions:
        raise RegionUnknownError(f"region {region} not in 0..{regions.n_regions - 1}")
    per_patch = {}
    for p in c.patch_ids:
        plus, minus = regions.sides.get(p, (None, None))
        per_patch[p] = 1.0 if plus == region else (-1.0 if minus == region else 0.0)
    vals = np.array([per_patch[p] for p in c.dof_patch.tolist()])
    return ScalarField(c, vals)


# ------------------------------------------------------------------- files
def field_from_payload(c: PlateauComplex, data: dict):
    try:
        if "values" in data:
            return ScalarField.from_entries(c, data["values"])
        V = np.zeros((c.n_vertices, 3))
        for row in data["vectors"]:
            V[int(row[0])] = [float(x) for x in row[1:4]]
        return VectorField(c, V)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed field: {exc}") from exc


def field_to_payload(f) -> dict:
    if isinstance(f, ScalarField):
        return {"values": f.entries()}
    return {"vectors": f.entries()}
