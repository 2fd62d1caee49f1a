"""Weighted multiple-junction surfaces: q sheets with densities sharing one curve.

Every sheet is a manifold mesh whose boundary contains the shared curve
Gamma. Dofs are (sheet, vertex) pairs numbered sheet-major exactly like the
per-patch dofs of a Plateau complex, so with three unit-weight sheets every
matrix here coincides with its unweighted counterpart.

Fields are compatible along Gamma when a single vector W normal to Gamma
produces every sheet value, phi^i = W . nu^i; at each Gamma vertex that
leaves (at most) two free dofs out of q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from . import _mesh
from .complex import PlateauComplex, build_complex
from .errors import (
    AngleDegeneracyError,
    DisconnectedError,
    EmptySubspaceError,
    ExtentError,
    NotConeError,
    NotStationaryError,
    StructureError,
)
from .geometry import compute_curvature, mixed_area
from .variation import TOL_STAT_REL, VariationForm, mass_matrix, stiffness_matrix

RETRY_STEP_DEG = 11.25
MAX_RETRIES = 16
TOL_DEGENERATE = 1e-9


@dataclass(frozen=True)
class GammaFrame:
    """Frames along Gamma: tangent (n,3), normals/conormals (n,q,3), signs (q,)."""

    tangent: np.ndarray
    normals: np.ndarray
    conormals: np.ndarray
    signs: np.ndarray
    curvature: np.ndarray
    weights: np.ndarray


@dataclass(eq=False)
class MultiJunctionSurface:
    vertices: np.ndarray
    sheet_triangles: list
    theta: np.ndarray
    gamma: np.ndarray
    closed: bool
    sheets: list  # single-patch complexes on compacted vertices
    sheet_vertices: list  # compact -> global vertex index
    frame: GammaFrame
    _cache: dict = field(default_factory=dict, repr=False)

    # ------------------------------------------------------------ building
    @classmethod
    def build(cls, vertices, sheets, theta, gamma) -> MultiJunctionSurface:
        V = np.asarray(vertices, dtype=float)
        tris = [np.asarray(t, dtype=np.int64).reshape(-1, 3) for t in sheets]
        theta = np.asarray(theta, dtype=float).ravel()
        gamma = np.asarray(gamma, dtype=np.int64).ravel()
        q = len(tris)
        if q < 2:
            raise StructureError("a multiple junction needs at least two sheets")
        if len(theta) != q:
            raise StructureError(f"{len(theta)} weights for {q} sheets")
        if np.any(theta <= 0):
            raise StructureError("sheet weights must be positive")
        if len(gamma) < 2:
            raise StructureError("Gamma needs at least two vertices")
        closed = bool(gamma[0] == gamma[-1])
        gedges = {_mesh.edge_key(a, b) for a, b in zip(gamma[:-1].tolist(), gamma[1:].tolist())}
        built, vmaps = [], []
        for i, T in enumerate(tris):
            _check_oriented(T, i)
            used = np.unique(T)
            local = np.searchsorted(used, T)
            c = build_complex(V[used], local)
            bedges = {_mesh.edge_key(int(used[a]), int(used[b])) for a, b in c.edges[c.edge_valence == 1]}
            missing = gedges - bedges
            if missing:
                raise StructureError(f"sheet {i} does not have Gamma on its boundary (edge {sorted(missing)[0]})")
            built.append(c)
            vmaps.append(used)
        m = cls(V, tris, theta, gamma, closed, built, vmaps, None)
        m.frame = m._frames()
        return m

    @classmethod
    def from_complex(cls, c: PlateauComplex, theta=None) -> MultiJunctionSurface:
        """Three-sheet surface from a complex with a single junction curve."""
        if len(c.junctions) != 1 or c.t_points:
            raise StructureError("need exactly one junction curve and no T-points")
        pids = c.junction_patches[0]
        sheets = [c.triangles[c.tri_patch == p] for p in pids]
        theta = np.ones(3) if theta is None else theta
        return cls.build(c.vertices, sheets, theta, c.junctions[0])

    @property
    def q(self) -> int:
        return len(self.sheets)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    # ---------------------------------------------------------------- dofs
    @property
    def dof_keys(self) -> np.ndarray:
        if "keys" not in self._cache:
            nv = self.n_vertices
            self._cache["keys"] = np.concatenate([i * nv + vm for i, vm in enumerate(self.sheet_vertices)])
        return self._cache["keys"]

    @property
    def n_dofs(self) -> int:
        return len(self.dof_keys)

    @property
    def sheet_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([len(vm) for vm in self.sheet_vertices])])

    def dof(self, sheet: int, vertices) -> np.ndarray:
        """Global dof index of (sheet, vertex) pairs."""
        vm = self.sheet_vertices[sheet]
        v = np.asarray(vertices, dtype=np.int64)
        k = np.searchsorted(vm, v)
        if np.any(k >= len(vm)) or np.any(vm[np.minimum(k, len(vm) - 1)] != v):
            raise StructureError(f"vertex not on sheet {sheet}")
        return self.sheet_offsets[sheet] + k

    @property
    def dof_vertex(self) -> np.ndarray:
        return self.dof_keys % self.n_vertices

    @property
    def dof_sheet(self) -> np.ndarray:
        return self.dof_keys // self.n_vertices

    @property
    def gamma_dofs(self) -> np.ndarray:
        """(n, q) dofs of the Gamma vertices on every sheet."""
        return np.stack([self.dof(i, self.gamma) for i in range(self.q)], axis=1)

    @property
    def outer_boundary(self) -> np.ndarray:
        """Per-vertex mask of the artificial boundary (sheet boundary off Gamma)."""
        if "outer" not in self._cache:
            out = np.zeros(self.n_vertices, dtype=bool)
            gedges = {_mesh.edge_key(a, b) for a, b in zip(self.gamma[:-1].tolist(), self.gamma[1:].tolist())}
            for c, vm in zip(self.sheets, self.sheet_vertices):
                for a, b in c.edges[c.edge_valence == 1]:
                    ga, gb = int(vm[a]), int(vm[b])
                    if _mesh.edge_key(ga, gb) not in gedges:
                        out[ga] = out[gb] = True
            self._cache["outer"] = out
        return self._cache["outer"]

    @property
    def total_area(self) -> float:
        return float(sum(t * c.tri_areas.sum() for t, c in zip(self.theta, self.sheets)))

    # -------------------------------------------------------------- frames
    def _frames(self) -> GammaFrame:
        V = self.vertices
        g = self.gamma
        pts = V[g]
        t = _mesh.polyline_tangents(pts, closed=self.closed)
        n = len(g)
        nu = np.zeros((n, self.q, 3))
        signs = np.zeros(self.q)
        pos = {int(v): k for k, v in enumerate(g[:-1] if self.closed else g)}
        for i, T in enumerate(self.sheet_triangles):
            tn, _ = _mesh.triangle_frames(V, T)
            acc = np.zeros((n, 3))
            sg = set()
            for a, b in zip(g[:-1].tolist(), g[1:].tolist()):
                rows = np.flatnonzero(np.sum((T == a) | (T == b), axis=1) == 2)
                for r in rows:
                    for v in (a, b):
                        acc[pos[v]] += tn[r]
                    sg.add(1 if _mesh.directed_in_triangle(T[r], a, b) else -1)
            if len(sg) != 1:
                raise StructureError(f"sheet {i} induces inconsistent orientations on Gamma")
            signs[i] = sg.pop()
            if self.closed:
                acc[-1] = acc[0]
            acc -= np.sum(acc * t, axis=1)[:, None] * t
            nu[:, i] = acc / np.linalg.norm(acc, axis=1)[:, None]
        tau = signs[None, :, None] * np.cross(t[:, None, :], nu)
        w = _mesh.polyline_weights(pts)
        if self.closed:
            w[0] += w[-1]
            w[-1] = w[0]
        return GammaFrame(t, nu, tau, signs, _mesh.polyline_curvature(pts, closed=self.closed), w)

    def interior_gamma(self) -> np.ndarray:
        """Mask over Gamma entries that are not on the artificial boundary nor the closing repeat."""
        keep = ~self.outer_boundary[self.gamma]
        if self.closed:
            keep[-1] = False
        return keep

    def conormal_sum(self) -> np.ndarray:
        """|sum_i theta_i tau_i| at every Gamma vertex."""
        tau = self.frame.conormals
        return np.linalg.norm(np.einsum("i,nij->nj", self.theta, tau), axis=1)

    # ----------------------------------------------------------- curvature
    def curvature(self) -> dict:
        """Per-dof |A|^2, mean curvature (times dof normal) and mixed area."""
        if "curv" not in self._cache:
            a2, hn, area = [], [], []
            for c in self.sheets:
                cd = compute_curvature(c)
                a2.append(cd.norm_A2)
                hn.append(cd.mean_curvature[:, None] * c.dof_normals)
                area.append(mixed_area(c))
            self._cache["curv"] = {
                "norm_A2": np.concatenate(a2),
                "H_normal": np.concatenate(hn),
                "area": np.concatenate(area),
                "max_abs_H": max(compute_curvature(c).max_abs_H for c in self.sheets),
            }
        return self._cache["curv"]


def _check_oriented(T, sheet):
    seen = {}
    for tri in T.tolist():
        for k in range(3):
            a, b = tri[k], tri[(k + 1) % 3]
            if (a, b) in seen:
                raise StructureError(f"sheet {sheet} is not consistently oriented at edge ({a}, {b})")
            seen[(a, b)] = True


# --------------------------------------------------------- intrinsic distance
def _distance_graph(m: MultiJunctionSurface) -> sp.csr_matrix:
    """Edge graph of all sheets plus unfolded shortcuts across edge-adjacent triangle pairs."""
    if "graph" in m._cache:
        return m._cache["graph"]
    V = m.vertices
    rows, cols, vals = [], [], []
    for T in m.sheet_triangles:
        for k in range(3):
            a, b = T[:, k], T[:, (k + 1) % 3]
            rows.append(a)
            cols.append(b)
            vals.append(np.linalg.norm(V[a] - V[b], axis=1))
        # shortcut between the apexes of two triangles sharing an edge, when
        # the straight segment of the unfolded pair crosses that edge
        edges, tri_edges = _mesh.edge_table(T)
        owner = {}
        for t_i, es in enumerate(tri_edges.tolist()):
            for e in es:
                owner.setdefault(e, []).append(t_i)
        for e, ts in owner.items():
            if len(ts) != 2:
                continue
            a, b = edges[e]
            p = [int(x) for x in T[ts[0]] if x != a and x != b][0]
            r = [int(x) for x in T[ts[1]] if x != a and x != b][0]
            d = _unfolded_length(V[a], V[b], V[p], V[r])
            if d is not None:
                rows.append(np.array([p]))
                cols.append(np.array([r]))
                vals.append(np.array([d]))
    n = m.n_vertices
    G = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    G = _sym_min(G)
    m._cache["graph"] = G
    return G


def _sym_min(G):
    """Symmetric graph keeping the shortest of any duplicate edges."""
    G = G.tocoo()
    r = np.concatenate([G.row, G.col])
    c = np.concatenate([G.col, G.row])
    v = np.concatenate([G.data, G.data])
    order = np.lexsort((v, c, r))
    r, c, v = r[order], c[order], v[order]
    first = np.ones(len(r), dtype=bool)
    first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    return sp.csr_matrix((v[first], (r[first], c[first])), shape=G.shape)


def _unfolded_length(a, b, p, r):
    """Length p -> r with triangle (a, b, r) hinged into the plane of (a, b, p); None if not convex."""
    e = b - a
    L = np.linalg.norm(e)
    e = e / L
    # planar coordinates: along the edge and signed height on each side
    xp, xr = np.dot(p - a, e), np.dot(r - a, e)
    yp = np.linalg.norm((p - a) - xp * e)
    yr = -np.linalg.norm((r - a) - xr * e)
    if yp <= 0 or yr >= 0:
        return None
    # crossing point of segment p -> r with the edge line
    s = yp / (yp - yr)
    x = xp + s * (xr - xp)
    if x <= 0 or x >= L:
        return None
    return float(math.hypot(xp - xr, yp - yr))


def _locate(m: MultiJunctionSurface, x, sheet=None, rings: int = 2):
    """Seed vertices and chord offsets for a surface point.

    The point is placed on its nearest triangle; every vertex within
    ``rings`` edge rings of that triangle (on the same sheet) is a seed at
    its straight-line distance, which is exact on flat sheets.
    """
    x = np.asarray(x, dtype=float)
    best = None
    cand = range(m.q) if sheet is None else [int(sheet)]
    for i in cand:
        T = m.sheet_triangles[i]
        key = ("tree", i)
        if key not in m._cache:
            m._cache[key] = cKDTree(m.vertices[T].mean(axis=1))
        tree = m._cache[key]
        _, k = tree.query(x, k=min(8, len(T)))
        for t in np.atleast_1d(k):
            d = _point_triangle_distance(x, m.vertices[T[t]])
            if best is None or d < best[0]:
                best = (d, i, T[t])
    _, i, tri = best
    A = _sheet_adjacency(m, i)
    seeds = np.zeros(m.n_vertices, dtype=bool)
    seeds[tri] = True
    for _ in range(rings):
        seeds |= (A @ seeds.astype(float)) > 0
    verts = np.flatnonzero(seeds)
    return verts, np.linalg.norm(m.vertices[verts] - x, axis=1), i


def _sheet_adjacency(m: MultiJunctionSurface, i: int) -> sp.csr_matrix:
    key = ("adj", i)
    if key not in m._cache:
        T = m.sheet_triangles[i]
        r = np.concatenate([T[:, 0], T[:, 1], T[:, 2]])
        c = np.concatenate([T[:, 1], T[:, 2], T[:, 0]])
        n = m.n_vertices
        A = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))
        m._cache[key] = ((A + A.T) > 0).astype(float).tocsr()
    return m._cache[key]


def _point_triangle_distance(x, tri):
    a, b, c = tri
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n)
    y = x - np.dot(x - a, n) * n
    # barycentric test, else distance to the nearest edge
    v0, v1, v2 = b - a, c - a, y - a
    d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
    d20, d21 = v2 @ v0, v2 @ v1
    den = d00 * d11 - d01 * d01
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    if v >= 0 and w >= 0 and v + w <= 1:
        return float(np.linalg.norm(x - y))
    out = np.inf
    for p, q in ((a, b), (b, c), (c, a)):
        s = np.clip(np.dot(x - p, q - p) / np.dot(q - p, q - p), 0.0, 1.0)
        out = min(out, float(np.linalg.norm(x - (p + s * (q - p)))))
    return out


def distance_field(m: MultiJunctionSurface, p0, sheet=None) -> np.ndarray:
    """Intrinsic distance from surface point p0 to every vertex (+inf when unreachable)."""
    verts, off, _ = _locate(m, p0, sheet)
    D = dijkstra(_distance_graph(m), directed=False, indices=verts)
    return np.min(D + off[:, None], axis=0)


def intrinsic_distance(m: MultiJunctionSurface, x, y, sheet_x=None, sheet_y=None, strict: bool = False) -> float:
    """Shortest chain length from x to y; paths change sheets only at Gamma.

    Returns +inf when no chain exists, or raises :class:`DisconnectedError`
    with ``strict``.
    """
    dx = distance_field(m, x, sheet_x)
    verts, off, sy = _locate(m, y, sheet_y)
    d = float(np.min(dx[verts] + off))
    # nearby points on one sheet: the direct chord (Gamma seeds are shared by all sheets, so check the sheet too)
    vx, _, sx = _locate(m, x, sheet_x)
    if sx == sy and np.intersect1d(vx, verts).size:
        d = min(d, float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float))))
    if strict and not math.isfinite(d):
        raise DisconnectedError("no chain through Gamma joins the two points")
    return d


# ---------------------------------------------------------- equilibrium angles
def directed_angles(m: MultiJunctionSurface) -> np.ndarray:
    """(n, q, q) directed angle from nu^i to nu^j in the plane normal to Gamma, in [0, 2 pi)."""
    nu = m.frame.normals
    t = m.frame.tangent
    cr = np.cross(nu[:, :, None, :], nu[:, None, :, :])
    s = np.einsum("nijk,nk->nij", cr, t)
    c = np.einsum("nik,njk->nij", nu, nu)
    return np.mod(np.arctan2(s, c), 2 * np.pi)


def _circular_center(a):
    return float(np.angle(np.mean(np.exp(1j * a))))


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class EquilibriumReport:
    pairs: list  # (i, j)
    samples: dict  # (i, j) -> angles along Gamma (radians)
    mean: dict
    deviation: dict  # max |angle - mean|
    spread: dict  # max - min
    tol_angle: float
    equilibrium: bool
    conormal_angles: dict  # diagnostics: angles between tau^i and tau^j

    @property
    def max_deviation(self) -> float:
        return max(self.deviation.values(), default=0.0)

    @property
    def max_spread(self) -> float:
        return max(self.spread.values(), default=0.0)

    def as_dict(self) -> dict:
        return {
            "tol_angle": self.tol_angle,
            "equilibrium": self.equilibrium,
            "max_deviation_deg": math.degrees(self.max_deviation),
            "max_spread_deg": math.degrees(self.max_spread),
            "pairs": [
                {
                    "i": i,
                    "j": j,
                    "mean_deg": math.degrees(self.mean[(i, j)]),
                    "deviation_deg": math.degrees(self.deviation[(i, j)]),
                    "spread_deg": math.degrees(self.spread[(i, j)]),
                    "conormal_mean_deg": math.degrees(self.conormal_angles[(i, j)]),
                }
                for i, j in self.pairs
            ],
        }


def check_equilibrium_angles(m: MultiJunctionSurface, tol_angle: float = 1e-6) -> EquilibriumReport:
    """Directed normal angles per sheet pair at every Gamma vertex."""
    keep = np.ones(len(m.gamma), dtype=bool)
    if m.closed:
        keep[-1] = False
    ang = directed_angles(m)[keep]
    tau = m.frame.conormals[keep]
    pairs, samples, mean, dev, spread, tang = [], {}, {}, {}, {}, {}
    for i in range(m.q):
        for j in range(i + 1, m.q):
            a = ang[:, i, j]
            mu = _circular_center(a)
            rel = _wrap(a - mu)
            pairs.append((i, j))
            samples[(i, j)] = a
            mean[(i, j)] = float(np.mod(mu, 2 * np.pi))
            dev[(i, j)] = float(np.abs(rel).max())
            spread[(i, j)] = float(rel.max() - rel.min())
            cosv = np.clip(np.einsum("nk,nk->n", tau[:, i], tau[:, j]), -1, 1)
            tang[(i, j)] = float(np.mean(np.arccos(cosv)))
    ok = all(d <= tol_angle for d in dev.values())
    return EquilibriumReport(pairs, samples, mean, dev, spread, float(tol_angle), ok, tang)


# ------------------------------------------------------------ paired fields
@dataclass(frozen=True)
class PairedFields:
    phi1: np.ndarray  # per dof
    phi2: np.ndarray
    c1: np.ndarray  # per sheet
    c2: np.ndarray
    alpha: float  # angle from nu^1 to W_1 (radians)
    W1: np.ndarray  # (n, 3) unit field along Gamma
    W2: np.ndarray
    cutoff: np.ndarray  # per vertex
    rho: np.ndarray  # per vertex intrinsic distance to p0
    retries: int
    degenerate: bool

    def gamma_values(self, m: MultiJunctionSurface, which: int = 1) -> np.ndarray:
        phi = self.phi1 if which == 1 else self.phi2
        return phi[m.gamma_dofs]


def _coefficients(beta, alpha):
    # angle(W1, nu^i) = beta_i - alpha, angle(W2, nu^i) = beta_i - alpha - pi/2
    return np.cos(beta - alpha), np.sin(beta - alpha)


def cutoff_values(rho, n: float) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = 1.0 - np.log(np.maximum(rho, 1e-300)) / n
    return np.where(rho <= 1.0, 1.0, np.where(np.isfinite(rho), np.clip(z, 0.0, 1.0), 0.0))


def build_paired_test_fields(
    m: MultiJunctionSurface,
    p0,
    n: float,
    alpha_deg: float | None = None,
    sheet=None,
    tol: float = TOL_DEGENERATE,
) -> PairedFields:
    """Two fields c_j^i * cutoff(rho) with c_j^i = W_j . nu^i constant per sheet.

    ``alpha_deg`` fixes the angle from nu^1 to W_1 and skips the degeneracy
    search. Otherwise angles 0, 11.25, ... degrees are tried until no c_j^i
    vanishes, raising :class:`AngleDegeneracyError` after the last retry.
    """
    eq = check_equilibrium_angles(m)
    beta = np.array([0.0] + [eq.mean[(0, j)] for j in range(1, m.q)])
    retries = 0
    if alpha_deg is not None:
        alpha = math.radians(alpha_deg)
        c1, c2 = _coefficients(beta, alpha)
        degenerate = bool(min(np.abs(c1).min(), np.abs(c2).min()) <= tol)
    else:
        for k in range(MAX_RETRIES + 1):
            alpha = math.radians(k * RETRY_STEP_DEG)
            c1, c2 = _coefficients(beta, alpha)
            if min(np.abs(c1).min(), np.abs(c2).min()) > tol:
                break
        else:
            raise AngleDegeneracyError(
                f"some c_j^i vanishes for every trial angle 0..{MAX_RETRIES * RETRY_STEP_DEG:g} degrees"
            )
        retries = k
        degenerate = False
    rho = distance_field(m, p0, sheet)
    zeta = cutoff_values(rho, n)
    zd = zeta[m.dof_vertex]
    sh = m.dof_sheet
    nu1 = m.frame.normals[:, 0]
    t = m.frame.tangent
    bi = np.cross(t, nu1)
    W1 = math.cos(alpha) * nu1 + math.sin(alpha) * bi
    W2 = -math.sin(alpha) * nu1 + math.cos(alpha) * bi
    return PairedFields(c1[sh] * zd, c2[sh] * zd, c1, c2, alpha, W1, W2, zeta, rho, retries, degenerate)


def compatibility_residual(m: MultiJunctionSurface, phi) -> float:
    """Largest least-squares residual of phi^i = W . nu^i over W normal to Gamma, per Gamma vertex."""
    vals = np.asarray(phi, dtype=float)[m.gamma_dofs]
    nu = m.frame.normals
    out = 0.0
    for k in range(len(m.gamma)):
        N = nu[k]  # (q, 3)
        W, *_ = np.linalg.lstsq(N, vals[k], rcond=None)
        out = max(out, float(np.abs(N @ W - vals[k]).max()))
    return out


# --------------------------------------------------------- stability form
def _curve_matrix(m: MultiJunctionSurface) -> sp.csr_matrix:
    """Exact int_Gamma theta_i g_i phi_i^2 with g_i = H_Gamma . tau_i linear on segments."""
    fr = m.frame
    d = m.gamma_dofs
    pts = m.vertices[m.gamma]
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    g = np.einsum("nj,nij->ni", fr.curvature, fr.conormals)
    rows, cols, vals = [], [], []
    for i in range(m.q):
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
    n = m.n_dofs
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def _block_diag(mats) -> sp.csr_matrix:
    return sp.block_diag(mats, format="csr")


def compatible_basis(m: MultiJunctionSurface):
    """(B, Z): constraint rows and an orthonormal basis of compatible boundary-zero fields."""
    nd = m.n_dofs
    outer = m.outer_boundary[m.dof_vertex]
    gd = m.gamma_dofs
    n_g = len(m.gamma) - (1 if m.closed else 0)
    on_gamma = np.zeros(nd, dtype=bool)
    on_gamma[gd[:n_g].ravel()] = True
    brow, bcol, bval = [], [], []
    zrow, zcol, zval = [], [], []
    ncol = 0
    nrow = 0
    for k in range(n_g):
        dofs = gd[k]
        N = m.frame.normals[k]  # (q, 3), rows normal to Gamma
        U, S, _ = np.linalg.svd(N, full_matrices=True)
        r = int(np.sum(S > 1e-10 * max(S.max(), 1e-300)))
        comp = U[:, r:]  # orthogonal complement of the W-image: constraint rows
        for j in range(comp.shape[1]):
            brow += [nrow] * m.q
            bcol += dofs.tolist()
            bval += comp[:, j].tolist()
            nrow += 1
        if outer[dofs[0]]:
            continue
        img = U[:, :r]
        for j in range(r):
            zrow += dofs.tolist()
            zcol += [ncol] * m.q
            zval += img[:, j].tolist()
            ncol += 1
    free = np.flatnonzero(~outer & ~on_gamma)
    zrow += free.tolist()
    zcol += list(range(ncol, ncol + len(free)))
    zval += [1.0] * len(free)
    ncol += len(free)
    B = sp.csr_matrix((bval, (brow, bcol)), shape=(nrow, nd))
    Z = sp.csc_matrix((zval, (zrow, zcol)), shape=(nd, ncol))
    return B, Z


def weighted_stability_form(m: MultiJunctionSurface, check_stationary: bool = False, tol_stat: float | None = None) -> VariationForm:
    """theta-weighted second variation over W-compatible boundary-zero fields."""
    if check_stationary:
        rep = weighted_stationarity(m, tol_stat)
        if not rep["stationary"]:
            raise NotStationaryError(f"first variation residual {rep['residual']:.3e} exceeds tol_stat {rep['tol']:.3e}")
    a2 = m.curvature()["norm_A2"]
    off = m.sheet_offsets
    K = _block_diag([th * stiffness_matrix(c) for th, c in zip(m.theta, m.sheets)])
    Pm = _block_diag(
        [th * mass_matrix(c, a2[off[i] : off[i + 1]]) for i, (th, c) in enumerate(zip(m.theta, m.sheets))]
    )
    M = _block_diag([th * mass_matrix(c) for th, c in zip(m.theta, m.sheets)])
    th_d = m.theta[m.dof_sheet]
    # curve entries couple dofs of one sheet only, so row scaling is symmetric
    C = sp.diags(th_d) @ _curve_matrix(m)
    Q = (K - Pm - C).tocsr()
    Q = (0.5 * (Q + Q.T)).tocsr()
    B, Z = compatible_basis(m)
    if Z.shape[1] == 0:
        raise EmptySubspaceError("no compatible field vanishes on the boundary")
    diam = float(np.linalg.norm(np.ptp(m.vertices, axis=0)))
    return VariationForm(
        Q=Q,
        M=M.tocsr(),
        B=B,
        Z=Z,
        stiffness=K,
        potential=Pm,
        curve=C.tocsr(),
        boundary=m.outer_boundary[m.dof_vertex].copy(),
        length_scale=diam,
        meta={"theta": m.theta.tolist()},
    )


def weighted_first_variation_gradient(m: MultiJunctionSurface) -> np.ndarray:
    cv = m.curvature()
    g = np.zeros((m.n_vertices, 3))
    th = m.theta[m.dof_sheet]
    np.add.at(g, m.dof_vertex, -(th * cv["area"])[:, None] * cv["H_normal"])
    fr = m.frame
    tau = np.einsum("i,nij->nj", m.theta, fr.conormals)
    verts, w = m.gamma, fr.weights
    if m.closed:
        verts, w, tau = verts[:-1], w[:-1], tau[:-1]
    np.add.at(g, verts, w[:, None] * tau)
    g[m.outer_boundary] = 0.0
    return g


def weighted_stationarity(m: MultiJunctionSurface, tol_stat: float | None = None) -> dict:
    g = weighted_first_variation_gradient(m)
    tol = TOL_STAT_REL * m.total_area if tol_stat is None else float(tol_stat)
    res = float(np.linalg.norm(g))
    keep = m.interior_gamma()
    cs = m.conormal_sum()[keep]
    return {
        "residual": res,
        "tol": tol,
        "stationary": res <= tol,
        "max_abs_H": float(m.curvature()["max_abs_H"]),
        "max_weighted_conormal_sum": float(cs.max(initial=0.0)),
    }


# -------------------------------------------------------------- cutoff test
def sheet_apex_angles(m: MultiJunctionSurface, p0, tol: float | None = None) -> np.ndarray:
    """Per-sheet sum of triangle angles at p0; every triangle plane must contain p0."""
    p0 = np.asarray(p0, dtype=float)
    diam = float(np.linalg.norm(np.ptp(m.vertices, axis=0)))
    tol = 1e-5 * diam if tol is None else tol
    V = m.vertices
    d = np.linalg.norm(V - p0, axis=1)
    apex = np.flatnonzero(d <= tol)
    if len(apex) != 1:
        raise NotConeError("p0 is not a vertex of the surface")
    q0 = int(apex[0])
    out = np.zeros(m.q)
    for i, T in enumerate(m.sheet_triangles):
        tn, _ = _mesh.triangle_frames(V, T)
        off = np.abs(np.einsum("ij,ij->i", tn, V[T[:, 0]] - p0))
        if off.max() > tol:
            raise NotConeError(f"sheet {i} triangle planes miss p0 by up to {off.max():.3e}")
        for row in T[np.any(T == q0, axis=1)].tolist():
            k = row.index(q0)
            u = V[row[(k + 1) % 3]] - V[q0]
            w = V[row[(k + 2) % 3]] - V[q0]
            out[i] += math.atan2(np.linalg.norm(np.cross(u, w)), float(np.dot(u, w)))
    return out


@dataclass(frozen=True)
class AppendixReport:
    n: list
    lhs: list
    rhs: list
    rhs_times_n: list
    curve_term: list
    per_sheet_rhs: list  # per n, per-sheet rhs before summation (linear in theta)
    slope: float
    mode: str
    c1: list
    c2: list
    alpha_deg: float
    area_growth: float

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n": self.n,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "rhs_times_n": self.rhs_times_n,
            "curve_term": self.curve_term,
            "per_sheet_rhs": self.per_sheet_rhs,
            "loglog_slope": self.slope,
            "c1": self.c1,
            "c2": self.c2,
            "alpha_deg": self.alpha_deg,
            "area_growth_constant": self.area_growth,
        }


def appendix_bernstein_test(
    m: MultiJunctionSurface,
    p0,
    n_list=(1, 2, 3, 4, 5, 6, 7, 8),
    analytic: bool = False,
    alpha_deg: float | None = None,
    tol_stat: float | None = None,
    check_stationary: bool = True,
) -> AppendixReport:
    """Both sides of the paired-field inequality for each n.

    lhs(n) = sum_i theta_i [(c_1^i)^2 + (c_2^i)^2] int_{B_1} |A|^2 plus the
    paired curve terms; rhs(n) = sum_j sum_i theta_i int |grad phi_j^i|^2.
    In analytic mode the sheets must be flat sectors at p0 and the radial
    integral is done in closed form.
    """
    from .cutoff import loglog_slope

    if check_stationary:
        rep = weighted_stationarity(m, tol_stat)
        if not rep["stationary"]:
            raise NotStationaryError(f"first variation residual {rep['residual']:.3e} exceeds tol_stat {rep['tol']:.3e}")
    ns = [int(k) for k in n_list]
    pf = build_paired_test_fields(m, p0, max(ns), alpha_deg)
    csum = pf.c1**2 + pf.c2**2
    rho = pf.rho
    cv = m.curvature()
    inside = rho[m.dof_vertex] <= 1.0
    th_d = m.theta[m.dof_sheet]
    lhs_A = float(np.sum((csum[m.dof_sheet] * th_d * cv["norm_A2"] * cv["area"])[inside]))
    if analytic:
        angles = sheet_apex_angles(m, p0)
    else:
        reach = float(np.min(rho[m.outer_boundary])) if np.any(m.outer_boundary) else math.inf
        if math.exp(max(ns)) > reach:
            raise ExtentError(f"surface reaches intrinsic radius {reach:.4g} around p0, n={max(ns)} needs {math.exp(max(ns)):.4g}")
        Ks = [stiffness_matrix(c) for c in m.sheets]
    Cm = _curve_matrix(m)
    lhs, rhs, curve, per = [], [], [], []
    for n in ns:
        zeta = cutoff_values(rho, n)
        zd = zeta[m.dof_vertex]
        phis = [pf.c1[m.dof_sheet] * zd, pf.c2[m.dof_sheet] * zd]
        ct = sum(float(ph @ (Cm @ (th_d * ph))) for ph in phis)
        if analytic:
            e = angles / n
        else:
            e = np.array([float(zeta[vm] @ (K @ zeta[vm])) for K, vm in zip(Ks, m.sheet_vertices)])
        ps = (m.theta * csum * e).tolist()
        per.append(ps)
        rhs.append(float(sum(ps)))
        curve.append(ct)
        lhs.append(lhs_A + ct)
    area_growth = _area_growth(m, rho, analytic, angles if analytic else None)
    return AppendixReport(
        n=ns,
        lhs=lhs,
        rhs=rhs,
        rhs_times_n=[r * k for r, k in zip(rhs, ns)],
        curve_term=curve,
        per_sheet_rhs=per,
        slope=loglog_slope(ns, rhs) if all(r > 0 for r in rhs) else float("nan"),
        mode="analytic-cone" if analytic else "mesh",
        c1=pf.c1.tolist(),
        c2=pf.c2.tolist(),
        alpha_deg=math.degrees(pf.alpha),
        area_growth=area_growth,
    )


def _area_growth(m, rho, analytic, angles) -> float:
    """max_r |Sigma cap B_r| / r^2 over intrinsic balls (vertex-lumped areas)."""
    if analytic:
        return float(0.5 * np.sum(angles))
    cv = m.curvature()
    r_dof = rho[m.dof_vertex]
    reach = float(np.min(rho[m.outer_boundary])) if np.any(m.outer_boundary) else float(np.max(rho[np.isfinite(rho)]))
    best = 0.0
    for r in np.linspace(0.25 * reach, reach, 8):
        if r <= 0:
            continue
        best = max(best, float(np.sum(cv["area"][r_dof < r])) / r**2)
    return best
