"""Non-manifold triangulated 2-complexes with labeled patches and junctions.

A :class:`PlateauComplex` is a triangle mesh in R^3 whose edges have valence
1 (artificial truncation boundary), 2 (patch interior) or 3 (junction curve).
Patches are the edge-connected pieces of the regular part; junction curves
are polylines of valence-3 edges; T-points are vertices where four junction
curves end. Everything is validated once at construction and treated as
immutable afterwards.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _mesh
from .errors import OrientabilityError, StructureError

P, Y, T, BOUNDARY = "P", "Y", "T", "Boundary"


@dataclass(frozen=True, eq=False)
class PlateauComplex:
    vertices: np.ndarray
    triangles: np.ndarray
    tri_patch: np.ndarray
    patch_ids: tuple
    normal_side: dict
    junctions: tuple
    junction_closed: tuple
    junction_patches: tuple
    t_points: tuple
    boundary_edges: np.ndarray
    boundary_loops: tuple
    tol_geom: float
    fixed_edges: frozenset = field(default_factory=frozenset)

    # ----------------------------------------------------------- topology
    @cached_property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def _edges(self):
        return _mesh.edge_table(self.triangles)

    @property
    def edges(self) -> np.ndarray:
        return self._edges[0]

    @property
    def tri_edges(self) -> np.ndarray:
        return self._edges[1]

    @cached_property
    def edge_tris(self) -> list:
        return _edge_triangles(self.tri_edges, len(self.edges))

    @cached_property
    def edge_index(self) -> dict:
        return {(int(a), int(b)): k for k, (a, b) in enumerate(self.edges)}

    @cached_property
    def edge_valence(self) -> np.ndarray:
        return np.bincount(self.tri_edges.ravel(), minlength=len(self.edges))

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask

    @cached_property
    def junction_vertices(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        for curve in self.junctions:
            mask[curve] = True
        return mask

    @cached_property
    def vertex_curves(self) -> dict:
        """vertex -> list of (curve index, position along curve)."""
        out = defaultdict(list)
        for ci, curve in enumerate(self.junctions):
            stop = len(curve) - 1 if self.junction_closed[ci] else len(curve)
            for pos in range(stop):
                out[int(curve[pos])].append((ci, pos))
        return dict(out)

    @cached_property
    def roles(self) -> np.ndarray:
        """Local model label per vertex (see :func:`classify_local_model`)."""
        roles = np.full(self.n_vertices, P, dtype=object)
        roles[self.junction_vertices] = Y
        for q in self.t_points:
            roles[q] = T
        roles[self.boundary_vertices] = BOUNDARY
        return roles

    # ----------------------------------------------------------- geometry
    @cached_property
    def _tri_geom(self):
        n, area = _mesh.triangle_frames(self.vertices, self.triangles)
        side = np.array([self.normal_side[p] for p in self.tri_patch], dtype=float)
        return n * side[:, None], area

    @property
    def tri_normals(self) -> np.ndarray:
        """Unit patch normals per triangle (winding normal times normal_side)."""
        return self._tri_geom[0]

    @property
    def tri_areas(self) -> np.ndarray:
        return self._tri_geom[1]

    @cached_property
    def diameter(self) -> float:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    @cached_property
    def mean_edge_length(self) -> float:
        e = self.edges
        return float(np.mean(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)))

    # ------------------------------------------------ per-patch vertex dofs
    @cached_property
    def _dofs(self):
        nv = self.n_vertices
        pid = {p: k for k, p in enumerate(self.patch_ids)}
        tp = np.array([pid[p] for p in self.tri_patch], dtype=np.int64)
        keys = (tp[:, None] * nv + self.triangles).ravel()
        uniq, inv = np.unique(keys, return_inverse=True)
        return uniq, inv.reshape(-1, 3), tp

    @property
    def n_dofs(self) -> int:
        return len(self._dofs[0])

    @property
    def tri_dofs(self) -> np.ndarray:
        """(M, 3) dof index of each triangle corner."""
        return self._dofs[1]

    @cached_property
    def dof_vertex(self) -> np.ndarray:
        return self._dofs[0] % self.n_vertices

    @cached_property
    def dof_patch(self) -> np.ndarray:
        ids = np.asarray(self.patch_ids)
        return ids[self._dofs[0] // self.n_vertices]

    def dof(self, patch, vertex: int) -> int:
        k = self.patch_ids.index(patch)
        key = k * self.n_vertices + int(vertex)
        uniq = self._dofs[0]
        i = int(np.searchsorted(uniq, key))
        if i >= len(uniq) or uniq[i] != key:
            raise KeyError((patch, vertex))
        return i

    @cached_property
    def dof_normals(self) -> np.ndarray:
        """Area-weighted unit patch normal at every (patch, vertex) dof."""
        acc = np.zeros((self.n_dofs, 3))
        w = self.tri_normals * self.tri_areas[:, None]
        for k in range(3):
            np.add.at(acc, self.tri_dofs[:, k], w)
        return acc / np.linalg.norm(acc, axis=1)[:, None]

    @cached_property
    def hinge_normals(self) -> np.ndarray:
        """Per-dof normal averaged over hinge triangles (those with a junction edge at the vertex).

        Dofs without a hinge triangle fall back to :attr:`dof_normals`.
        """
        acc = np.zeros((self.n_dofs, 3))
        jedges = np.flatnonzero(self.edge_valence == 3)
        n = self.tri_normals
        for e in jedges:
            a, b = self.edges[e]
            for t in self.edge_tris[e]:
                row = self.triangles[t]
                for v in (a, b):
                    k = int(np.flatnonzero(row == v)[0])
                    acc[self.tri_dofs[t, k]] += n[t]
        norm = np.linalg.norm(acc, axis=1)
        out = self.dof_normals.copy()
        ok = norm > 0
        out[ok] = acc[ok] / norm[ok, None]
        return out

    @cached_property
    def dof_boundary(self) -> np.ndarray:
        return self.boundary_vertices[self.dof_vertex]

    def curve_points(self, ci: int) -> np.ndarray:
        return self.vertices[self.junctions[ci]]

    def patch_triangles(self, patch) -> np.ndarray:
        return np.flatnonzero(self.tri_patch == patch)

    def transformed(self, rotation=None, translation=None, scale: float = 1.0) -> "PlateauComplex":
        """Copy with ``x -> scale * R x + t`` applied to all vertices."""
        R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        t = np.zeros(3) if translation is None else np.asarray(translation, dtype=float)
        return build_complex(
            scale * self.vertices @ R.T + t,
            self.triangles,
            patch=self.tri_patch,
            junctions=[j.tolist() for j in self.junctions],
            t_points=self.t_points,
            normal_side=self.normal_side,
            fixed_edges=self.fixed_edges,
        )

    def summary(self) -> dict:
        return {
            "vertices": int(self.n_vertices),
            "triangles": int(len(self.triangles)),
            "patches": len(self.patch_ids),
            "junction_curves": len(self.junctions),
            "t_points": len(self.t_points),
            "boundary_loops": len(self.boundary_loops),
            "tol_geom": self.tol_geom,
        }


@dataclass(frozen=True)
class SignAssignment:
    """Orientation signs of every (junction curve, adjacent patch) pair.

    ``curve_signs[L][i]`` belongs to patch ``junction_patches[L][i]``. At a
    T-point ``t_curves[q]`` lists the four curves ending there (local indices
    0..3), ``t_patches[q][(i, j)]`` the patch bounded by local curves i and j,
    and ``t_signs[q][(i, j)]`` the sign of that patch on local curve j.
    """

    curve_signs: tuple
    t_curves: tuple
    t_patches: tuple
    t_signs: tuple
    residuals: tuple

    @property
    def max_residual(self) -> float:
        vals = [float(r.max()) for r in self.residuals if len(r)]
        return max(vals, default=0.0)

    def sign(self, curve: int, patch, c: PlateauComplex) -> int:
        return int(self.curve_signs[curve][c.junction_patches[curve].index(patch)])


# --------------------------------------------------------------------- build
def build_complex(
    vertices,
    triangles,
    patch=None,
    junctions=None,
    t_points=None,
    normal_side=None,
    tol_geom: float | None = None,
    fixed_edges: Iterable = (),
) -> PlateauComplex:
    """Validate raw arrays and return an immutable complex.

    Missing labels are inferred from edge valence. Triangles are reoriented
    so that each patch is coherently wound (the lowest-index triangle of each
    regular component keeps its winding).
    """
    verts = np.ascontiguousarray(vertices, dtype=float)
    tris = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    if verts.ndim != 2 or verts.shape[1] != 3:
        raise StructureError("vertices must be an (n, 3) array")
    if len(tris) == 0:
        raise StructureError("complex has no triangles")
    if tris.min() < 0 or tris.max() >= len(verts):
        raise StructureError("triangle references a missing vertex")
    if np.any((tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 0] == tris[:, 2])):
        raise StructureError("triangle with repeated vertex")
    if not np.all(np.isfinite(verts)):
        raise StructureError("non-finite vertex coordinates")

    edges, tri_edges = _mesh.edge_table(tris)
    valence = np.bincount(tri_edges.ravel(), minlength=len(edges))
    if valence.max() > 3:
        e = edges[int(np.argmax(valence))]
        raise StructureError(f"edge {tuple(e.tolist())} has valence {valence.max()}")
    edge_tris = _edge_triangles(tri_edges, len(edges))

    tris = _orient(tris, edges, tri_edges, valence, edge_tris)
    comp = _regular_components(tri_edges, valence, edge_tris, len(tris))
    if patch is None:
        tri_patch = comp
    else:
        tri_patch = np.asarray(patch).reshape(-1)
        if len(tri_patch) != len(tris):
            raise StructureError("patch label count does not match triangles")
        _check_patch_labels(tri_patch, comp, tri_edges, valence, edge_tris)
    patch_ids = tuple(sorted(set(tri_patch.tolist())))

    side = {p: 1 for p in patch_ids}
    if normal_side:
        for k, v in dict(normal_side).items():
            key = _coerce_patch_key(k, patch_ids)
            if int(v) not in (1, -1):
                raise StructureError(f"normal_side for patch {k} must be +1 or -1")
            side[key] = int(v)

    bmask = valence == 1
    boundary_edges = edges[bmask]
    boundary_loops = tuple(_trace_boundary(boundary_edges))

    jmask = valence == 3
    jedges = edges[jmask]
    jtri = [edge_tris[e] for e in np.flatnonzero(jmask)]
    jpatches = {}
    for e, ts in zip(jedges, jtri):
        ps = tuple(sorted({tri_patch[t].item() for t in ts}))
        if len(ps) != 3:
            raise StructureError(
                f"junction edge {tuple(e.tolist())} is shared by {len(ps)} distinct patches, need 3"
            )
        jpatches[(int(e[0]), int(e[1]))] = ps

    bverts = np.zeros(len(verts), dtype=bool)
    bverts[boundary_edges.ravel()] = True
    curves, closed = _junction_curves(jedges, junctions, bverts, verts)
    curve_patches = []
    for curve in curves:
        triples = {jpatches[_mesh.edge_key(int(a), int(b))] for a, b in zip(curve[:-1], curve[1:])}
        if len(triples) != 1:
            raise StructureError("patch triple changes along a junction curve")
        curve_patches.append(next(iter(triples)))

    tpts = _t_points(curves, closed, curve_patches, bverts)
    if t_points is not None and sorted(int(q) for q in t_points) != sorted(tpts):
        raise StructureError(
            f"declared t_points {sorted(int(q) for q in t_points)} differ from detected {sorted(tpts)}"
        )

    if tol_geom is None:
        lo, hi = verts.min(axis=0), verts.max(axis=0)
        tol_geom = 1e-8 * float(np.linalg.norm(hi - lo))

    fixed = frozenset(_mesh.edge_key(int(a), int(b)) for a, b in fixed_edges)
    c = PlateauComplex(
        vertices=verts,
        triangles=tris,
        tri_patch=tri_patch,
        patch_ids=patch_ids,
        normal_side=side,
        junctions=tuple(np.asarray(cv, dtype=np.int64) for cv in curves),
        junction_closed=tuple(closed),
        junction_patches=tuple(curve_patches),
        t_points=tuple(sorted(tpts)),
        boundary_edges=boundary_edges,
        boundary_loops=boundary_loops,
        tol_geom=float(tol_geom),
        fixed_edges=fixed,
    )
    _check_stars(c, edge_tris)
    # sign constancy is part of structural validity (non-orientable gluings)
    assign_signs(c)
    return c


def _coerce_patch_key(k, patch_ids):
    if k in patch_ids:
        return k
    try:
        ki = int(k)
    except (TypeError, ValueError):
        raise StructureError(f"normal_side names unknown patch {k!r}") from None
    if ki not in patch_ids:
        raise StructureError(f"normal_side names unknown patch {k!r}")
    return ki


def _edge_triangles(tri_edges, n_edges):
    out = [[] for _ in range(n_edges)]
    for t, row in enumerate(tri_edges):
        for e in row:
            out[e].append(t)
    return out


def _orient(tris, edges, tri_edges, valence, edge_tris):
    """Flip triangles so each valence-2 edge is traversed in opposite directions."""
    tris = tris.copy()
    n = len(tris)
    seen = np.zeros(n, dtype=bool)
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        while queue:
            t = queue.popleft()
            for e in tri_edges[t]:
                if valence[e] != 2:
                    continue
                a, b = int(edges[e, 0]), int(edges[e, 1])
                u = edge_tris[e][1] if edge_tris[e][0] == t else edge_tris[e][0]
                same = _mesh.directed_in_triangle(tris[t], a, b) == _mesh.directed_in_triangle(tris[u], a, b)
                if not seen[u]:
                    if same:
                        tris[u] = tris[u][[0, 2, 1]]
                        # edge slots 1 and 2 swap with the vertex swap
                        tri_edges[u] = tri_edges[u][[0, 2, 1]]
                    seen[u] = True
                    queue.append(u)
                elif same:
                    raise OrientabilityError(
                        f"regular part is non-orientable (inconsistent winding across edge {(a, b)})"
                    )
    return tris


def _regular_components(tri_edges, valence, edge_tris, n):
    comp = np.full(n, -1, dtype=np.int64)
    label = 0
    for start in range(n):
        if comp[start] >= 0:
            continue
        comp[start] = label
        queue = deque([start])
        while queue:
            t = queue.popleft()
            for e in tri_edges[t]:
                if valence[e] != 2:
                    continue
                for u in edge_tris[e]:
                    if comp[u] < 0:
                        comp[u] = label
                        queue.append(u)
        label += 1
    return comp


def _check_patch_labels(tri_patch, comp, tri_edges, valence, edge_tris):
    for e in np.flatnonzero(valence == 2):
        t0, t1 = edge_tris[e]
        if tri_patch[t0] != tri_patch[t1]:
            raise StructureError(
                f"regular edge shared by triangles of different patches {tri_patch[t0]!r}, {tri_patch[t1]!r}"
            )
    by_label = defaultdict(set)
    for t, p in enumerate(tri_patch.tolist()):
        by_label[p].add(int(comp[t]))
    for p, comps in by_label.items():
        if len(comps) != 1:
            raise StructureError(f"patch {p!r} is not edge-connected")


def _trace_boundary(bedges):
    adj = defaultdict(list)
    for a, b in bedges:
        adj[int(a)].append(int(b))
        adj[int(b)].append(int(a))
    used = set()
    loops = []
    for a, b in bedges:
        k = _mesh.edge_key(int(a), int(b))
        if k in used:
            continue
        loop = [int(a)]
        prev, cur = int(a), int(b)
        used.add(k)
        while True:
            loop.append(cur)
            nxt = [w for w in adj[cur] if _mesh.edge_key(cur, w) not in used]
            if not nxt:
                break
            used.add(_mesh.edge_key(cur, nxt[0]))
            prev, cur = cur, nxt[0]
        loops.append(np.asarray(loop, dtype=np.int64))
    return loops


def _lex_key(verts, v):
    return tuple(verts[v].tolist())


def _junction_curves(jedges, declared, bverts, verts):
    adj = defaultdict(list)
    for a, b in jedges:
        adj[int(a)].append(int(b))
        adj[int(b)].append(int(a))
    edge_set = {_mesh.edge_key(int(a), int(b)) for a, b in jedges}
    for v, nb in adj.items():
        if len(nb) not in (1, 2, 4):
            raise StructureError(f"vertex {v} has {len(nb)} incident junction edges")
        if len(nb) == 1 and not bverts[v]:
            raise StructureError(f"junction curve ends at vertex {v} which is neither a T-point nor on the boundary")
        if len(nb) == 4 and bverts[v]:
            raise StructureError(f"T-point candidate {v} lies on the artificial boundary")

    if declared is not None:
        curves = [[int(v) for v in cv] for cv in declared]
        covered = set()
        for cv in curves:
            if len(cv) < 2:
                raise StructureError("junction polyline needs at least two vertices")
            for a, b in zip(cv[:-1], cv[1:]):
                k = _mesh.edge_key(a, b)
                if k not in edge_set:
                    raise StructureError(f"declared junction edge {k} is not a valence-3 edge")
                if k in covered:
                    raise StructureError(f"junction edge {k} listed twice")
                covered.add(k)
        if covered != edge_set:
            raise StructureError("declared junctions do not cover every valence-3 edge")
    else:
        curves = _trace_curves(adj)

    out, closed = [], []
    for cv in curves:
        is_closed = len(cv) > 2 and cv[0] == cv[-1]
        for v in (cv[1:-1] if not is_closed else cv[:-1]):
            if len(adj[v]) != 2:
                raise StructureError(f"junction vertex {v} in the middle of a curve must have 2 junction edges")
        out.append(_orient_curve(cv, is_closed, verts))
        closed.append(is_closed)
    return out, closed


def _trace_curves(adj):
    nodes = [v for v, nb in adj.items() if len(nb) != 2]
    used = set()
    curves = []
    for s in sorted(nodes):
        for w in sorted(adj[s]):
            if _mesh.edge_key(s, w) in used:
                continue
            cv = [s]
            prev, cur = s, w
            used.add(_mesh.edge_key(s, w))
            while True:
                cv.append(cur)
                if len(adj[cur]) != 2:
                    break
                nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
                if _mesh.edge_key(cur, nxt) in used:
                    break
                used.add(_mesh.edge_key(cur, nxt))
                prev, cur = cur, nxt
            curves.append(cv)
    # closed loops without nodes
    for s in sorted(adj):
        for w in sorted(adj[s]):
            if _mesh.edge_key(s, w) in used:
                continue
            cv = [s]
            prev, cur = s, w
            used.add(_mesh.edge_key(s, w))
            while cur != s:
                cv.append(cur)
                nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
                used.add(_mesh.edge_key(cur, nxt))
                prev, cur = cur, nxt
            cv.append(s)
            curves.append(cv)
    return curves


def _orient_curve(cv, closed, verts):
    """Deterministic orientation: start from the lexicographically smallest end."""
    if not closed:
        if _lex_key(verts, cv[-1]) < _lex_key(verts, cv[0]):
            cv = cv[::-1]
        return cv
    ring = cv[:-1]
    k = min(range(len(ring)), key=lambda i: _lex_key(verts, ring[i]))
    ring = ring[k:] + ring[:k]
    if _lex_key(verts, ring[-1]) < _lex_key(verts, ring[1]):
        ring = [ring[0]] + ring[1:][::-1]
    return ring + [ring[0]]


def _t_points(curves, closed, curve_patches, bverts):
    ends = defaultdict(list)
    for ci, (cv, cl) in enumerate(zip(curves, closed)):
        if cl:
            continue
        ends[cv[0]].append(ci)
        ends[cv[-1]].append(ci)
    tpts = []
    for v, cis in ends.items():
        if bverts[v]:
            continue
        if len(cis) != 4 or len(set(cis)) != 4:
            raise StructureError(f"vertex {v} ends {len(cis)} junction curve branches, a T-point needs 4 distinct curves")
        counts = defaultdict(int)
        for ci in cis:
            for p in curve_patches[ci]:
                counts[p] += 1
        if len(counts) != 6 or any(n != 2 for n in counts.values()):
            raise StructureError(f"T-point {v} is adjacent to {len(counts)} patches, need 6 each bounded by 2 curves")
        tpts.append(int(v))
    return tpts


def _check_stars(c: PlateauComplex, edge_tris):
    """Each patch's link at a vertex must be one cycle (interior) or one path."""
    links = defaultdict(list)
    for t, (tri, p) in enumerate(zip(c.triangles, c.tri_patch)):
        a, b, d = (int(x) for x in tri)
        links[(a, p)].append((b, d))
        links[(b, p)].append((d, a))
        links[(d, p)].append((a, b))
    patches_at = defaultdict(set)
    for (v, p) in links:
        patches_at[v].add(p)
    for (v, p), segs in links.items():
        deg = defaultdict(int)
        adj = defaultdict(list)
        for a, b in segs:
            deg[a] += 1
            deg[b] += 1
            adj[a].append(b)
            adj[b].append(a)
        if any(n > 2 for n in deg.values()):
            raise StructureError(f"vertex {v} has a pinched star in patch {p!r}")
        # connectivity of the link
        start = segs[0][0]
        seen = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        if len(seen) != len(deg):
            raise StructureError(f"vertex {v} has a disconnected star in patch {p!r}")
        open_ends = sum(1 for n in deg.values() if n == 1)
        if open_ends and not (c.junction_vertices[v] or c.boundary_vertices[v]):
            raise StructureError(f"patch {p!r} has an open star at interior vertex {v}")
    for v in range(c.n_vertices):
        if v not in patches_at:
            raise StructureError(f"vertex {v} is not used by any triangle")
        if not c.junction_vertices[v] and len(patches_at[v]) != 1:
            raise StructureError(f"vertex {v} joins {len(patches_at[v])} patches without a junction edge")


# --------------------------------------------------------------- operations
def classify_local_model(c: PlateauComplex, v: int) -> str:
    """Return ``"P"``, ``"Y"``, ``"T"`` or ``"Boundary"`` for vertex ``v``."""
    if not 0 <= int(v) < c.n_vertices:
        raise StructureError(f"vertex {v} out of range")
    return str(c.roles[int(v)])


def curve_frames(c: PlateauComplex, ci: int):
    """Tangents and per-patch unit normals along junction curve ``ci``.

    The normal of a patch at a curve vertex averages the patch triangles
    that contain a junction edge at that vertex (the hinge triangles), with
    the curve-tangent component removed. Returns ``(tangent (n,3), normals
    (n,3,3))`` with the patch axis aligned to ``c.junction_patches[ci]``.
    """
    curve = c.junctions[ci]
    closed = c.junction_closed[ci]
    t = _mesh.polyline_tangents(c.vertices[curve], closed=closed)
    hinge = c.hinge_normals
    nu = np.empty((len(curve), 3, 3))
    for i, p in enumerate(c.junction_patches[ci]):
        k = c.patch_ids.index(p)
        idx = np.searchsorted(c._dofs[0], k * c.n_vertices + curve)
        n = hinge[idx]
        n = n - np.sum(n * t, axis=1)[:, None] * t
        nu[:, i, :] = n / np.linalg.norm(n, axis=1)[:, None]
    return t, nu


def _curve_edge_signs(c: PlateauComplex, ci: int):
    curve = c.junctions[ci]
    patches = c.junction_patches[ci]
    signs = np.zeros((len(curve) - 1, 3), dtype=int)
    for s, (a, b) in enumerate(zip(curve[:-1].tolist(), curve[1:].tolist())):
        e = c.edge_index[_mesh.edge_key(a, b)]
        for t in c.edge_tris[e]:
            i = patches.index(c.tri_patch[t].item())
            agree = _mesh.directed_in_triangle(c.triangles[t], a, b)
            signs[s, i] = (1 if agree else -1) * c.normal_side[patches[i]]
    return signs


def assign_signs(c: PlateauComplex) -> SignAssignment:
    """Sign of each patch along each junction curve plus T-point tables.

    The sign is +1 exactly when the curve's orientation agrees with the
    boundary orientation induced by the patch and its normal. Raises
    :class:`OrientabilityError` if a sign flips along a curve.
    """
    cache = c.__dict__.get("_signs")
    if cache is not None:
        return cache
    curve_signs, residuals = [], []
    for ci in range(len(c.junctions)):
        es = _curve_edge_signs(c, ci)
        if np.any(es != es[0]):
            raise OrientabilityError(f"sign of a patch changes along junction curve {ci}")
        s = es[0].astype(float)
        _, nu = curve_frames(c, ci)
        residuals.append(np.linalg.norm(np.einsum("i,nij->nj", s, nu), axis=1))
        curve_signs.append(es[0].copy())

    t_curves, t_patches, t_signs = [], [], []
    for q in c.t_points:
        cis = sorted(ci for ci, _ in c.vertex_curves[q])
        pats, sg = {}, {}
        for i in range(4):
            for j in range(4):
                if i == j:
                    continue
                shared = set(c.junction_patches[cis[i]]) & set(c.junction_patches[cis[j]])
                if len(shared) != 1:
                    raise StructureError(f"curves {cis[i]}, {cis[j]} at T-point {q} share {len(shared)} patches")
                p = shared.pop()
                if i < j:
                    pats[(i, j)] = p
                k = c.junction_patches[cis[j]].index(p)
                sg[(i, j)] = int(curve_signs[cis[j]][k])
        t_curves.append(tuple(cis))
        t_patches.append(pats)
        t_signs.append(sg)

    out = SignAssignment(
        curve_signs=tuple(curve_signs),
        t_curves=tuple(t_curves),
        t_patches=tuple(t_patches),
        t_signs=tuple(t_signs),
        residuals=tuple(residuals),
    )
    object.__setattr__(c, "_signs", out)
    return out


def structural_report(c: PlateauComplex, s: SignAssignment | None = None) -> dict:
    s = assign_signs(c) if s is None else s
    roles = c.roles
    return {
        **c.summary(),
        "local_models": {k: int(np.sum(roles == k)) for k in (P, Y, T, BOUNDARY)},
        "patch_ids": list(c.patch_ids),
        "junction_patches": [list(p) for p in c.junction_patches],
        "curve_signs": [s_.tolist() for s_ in s.curve_signs],
        "sign_normal_residual": s.max_residual,
        "sign_normal_residual_ok": bool(s.max_residual <= c.tol_geom),
    }


def merge_complexes(parts: Sequence[PlateauComplex]) -> PlateauComplex:
    """Disjoint union of complexes (patch ids are renumbered)."""
    verts, tris, pats, juncs, sides = [], [], [], [], {}
    off, poff = 0, 0
    for c in parts:
        verts.append(c.vertices)
        tris.append(c.triangles + off)
        remap = {p: poff + k for k, p in enumerate(c.patch_ids)}
        pats.append(np.array([remap[p] for p in c.tri_patch.tolist()]))
        for p, s in c.normal_side.items():
            sides[remap[p]] = s
        juncs.extend((j + off).tolist() for j in c.junctions)
        off += c.n_vertices
        poff += len(c.patch_ids)
    return build_complex(
        np.vstack(verts), np.vstack(tris), patch=np.concatenate(pats), junctions=juncs, normal_side=sides
    )
