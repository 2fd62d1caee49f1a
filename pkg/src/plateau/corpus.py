"""Exact (analytic-vertex) meshes of the reference configurations.

Faces are built from rows of vertices that are stitched into triangle
strips, so junction vertices are shared by index rather than by coordinate
matching. All generators take a target edge length ``h``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .complex import PlateauComplex, build_complex
from .errors import UnknownCorpusError

TETRA_DIRS = np.array(
    [[1.0, 1.0, 1.0], [-1.0, -1.0, 1.0], [-1.0, 1.0, -1.0], [1.0, -1.0, -1.0]]
) / math.sqrt(3.0)
T_ANGLE = math.acos(-1.0 / 3.0)

GOLDEN_NAMES = (
    "plane",
    "y-cone",
    "t-cone",
    "double-t",
    "network-prism",
    "y-catenoid-seed",
    "mobius",
    "weighted-book",
)


class MeshBuilder:
    def __init__(self):
        self.points: list = []
        self.triangles: list = []
        self.patch: list = []

    def add(self, p) -> int:
        self.points.append(np.asarray(p, dtype=float))
        return len(self.points) - 1

    def add_many(self, pts) -> list:
        return [self.add(p) for p in pts]

    def ray(self, origin_idx: int, origin, direction, h: float, count: int) -> list:
        o = np.asarray(origin, dtype=float)
        d = np.asarray(direction, dtype=float)
        return [origin_idx] + [self.add(o + (k * h) * d) for k in range(1, count + 1)]

    def stitch(self, row_a, t_a, row_b, t_b, patch):
        """Triangulate between two rows; rows advance along increasing t."""
        i = j = 0
        na, nb = len(row_a), len(row_b)
        while i < na - 1 or j < nb - 1:
            adv_a = j == nb - 1 or (i < na - 1 and t_a[i + 1] <= t_b[j + 1])
            if adv_a:
                self.triangles.append((row_a[i], row_a[i + 1], row_b[j]))
                i += 1
            else:
                self.triangles.append((row_a[i], row_b[j + 1], row_b[j]))
                j += 1
            self.patch.append(patch)

    def sheet(self, rows, params, patch):
        for k in range(len(rows) - 1):
            self.stitch(rows[k], params[k], rows[k + 1], params[k + 1], patch)

    def build(self, **kwargs) -> PlateauComplex:
        return build_complex(np.array(self.points), np.array(self.triangles), patch=np.array(self.patch), **kwargs)


def _perp(d1, d2):
    e = d2 - np.dot(d1, d2) * d1
    return e / np.linalg.norm(e)


def _sector(b: MeshBuilder, apex_idx, apex, d1, d2, angle, ray1, ray2, h, patch):
    """Planar sector between two shared rays, truncated at the rays' length."""
    d1 = np.asarray(d1, float)
    e = _perp(d1, np.asarray(d2, float))
    K = len(ray1) - 1
    rows = [[apex_idx]]
    params = [[0.5]]
    for k in range(1, K + 1):
        r = k * h
        n = max(1, math.ceil(angle * r / h))
        idx = [ray1[k]]
        for m in range(1, n):
            phi = angle * m / n
            idx.append(b.add(apex + r * (math.cos(phi) * d1 + math.sin(phi) * e)))
        idx.append(ray2[k])
        rows.append(idx)
        params.append(np.linspace(0.0, 1.0, n + 1))
    b.sheet(rows, params, patch)


def _disk(b: MeshBuilder, center, d1, d2, R, h, patch):
    K = max(1, round(R / h))
    h = R / K
    e = _perp(d1, d2)
    c_idx = b.add(center)
    rows = [[c_idx]]
    params = [[0.5]]
    for k in range(1, K + 1):
        r = k * h
        n = max(3, math.ceil(2 * math.pi * r / h))
        idx = [b.add(center + r * (math.cos(2 * math.pi * m / n) * d1 + math.sin(2 * math.pi * m / n) * e)) for m in range(n)]
        rows.append(idx + [idx[0]])
        params.append(np.linspace(0.0, 1.0, n + 1))
    b.sheet(rows, params, patch)


def _row_between(b: MeshBuilder, ia, a, ib, c, h):
    a = np.asarray(a, float)
    c = np.asarray(c, float)
    n = max(1, math.ceil(np.linalg.norm(c - a) / h))
    idx = [ia] + [b.add(a + (m / n) * (c - a)) for m in range(1, n)] + [ib]
    return idx, np.linspace(0.0, 1.0, n + 1)


# ------------------------------------------------------------ generators
def plane(h: float = 0.1, R: float = 1.5) -> PlateauComplex:
    b = MeshBuilder()
    _disk(b, np.zeros(3), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), R, h, 0)
    return b.build()


def y_cone(h: float = 0.1, R: float = 1.5, angles_deg=(0.0, 120.0, 240.0)) -> PlateauComplex:
    """Three half-disks of radius R meeting along the x3-axis."""
    K = max(1, round(R / h))
    h = R / K
    b = MeshBuilder()
    o = b.add(np.zeros(3))
    e3 = np.array([0.0, 0.0, 1.0])
    up = b.ray(o, np.zeros(3), e3, h, K)
    down = b.ray(o, np.zeros(3), -e3, h, K)
    for p, th in enumerate(angles_deg):
        u = np.array([math.cos(math.radians(th)), math.sin(math.radians(th)), 0.0])
        # wound so that the normal is e3 x u
        _sector_plane(b, o, -e3, u, math.pi, down, up, h, p)
    return b.build(junctions=[down[::-1] + up[1:]])


def _sector_plane(b, apex_idx, d1, e, angle, ray1, ray2, h, patch):
    """Sector with explicit in-plane perpendicular ``e`` (needed for angle pi)."""
    d1 = np.asarray(d1, float)
    e = np.asarray(e, float)
    apex = b.points[apex_idx]
    K = len(ray1) - 1
    rows, params = [[apex_idx]], [[0.5]]
    for k in range(1, K + 1):
        r = k * h
        n = max(1, math.ceil(angle * r / h))
        idx = [ray1[k]]
        for m in range(1, n):
            phi = angle * m / n
            idx.append(b.add(apex + r * (math.cos(phi) * d1 + math.sin(phi) * e)))
        idx.append(ray2[k])
        rows.append(idx)
        params.append(np.linspace(0.0, 1.0, n + 1))
    b.sheet(rows, params, patch)


def t_cone(h: float = 0.1, R: float = 1.5) -> PlateauComplex:
    """Cone over the tetrahedral edge frame: six planar sectors, four rays."""
    K = max(1, round(R / h))
    h = R / K
    b = MeshBuilder()
    o = b.add(np.zeros(3))
    rays = [b.ray(o, np.zeros(3), d, h, K) for d in TETRA_DIRS]
    p = 0
    for i in range(4):
        for j in range(i + 1, 4):
            _sector(b, o, np.zeros(3), TETRA_DIRS[i], TETRA_DIRS[j], T_ANGLE, rays[i], rays[j], h, p)
            p += 1
    return b.build(junctions=rays)


def double_t(h: float = 0.1, R: float = 1.5, a: float = 1.0) -> PlateauComplex:
    """Two T local models glued along the segment from 0 to a * p1/|p1|."""
    K = max(1, round(R / h))
    h = R / K
    u = TETRA_DIRS
    p1 = np.zeros(3)
    p2 = a * u[0]
    mirrored = [u[j] + (2.0 / 3.0) * u[0] for j in (1, 2, 3)]
    b = MeshBuilder()
    i1 = b.add(p1)
    m = max(1, math.ceil(a / h))
    seg = [i1] + [b.add(p1 + (k / m) * (p2 - p1)) for k in range(1, m)]
    i2 = b.add(p2)
    seg.append(i2)
    rays1 = [b.ray(i1, p1, u[j], h, K) for j in (1, 2, 3)]
    rays2 = [b.ray(i2, p2, d, h, K) for d in mirrored]
    patch = 0
    for r in range(3):
        # three-sided face between the segment and the two rays
        rows = [seg]
        params = [np.linspace(0.0, 1.0, len(seg))]
        for k in range(1, K + 1):
            idx, t = _row_between(b, rays1[r][k], b.points[rays1[r][k]], rays2[r][k], b.points[rays2[r][k]], h)
            rows.append(idx)
            params.append(t)
        b.sheet(rows, params, patch)
        patch += 1
    for apex_idx, apex, dirs, rays in ((i1, p1, [u[1], u[2], u[3]], rays1), (i2, p2, mirrored, rays2)):
        for i in range(3):
            for j in range(i + 1, 3):
                _sector(b, apex_idx, apex, dirs[i], dirs[j], T_ANGLE, rays[i], rays[j], h, patch)
                patch += 1
    return b.build(junctions=[seg] + rays1 + rays2)


def prism(nodes, edges, h: float = 0.1, Z: float = 1.0, ray_length: float = 1.5) -> PlateauComplex:
    """Planar network times an interval.

    ``edges`` holds ``("seg", a, b)`` or ``("ray", a, (dx, dy))`` items over
    2D ``nodes``. Nodes of degree 3 become vertical junction lines.
    """
    J = max(1, round(Z / h))
    hz = Z / J
    zs = [j * hz for j in range(-J, J + 1)]
    nodes = [np.asarray(n, float) for n in nodes]
    degree = [0] * len(nodes)
    for e in edges:
        degree[e[1]] += 1
        if e[0] == "seg":
            degree[e[2]] += 1
    b = MeshBuilder()
    lines = {}
    for k, n in enumerate(nodes):
        lines[k] = [b.add((n[0], n[1], z)) for z in zs]
    for patch, e in enumerate(edges):
        a = nodes[e[1]]
        if e[0] == "seg":
            c = nodes[e[2]]
            end_line = lines[e[2]]
        else:
            d = np.asarray(e[2], float)
            c = a + ray_length * d / np.linalg.norm(d)
            end_line = None
        rows, params = [], []
        for j, z in enumerate(zs):
            pa = np.array([a[0], a[1], z])
            pc = np.array([c[0], c[1], z])
            if end_line is None:
                ic = b.add(pc)
            else:
                ic = end_line[j]
            idx, t = _row_between(b, lines[e[1]][j], pa, ic, pc, h)
            rows.append(idx)
            params.append(t)
        b.sheet(rows, params, patch)
    junctions = [lines[k] for k in range(len(nodes)) if degree[k] == 3]
    return b.build(junctions=junctions)


def network_prism(h: float = 0.1, a: float = 1.0, Z: float = 1.0, ray_length: float = 1.5) -> PlateauComplex:
    """Prism over the two-triple-point Steiner network (one strip, four half-planes)."""
    s3 = math.sqrt(3.0) / 2.0
    nodes = [(-a / 2, 0.0), (a / 2, 0.0)]
    edges = [
        ("seg", 0, 1),
        ("ray", 0, (-0.5, s3)),
        ("ray", 0, (-0.5, -s3)),
        ("ray", 1, (0.5, s3)),
        ("ray", 1, (0.5, -s3)),
    ]
    return prism(nodes, edges, h=h, Z=Z, ray_length=ray_length)


def honeycomb(h: float = 0.1, side: float = 1.0, Z: float = 0.5, stub: float = 0.6) -> PlateauComplex:
    """Prism over one hexagonal cell with its six outward edges truncated."""
    nodes = [(side * math.cos(math.pi / 3 * k), side * math.sin(math.pi / 3 * k)) for k in range(6)]
    edges = [("seg", k, (k + 1) % 6) for k in range(6)]
    edges += [("ray", k, nodes[k]) for k in range(6)]
    return prism(nodes, edges, h=h, Z=Z, ray_length=stub)


def y_book(h: float = 0.1, width: float = 1.0, Z: float = 1.0, angles_deg=(0.0, 120.0, 240.0), twist_deg=None):
    """Flat sheets (structured right-triangle grids) hinged on the x3-axis.

    Returns raw arrays ``(vertices, triangles, patch, gamma)`` so that both
    Plateau complexes and multiple-junction surfaces can be built from them.
    ``twist_deg[i]`` rotates sheet i linearly along the axis from 0 at the
    bottom to the given angle at the top.
    """
    twist_deg = [0.0] * len(angles_deg) if twist_deg is None else list(twist_deg)
    if len(twist_deg) != len(angles_deg):
        raise ValueError("one twist angle per sheet")
    J = max(1, round(Z / h))
    hz = Z / J
    zs = [j * hz for j in range(-J, J + 1)]
    n = max(1, round(width / h))
    b = MeshBuilder()
    gamma = [b.add((0.0, 0.0, z)) for z in zs]
    for p, (th, tw) in enumerate(zip(angles_deg, twist_deg)):
        rows, params = [], []
        for j, z in enumerate(zs):
            ang = math.radians(th + tw * (z + Z) / (2 * Z))
            u = np.array([math.cos(ang), math.sin(ang), 0.0])
            idx = [gamma[j]] + [b.add(np.array([0, 0, z]) + (m * width / n) * u) for m in range(1, n + 1)]
            rows.append(idx)
            params.append(np.linspace(0.0, 1.0, n + 1))
        b.sheet(rows, params, p)
    return np.array(b.points), np.array(b.triangles), np.array(b.patch), gamma


def y_book_complex(h: float = 0.1, width: float = 1.0, Z: float = 1.0, angles_deg=(0.0, 120.0, 240.0)) -> PlateauComplex:
    v, t, p, g = y_book(h, width, Z, angles_deg)
    return build_complex(v, t, patch=p, junctions=[g])


def y_catenoid_seed(h: float = 0.1, R_out: float = 2.0, seed_radius: float = 1.1):
    """Annulus plus two sheets of revolution meeting on a circle in z = 0.

    The pinned top and bottom circles (radius 1 at heights +-H) are those of
    the exact configuration in which the caps are catenoid necks meeting the
    annulus at 120 degrees along the unit circle; the seed starts from
    straight profiles and a junction circle of radius ``seed_radius``.
    """
    a = math.sqrt(3.0) / 2.0
    z0 = a * math.asinh(1.0 / math.sqrt(3.0))
    H = 2.0 * z0
    n_theta = max(12, math.ceil(2 * math.pi / h))
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    b = MeshBuilder()

    def ring(r, z):
        idx = [b.add((r * math.cos(t), r * math.sin(t), z)) for t in th]
        return idx + [idx[0]]

    params = np.linspace(0.0, 1.0, n_theta + 1)
    junction = ring(seed_radius, 0.0)
    # annulus
    n_r = max(1, math.ceil((R_out - seed_radius) / h))
    rows = [junction] + [ring(seed_radius + (R_out - seed_radius) * k / n_r, 0.0) for k in range(1, n_r + 1)]
    b.sheet(rows, [params] * len(rows), 0)
    # caps: straight profile from the junction circle to the pinned circle
    length = math.hypot(H, 1.0 - seed_radius)
    n_z = max(1, math.ceil(length / h))
    for patch, sgn in ((1, 1.0), (2, -1.0)):
        rows = [junction]
        for k in range(1, n_z + 1):
            s = k / n_z
            rows.append(ring(seed_radius + (1.0 - seed_radius) * s, sgn * H * s))
        if sgn < 0:
            rows = rows[::-1]
        b.sheet(rows, [params] * len(rows), patch)
    return b.build(junctions=[junction])


def y_catenoid_profile(z):
    """Radius of the exact upper cap at height z (for comparison with relaxations)."""
    a = math.sqrt(3.0) / 2.0
    z0 = a * math.asinh(1.0 / math.sqrt(3.0))
    return a * np.cosh((np.asarray(z) - z0) / a)


def mobius_arrays(n: int = 8, m: int = 3):
    """Two squares glued into a Moebius strip (not orientable).

    Returned as raw arrays since it cannot be built into a complex.
    """
    us = np.linspace(0.0, 2.0, 2 * n + 1)
    vs = np.linspace(0.0, 1.0, m + 1)
    verts, index = [], {}
    for i, u in enumerate(us[:-1]):
        for j, v in enumerate(vs):
            phi = math.pi * u
            r = 1.0 + (v - 0.5) * math.cos(phi / 2)
            verts.append((r * math.cos(phi), r * math.sin(phi), (v - 0.5) * math.sin(phi / 2)))
            index[(i, j)] = len(verts) - 1
    for j in range(m + 1):
        index[(2 * n, j)] = index[(0, m - j)]
    tris, patch = [], []
    for i in range(2 * n):
        for j in range(m):
            a, b_, c, d = index[(i, j)], index[(i + 1, j)], index[(i + 1, j + 1)], index[(i, j + 1)]
            tris += [(a, b_, c), (a, c, d)]
            patch += [0 if i < n else 1] * 2
    return np.array(verts), np.array(tris), np.array(patch)


def icosphere(subdivisions: int = 4):
    """Unit icosphere as raw arrays (outward winding)."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
         (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.array(p, float) / np.linalg.norm(p) for p in v]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return np.array(verts), np.array(faces)


def sphere(subdivisions: int = 4, inward: bool = True) -> PlateauComplex:
    v, f = icosphere(subdivisions)
    return build_complex(v, f, normal_side={0: -1 if inward else 1})


def catenoid(half_height: float = 1.0, h: float = 0.1, waist: float = 1.0) -> PlateauComplex:
    """Catenoid annulus r = waist * cosh(z / waist), |z| <= half_height."""
    n_theta = max(12, math.ceil(2 * math.pi * waist / h))
    n_z = max(2, math.ceil(2 * half_height / h))
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    params = np.linspace(0.0, 1.0, n_theta + 1)
    b = MeshBuilder()
    rows = []
    for k in range(n_z + 1):
        z = -half_height + 2 * half_height * k / n_z
        r = waist * math.cosh(z / waist)
        idx = [b.add((r * math.cos(t), r * math.sin(t), z)) for t in th]
        rows.append(idx + [idx[0]])
    b.sheet(rows, [params] * len(rows), 0)
    return b.build()


def force_balance_directions(theta):
    """Unit conormals in the plane with sum(theta_i tau_i) = 0 (three weights)."""
    t1, t2, t3 = (float(x) for x in theta)
    cos12 = (t3 * t3 - t1 * t1 - t2 * t2) / (2 * t1 * t2)
    if abs(cos12) > 1.0 + 1e-12:
        raise ValueError("weights violate the triangle inequality")
    cos12 = max(-1.0, min(1.0, cos12))
    g = math.acos(cos12)
    tau = np.array([[1.0, 0.0], [math.cos(g), math.sin(g)], [0.0, 0.0]])
    tau[2] = -(t1 * tau[0] + t2 * tau[1]) / t3
    tau[2] /= np.linalg.norm(tau[2])
    return tau


def weighted_book(h: float = 0.1, theta=(1.0, 1.0, 1.5), width: float = 1.0, Z: float = 1.0):
    """Flat three-sheet book whose hinge angles balance the weights."""
    from .multijunction import MultiJunctionSurface

    tau = force_balance_directions(theta)
    # sheets extend opposite to their outward conormal
    angles = [math.degrees(math.atan2(-t[1], -t[0])) for t in tau]
    v, t, p, g = y_book(h, width, Z, angles)
    sheets = [t[p == k] for k in range(3)]
    return MultiJunctionSurface.build(v, sheets, theta, g)


# ------------------------------------------------------------ golden files
def golden_payload(name: str, resolution: float = 0.1) -> dict:
    from .fileio import complex_to_dict, multi_to_dict

    h = float(resolution)
    if name == "plane":
        return complex_to_dict(plane(h))
    if name == "y-cone":
        return complex_to_dict(y_cone(h))
    if name == "t-cone":
        return complex_to_dict(t_cone(h))
    if name == "double-t":
        return complex_to_dict(double_t(h))
    if name == "network-prism":
        return complex_to_dict(network_prism(h))
    if name == "y-catenoid-seed":
        return complex_to_dict(y_catenoid_seed(h))
    if name == "mobius":
        v, t, p = mobius_arrays()
        return {
            "vertices": v.tolist(),
            "triangles": [list(map(int, tri)) + [int(pp)] for tri, pp in zip(t, p)],
        }
    if name == "weighted-book":
        return multi_to_dict(weighted_book(h))
    raise UnknownCorpusError(f"unknown corpus id {name!r}; expected one of {', '.join(GOLDEN_NAMES)}")


def generate_golden(name: str, resolution: float = 0.1, path=None) -> Path:
    """Write the named reference mesh to ``path`` (default ``golden/<name>.json``)."""
    payload = golden_payload(name, resolution)
    out = Path(path) if path is not None else Path("golden") / f"{name}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=None, sort_keys=True))
    return out


def slab_sliding(c: PlateauComplex, axis: int = 2, keep_radius: float | None = None) -> dict:
    """Sliding planes for a complex cut by two slabs normal to ``axis``.

    Boundary vertices on the extreme planes slide in them, except those at
    distance >= ``keep_radius`` from the axis, which stay pinned.
    """
    V = c.vertices
    x = V[:, axis]
    lo, hi = x.min(), x.max()
    tol = 1e3 * c.tol_geom
    on_cap = c.boundary_vertices & ((np.abs(x - lo) <= tol) | (np.abs(x - hi) <= tol))
    if keep_radius is not None:
        radial = np.delete(V, axis, axis=1)
        on_cap &= np.linalg.norm(radial, axis=1) < keep_radius - tol
    e = np.zeros(3)
    e[axis] = 1.0
    return {int(v): e for v in np.flatnonzero(on_cap)}
