"""Flatness test and the case analysis of flat Plateau complexes.

A flat complex is one of: disjoint parallel planes, a planar stationary
network times a line, a single T cone, or two T cones glued along a
segment. Truncated meshes only show finite pieces, so a junction curve that
ends on the artificial boundary is read as continuing to infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .complex import PlateauComplex
from .errors import NotFlatError, ProjectionError, StructureError, UnrecognizedRegionError
from .geometry import compute_curvature

T_ANGLE = math.acos(-1.0 / 3.0)
TOL_ANGLE_EXACT = 1e-6
TOL_ANGLE_RELAXED = 1e-2
TOL_FLAT = 1e-6

REGION_TYPES = ("Plane", "HalfPlane", "Strip", "Angular", "ThreeSided")
TAGS = ("ParallelPlanes", "NetworkTimesR", "TCone", "DoubleT", "NonFlat", "Indeterminate")


def _angle(u, v) -> float:
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    return math.atan2(float(np.linalg.norm(np.cross(u, v))), float(np.dot(u, v)))


def _turning_angles(pts) -> np.ndarray:
    d = np.diff(pts, axis=0)
    if len(d) < 2:
        return np.zeros(0)
    return np.array([_angle(a, b) for a, b in zip(d[:-1], d[1:])])


@dataclass(frozen=True)
class FlatnessReport:
    flat: bool
    max_A2: float
    max_turning: float
    max_plane_offset: float
    tol_flat: float

    def as_dict(self) -> dict:
        return {
            "flat": self.flat,
            "max_A2": self.max_A2,
            "max_turning_angle": self.max_turning,
            "max_plane_offset": self.max_plane_offset,
            "tol_flat": self.tol_flat,
        }


def patch_plane(c: PlateauComplex, patch):
    """(centroid, unit normal, max offset) of the best-fit plane of a patch."""
    verts = np.unique(c.triangles[c.tri_patch == patch])
    pts = c.vertices[verts]
    ctr = pts.mean(axis=0)
    _, S, Vt = np.linalg.svd(pts - ctr, full_matrices=False)
    n = Vt[-1]
    return ctr, n, float(np.abs((pts - ctr) @ n).max())


def is_flat(c: PlateauComplex, tol_flat: float = TOL_FLAT) -> FlatnessReport:
    """Flat when every patch has |A|^2 <= tol_flat and every junction turns by <= sqrt(tol_flat)."""
    curv = compute_curvature(c)
    a2 = float(curv.norm_A2.max(initial=0.0))
    turn = 0.0
    for ci, cv in enumerate(c.junctions):
        ang = _turning_angles(c.vertices[cv])
        turn = max(turn, float(ang.max(initial=0.0)))
    off = max(patch_plane(c, p)[2] for p in c.patch_ids) / max(c.diameter, 1e-300)
    ok = a2 <= tol_flat and turn <= math.sqrt(tol_flat) and off <= math.sqrt(tol_flat)
    return FlatnessReport(bool(ok), a2, turn, off, tol_flat)


# ---------------------------------------------------------------- curves
@dataclass(frozen=True)
class CurveKind:
    kind: str  # "segment", "ray", "line", "closed"
    start: int
    end: int
    direction: np.ndarray  # unit, from start to end


def curve_kind(c: PlateauComplex, ci: int) -> CurveKind:
    cv = c.junctions[ci]
    a, b = int(cv[0]), int(cv[-1])
    d = c.vertices[b] - c.vertices[a]
    nd = np.linalg.norm(d)
    d = d / nd if nd > 0 else d
    if c.junction_closed[ci]:
        return CurveKind("closed", a, b, d)
    ta, tb = a in c.t_points, b in c.t_points
    if ta and tb:
        return CurveKind("segment", a, b, d)
    if ta or tb:
        # rays are reported from their T-point outward
        return CurveKind("ray", a, b, d) if ta else CurveKind("ray", b, a, -d)
    return CurveKind("line", a, b, d)


def patch_curves(c: PlateauComplex, patch) -> list:
    return [ci for ci, ps in enumerate(c.junction_patches) if patch in ps]


# ------------------------------------------------------------ region types
def region_type(c: PlateauComplex, patch, tol_angle: float = TOL_ANGLE_EXACT, tol_flat: float = TOL_FLAT) -> str:
    """Planar region type of a flat patch from its junction sides."""
    ctr, n, off = patch_plane(c, patch)
    if off > math.sqrt(tol_flat) * max(c.diameter, 1.0):
        raise NotFlatError(f"patch {patch} deviates from its plane by {off:.3e}")
    kinds = [curve_kind(c, ci) for ci in patch_curves(c, patch)]
    names = sorted(k.kind for k in kinds)
    if names == []:
        return "Plane"
    if names == ["line"]:
        return "HalfPlane"
    if names == ["line", "line"]:
        a, b = kinds
        if min(_angle(a.direction, b.direction), _angle(a.direction, -b.direction)) <= tol_angle:
            return "Strip"
        raise UnrecognizedRegionError(f"patch {patch}: two non-parallel lines")
    if names == ["ray", "ray"]:
        a, b = kinds
        if a.start != b.start:
            raise UnrecognizedRegionError(f"patch {patch}: rays start at different points without a segment")
        ang = _angle(a.direction, b.direction)
        if abs(ang - T_ANGLE) <= tol_angle:
            return "Angular"
        raise UnrecognizedRegionError(f"patch {patch}: angle {ang:.8f} between rays, expected {T_ANGLE:.8f}")
    if names == ["ray", "ray", "segment"]:
        seg = next(k for k in kinds if k.kind == "segment")
        rays = [k for k in kinds if k.kind == "ray"]
        ends = {seg.start: seg.direction, seg.end: -seg.direction}
        if sorted(r.start for r in rays) != sorted(ends):
            raise UnrecognizedRegionError(f"patch {patch}: rays do not start at the segment ends")
        for r in rays:
            ang = _angle(ends[r.start], r.direction)
            if abs(ang - T_ANGLE) > tol_angle:
                raise UnrecognizedRegionError(f"patch {patch}: interior angle {ang:.8f}, expected {T_ANGLE:.8f}")
        return "ThreeSided"
    raise UnrecognizedRegionError(f"patch {patch}: junction sides {names} match no flat region type")


# ---------------------------------------------------------------- networks
@dataclass
class PlanarNetwork:
    direction: np.ndarray  # common line direction in R^3
    basis: np.ndarray  # (2, 3) projection basis
    nodes: np.ndarray  # (k, 2)
    edges: list  # dicts: {"kind": "segment", "nodes": [a, b]} or {"kind": "ray", "node": a, "direction": [x, y]}
    balance: np.ndarray  # per node |sum of unit edge directions|
    angles_deg: list = field(default_factory=list)  # per node sorted angles between consecutive edges

    def as_dict(self) -> dict:
        return {
            "nodes": self.nodes.tolist(),
            "edges": self.edges,
            "balance_residuals": [float(x) for x in self.balance],
            "angles_deg": self.angles_deg,
            "line_direction": self.direction.tolist(),
        }


def common_direction(c: PlateauComplex, tol: float = 1e-6):
    normals = np.array([patch_plane(c, p)[1] for p in c.patch_ids])
    _, S, Vt = np.linalg.svd(normals)
    e = Vt[-1]
    res = float(np.abs(normals @ e).max())
    if res > tol:
        raise ProjectionError(f"patch normals are not orthogonal to a common direction (residual {res:.3e})")
    return e


def extract_network(c: PlateauComplex, tol: float = 1e-6) -> PlanarNetwork:
    """Cross-section network of a complex that is a planar network times a line."""
    e = common_direction(c, tol)
    a = np.array([1.0, 0, 0]) if abs(e[0]) < 0.9 else np.array([0, 1.0, 0])
    u = np.cross(e, a)
    u /= np.linalg.norm(u)
    w = np.cross(e, u)
    B = np.stack([u, w])
    node_of_curve = {}
    nodes = []
    for ci, cv in enumerate(c.junctions):
        node_of_curve[ci] = len(nodes)
        nodes.append((c.vertices[cv] @ B.T).mean(axis=0))
    nodes = np.array(nodes).reshape(-1, 2)
    edges = []
    dirs = [[] for _ in range(len(nodes))]
    for p in c.patch_ids:
        cis = patch_curves(c, p)
        if len(cis) == 2:
            i, j = node_of_curve[cis[0]], node_of_curve[cis[1]]
            edges.append({"kind": "segment", "nodes": [int(i), int(j)]})
            d = nodes[j] - nodes[i]
            d = d / np.linalg.norm(d)
            dirs[i].append(d)
            dirs[j].append(-d)
        elif len(cis) == 1:
            i = node_of_curve[cis[0]]
            verts = np.unique(c.triangles[c.tri_patch == p])
            proj = c.vertices[verts] @ B.T - nodes[i]
            d = proj.mean(axis=0)
            d = d / np.linalg.norm(d)
            edges.append({"kind": "ray", "node": int(i), "direction": d.tolist()})
            dirs[i].append(d)
        else:
            raise StructureError(f"patch {p} has {len(cis)} junction sides; not a network edge")
    balance = np.array([np.linalg.norm(np.sum(ds, axis=0)) if ds else 0.0 for ds in dirs])
    angles = []
    for ds in dirs:
        th = sorted(math.atan2(d[1], d[0]) for d in ds)
        gaps = [math.degrees(b - a) for a, b in zip(th, th[1:])] + ([math.degrees(2 * math.pi + th[0] - th[-1])] if th else [])
        angles.append(gaps)
    return PlanarNetwork(e, B, nodes, edges, balance, angles)


# ------------------------------------------------------------ case analysis
@dataclass
class FlatClassification:
    tag: str
    payload: dict
    region_types: dict
    flatness: FlatnessReport | None = None

    def as_dict(self) -> dict:
        return {
            "tag": self.tag,
            "payload": self.payload,
            "region_types": {str(k): v for k, v in self.region_types.items()},
            "flatness": self.flatness.as_dict() if self.flatness else None,
        }


def _types(c, tol_angle, tol_flat):
    out = {}
    for p in c.patch_ids:
        try:
            out[p] = region_type(c, p, tol_angle, tol_flat)
        except UnrecognizedRegionError as exc:
            out[p] = f"Unrecognized: {exc}"
    return out


def is_parallel_planes(c: PlateauComplex, types: dict) -> bool:
    return any(t == "Plane" for t in types.values())


def is_network_times_r(c: PlateauComplex, types: dict) -> bool:
    return any(curve_kind(c, ci).kind == "line" for ci in range(len(c.junctions)))


def is_t_cone(c: PlateauComplex, types: dict) -> bool:
    return len(c.t_points) == 1


def is_double_t(c: PlateauComplex, types: dict) -> bool:
    return len(c.t_points) == 2


BRANCHES = (
    ("ParallelPlanes", is_parallel_planes),
    ("NetworkTimesR", is_network_times_r),
    ("TCone", is_t_cone),
    ("DoubleT", is_double_t),
)


def classify_flat(c: PlateauComplex, tol_angle: float = TOL_ANGLE_EXACT, tol_flat: float = TOL_FLAT) -> FlatClassification:
    """Decide which flat configuration the complex is, checking each branch's requirements."""
    flat = is_flat(c, tol_flat)
    if not flat.flat:
        return FlatClassification("NonFlat", {}, {}, flat)
    types = _types(c, tol_angle, tol_flat)
    bad = {p: t for p, t in types.items() if t.startswith("Unrecognized")}

    if is_parallel_planes(c, types):
        if bad or any(t != "Plane" for t in types.values()):
            raise StructureError("a full plane coexists with other sheets; expected disjoint parallel planes")
        normals = [patch_plane(c, p)[1] for p in c.patch_ids]
        if any(abs(abs(float(np.dot(normals[0], n))) - 1.0) > tol_angle for n in normals):
            raise StructureError("planes are not parallel")
        return FlatClassification("ParallelPlanes", {"planes": len(c.patch_ids)}, types, flat)

    if is_network_times_r(c, types):
        if bad or any(t not in ("HalfPlane", "Strip") for t in types.values()):
            raise StructureError(f"network times R requires half-planes and strips, found {sorted(set(types.values()))}")
        net = extract_network(c, max(tol_angle, 1e-9))
        return FlatClassification("NetworkTimesR", {"network": net.as_dict()}, types, flat)

    nT = len(c.t_points)
    if nT == 1:
        q = c.t_points[0]
        kinds = [curve_kind(c, ci) for ci in range(len(c.junctions))]
        if len(kinds) != 4 or any(k.kind != "ray" or k.start != q for k in kinds):
            raise StructureError("single T-point but the junction curves are not four rays from it")
        if bad or sorted(types.values()) != ["Angular"] * 6:
            raise StructureError(f"T cone requires six angular faces, found {sorted(types.values())}")
        return FlatClassification("TCone", {"t_point": c.vertices[q].tolist()}, types, flat)

    if nT == 2:
        q1, q2 = c.t_points
        seg = [ci for ci in range(len(c.junctions)) if curve_kind(c, ci).kind == "segment"]
        ends = [{int(c.junctions[ci][0]), int(c.junctions[ci][-1])} for ci in seg]
        if {q1, q2} not in ends:
            raise StructureError("the two T-points are not joined by a junction segment")
        if bad or any(t not in ("Angular", "ThreeSided") for t in types.values()):
            raise StructureError(f"double T requires angular and three-sided faces, found {sorted(set(types.values()))}")
        return FlatClassification(
            "DoubleT",
            {"t_points": [c.vertices[q1].tolist(), c.vertices[q2].tolist()], "segment_curve": seg[ends.index({q1, q2})]},
            types,
            flat,
        )

    if nT > 2:
        raise StructureError(f"flat complex with {nT} T-points; at most two are possible")
    raise StructureError("flat complex matches none of the four configurations")
