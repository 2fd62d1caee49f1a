"""JSON interchange for meshes, per-patch fields and multiple-junction surfaces."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .complex import PlateauComplex, build_complex
from .errors import ParseError, StructureError


def _read_json(path) -> dict:
    p = Path(path)
    # corpus ids are accepted without the extension
    if not p.exists() and Path(str(p) + ".json").exists():
        p = Path(str(p) + ".json")
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be an object")
    return data


def _array(data, key, shape_tail, dtype, path):
    if key not in data:
        raise ParseError(f"{path}: missing '{key}'")
    try:
        a = np.asarray(data[key], dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: '{key}' is not numeric") from exc
    if a.ndim != 2 or (shape_tail is not None and a.shape[1] not in shape_tail):
        raise ParseError(f"{path}: '{key}' has shape {a.shape}")
    return a


def complex_from_dict(data: dict, source="<dict>", tol_geom=None) -> PlateauComplex:
    verts = _array(data, "vertices", (3,), float, source)
    raw = data.get("triangles")
    if raw is None:
        raise ParseError(f"{source}: missing 'triangles'")
    try:
        tri = np.asarray(raw, dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{source}: 'triangles' must be integer rows") from exc
    if tri.ndim != 2 or tri.shape[1] not in (3, 4):
        raise ParseError(f"{source}: 'triangles' rows must be [a, b, c] or [a, b, c, patch]")
    if tri.shape[1] == 4:
        patch = tri[:, 3]
        tri = tri[:, :3]
    else:
        patch = data.get("patch")
        if patch is not None:
            patch = np.asarray(patch, dtype=np.int64)
    side = data.get("normal_side")
    if isinstance(side, list):
        side = {k: v for k, v in side}
    try:
        return build_complex(
            verts,
            tri,
            patch=patch,
            junctions=data.get("junctions"),
            t_points=data.get("t_points"),
            normal_side=side,
            tol_geom=tol_geom if tol_geom is not None else data.get("tol_geom"),
            fixed_edges=data.get("fixed_edges", ()),
        )
    except (TypeError, ValueError, IndexError) as exc:
        raise StructureError(f"{source}: {exc}") from exc


def load_complex(path, tol_geom=None) -> PlateauComplex:
    """Read and validate a mesh file; labels are inferred when absent."""
    return complex_from_dict(_read_json(path), source=str(path), tol_geom=tol_geom)


def complex_to_dict(c: PlateauComplex) -> dict:
    out = {
        "vertices": c.vertices.tolist(),
        "triangles": [[int(a), int(b), int(t), int(p)] for (a, b, t), p in zip(c.triangles.tolist(), c.tri_patch.tolist())],
        "junctions": [j.tolist() for j in c.junctions],
        "t_points": [int(q) for q in c.t_points],
        "normal_side": {str(k): int(v) for k, v in c.normal_side.items()},
    }
    if c.fixed_edges:
        out["fixed_edges"] = sorted([list(e) for e in c.fixed_edges])
    return out


def save_complex(c: PlateauComplex, path) -> None:
    Path(path).write_text(json.dumps(complex_to_dict(c)))


# ------------------------------------------------------------------ fields
def load_field_payload(path) -> dict:
    data = _read_json(path)
    if "values" not in data and "vectors" not in data:
        raise ParseError(f"{path}: expected 'values' or 'vectors'")
    return data


def save_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True))


# ------------------------------------------------------- multiple junction
def multi_to_dict(m) -> dict:
    return {
        "vertices": m.vertices.tolist(),
        "sheets": [
            {"triangles": t.tolist(), "theta": float(th)} for t, th in zip(m.sheet_triangles, m.theta)
        ],
        "gamma": [int(g) for g in m.gamma],
    }


def load_multi(path):
    from .multijunction import MultiJunctionSurface

    data = _read_json(path)
    verts = _array(data, "vertices", (3,), float, path)
    sheets = data.get("sheets")
    if not isinstance(sheets, list) or not sheets:
        raise ParseError(f"{path}: 'sheets' must be a non-empty list")
    tris, theta = [], []
    for k, sh in enumerate(sheets):
        if not isinstance(sh, dict) or "triangles" not in sh:
            raise ParseError(f"{path}: sheet {k} lacks 'triangles'")
        try:
            tris.append(np.asarray(sh["triangles"], dtype=np.int64).reshape(-1, 3))
            theta.append(float(sh.get("theta", 1.0)))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: sheet {k} is malformed") from exc
    if "gamma" not in data:
        raise ParseError(f"{path}: missing 'gamma'")
    try:
        gamma = [int(g) for g in data["gamma"]]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: 'gamma' must be vertex indices") from exc
    return MultiJunctionSurface.build(verts, tris, theta, gamma)
