"""Small vectorized helpers over raw vertex/triangle arrays."""

from __future__ import annotations

import numpy as np


def triangle_frames(vertices, triangles):
    """Return (unit normals, areas) for each triangle, normals by winding."""
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    cr = np.cross(b - a, c - a)
    dbl = np.linalg.norm(cr, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        n = cr / dbl[:, None]
    return n, 0.5 * dbl


def edge_table(triangles):
    """Unique undirected edges and the triangle -> edge incidence.

    Returns ``edges`` (E, 2) with ``edges[:, 0] < edges[:, 1]`` and
    ``tri_edges`` (M, 3) where ``tri_edges[t, k]`` is the edge opposite to
    local vertex ``k`` of triangle ``t``.
    """
    tris = np.asarray(triangles, dtype=np.int64)
    # edge k is opposite vertex k: (1,2), (2,0), (0,1)
    raw = np.stack(
        [tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]], axis=1
    ).reshape(-1, 2)
    raw.sort(axis=1)
    edges, inv = np.unique(raw, axis=0, return_inverse=True)
    return edges, inv.reshape(-1, 3)


def edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def directed_in_triangle(tri, a: int, b: int) -> bool:
    """True if the oriented triangle contains the directed edge a -> b."""
    t0, t1, t2 = int(tri[0]), int(tri[1]), int(tri[2])
    return (t0, t1) == (a, b) or (t1, t2) == (a, b) or (t2, t0) == (a, b)


def polyline_tangents(points, closed: bool = False):
    """Unit tangents of a polyline: central differences, one-sided at ends.

    Closed polylines repeat their first vertex at the end.
    """
    p = np.asarray(points, dtype=float)
    n = len(p)
    t = np.empty_like(p)
    if n == 1:
        t[:] = 0.0
        return t
    if closed:
        ring = p[:-1]
        t[:-1] = np.roll(ring, -1, axis=0) - np.roll(ring, 1, axis=0)
        t[-1] = t[0]
    else:
        t[0] = p[1] - p[0]
        t[-1] = p[-1] - p[-2]
        if n > 2:
            t[1:-1] = p[2:] - p[:-2]
    norms = np.linalg.norm(t, axis=1)
    norms[norms == 0] = 1.0
    return t / norms[:, None]


def polyline_curvature(points, closed: bool = False):
    """Curvature vectors by three-point second differences.

    Nonuniform spacing is handled by the divided-difference formula; the
    tangential part is removed. Open-curve endpoints reuse the stencil of
    their interior neighbour.
    """
    p = np.asarray(points, dtype=float)
    if closed:
        ring = p[:-1]
        prev = np.roll(ring, 1, axis=0)
        nxt = np.roll(ring, -1, axis=0)
        k = _second_difference(prev, ring, nxt)
        return np.vstack([k, k[:1]])
    n = len(p)
    k = np.zeros_like(p)
    if n < 3:
        return k
    k[1:-1] = _second_difference(p[:-2], p[1:-1], p[2:])
    k[0] = k[1]
    k[-1] = k[-2]
    return k


def _second_difference(prev, cur, nxt):
    d1 = cur - prev
    d2 = nxt - cur
    h1 = np.linalg.norm(d1, axis=1)[:, None]
    h2 = np.linalg.norm(d2, axis=1)[:, None]
    k = 2.0 * (d2 / h2 - d1 / h1) / (h1 + h2)
    t = nxt - prev
    t = t / np.linalg.norm(t, axis=1)[:, None]
    return k - np.sum(k * t, axis=1)[:, None] * t


def polyline_weights(points):
    """Trapezoid weights (half the adjacent segment lengths) per vertex."""
    p = np.asarray(points, dtype=float)
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    w = np.zeros(len(p))
    w[:-1] += 0.5 * seg
    w[1:] += 0.5 * seg
    return w
