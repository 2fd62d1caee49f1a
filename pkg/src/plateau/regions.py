"""Connected components of the complement of a complex in a probe domain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .complex import PlateauComplex
from .errors import EmbeddingError, ResolutionError


@dataclass(frozen=True)
class ComplementRegions:
    """Region labels of box minus complex.

    ``sides[patch] = (region on the +normal side, region on the -normal side)``.
    Without an explicit box the probe domain is the largest ball around the
    bounding-box center that avoids the artificial boundary. Regions are
    numbered 0..n-1 in raster order of their first voxel; voxel pockets that
    no patch faces are dropped and counted in ``pockets``.
    """

    n_regions: int
    sides: dict
    box: tuple
    resolution: int
    pockets: int

    def faces(self, region: int) -> list:
        return [p for p, s in self.sides.items() if region in s]


def default_probe_ball(c: PlateauComplex):
    """Largest ball around the bbox center that stays clear of the boundary."""
    lo, hi = c.vertices.min(axis=0), c.vertices.max(axis=0)
    center = 0.5 * (lo + hi)
    b = c.boundary_vertices
    if np.any(b):
        r = float(np.min(np.linalg.norm(c.vertices[b] - center, axis=1)))
    else:
        r = 0.5 * float(np.linalg.norm(hi - lo))
    return center, 0.95 * r


def _surface_samples(V, T, spacing):
    """Points on every triangle at roughly the requested spacing."""
    pts = [V[T].reshape(-1, 3)]
    a, b, c = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
    diam = np.max(np.stack([np.linalg.norm(b - a, axis=1), np.linalg.norm(c - b, axis=1), np.linalg.norm(a - c, axis=1)]), axis=0)
    m = np.maximum(1, np.ceil(diam / spacing).astype(int))
    for k in np.unique(m):
        sel = m == k
        ii, jj = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
        keep = ii + jj <= k
        u = (ii[keep] / k)[None, :, None]
        v = (jj[keep] / k)[None, :, None]
        A, B, C = a[sel][:, None], b[sel][:, None], c[sel][:, None]
        pts.append((A + u * (B - A) + v * (C - A)).reshape(-1, 3))
    return np.vstack(pts)


def complement_regions(c: PlateauComplex, probe_box=None, resolution: int = 64, check_embedding: bool = True) -> ComplementRegions:
    """Flood-fill the voxelized complement and record which regions each patch faces."""
    if check_embedding:
        check_embedded(c)
    n = int(resolution)
    if probe_box is None:
        center, radius = default_probe_ball(c)
        lo, hi = center - radius, center + radius
    else:
        lo, hi = np.asarray(probe_box[0], float), np.asarray(probe_box[1], float)
        radius = None
    h = (hi - lo) / n
    hmin = float(h.min())
    pts = _surface_samples(c.vertices, c.triangles, 0.25 * hmin)
    idx = np.floor((pts - lo) / h).astype(int)
    ok = np.all((idx >= 0) & (idx < n), axis=1)
    wall = np.zeros((n, n, n), dtype=bool)
    wall[tuple(idx[ok].T)] = True
    # close pinholes where a sheet only grazes a voxel corner
    wall = ndimage.binary_dilation(wall, structure=ndimage.generate_binary_structure(3, 1))
    if radius is not None:
        # voxels outside the probe ball count as wall so regions cannot leak around the truncation
        axes = [lo[k] + (np.arange(n) + 0.5) * h[k] - center[k] for k in range(3)]
        X, Y, Z = np.meshgrid(*axes, indexing="ij")
        wall |= X * X + Y * Y + Z * Z > radius * radius
    labels, count = ndimage.label(~wall, structure=ndimage.generate_binary_structure(3, 1))

    cent = c.vertices[c.triangles].mean(axis=1)
    step = 3.0 * hmin
    sides = {}
    for p in c.patch_ids:
        all_tri = np.flatnonzero(c.tri_patch == p)
        # prefer triangles well inside the probe domain, but accept patches that only graze it
        for margin in (2 * step, step, 0.5 * step):
            if radius is None:
                inside = np.all((cent[all_tri] > lo + margin) & (cent[all_tri] < hi - margin), axis=1)
            else:
                inside = np.linalg.norm(cent[all_tri] - center, axis=1) < radius - margin
            if np.any(inside):
                break
        tri = all_tri[inside]
        if len(tri) == 0:
            continue
        votes = []
        for s in (1.0, -1.0):
            q = cent[tri] + s * step * c.tri_normals[tri]
            qi = np.floor((q - lo) / h).astype(int)
            qi = np.clip(qi, 0, n - 1)
            lab = labels[tuple(qi.T)]
            lab = lab[lab > 0]
            if len(lab) == 0:
                raise ResolutionError(f"patch {p}: side probes all land on the surface; increase resolution")
            votes.append(int(np.bincount(lab).argmax()))
        if votes[0] == votes[1]:
            raise ResolutionError(f"patch {p} faces the same region on both sides; grid too coarse or sheets leak")
        sides[p] = tuple(votes)
    used = sorted({r for s in sides.values() for r in s})
    renum = {r: k for k, r in enumerate(used)}
    sides = {p: (renum[a], renum[b]) for p, (a, b) in sides.items()}
    return ComplementRegions(
        n_regions=len(used),
        sides=sides,
        box=(lo.tolist(), hi.tolist()),
        resolution=n,
        pockets=int(count - len(used)),
    )


# -------------------------------------------------------------- embedding
def _segment_hits(p, q, a, b, c, eps):
    """Vectorized strict segment/triangle crossing test."""
    d = q - p
    e1 = b - a
    e2 = c - a
    pv = np.cross(d, e2)
    det = np.sum(e1 * pv, axis=1)
    good = np.abs(det) > eps
    inv = np.where(good, 1.0 / np.where(good, det, 1.0), 0.0)
    tv = p - a
    u = np.sum(tv * pv, axis=1) * inv
    qv = np.cross(tv, e1)
    v = np.sum(d * qv, axis=1) * inv
    t = np.sum(e2 * qv, axis=1) * inv
    tol = 1e-9
    return good & (u > tol) & (v > tol) & (u + v < 1 - tol) & (t > tol) & (t < 1 - tol)


def find_intersections(c: PlateauComplex, limit: int = 10):
    """Pairs of vertex-disjoint triangles that cross each other."""
    V, T = c.vertices, c.triangles
    cent = V[T].mean(axis=1)
    rad = np.max(np.linalg.norm(V[T] - cent[:, None], axis=2), axis=1)
    tree = cKDTree(cent)
    pairs = tree.query_pairs(2.0 * float(rad.max()), output_type="ndarray")
    if len(pairs) == 0:
        return []
    i, j = pairs[:, 0], pairs[:, 1]
    close = np.linalg.norm(cent[i] - cent[j], axis=1) <= rad[i] + rad[j]
    i, j = i[close], j[close]
    share = np.zeros(len(i), dtype=bool)
    for a in range(3):
        for b in range(3):
            share |= T[i, a] == T[j, b]
    i, j = i[~share], j[~share]
    hit = np.zeros(len(i), dtype=bool)
    eps = c.tol_geom**2
    for x, y in ((i, j), (j, i)):
        A, B, C = V[T[y, 0]], V[T[y, 1]], V[T[y, 2]]
        for k in range(3):
            p = V[T[x, k]]
            q = V[T[x, (k + 1) % 3]]
            hit |= _segment_hits(p, q, A, B, C, eps)
    return [(int(a), int(b)) for a, b in zip(i[hit][:limit], j[hit][:limit])]


def check_embedded(c: PlateauComplex) -> None:
    bad = find_intersections(c, limit=1)
    if bad:
        raise EmbeddingError(f"triangles {bad[0][0]} and {bad[0][1]} intersect")
