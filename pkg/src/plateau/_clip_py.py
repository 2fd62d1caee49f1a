"""Pure-Python shell integration over triangles straddling a sphere.

Reference implementation of the compiled kernel in ``_clip.pyx``; both must
produce the same numbers.
"""

from __future__ import annotations

import math


def _dist(p, c):
    return math.sqrt((p[0] - c[0]) ** 2 + (p[1] - c[1]) ** 2 + (p[2] - c[2]) ** 2)


def _tri_area(a, b, c):
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    cx = uy * vz - uz * vy
    cy = uz * vx - ux * vz
    cz = ux * vy - uy * vx
    return 0.5 * math.sqrt(cx * cx + cy * cy + cz * cz)


def _clip(poly, center, radius, keep_inside):
    n = len(poly)
    if n == 0:
        return poly
    g = []
    for p in poly:
        d = _dist(p, center) - radius
        g.append(d if keep_inside else -d)
    out = []
    for i in range(n):
        j = (i + 1) % n
        gi, gj = g[i], g[j]
        if gi <= 0.0:
            out.append(poly[i])
        if (gi < 0.0 < gj) or (gj < 0.0 < gi):
            s = gi / (gi - gj)
            pi, pj = poly[i], poly[j]
            out.append((pi[0] + s * (pj[0] - pi[0]), pi[1] + s * (pj[1] - pi[1]), pi[2] + s * (pj[2] - pi[2])))
    return out


def _leaf(a, b, c, center, r_in, r_out, power):
    poly = _clip([a, b, c], center, r_out, True)
    if r_in > 0.0:
        poly = _clip(poly, center, r_in, False)
    if len(poly) < 3:
        return 0.0
    p0 = poly[0]
    area = 0.0
    gx = gy = gz = 0.0
    for k in range(1, len(poly) - 1):
        p1, p2 = poly[k], poly[k + 1]
        w = _tri_area(p0, p1, p2)
        area += w
        gx += w * (p0[0] + p1[0] + p2[0]) / 3.0
        gy += w * (p0[1] + p1[1] + p2[1]) / 3.0
        gz += w * (p0[2] + p1[2] + p2[2]) / 3.0
    if area <= 0.0:
        return 0.0
    if power == 0.0:
        return area
    rho = _dist((gx / area, gy / area, gz / area), center)
    return area * rho ** power


def _inside(a, b, c, center, power):
    area = _tri_area(a, b, c)
    if power == 0.0:
        return area
    acc = 0.0
    for p, q in ((a, b), (b, c), (c, a)):
        m = (0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2]))
        acc += _dist(m, center) ** power
    return area * acc / 3.0


def _recurse(a, b, c, center, r_in, r_out, power, depth, min_depth, max_depth):
    da, db, dc = _dist(a, center), _dist(b, center), _dist(c, center)
    lab = _dist(a, b)
    lbc = _dist(b, c)
    lca = _dist(c, a)
    diam = max(lab, lbc, lca)
    dmax = max(da, db, dc)
    dlow = min(da, db, dc) - diam
    if dlow >= r_out or dmax <= r_in:
        return 0.0
    if dmax <= r_out and dlow >= r_in:
        return _inside(a, b, c, center, power)
    straddles_in = r_in > 0.0 and dlow < r_in
    scale = r_in if straddles_in else r_out
    if depth >= max_depth or (depth >= min_depth and diam <= 0.25 * scale):
        return _leaf(a, b, c, center, r_in, r_out, power)
    ab = (0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2]))
    bc = (0.5 * (b[0] + c[0]), 0.5 * (b[1] + c[1]), 0.5 * (b[2] + c[2]))
    ca = (0.5 * (c[0] + a[0]), 0.5 * (c[1] + a[1]), 0.5 * (c[2] + a[2]))
    d = depth + 1
    return (
        _recurse(a, ab, ca, center, r_in, r_out, power, d, min_depth, max_depth)
        + _recurse(ab, b, bc, center, r_in, r_out, power, d, min_depth, max_depth)
        + _recurse(ca, bc, c, center, r_in, r_out, power, d, min_depth, max_depth)
        + _recurse(ab, bc, ca, center, r_in, r_out, power, d, min_depth, max_depth)
    )


def straddle_integrals(tri_xyz, center, r_in, r_out, power, min_depth=3, max_depth=10):
    """Integral of rho**power over each triangle cut to r_in <= rho <= r_out."""
    import numpy as np

    tri_xyz = np.asarray(tri_xyz, dtype=float)
    c = tuple(float(x) for x in center)
    out = np.zeros(len(tri_xyz))
    for k in range(len(tri_xyz)):
        t = tri_xyz[k]
        out[k] = _recurse(
            tuple(t[0]), tuple(t[1]), tuple(t[2]), c, float(r_in), float(r_out), float(power), 0, min_depth, max_depth
        )
    return out
