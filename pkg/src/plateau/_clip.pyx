# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled shell integration over triangles straddling a sphere.

Mirrors ``_clip_py`` operation for operation so the two agree to rounding.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow

cnp.import_array()

cdef enum:
    MAXPOLY = 12


cdef inline double _dist(const double* p, const double* c) nogil:
    cdef double x = p[0] - c[0]
    cdef double y = p[1] - c[1]
    cdef double z = p[2] - c[2]
    return sqrt(x * x + y * y + z * z)


cdef inline double _tri_area(const double* a, const double* b, const double* c) nogil:
    cdef double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2]
    cdef double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2]
    cdef double cx = uy * vz - uz * vy
    cdef double cy = uz * vx - ux * vz
    cdef double cz = ux * vy - uy * vx
    return 0.5 * sqrt(cx * cx + cy * cy + cz * cz)


cdef int _clip(double* poly, int n, double* out, const double* center, double radius, bint keep_inside) nogil:
    cdef double g[MAXPOLY]
    cdef int i, j, m = 0
    cdef double gi, gj, s, d
    if n == 0:
        return 0
    for i in range(n):
        d = _dist(&poly[3 * i], center) - radius
        g[i] = d if keep_inside else -d
    for i in range(n):
        j = (i + 1) % n
        gi = g[i]
        gj = g[j]
        if gi <= 0.0:
            out[3 * m] = poly[3 * i]
            out[3 * m + 1] = poly[3 * i + 1]
            out[3 * m + 2] = poly[3 * i + 2]
            m += 1
        if (gi < 0.0 and 0.0 < gj) or (gj < 0.0 and 0.0 < gi):
            s = gi / (gi - gj)
            out[3 * m] = poly[3 * i] + s * (poly[3 * j] - poly[3 * i])
            out[3 * m + 1] = poly[3 * i + 1] + s * (poly[3 * j + 1] - poly[3 * i + 1])
            out[3 * m + 2] = poly[3 * i + 2] + s * (poly[3 * j + 2] - poly[3 * i + 2])
            m += 1
    return m


cdef double _leaf(const double* a, const double* b, const double* c, const double* center,
                  double r_in, double r_out, double power) nogil:
    cdef double p1[3 * MAXPOLY]
    cdef double p2[3 * MAXPOLY]
    cdef double* poly
    cdef int n, k
    cdef double area = 0.0, w, gx = 0.0, gy = 0.0, gz = 0.0, rho
    cdef double g[3]
    for k in range(3):
        p1[k] = a[k]
        p1[3 + k] = b[k]
        p1[6 + k] = c[k]
    n = _clip(p1, 3, p2, center, r_out, True)
    poly = p2
    if r_in > 0.0:
        n = _clip(p2, n, p1, center, r_in, False)
        poly = p1
    if n < 3:
        return 0.0
    for k in range(1, n - 1):
        w = _tri_area(&poly[0], &poly[3 * k], &poly[3 * k + 3])
        area += w
        gx += w * (poly[0] + poly[3 * k] + poly[3 * k + 3]) / 3.0
        gy += w * (poly[1] + poly[3 * k + 1] + poly[3 * k + 4]) / 3.0
        gz += w * (poly[2] + poly[3 * k + 2] + poly[3 * k + 5]) / 3.0
    if area <= 0.0:
        return 0.0
    if power == 0.0:
        return area
    g[0] = gx / area
    g[1] = gy / area
    g[2] = gz / area
    rho = _dist(g, center)
    return area * pow(rho, power)


cdef double _inside(const double* a, const double* b, const double* c, const double* center, double power) nogil:
    cdef double area = _tri_area(a, b, c)
    cdef double m[3]
    cdef double acc = 0.0
    cdef int k
    if power == 0.0:
        return area
    for k in range(3):
        m[k] = 0.5 * (a[k] + b[k])
    acc += pow(_dist(m, center), power)
    for k in range(3):
        m[k] = 0.5 * (b[k] + c[k])
    acc += pow(_dist(m, center), power)
    for k in range(3):
        m[k] = 0.5 * (c[k] + a[k])
    acc += pow(_dist(m, center), power)
    return area * acc / 3.0


cdef double _recurse(const double* a, const double* b, const double* c, const double* center,
                     double r_in, double r_out, double power, int depth, int min_depth, int max_depth) nogil:
    cdef double da = _dist(a, center), db = _dist(b, center), dc = _dist(c, center)
    cdef double lab = _dist(a, b), lbc = _dist(b, c), lca = _dist(c, a)
    cdef double diam = lab
    cdef double dmax = da
    cdef double dlow, scale
    cdef double ab[3]
    cdef double bc[3]
    cdef double ca[3]
    cdef int k
    cdef bint straddles_in
    if lbc > diam:
        diam = lbc
    if lca > diam:
        diam = lca
    if db > dmax:
        dmax = db
    if dc > dmax:
        dmax = dc
    dlow = da
    if db < dlow:
        dlow = db
    if dc < dlow:
        dlow = dc
    dlow -= diam
    if dlow >= r_out or dmax <= r_in:
        return 0.0
    if dmax <= r_out and dlow >= r_in:
        return _inside(a, b, c, center, power)
    straddles_in = r_in > 0.0 and dlow < r_in
    scale = r_in if straddles_in else r_out
    if depth >= max_depth or (depth >= min_depth and diam <= 0.25 * scale):
        return _leaf(a, b, c, center, r_in, r_out, power)
    for k in range(3):
        ab[k] = 0.5 * (a[k] + b[k])
        bc[k] = 0.5 * (b[k] + c[k])
        ca[k] = 0.5 * (c[k] + a[k])
    depth += 1
    return (
        _recurse(a, ab, ca, center, r_in, r_out, power, depth, min_depth, max_depth)
        + _recurse(ab, b, bc, center, r_in, r_out, power, depth, min_depth, max_depth)
        + _recurse(ca, bc, c, center, r_in, r_out, power, depth, min_depth, max_depth)
        + _recurse(ab, bc, ca, center, r_in, r_out, power, depth, min_depth, max_depth)
    )


def straddle_integrals(tri_xyz, center, double r_in, double r_out, double power, int min_depth=3, int max_depth=10):
    """Integral of rho**power over each triangle cut to r_in <= rho <= r_out."""
    cdef double[:, :, ::1] t = np.ascontiguousarray(tri_xyz, dtype=np.float64).reshape(-1, 3, 3)
    cdef double[::1] c = np.ascontiguousarray(center, dtype=np.float64)
    cdef Py_ssize_t n = t.shape[0], k
    out = np.zeros(n)
    cdef double[::1] o = out
    with nogil:
        for k in range(n):
            o[k] = _recurse(&t[k, 0, 0], &t[k, 1, 0], &t[k, 2, 0], &c[0], r_in, r_out, power, 0, min_depth, max_depth)
    return out
