"""Backend selection for the loop-heavy geometry kernels.

The compiled extension is used when it was built; otherwise the pure-Python
reference is imported. ``PLATEAU_KERNEL=python`` forces the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _clip_py

if os.environ.get("PLATEAU_KERNEL", "").lower() == "python":
    _impl = _clip_py
    BACKEND = "python"
else:
    try:
        from . import _clip as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _clip_py
        BACKEND = "python"

MIN_DEPTH = 3
MAX_DEPTH = 10


def _inside_rule(xyz, center, power):
    """Edge-midpoint rule (exact for quadratics) on whole triangles."""
    a, b, c = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    if power == 0.0:
        return area
    acc = np.zeros(len(xyz))
    for p, q in ((a, b), (b, c), (c, a)):
        acc += np.linalg.norm(0.5 * (p + q) - center, axis=1) ** power
    return area * acc / 3.0


def shell_integrals(vertices, triangles, center, r_in: float, r_out: float, power: float = 0.0, backend=None):
    """Per-triangle integral of ``|x - center|**power`` over ``r_in <= |x - center| <= r_out``.

    Triangles certainly inside or outside the shell are handled in bulk;
    the rest go through recursive bisection with polygon clipping at the
    leaves.
    """
    xyz = np.asarray(vertices, dtype=float)[np.asarray(triangles)]
    center = np.asarray(center, dtype=float)
    d = np.linalg.norm(xyz - center, axis=2)
    diam = np.max(np.linalg.norm(xyz - np.roll(xyz, 1, axis=1), axis=2), axis=1)
    dmax = d.max(axis=1)
    dlow = d.min(axis=1) - diam
    out = np.zeros(len(xyz))
    outside = (dlow >= r_out) | (dmax <= r_in)
    inside = ~outside & (dmax <= r_out) & (dlow >= r_in)
    straddle = ~outside & ~inside
    if np.any(inside):
        out[inside] = _inside_rule(xyz[inside], center, float(power))
    if np.any(straddle):
        impl = _impl if backend is None else (_clip_py if backend == "python" else _impl)
        out[straddle] = impl.straddle_integrals(
            np.ascontiguousarray(xyz[straddle]), center, float(r_in), float(r_out), float(power), MIN_DEPTH, MAX_DEPTH
        )
    return out
