from __future__ import annotations

import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plateau import kernels
from plateau.kernels import shell_integrals


def _fan(n=24, R=3.0):
    """Disk of radius R through the origin, split into n triangles."""
    ang = np.linspace(0, 2 * np.pi, n, endpoint=False)
    V = np.vstack([[0.0, 0.0, 0.0], np.c_[R * np.cos(ang), R * np.sin(ang), np.zeros(n)]])
    T = np.array([[0, 1 + k, 1 + (k + 1) % n] for k in range(n)])
    return V, T


@pytest.mark.parametrize("power", [0.0, -2.0, 1.0])
@pytest.mark.parametrize("backend", ["python", "cython"])
def test_planar_annulus_integral(power, backend):
    if backend == "cython" and kernels.BACKEND != "cython":
        pytest.skip("compiled kernel not built")
    r0, r1 = 0.7, 1.9
    # int over the annulus of r^p dA = 2 pi (r1^(p+2) - r0^(p+2)) / (p+2), or 2 pi log(r1/r0) for p = -2
    expect = 2 * math.pi * (math.log(r1 / r0) if power == -2.0 else (r1 ** (power + 2) - r0 ** (power + 2)) / (power + 2))
    V, T = _fan()
    got = shell_integrals(V, T, (0.0, 0.0, 0.0), r0, r1, power, backend=backend).sum()
    assert got == pytest.approx(expect, rel=2e-3)


def test_inside_and_outside_triangles():
    V, T = _fan(R=0.5)
    areas = 0.5 * np.linalg.norm(np.cross(V[T[:, 1]] - V[T[:, 0]], V[T[:, 2]] - V[T[:, 0]]), axis=1)
    assert np.allclose(shell_integrals(V, T, (0, 0, 0), 0.0, 10.0), areas, rtol=1e-12)
    assert np.all(shell_integrals(V, T, (0, 0, 0), 2.0, 3.0) == 0.0)
    assert np.all(shell_integrals(V, T, (50.0, 0, 0), 0.0, 1.0) == 0.0)


@settings(max_examples=40, deadline=None)
@given(
    pts=st.lists(st.floats(-2.0, 2.0), min_size=9, max_size=9),
    r0=st.floats(0.0, 1.0),
    dr=st.floats(0.05, 2.0),
    power=st.sampled_from([0.0, 1.0, -2.0]),
)
def test_backends_agree(pts, r0, dr, power):
    if kernels.BACKEND != "cython":
        pytest.skip("compiled kernel not built")
    tri = np.array(pts).reshape(3, 3)
    if np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0])) < 1e-3:
        return
    if power < 0 and r0 < 0.05:
        r0 = 0.05
    a = shell_integrals(tri, [[0, 1, 2]], (0.1, -0.2, 0.3), r0, r0 + dr, power, backend="python")
    b = shell_integrals(tri, [[0, 1, 2]], (0.1, -0.2, 0.3), r0, r0 + dr, power, backend="cython")
    assert np.allclose(a, b, rtol=1e-10, atol=1e-13)


def test_fallback_selected_by_environment():
    env = dict(os.environ, PLATEAU_KERNEL="python")
    out = subprocess.run(
        [sys.executable, "-c", "from plateau import kernels; print(kernels.BACKEND)"], capture_output=True, text=True, env=env
    )
    assert out.stdout.strip() == "python"
