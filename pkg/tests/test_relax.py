from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from plateau import corpus
from plateau.errors import StepDivergenceError
from plateau.relax import area_gradient, junction_angle_error, junction_angles, relax_to_minimal, vertex_mass


def test_area_gradient_matches_finite_difference(rng):
    c = corpus.y_catenoid_seed(0.4)
    V, T = c.vertices, c.triangles

    def area(X):
        a, b, d = X[T[:, 0]], X[T[:, 1]], X[T[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, d - a), axis=1).sum()

    g = area_gradient(V, T)
    D = rng.standard_normal(V.shape)
    eps = 1e-6
    fd = (area(V + eps * D) - area(V - eps * D)) / (2 * eps)
    assert float(np.sum(g * D)) == pytest.approx(fd, rel=1e-7)
    assert vertex_mass(V, T).sum() == pytest.approx(area(V), rel=1e-12)


def test_exact_y_is_fixed_point(y_c):
    r = relax_to_minimal(y_c, steps=50)
    assert r.max_step_motion <= 1e-12
    assert np.abs(r.complex.vertices - y_c.vertices).max() <= 1e-12
    assert r.area_history[-1] == pytest.approx(r.area_history[0], rel=1e-14)


def test_exact_t_is_fixed_point(t_c):
    r = relax_to_minimal(t_c, steps=20)
    assert np.abs(r.complex.vertices - t_c.vertices).max() <= 1e-12


def test_large_step_request_is_clamped():
    c = corpus.y_book_complex(0.2, Z=0.5, angles_deg=(0.0, 115.0, 230.0))
    r = relax_to_minimal(c, steps=100, step_size=1e3)
    assert np.all(np.diff(r.area_history) <= 1e-12)


def test_divergence_detected():
    # tangential smoothing at this strength pumps area in faster than the flow removes it
    c = corpus.y_book_complex(0.2, angles_deg=(0.0, 115.0, 230.0))
    with pytest.raises(StepDivergenceError):
        relax_to_minimal(c, steps=200, tangential_smoothing=100.0)


def test_book_relaxes_to_fermat_junction():
    angles = (0.0, 115.0, 230.0)
    c = corpus.y_book_complex(0.1, Z=0.5, angles_deg=angles)
    sliding = corpus.slab_sliding(c, keep_radius=1.0)
    r = relax_to_minimal(c, steps=1500, sliding=sliding)
    assert r.final["max_conormal_sum"] <= r.initial["max_conormal_sum"] / 10
    assert r.initial["max_junction_angle_error_deg"] == pytest.approx(10.0, abs=1e-9)
    assert r.final["max_junction_angle_error_deg"] <= 1.0
    # sliding vertices stay in their cap planes; far edges stay put
    V0, V1 = c.vertices, r.complex.vertices
    slide = np.array(sorted(sliding))
    assert np.abs(V1[slide, 2] - V0[slide, 2]).max() <= 1e-14
    pinned = c.boundary_vertices.copy()
    pinned[slide] = False
    assert np.abs(V1[pinned] - V0[pinned]).max() == 0.0
    # the three pinned far edges are at unit distance: the junction moves to their Fermat point
    far = [np.array([math.cos(math.radians(a)), math.sin(math.radians(a))]) for a in angles]
    target = oracles.fermat_point(far)
    got = V1[r.complex.junctions[0], :2].mean(axis=0)
    assert np.linalg.norm(got - target) <= 0.03
    assert np.linalg.norm(V0[c.junctions[0], :2].mean(axis=0) - target) > 0.09


def test_junction_angles_of_exact_y(y_c):
    for fitted in (True, False):
        ang = junction_angles(y_c, fitted=fitted)[0]
        assert np.abs(ang - 120.0).max() <= 1e-8
    assert junction_angle_error(y_c) <= 1e-8


def test_unbalanced_y_angles():
    c = corpus.y_cone(0.2, angles_deg=(0.0, 110.0, 235.0))
    ang = junction_angles(c, fitted=False)[0]
    assert np.allclose(ang, [110.0, 125.0, 125.0], atol=1e-8)
