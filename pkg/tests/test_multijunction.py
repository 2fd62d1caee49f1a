from __future__ import annotations

import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from plateau import corpus
from plateau.errors import (
    AngleDegeneracyError,
    DisconnectedError,
    ExtentError,
    NotStationaryError,
    StructureError,
)
from plateau.multijunction import (
    MultiJunctionSurface,
    appendix_bernstein_test,
    build_paired_test_fields,
    check_equilibrium_angles,
    compatibility_residual,
    cutoff_values,
    intrinsic_distance,
    weighted_stability_form,
    weighted_stationarity,
)
from plateau.variation import assemble_second_variation, stability_spectrum


def _book(h=0.2, angles=(0.0, 120.0, 240.0), theta=None, twist=None, width=1.0, Z=1.0):
    v, t, p, g = corpus.y_book(h, width, Z, angles, twist)
    q = len(angles)
    return MultiJunctionSurface.build(v, [t[p == k] for k in range(q)], np.ones(q) if theta is None else theta, g)


@pytest.fixture(scope="module")
def book():
    return _book()


def _on_sheet(angle_deg, r, z):
    a = math.radians(angle_deg)
    return np.array([r * math.cos(a), r * math.sin(a), z])


# ----------------------------------------------------------------- building
def test_build_rejects_bad_input(book):
    T = book.sheet_triangles
    with pytest.raises(StructureError):
        MultiJunctionSurface.build(book.vertices, T[:1], [1.0], book.gamma)
    with pytest.raises(StructureError):
        MultiJunctionSurface.build(book.vertices, T, [1.0, 1.0], book.gamma)
    with pytest.raises(StructureError):
        MultiJunctionSurface.build(book.vertices, T, [1.0, -1.0, 1.0], book.gamma)
    # Gamma must lie on every sheet's boundary
    with pytest.raises(StructureError):
        MultiJunctionSurface.build(book.vertices, T, [1.0] * 3, [int(T[0][0, 1]), int(T[0][0, 2])])


def test_from_complex(y_c, t_c):
    m = MultiJunctionSurface.from_complex(y_c)
    assert m.q == 3 and np.all(m.theta == 1.0)
    with pytest.raises(StructureError):
        MultiJunctionSurface.from_complex(t_c)


# --------------------------------------------------------- intrinsic distance
def test_distance_on_one_sheet_is_euclidean(book):
    x, y = _on_sheet(0.0, 0.2, -0.3), _on_sheet(0.0, 0.8, 0.4)
    # edge paths with unfolded shortcuts overshoot the straight segment by a small fraction of h
    d = intrinsic_distance(book, x, y, 0, 0)
    assert np.linalg.norm(x - y) - 1e-12 <= d <= np.linalg.norm(x - y) + 0.1 * 0.2
    # nearby points share seeds and get the exact chord
    x, y = _on_sheet(0.0, 0.5, 0.0), _on_sheet(0.0, 0.6, 0.1)
    assert intrinsic_distance(book, x, y, 0, 0) == pytest.approx(np.linalg.norm(x - y), abs=1e-12)


def test_distance_across_sheets_goes_through_gamma(book):
    for a in (0.4, 0.6, 1.0):
        x, y = _on_sheet(0.0, a, 0.0), _on_sheet(120.0, a, 0.0)
        assert intrinsic_distance(book, x, y, 0, 1) == pytest.approx(2 * a, abs=1e-12)
    # different heights: unfold the two half-planes into one plane
    x, y = _on_sheet(0.0, 0.6, -0.4), _on_sheet(240.0, 0.2, 0.4)
    assert intrinsic_distance(book, x, y, 0, 2) == pytest.approx(math.hypot(0.8, 0.8), abs=1e-12)


def test_disconnected_component():
    m = _book(0.3)
    far = np.vstack([m.vertices, [[10.0, 0, 0], [11.0, 0, 0], [10.0, 1.0, 0]]])
    n = len(m.vertices)
    sheets = [m.sheet_triangles[0], m.sheet_triangles[1], np.vstack([m.sheet_triangles[2], [[n, n + 1, n + 2]]])]
    m2 = MultiJunctionSurface.build(far, sheets, [1.0] * 3, m.gamma)
    x, y = _on_sheet(0.0, 0.5, 0.0), np.array([10.2, 0.2, 0.0])
    assert intrinsic_distance(m2, x, y, 0, 2) == math.inf
    with pytest.raises(DisconnectedError):
        intrinsic_distance(m2, x, y, 0, 2, strict=True)


_point = st.tuples(st.sampled_from([0, 1, 2]), st.floats(0.0, 1.0), st.floats(-1.0, 1.0))


@functools.lru_cache(maxsize=1)
def _shared_book():
    return _book()


@settings(max_examples=25, deadline=None)
@given(a=_point, b=_point, c=_point)
def test_distance_metric_properties(a, b, c):
    book = _shared_book()
    pts = [(_on_sheet(120.0 * s, r, z), s) for s, r, z in (a, b, c)]
    d = lambda u, v: intrinsic_distance(book, u[0], v[0], u[1], v[1])
    assert d(pts[0], pts[1]) == pytest.approx(d(pts[1], pts[0]), abs=1e-12)
    # graph paths overshoot true geodesics by at most a couple of edge lengths
    E = np.vstack([T[:, [0, 1]] for T in book.sheet_triangles] + [T[:, [1, 2]] for T in book.sheet_triangles])
    slack = 2 * float(np.linalg.norm(book.vertices[E[:, 0]] - book.vertices[E[:, 1]], axis=1).max())
    assert d(pts[0], pts[2]) <= d(pts[0], pts[1]) + d(pts[1], pts[2]) + slack
    assert d(pts[0], pts[1]) >= np.linalg.norm(pts[0][0] - pts[1][0]) - 1e-12


# ------------------------------------------------------------- equilibrium
def test_flat_book_in_equilibrium(book):
    eq = check_equilibrium_angles(book)
    assert eq.equilibrium
    assert eq.max_deviation <= 1e-12
    assert sorted(round(math.degrees(x), 9) for x in eq.mean.values()) == [120.0, 120.0, 240.0]


def test_twisted_sheet_detected():
    h, Z = 0.2, 1.0
    m = _book(h, twist=(0.0, 0.0, 10.0), Z=Z)
    eq = check_equilibrium_angles(m)
    assert not eq.equilibrium
    # end normals sit half a cell inside the twist: spread (2J - 1) / (2J) of 10 degrees
    J = round(Z / h)
    assert math.degrees(eq.max_spread) == pytest.approx(10.0 * (2 * J - 1) / (2 * J), abs=1e-9)
    assert math.degrees(eq.max_deviation) == pytest.approx(0.5 * math.degrees(eq.max_spread), abs=1e-9)


# ------------------------------------------------------------ paired fields
def test_paired_field_coefficients(book):
    pf = build_paired_test_fields(book, (0, 0, 0), 1.0, alpha_deg=30.0)
    # c_j^i read off directly from W_j . nu^i along Gamma
    nu = book.frame.normals
    c1 = np.einsum("nk,nik->ni", pf.W1, nu)
    c2 = np.einsum("nk,nik->ni", pf.W2, nu)
    assert np.ptp(c1, axis=0).max() <= 1e-10 and np.ptp(c2, axis=0).max() <= 1e-10
    assert np.allclose(c1[0], pf.c1, atol=1e-12) and np.allclose(c2[0], pf.c2, atol=1e-12)
    assert np.allclose(pf.c1**2 + pf.c2**2, 1.0, atol=1e-12)
    assert sorted(np.round(pf.c1, 12).tolist()) == pytest.approx([-math.sqrt(3) / 2, 0.0, math.sqrt(3) / 2], abs=1e-12)
    # an explicit angle is used as given and its vanishing coefficient is reported
    assert pf.degenerate


def test_paired_fields_compatible_and_cut_off(book):
    n = 0.25
    pf = build_paired_test_fields(book, (0, 0, 0), n)
    assert not pf.degenerate
    assert pf.retries == 1 and math.degrees(pf.alpha) == pytest.approx(11.25)
    assert min(np.abs(pf.c1).min(), np.abs(pf.c2).min()) > 1e-9
    for phi in (pf.phi1, pf.phi2):
        assert compatibility_residual(book, phi) <= 1e-10
    far = pf.rho[book.dof_vertex] >= math.exp(n)
    assert np.any(far)
    assert np.all(pf.phi1[far] == 0.0) and np.all(pf.phi2[far] == 0.0)
    near = pf.rho[book.dof_vertex] <= 1.0
    assert np.allclose(pf.phi1[near], pf.c1[book.dof_sheet[near]], atol=0)


def test_cutoff_values():
    rho = np.array([0.0, 1.0, math.exp(1.0), math.exp(2.0), np.inf])
    assert np.allclose(cutoff_values(rho, 2.0), [1.0, 1.0, 0.5, 0.0, 0.0], atol=1e-14)


def test_angle_degeneracy():
    # sheets at every retry angle modulo 90 degrees: each trial W meets some normal at 0 or 90
    m = _book(0.3, angles=[k * 11.25 for k in range(8)])
    with pytest.raises(AngleDegeneracyError):
        build_paired_test_fields(m, (0, 0, 0), 1.0)


# ------------------------------------------------------------- weighted form
def test_unit_weights_reproduce_plateau_form():
    c = corpus.y_catenoid_seed(0.3)
    m = MultiJunctionSurface.from_complex(c)
    pids = c.junction_patches[0]
    perm = np.array([c.dof(pids[i], v) for i, v in zip(m.dof_sheet, m.dof_vertex)])
    A, B = weighted_stability_form(m), assemble_second_variation(c)
    for name in ("Q", "M", "potential", "curve"):
        X = getattr(A, name).toarray()
        Y = getattr(B, name).toarray()[np.ix_(perm, perm)]
        assert np.abs(X - Y).max() <= 1e-12 * max(1.0, np.abs(Y).max())


def test_unit_weights_same_spectrum_on_flat_y(y_c):
    a = stability_spectrum(weighted_stability_form(MultiJunctionSurface.from_complex(y_c)), k=4).eigenvalues
    b = stability_spectrum(assemble_second_variation(y_c), k=4).eigenvalues
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_weighted_book_balanced_and_stable():
    theta = (1.0, 1.0, 1.5)
    m = corpus.weighted_book(0.2, theta)
    rep = weighted_stationarity(m)
    assert rep["stationary"]
    assert rep["max_weighted_conormal_sum"] <= 1e-12
    eq = check_equilibrium_angles(m)
    expect = oracles.weighted_junction_angles(theta)
    for (i, j), a in zip(((0, 1), (1, 2), (0, 2)), expect):
        assert eq.conormal_angles[(i, j)] == pytest.approx(a, abs=1e-10)
    form = weighted_stability_form(m, check_stationary=True)
    assert stability_spectrum(form, k=1).eigenvalues[0] >= -1e-8 * form.spectral_norm


def test_degenerate_weights_collapse_sheets():
    tau = corpus.force_balance_directions((1.0, 1.0, 2.0))
    assert np.allclose(tau[0], tau[1], atol=1e-12)
    with pytest.raises(ValueError):
        corpus.force_balance_directions((1.0, 1.0, 3.0))


def test_unbalanced_weights_not_stationary():
    m = _book(0.2, theta=(1.0, 1.0, 1.5))
    assert not weighted_stationarity(m)["stationary"]
    with pytest.raises(NotStationaryError):
        weighted_stability_form(m, check_stationary=True)
    with pytest.raises(NotStationaryError):
        appendix_bernstein_test(m, (0, 0, 0), analytic=True)


# ---------------------------------------------------------- paired cutoff test
def test_weighted_cutoff_analytic_on_book():
    theta = np.array([1.0, 1.0, 1.5])
    m = corpus.weighted_book(0.2, theta)
    rep = appendix_bernstein_test(m, (0, 0, 0), analytic=True)
    csum = np.array(rep.c1) ** 2 + np.array(rep.c2) ** 2
    assert np.allclose(csum, 1.0, atol=1e-12)
    # every sheet is a half-plane at p0: rhs(n) = pi sum_i theta_i / n
    for n, r in zip(rep.n, rep.rhs):
        assert r * n == pytest.approx(math.pi * theta.sum(), rel=1e-12)
    assert rep.slope == pytest.approx(-1.0, abs=1e-12)
    assert max(abs(x) for x in rep.lhs) <= 1e-12
    assert rep.area_growth == pytest.approx(0.5 * math.pi * 3, rel=1e-12)


def test_weighted_cutoff_rhs_linear_in_theta():
    base = corpus.weighted_book(0.2, (1.0, 1.0, 1.5))
    doubled = corpus.weighted_book(0.2, (2.0, 2.0, 3.0))
    a = appendix_bernstein_test(base, (0, 0, 0), analytic=True, alpha_deg=11.25)
    b = appendix_bernstein_test(doubled, (0, 0, 0), analytic=True, alpha_deg=11.25)
    assert np.allclose(np.array(b.per_sheet_rhs), 2 * np.array(a.per_sheet_rhs), rtol=1e-12)
    assert np.allclose(b.rhs, 2 * np.array(a.rhs), rtol=1e-12)


def test_weighted_cutoff_mesh_mode_on_wide_book():
    theta = (1.0, 1.0, 1.5)
    m = corpus.weighted_book(0.2, theta, width=3.0, Z=3.0)
    rep = appendix_bernstein_test(m, (0, 0, 0), n_list=(1,))
    assert rep.rhs[0] == pytest.approx(math.pi * sum(theta), rel=0.02)
    assert abs(rep.lhs[0]) <= 1e-12
    with pytest.raises(ExtentError):
        appendix_bernstein_test(m, (0, 0, 0), n_list=(1, 2))


def _paired_curve_density(m, pf):
    """Pointwise sum_i [(phi_1^i)^2 + (phi_2^i)^2] H_Gamma . tau^i theta^i along Gamma."""
    fr = m.frame
    g = np.einsum("nj,nij->ni", fr.curvature, fr.conormals)
    p1, p2 = pf.gamma_values(m, 1), pf.gamma_values(m, 2)
    return np.sum((p1**2 + p2**2) * g * m.theta[None, :], axis=1)


def test_paired_curve_terms_collapse_to_weighted_conormal_sum():
    # curved Gamma: the density equals zeta^2 H_Gamma . sum_i theta^i tau^i because c_1^2 + c_2^2 = 1 on every sheet
    m = MultiJunctionSurface.from_complex(corpus.y_catenoid_seed(0.2), theta=(1.0, 1.0, 1.5))
    pf = build_paired_test_fields(m, (1.1, 0.0, 0.0), 2.0, alpha_deg=20.0)
    fr = m.frame
    zeta = pf.cutoff[m.gamma]
    direct = zeta**2 * np.einsum("nj,nj->n", fr.curvature, np.einsum("i,nij->nj", m.theta, fr.conormals))
    dens = _paired_curve_density(m, pf)
    assert np.abs(direct).max() > 1e-2
    assert np.abs(dens - direct).max() <= 1e-12


def test_paired_curve_terms_vanish_on_balanced_book():
    m = corpus.weighted_book(0.2, (1.0, 1.0, 1.5))
    pf = build_paired_test_fields(m, (0, 0, 0), 2.0)
    assert np.abs(_paired_curve_density(m, pf)).max() <= 1e-8
