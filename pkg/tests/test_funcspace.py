from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from plateau import corpus
from plateau.complex import assign_signs, curve_frames
from plateau.errors import IncompatibleFieldError, RegionUnknownError
from plateau.funcspace import (
    ScalarField,
    VectorField,
    _curve_dofs,
    check_compatible,
    field_from_payload,
    field_to_payload,
    lift_to_vector_field,
    locally_constant_field,
    null_space_basis,
    random_compatible_field,
    restrict_normal_component,
    t_point_compatible_rank,
    verify_inner_product_tables,
)
from plateau.regions import complement_regions


def _junction_field(c, values):
    """Field that is zero except for the given per-patch values on one junction vertex."""
    f = ScalarField.zeros(c)
    cv = c.junctions[0]
    v = int(cv[len(cv) // 2])
    for p, x in zip(c.junction_patches[0], values):
        f.values[c.dof(p, v)] = x
    return f, v


def test_balanced_values_compatible(y_c):
    f, _ = _junction_field(y_c, (1.0, -1.0, 0.0))
    rep = check_compatible(f)
    assert rep.junction_residual == 0.0
    assert rep.compatible


def test_equal_values_incompatible(y_c):
    f, _ = _junction_field(y_c, (1.0, 1.0, 1.0))
    rep = check_compatible(f)
    assert rep.junction_residual == pytest.approx(3.0)
    assert not rep.compatible
    with pytest.raises(IncompatibleFieldError):
        lift_to_vector_field(f)


def test_lift_at_junction_vertex(y_c):
    f, v = _junction_field(y_c, (1.0, -1.0, 0.0))
    V = lift_to_vector_field(f)
    _, nu = curve_frames(y_c, 0)
    k = len(y_c.junctions[0]) // 2
    assert np.allclose(V.values[v], (2 / 3) * (nu[k, 0] - nu[k, 1]), atol=1e-14)
    # nu_1 . nu_2 = -1/2 gives V . nu_1 = (2/3)(1 + 1/2) = 1
    assert V.values[v] @ nu[k, 0] == pytest.approx(1.0, abs=1e-14)


def test_zero_lifts_to_zero(t_c):
    assert np.all(lift_to_vector_field(ScalarField.zeros(t_c)).values == 0.0)


@pytest.mark.parametrize("fixture", ["plane_c", "y_c", "t_c", "double_t_c"])
def test_region_fields_compatible(fixture, request):
    c = request.getfixturevalue(fixture)
    reg = complement_regions(c)
    total = np.zeros(c.n_dofs)
    for j in range(reg.n_regions):
        f = locally_constant_field(c, reg, j)
        rep = check_compatible(f)
        assert rep.junction_residual == 0.0 and rep.t_residual == 0.0
        assert set(np.unique(f.values)) <= {-1.0, 0.0, 1.0}
        total += f.values
    # every patch faces two regions with opposite induced values
    assert np.all(total == 0.0)
    with pytest.raises(RegionUnknownError):
        locally_constant_field(c, reg, reg.n_regions)


def test_y_region_pattern(y_c):
    reg = complement_regions(y_c)
    for j in range(3):
        f = locally_constant_field(y_c, reg, j)
        per_patch = sorted(abs(f.at(p, int(y_c.junctions[0][0]))) for p in y_c.junction_patches[0])
        assert per_patch == [0.0, 1.0, 1.0]


def test_t_region_lift_matches_normal_table(t_c):
    reg = complement_regions(t_c)
    q = t_c.t_points[0]
    ref = oracles.t_cone_normals()
    for j in range(reg.n_regions):
        f = locally_constant_field(t_c, reg, j)
        V = lift_to_vector_field(f)
        for p in t_c.patch_ids:
            nu = t_c.dof_normals[t_c.dof(p, q)]
            # oracle normal of the same sector, oriented like the mesh normal
            n_ref = max(ref.values(), key=lambda n: abs(n @ nu))
            n_ref = n_ref if n_ref @ nu > 0 else -n_ref
            assert V.values[q] @ n_ref == pytest.approx(f.at(p, q), abs=1e-12)


def test_restrict_examples(y_c):
    f = restrict_normal_component(VectorField.constant(y_c, (0.0, 0.0, 1.0)))
    assert np.abs(f.values).max() <= 1e-15
    p = y_c.patch_ids[1]
    n = y_c.tri_normals[y_c.tri_patch == p][0]
    f = restrict_normal_component(VectorField.constant(y_c, n))
    assert np.allclose(f.values[y_c.dof_patch == p], 1.0, atol=1e-14)


def _round_trip_error(c, rng, Z):
    f = random_compatible_field(c, rng, Z=Z)
    back = restrict_normal_component(lift_to_vector_field(f))
    return float(np.abs(back.values - f.values).max())


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_round_trip_on_t(t_c, seed):
    Z = null_space_basis(t_c)
    assert _round_trip_error(t_c, np.random.default_rng(seed), Z) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_lift_linear(y_c, seed, a, b):
    rng = np.random.default_rng(seed)
    Z = null_space_basis(y_c)
    f = random_compatible_field(y_c, rng, Z=Z)
    g = random_compatible_field(y_c, rng, Z=Z)
    lhs = lift_to_vector_field(a * f + b * g).values
    rhs = a * lift_to_vector_field(f).values + b * lift_to_vector_field(g).values
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, abs(a) + abs(b))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_restrict_always_compatible(t_c, seed):
    V = VectorField(t_c, np.random.default_rng(seed).standard_normal((t_c.n_vertices, 3)))
    f = restrict_normal_component(V)
    f.values[t_c.dof_boundary] = 0.0
    rep = check_compatible(f, tol=1e-12)
    assert rep.compatible
    # exact up to rounding of the dot products
    assert rep.junction_residual <= 1e-14 and rep.t_residual <= 1e-14


def test_compatible_fields_vanish_on_boundary(t_c, rng):
    f = random_compatible_field(t_c, rng)
    assert check_compatible(f).boundary_residual == 0.0


def test_junction_compatible_dimension_two(y_c):
    Z = null_space_basis(y_c).toarray()
    cv = y_c.junctions[0]
    v = int(cv[len(cv) // 2])
    dofs = np.flatnonzero(y_c.dof_vertex == v)
    assert np.linalg.matrix_rank(Z[dofs]) == 2


def test_t_point_rank_frozen(t_c):
    s = assign_signs(t_c)
    rank, dim = t_point_compatible_rank(t_c, s, 0)
    # regression values; dim agrees with the span of the six sector normals
    assert (rank, dim) == (3, 3)
    assert dim == oracles.t_point_compatible_dimension()


def test_inner_product_tables_exact(y_c, t_c):
    assert verify_inner_product_tables(y_c).y_residual <= 1e-12
    rep = verify_inner_product_tables(t_c)
    assert rep.t_residual <= 1e-12 and rep.y_residual <= 1e-12
    measured, expected = rep.t_tables[0]
    # permutation entries vanish; the oracle Gram table agrees in absolute value
    pairs, G_abs = oracles.t_cone_abs_gram()
    assert np.abs(np.abs(expected) - G_abs).max() <= 1e-15
    assert np.abs(np.abs(measured) - G_abs).max() <= 1e-12


def test_inner_product_residual_of_perturbed_y():
    angles = (0.0, 121.0, 240.0)
    c = corpus.y_cone(0.2, angles_deg=angles)
    gaps = [angles[1] - angles[0], angles[2] - angles[1], 360 - angles[2] + angles[0]]
    expect = max(abs(math.cos(math.radians(g)) + 0.5) for g in gaps)
    assert verify_inner_product_tables(c).y_residual == pytest.approx(expect, abs=1e-12)
    assert expect == pytest.approx(math.sin(math.radians(1)) * math.sin(math.radians(120)), rel=0.02)


def test_field_payload_round_trip(t_c, rng):
    f = random_compatible_field(t_c, rng)
    g = field_from_payload(t_c, field_to_payload(f))
    assert np.array_equal(g.values, f.values)
    V = lift_to_vector_field(f)
    W = field_from_payload(t_c, field_to_payload(V))
    assert np.array_equal(W.values, V.values)


def test_curve_dofs_align_with_patches(t_c):
    for ci in range(len(t_c.junctions)):
        d = _curve_dofs(t_c, ci)
        for i, p in enumerate(t_c.junction_patches[ci]):
            assert np.all(t_c.dof_patch[d[:, i]] == p)
            assert np.array_equal(t_c.dof_vertex[d[:, i]], t_c.junctions[ci])
