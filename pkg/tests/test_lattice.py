"""Lattice geometry, stencils, finite differences, and discrete norms."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from itertools import product

from latcb.lattice import (
    DisplacementField,
    LatticeSpec,
    StencilSet,
    all_stencils,
    as_direction,
    cell_corner_values,
    finite_difference,
    gauss_rule_01,
    grad_norm,
    stencil,
    stencil_sup_norm,
)

from conftest import random_displacement


# ---------------------------------------------------------------------------
# geometry validation
# ---------------------------------------------------------------------------

def test_lattice_spec_validation():
    with pytest.raises(ValueError):
        LatticeSpec(d=4, A=np.eye(4), N=8)
    with pytest.raises(ValueError):
        LatticeSpec(d=2, A=np.zeros((2, 2)), N=8)
    with pytest.raises(ValueError):
        LatticeSpec(d=1, A=np.eye(1), N=3)
    with pytest.raises(ValueError):
        LatticeSpec(d=2, A=np.eye(3), N=8)


def test_site_coords_row_major():
    lattice = LatticeSpec(d=2, A=np.eye(2), N=4)
    coords = lattice.site_coords()
    assert coords.shape == (16, 2)
    assert lattice.n_sites == 16
    np.testing.assert_array_equal(coords[0], [0, 0])
    np.testing.assert_array_equal(coords[1], [0, 1])  # last axis varies fastest
    np.testing.assert_array_equal(coords[4], [1, 0])


def test_as_direction_validation():
    np.testing.assert_array_equal(as_direction([1, -2], 2), [1, -2])
    np.testing.assert_array_equal(as_direction(np.array([2.0, 0.0]), 2), [2, 0])
    with pytest.raises(ValueError):
        as_direction([0, 0], 2)
    with pytest.raises(ValueError):
        as_direction([1.5, 0.0], 2)
    with pytest.raises(ValueError):
        as_direction([1], 2)


# ---------------------------------------------------------------------------
# stencil sets
# ---------------------------------------------------------------------------

def test_stencil_ball_members():
    S1 = StencilSet.ball(1, 3.0)
    assert S1.n == 6
    assert sorted(int(r[0]) for r in S1.directions) == [-3, -2, -1, 1, 2, 3]
    S2 = StencilSet.ball(2, 2.0)
    assert S2.n == 12  # 4 nearest + 4 diagonal + 4 second-axis neighbours
    # lexicographic ordering gives a reproducible slot layout
    as_tuples = [tuple(r) for r in S2.directions]
    assert as_tuples == sorted(as_tuples)


def test_stencil_validation_errors():
    with pytest.raises(ValueError):
        StencilSet(r_cut=0.5, directions=np.array([[1], [-1]]))
    with pytest.raises(ValueError):
        StencilSet(r_cut=2.0, directions=np.array([[1, 0], [-1, 0], [2, 0]]))
    with pytest.raises(ValueError):
        StencilSet(r_cut=1.0, directions=np.array([[0, 0], [1, 0], [-1, 0]]))
    with pytest.raises(ValueError):
        # missing a nearest neighbour axis
        StencilSet(r_cut=1.0, directions=np.array([[1, 0], [-1, 0]]))


def test_stencil_index_and_negation_perm():
    S = StencilSet.ball(2, 1.5)
    for i, rho in enumerate(S.directions):
        assert S.index_of(rho) == i
    perm = S.negation_perm
    np.testing.assert_array_equal(S.directions[perm], -S.directions)
    with pytest.raises(KeyError):
        S.index_of([5, 0])


@given(st.integers(1, 2), st.floats(1.0, 3.5))
@settings(max_examples=40, deadline=None)
def test_stencil_ball_invariants(d, r_cut):
    S = StencilSet.ball(d, r_cut)
    dirs = {tuple(r) for r in S.directions}
    assert all(tuple(-np.array(r)) in dirs for r in dirs)
    assert np.all(S.norms <= r_cut + 1e-12)
    assert np.all(S.norms >= 1.0)
    for axis in range(d):
        e = tuple(1 if a == axis else 0 for a in range(d))
        assert e in dirs


# ---------------------------------------------------------------------------
# displacement fields and differences
# ---------------------------------------------------------------------------

def test_displacement_field_shape_and_wrap(rng):
    lattice = LatticeSpec(d=2, A=np.eye(2), N=5)
    with pytest.raises(ValueError):
        DisplacementField(lattice, np.zeros((5, 5)))
    u = random_displacement(lattice, rng)
    np.testing.assert_allclose(u.site_values([7, -3]), u.values[2, 2])
    v = u.copy()
    v.values[0, 0, 0] += 1.0
    assert u.values[0, 0, 0] != v.values[0, 0, 0]


def test_finite_difference_examples():
    lattice = LatticeSpec(d=1, A=np.eye(1), N=8)
    u = DisplacementField.from_function(
        lattice, lambda c: np.sin(2.0 * np.pi * c / 8.0)
    )
    # sin(pi/2) - sin(0) = 1 for the two-site difference at the origin
    assert finite_difference(u, [0], [2])[0] == pytest.approx(1.0, abs=1e-14)
    const = DisplacementField(lattice, np.full((8, 1), 0.37))
    assert np.max(np.abs(all_stencils(const.values, StencilSet.ball(1, 3.0)))) == 0.0


def test_all_stencils_matches_direct_lookup(rng):
    for d in (1, 2):
        lattice = LatticeSpec(d=d, A=np.eye(d), N=5)
        S = StencilSet.ball(d, 2.0)
        u = random_displacement(lattice, rng)
        g = all_stencils(u.values, S)
        sites = lattice.site_coords()
        direct = stencil(u, sites, S)
        np.testing.assert_allclose(
            g.reshape(-1, S.n, d), direct, atol=1e-15
        )
        # and one fully hand-rolled entry
        xi = sites[3]
        for i, rho in enumerate(S.directions):
            expect = u.site_values(xi + rho) - u.site_values(xi)
            np.testing.assert_allclose(direct[3, i], expect, atol=1e-15)


def test_stencil_sup_norm_scaling():
    S = StencilSet.ball(1, 2.0)
    # |g_rho| = c |rho| for every slot gives exactly c
    c = 0.17
    g = c * np.abs(S.directions).astype(float)
    assert stencil_sup_norm(g, S) == pytest.approx(c, abs=1e-15)
    g2 = np.zeros((S.n, 1))
    g2[S.index_of([2])] = 0.5
    assert stencil_sup_norm(g2, S) == pytest.approx(0.25, abs=1e-15)


# ---------------------------------------------------------------------------
# quadrature and interpolant norms
# ---------------------------------------------------------------------------

def test_gauss_rule_polynomial_exactness():
    for q in (1, 2, 4, 6):
        x, w = gauss_rule_01(q)
        assert np.sum(w) == pytest.approx(1.0, abs=1e-14)
        for k in range(2 * q):
            assert np.sum(w * x**k) == pytest.approx(1.0 / (k + 1), abs=1e-13), (q, k)


def test_cell_corner_values(rng):
    lattice = LatticeSpec(d=2, A=np.eye(2), N=4)
    u = random_displacement(lattice, rng)
    corners = cell_corner_values(u.values)
    for cell in ([0, 0], [3, 2]):
        for sigma in product((0, 1), repeat=2):
            got = corners[cell[0], cell[1], sigma[0], sigma[1]]
            want = u.site_values(np.array(cell) + np.array(sigma))
            np.testing.assert_allclose(got, want, atol=1e-15)


def test_grad_norm_hat_profile():
    lattice = LatticeSpec(d=1, A=np.eye(1), N=4)
    vals = np.array([[0.0], [1.0], [0.0], [0.0]])
    u = DisplacementField(lattice, vals)
    # slopes +1 and -1 on two cells: squared L2 norm 2, sup norm 1, L1 norm 2
    assert grad_norm(u, 2) == pytest.approx(np.sqrt(2.0), abs=1e-13)
    assert grad_norm(u, np.inf) == pytest.approx(1.0, abs=1e-13)
    assert grad_norm(u, 1) == pytest.approx(2.0, abs=1e-10)
    with pytest.raises(ValueError):
        grad_norm(u, 3)


def test_grad_norm_matches_dense_quadrature(rng):
    """2-point Gauss per axis is exact for |grad|^2; check against 6-point."""
    from latcb.interpolation import nodal_grad

    lattice = LatticeSpec(d=2, A=np.eye(2), N=4)
    u = random_displacement(lattice, rng, scale=1.0)
    x1, w1 = gauss_rule_01(6)
    pts1 = np.array(list(product(x1, repeat=2)))
    wts = np.prod(np.array(list(product(w1, repeat=2))), axis=1)
    total = 0.0
    for cell in lattice.site_coords():
        g = nodal_grad(u, cell + pts1)
        total += float(np.sum(wts * np.sum(g * g, axis=(1, 2))))
    assert grad_norm(u, 2) == pytest.approx(np.sqrt(total), rel=1e-12)
