"""Strain basis families: linearity, family degeneracies, parameter counts."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scashape.strainbasis import (AXIS_NAMES, BasisFamily, BasisSpec,
                                  StrainField, basis_from_dict, basis_matrix,
                                  basis_to_dict, bend_twist_basis, eval_kappa,
                                  eval_omega, param_count, shape_functions)

L = 287.0

coeff4 = st.lists(st.floats(-2.0, 2.0), min_size=4, max_size=4).map(np.array)
svals = st.floats(0.0, L)


@given(coeff4, coeff4, st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), svals)
def test_linearity_in_coefficients(a, b, alpha, beta, s):
    spec = bend_twist_basis(BasisFamily.PIECEWISE, 2, L)
    combined = eval_kappa(StrainField(spec, alpha * a + beta * b), s)
    separate = (alpha * eval_kappa(StrainField(spec, a), s)
                + beta * eval_kappa(StrainField(spec, b), s))
    assert np.allclose(combined, separate, atol=1e-12)


@given(svals)
def test_single_segment_piecewise_equals_constant(s):
    pw1 = bend_twist_basis(BasisFamily.PIECEWISE, 1, L)
    const = bend_twist_basis(BasisFamily.CONSTANT, 0, L)
    coeffs = np.array([0.7, -0.3])
    assert np.allclose(eval_kappa(StrainField(pw1, coeffs), s),
                       eval_kappa(StrainField(const, coeffs), s), atol=0)


@given(svals)
def test_zero_order_polynomial_equals_constant(s):
    poly0 = bend_twist_basis(BasisFamily.POLYNOMIAL, 0, L)
    const = bend_twist_basis(BasisFamily.CONSTANT, 0, L)
    coeffs = np.array([0.7, -0.3])
    assert np.allclose(eval_kappa(StrainField(poly0, coeffs), s),
                       eval_kappa(StrainField(const, coeffs), s), atol=0)


def test_param_count_matches_catalog():
    expected = {(BasisFamily.CONSTANT, 0): 2,
                (BasisFamily.PIECEWISE, 2): 4,
                (BasisFamily.POLYNOMIAL, 1): 4,
                (BasisFamily.POLYNOMIAL, 2): 6,
                (BasisFamily.POLYNOMIAL, 3): 8}
    for (family, n), count in expected.items():
        assert param_count(bend_twist_basis(family, n, L)) == count


def test_piecewise_indicator_selects_one_segment():
    spec = bend_twist_basis(BasisFamily.PIECEWISE, 2, L)
    for s, active in ((0.0, 0), (0.25 * L, 0), (0.5 * L, 1), (0.75 * L, 1),
                      (L, 1)):
        h = shape_functions(spec, s)
        assert h.shape[-1] == 2
        expected = np.zeros(2)
        expected[active] = 1.0
        assert np.allclose(np.ravel(h), expected, atol=0)


def test_piecewise_breakpoint_is_half_open():
    # at s exactly on the interior breakpoint, the later segment is active
    spec = bend_twist_basis(BasisFamily.PIECEWISE, 2, L)
    coeffs = np.array([0.1, 0.2, 0.3, 0.4])
    kappa = eval_kappa(StrainField(spec, coeffs), 0.5 * L)
    assert np.allclose(kappa, [0.3, 0.4, 0.0], atol=0)


def test_polynomial_uses_arclength_normalized_by_length():
    spec = bend_twist_basis(BasisFamily.POLYNOMIAL, 3, L)
    h = np.ravel(shape_functions(spec, L))
    assert np.allclose(h, np.ones(4), atol=1e-15)
    h_half = np.ravel(shape_functions(spec, 0.5 * L))
    assert np.allclose(h_half, [1.0, 0.5, 0.25, 0.125], atol=1e-15)


def test_constant_full_axes_returns_coefficients():
    spec = BasisSpec(BasisFamily.CONSTANT, L, active_axes=AXIS_NAMES)
    coeffs = np.array([0.3, -0.1, 0.55])
    for s in (0.0, 10.0, L):
        assert np.allclose(eval_kappa(StrainField(spec, coeffs), s), coeffs,
                           atol=0)


def test_polynomial_linear_two_axes():
    spec = bend_twist_basis(BasisFamily.POLYNOMIAL, 1, L)
    coeffs = np.array([0.2, 0.4, 0.6, 0.8])  # axes inner, functions outer
    s = 0.25 * L
    kappa = eval_kappa(StrainField(spec, coeffs), s)
    assert np.allclose(kappa, [0.2 + 0.6 * 0.25, 0.4 + 0.8 * 0.25, 0.0],
                       atol=1e-14)


def test_forced_axis_is_always_zero():
    spec = bend_twist_basis(BasisFamily.PIECEWISE, 2, L)
    gen = np.random.default_rng(2)
    for _ in range(20):
        coeffs = gen.normal(size=4)
        s = gen.uniform(0.0, L)
        assert eval_kappa(StrainField(spec, coeffs), s)[2] == 0.0


def test_eval_omega_appends_reference_strain():
    spec = bend_twist_basis(BasisFamily.CONSTANT, 0, L)
    tw = eval_omega(StrainField(spec, np.array([0.5, -0.2])), 3.0)
    assert np.allclose(tw.kappa, [0.5, -0.2, 0.0], atol=0)
    assert np.allclose(tw.q, [1.0, 0.0, 0.0], atol=0)


def test_basis_matrix_shape_and_block_layout():
    spec = bend_twist_basis(BasisFamily.PIECEWISE, 2, L)
    s = np.array([0.1 * L, 0.9 * L])
    mat = basis_matrix(spec, s)
    assert mat.shape == (2, 3, 4)
    # first sample activates segment one only: columns 2,3 are zero
    assert np.allclose(mat[0, :, 2:], 0.0, atol=0)
    assert np.allclose(mat[1, :, :2], 0.0, atol=0)
    # strain = basis_matrix @ coeffs
    coeffs = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.allclose(mat[1] @ coeffs,
                       eval_kappa(StrainField(spec, coeffs), 0.9 * L), atol=0)


def test_tabulated_family_matches_interp_oracle():
    grid = (0.0, 0.5 * L, L)
    values = ((0.0, 1.0, 0.5),)
    spec = BasisSpec(BasisFamily.TABULATED, L, active_axes=("bend-y",),
                     sample_grid=grid, sample_values=values)
    coeffs = np.array([2.0])
    for s in np.linspace(0.0, L, 17):
        expected = 2.0 * np.interp(s, grid, values[0])
        assert np.isclose(eval_kappa(StrainField(spec, coeffs), s)[1],
                          expected, atol=1e-14)


def test_axis_order_is_validated():
    with pytest.raises(ValueError):
        BasisSpec(BasisFamily.CONSTANT, L, active_axes=("bend-y", "twist-x"))
    with pytest.raises(ValueError):
        BasisSpec(BasisFamily.CONSTANT, L, active_axes=("roll",))


def test_serialization_round_trip():
    for spec in (bend_twist_basis(BasisFamily.PIECEWISE, 2, L),
                 bend_twist_basis(BasisFamily.POLYNOMIAL, 3, L),
                 bend_twist_basis(BasisFamily.CONSTANT, 0, L)):
        back = basis_from_dict(basis_to_dict(spec))
        assert back == spec
        assert param_count(back) == param_count(spec)
