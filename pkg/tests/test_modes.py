"""Hermite basis, projections, Schmidt decomposition and basis optimization."""
import math
from dataclasses import replace
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdchom.errors import BasisEscapesGrid, OrderOutOfRange
from pdchom.modes import (HermiteBasis, basis_axis, hermite_function, optimize_basis, product_jsa,
                          project, reconstruct, schmidt_decompose, singlet_jsa, singlet_overlap)
from pdchom.spectra import (GridSpec, PhasematchModel, ProcessModel, PumpModel, SpectralGrid,
                            SuperpositionModel, build_jsa, trapezoid_weights)

CENTER = 1000.0


def gram(basis, axis):
    u = basis.functions(axis)
    return (u * trapezoid_weights(axis)) @ u.T


@pytest.mark.parametrize("scale", [0.5, 3.0, 17.0])
def test_gram_identity_to_order_10(scale):
    basis = HermiteBasis(CENTER, scale, max_order=10)
    g = gram(basis, basis_axis(basis))
    assert np.max(np.abs(g - np.eye(11))) < 1e-8


def test_recurrence_matches_scipy_hermite():
    # independent oracle: physicists' Hermite polynomials with explicit normalization
    from scipy.special import eval_hermite

    basis = HermiteBasis(0.0, 1.0, max_order=10)
    x = np.linspace(-5, 5, 41)
    u = basis.functions(x)
    for n in range(11):
        norm = 1.0 / math.sqrt(2.0**n * math.factorial(n) * math.sqrt(math.pi))
        np.testing.assert_allclose(u[n], norm * eval_hermite(n, x) * np.exp(-x * x / 2), atol=1e-12)


def test_recurrence_stays_finite_at_high_order():
    basis = HermiteBasis(0.0, 1.0, max_order=150)
    u = basis.functions(np.linspace(-20, 20, 2001))
    assert np.all(np.isfinite(u))
    assert np.max(np.abs(u)) < 1.0


def test_peak_and_parity():
    basis = HermiteBasis(CENTER, 2.5)
    assert hermite_function(basis, 0, CENTER) == pytest.approx(math.pi**-0.25 / math.sqrt(2.5))
    assert hermite_function(basis, 1, CENTER) == pytest.approx(0.0, abs=1e-15)


def test_order_out_of_range():
    basis = HermiteBasis(CENTER, 1.0, max_order=3)
    with pytest.raises(OrderOutOfRange):
        hermite_function(basis, 4, CENTER)
    with pytest.raises(OrderOutOfRange):
        hermite_function(basis, -1, CENTER)


def test_basis_validation():
    with pytest.raises(ValueError):
        HermiteBasis(CENTER, 0.0)
    with pytest.raises(ValueError):
        HermiteBasis(CENTER, 1.0, max_order=0)


def test_basis_element_projection():
    basis = HermiteBasis(CENTER, 3.0)
    axis = basis_axis(basis)
    u = basis.functions(axis)
    c = project(product_jsa(u[0], u[1], axis), basis).coefficients
    assert abs(c[0, 1]) == pytest.approx(1.0, abs=1e-8)
    mask = np.ones_like(c, dtype=bool)
    mask[0, 1] = False
    assert np.max(np.abs(c[mask])) < 1e-6


def test_singlet_projection():
    basis = HermiteBasis(CENTER, 3.0)
    c = project(singlet_jsa(basis), basis).coefficients
    assert c[0, 1] == pytest.approx(1 / math.sqrt(2), abs=1e-8)
    assert c[1, 0] == pytest.approx(-1 / math.sqrt(2), abs=1e-8)
    assert singlet_overlap(singlet_jsa(basis), basis) == pytest.approx(1.0, abs=1e-6)


def test_separable_ground_state_has_no_singlet_overlap():
    basis = HermiteBasis(CENTER, 3.0)
    axis = basis_axis(basis)
    u0 = basis.functions(axis)[0]
    assert singlet_overlap(product_jsa(u0, u0, axis), basis) < 1e-20


def test_escape_detection():
    basis = HermiteBasis(CENTER, 3.0)
    axis = CENTER + np.linspace(-6, 6, 201)  # two scale units: far too narrow
    with pytest.raises(BasisEscapesGrid):
        project(product_jsa(np.ones(201), np.ones(201), axis), basis)


@lru_cache(maxsize=None)
def _reference_grid():
    model = ProcessModel(PumpModel(CENTER, 6.8607), PhasematchModel(12.0, 0.60, 0.30),
                         SuperpositionModel(8.4823, r=1.0, phi=0.0))
    return model, build_jsa(model)


def test_captured_weight_monotone_in_order():
    model, jsa = _reference_grid()
    weights = [project(jsa, HermiteBasis(CENTER, 2.0, max_order=n)).captured_weight for n in range(1, 11)]
    assert all(b >= a - 1e-12 for a, b in zip(weights, weights[1:]))
    assert 0.0 < weights[0] <= weights[4] <= 1.0 + 1e-9
    # direct quadrature oracle at orders 1 and 5
    ws, wi = jsa.weights()
    for order in (1, 5):
        u = HermiteBasis(CENTER, 2.0, max_order=order).functions(jsa.omega_s)
        direct = sum(abs(np.sum(np.outer(u[i] * ws, u[j] * wi) * jsa.amplitude)) ** 2
                     for i in range(order + 1) for j in range(order + 1))
        assert direct == pytest.approx(weights[order - 1], rel=1e-10)


@settings(max_examples=15, deadline=None)
@given(scale=st.floats(1.0, 4.0), order=st.integers(1, 8))
def test_reconstruction_error_bounded_by_missing_weight(scale, order):
    _, jsa = _reference_grid()
    basis = HermiteBasis(CENTER, scale, max_order=order)
    dec = project(jsa, basis)
    resid = jsa.amplitude - reconstruct(dec, jsa)
    ws, wi = jsa.weights()
    err2 = float(ws @ np.abs(resid) ** 2 @ wi)
    assert dec.captured_weight <= 1 + 1e-9
    assert err2 <= 1 - dec.captured_weight + 1e-6


def test_decomposition_invariants():
    _, jsa = _reference_grid()
    dec = project(jsa, HermiteBasis(CENTER, 2.0))
    sv = dec.schmidt_values
    assert np.all(np.diff(sv) <= 0) and np.all(sv >= 0)
    assert np.sum(sv**2) <= 1 + 1e-9


# ---- Schmidt decomposition ----------------------------------------------------

def test_schmidt_separable():
    axis = CENTER + np.linspace(-20, 20, 401)
    f = np.exp(-((axis - CENTER - 1) ** 2) / 8.0)
    g = np.exp(-((axis - CENTER + 2) ** 2) / 3.0) * np.exp(0.7j * axis)
    s = schmidt_decompose(product_jsa(f, g, axis))
    assert s.schmidt_values[0] == pytest.approx(1.0, abs=1e-9)
    assert np.all(s.schmidt_values[1:] < 1e-6)
    assert s.leading_weight == pytest.approx(1.0, abs=1e-9)


def test_schmidt_singlet():
    s = schmidt_decompose(singlet_jsa(HermiteBasis(CENTER, 3.0)))
    np.testing.assert_allclose(s.schmidt_values[:2], [1 / math.sqrt(2)] * 2, atol=1e-6)
    assert np.all(s.schmidt_values[2:] < 1e-6)


@pytest.mark.parametrize("sigma,dk_s,dk_i", [(6.8607, 0.6, 0.3), (3.0, 0.6, 0.3), (10.0, 0.5, 0.2)])
def test_schmidt_single_gaussian_process_closed_form(sigma, dk_s, dk_i):
    # Oracle: a bivariate Gaussian amplitude exp(-(A x^2 + B y^2 + 2 C x y)) has
    # Schmidt number K = 1/sqrt(1 - C^2/(A B)) and leading weight 2/(K + 1).
    # The linear phase e^{-ix} factorizes and does not change the spectrum.
    g = 0.193
    a, b = dk_s * 6.0, dk_i * 6.0
    A = 1 / (2 * sigma**2) + g * a * a
    B = 1 / (2 * sigma**2) + g * b * b
    C = 1 / (2 * sigma**2) + g * a * b
    K = 1 / math.sqrt(1 - C * C / (A * B))
    model = ProcessModel(PumpModel(CENTER, sigma), PhasematchModel(12.0, dk_s, dk_i))
    s = schmidt_decompose(build_jsa(model))
    assert s.leading_weight == pytest.approx(2 / (K + 1), abs=1e-6)
    assert s.schmidt_number == pytest.approx(K, rel=1e-6)
    assert np.sum(s.schmidt_values**2) == pytest.approx(1.0, abs=1e-6)


def test_schmidt_superposed_entangled_and_grid_converged():
    model, jsa = _reference_grid()
    coarse = schmidt_decompose(jsa)
    fine = schmidt_decompose(build_jsa(model, GridSpec(size=1201)))
    assert coarse.leading_weight < 1 - 1e-3
    assert coarse.leading_weight == pytest.approx(fine.leading_weight, abs=1e-3)
    np.testing.assert_allclose(coarse.schmidt_values[:5], fine.schmidt_values[:5], atol=1e-3)


@lru_cache(maxsize=None)
def _reference_schmidt_values():
    return schmidt_decompose(_reference_grid()[1]).schmidt_values


@settings(max_examples=5, deadline=None)
@given(theta=st.floats(0.0, 2 * math.pi))
def test_schmidt_values_phase_invariant(theta):
    _, jsa = _reference_grid()
    a = _reference_schmidt_values()
    b = schmidt_decompose(jsa.scaled(np.exp(1j * theta))).schmidt_values
    np.testing.assert_allclose(a[:20], b[:20], atol=1e-6)


# ---- basis optimization -------------------------------------------------------

def test_optimize_recovers_singlet_scale():
    true = HermiteBasis(CENTER, 3.0)
    jsa = singlet_jsa(true, CENTER + np.linspace(-45, 45, 901))
    found = optimize_basis(jsa, HermiteBasis(CENTER, 1.7))
    assert found.scale == pytest.approx(3.0, rel=1e-2)
    assert singlet_overlap(jsa, found) == pytest.approx(1.0, abs=1e-6)


def test_optimize_separable_returns_initial():
    axis = CENTER + np.linspace(-45, 45, 901)
    u0 = HermiteBasis(CENTER, 3.0).functions(axis)[0]
    jsa = product_jsa(u0, u0, axis)
    initial = HermiteBasis(CENTER, 2.0)
    assert optimize_basis(jsa, initial) == initial


@lru_cache(maxsize=None)
def _weakly_correlated():
    model = ProcessModel(PumpModel(CENTER, 6.8607), PhasematchModel.from_taus(0.5, 0.5, length=12.0),
                         SuperpositionModel(8.4823, r=1.0, phi=math.pi))
    return build_jsa(model)


def test_optimize_beats_scan_oracle():
    jsa = _weakly_correlated()
    initial = HermiteBasis(CENTER, 4.0)
    found = optimize_basis(jsa, initial)
    best = singlet_overlap(jsa, found)
    assert best >= singlet_overlap(jsa, initial)
    scan = []
    for s in np.geomspace(0.5, 20.0, 100):
        try:
            scan.append(singlet_overlap(jsa, replace(initial, scale=s)))
        except BasisEscapesGrid:
            pass
    assert best >= max(scan) - 1e-6


def test_superposed_state_has_non_negligible_singlet_overlap():
    jsa = _weakly_correlated()
    found = optimize_basis(jsa, HermiteBasis(CENTER, 4.0))
    assert singlet_overlap(jsa, found) > 0.1


def test_reference_overlap_improves_but_stays_small():
    # strongly correlated KTP-like parameters: the optimizer never worsens the
    # overlap, though the absolute value is small in this regime
    _, jsa = _reference_grid()
    initial = HermiteBasis(CENTER, 4.0)
    found = optimize_basis(jsa, initial)
    assert singlet_overlap(jsa, found) >= singlet_overlap(jsa, initial)


def test_singlet_jsa_on_custom_axis_is_normalized():
    basis = HermiteBasis(CENTER, 2.0)
    jsa = singlet_jsa(basis, CENTER + np.linspace(-30, 30, 301))
    assert isinstance(jsa, SpectralGrid)
    assert jsa.norm() == pytest.approx(1.0, abs=1e-12)
