import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from nmpm_ion import closed_form as cf
from nmpm_ion.deviations import DeviationReport
from nmpm_ion.errors import ValidityWarning
from nmpm_ion.fock_core import DenseOperator, TruncationConfig, spin_operator
from nmpm_ion.ion_model import IonParams, hamiltonian_full
from nmpm_ion.rabi_map import (
    RabiParams,
    build_T,
    check_conjugation,
    conjugation_offset,
    explicit_rabi_state,
    rabi_hamiltonian,
    to_pm_basis,
    transform_solution,
    transform_state,
)

T64 = TruncationConfig(64)
T128 = TruncationConfig(128)


def test_T_without_recoil():
    t = TruncationConfig(8)
    expect = (DenseOperator.lift(np.eye(9) / math.sqrt(2), "identity", t)
              + (spin_operator("plus", t) - spin_operator("minus", t)) * (1 / math.sqrt(2)))
    built = build_T(0.0, t)
    assert built.max_abs_diff(expect) <= 1e-15
    assert built.unitarity_defect() <= 1e-15


def test_T_unitary_and_not_involution():
    t = build_T(0.1, T64)
    assert t.unitarity_defect(guard=True) <= 1e-9
    one = DenseOperator.identity(T64)
    assert np.linalg.norm((t @ t - one).entries) > 0.1


@pytest.mark.parametrize("eta", [0.05, 0.3, 0.5])
def test_T_unitary_over_eta(eta):
    assert build_T(eta, T64).unitarity_defect(guard=True) <= 1e-9


def test_rabi_hamiltonian_hermitian_and_diagonal_limit():
    h = rabi_hamiltonian(RabiParams(1.0, 20.0, 0.05), T64)
    assert h.hermiticity_defect() <= 1e-10
    h0 = rabi_hamiltonian(RabiParams(1.0, 20.0, 0.0), T64).entries
    assert np.count_nonzero(h0 - np.diag(np.diag(h0))) == 0


def test_parameter_mapping():
    rp = RabiParams.from_ion(IonParams(omega=10.0, nu=1.0, kappa=0.0, eta=0.1))
    assert (rp.omega_field, rp.omega_qubit, rp.g) == (1.0, 20.0, pytest.approx(0.05))


def test_conjugation_up_to_constant():
    p = IonParams(omega=10.0, nu=1.0, kappa=0.0, eta=0.1)
    chk = check_conjugation(p, T128)
    assert chk.unitarity <= 1e-9
    assert chk.offset_removed <= 1e-8
    assert chk.literal == pytest.approx(conjugation_offset(p), rel=1e-6)
    assert chk.detuning_image <= 1e-9


def test_conjugation_with_detuning():
    p = IonParams(omega=10.0, nu=1.0, kappa=2.0, eta=0.1)
    assert check_conjugation(p, T128).offset_removed <= 1e-8


def test_offset_is_proportional_to_identity():
    p = IonParams(omega=3.0, nu=0.7, kappa=0.0, eta=0.2)
    t = build_T(p.eta, T64)
    diff = (t @ hamiltonian_full(p, T64) @ t.dag()) - rabi_hamiltonian(RabiParams.from_ion(p), T64)
    g = diff.guard_block()
    assert_allclose(g, conjugation_offset(p) * np.eye(g.shape[0]), atol=1e-9)


def test_pm_basis_round_trip():
    p = IonParams.from_lambda(0.1, 0.1, 0.0)
    res = cf.first_order_coherent_excited(p, 2.0, 0.8, T64)
    out = transform_solution(res, 0.1)
    assert out.in_eg_basis().max_abs_diff(transform_state(res.state, 0.1)) <= 1e-15
    assert to_pm_basis(out.in_eg_basis()).max_abs_diff(out.state) <= 1e-15


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 0.2), st.floats(0.0, 4.0), st.sampled_from([1, 2]))
def test_transform_preserves_norm(lam, tau, order):
    p = IonParams.from_lambda(lam, 0.1, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        fn = cf.first_order_coherent_excited if order == 1 else cf.second_order_coherent_excited
        res = fn(p, 2.0, tau, T64)
    out = transform_solution(res, 0.1)
    assert abs(out.state.norm() - 1) <= 1e-10
    assert sum(out.populations) == pytest.approx(1.0, abs=1e-10)


def test_initial_state_matches_gamma_form():
    p = IonParams.from_lambda(1e-12, 0.1, 0.0)
    res = cf.first_order_coherent_excited(p, 2.0, 0.0, T64)
    numeric = transform_solution(res, 0.1).state
    explicit = explicit_rabi_state(p, 2.0, 0.0, T64)
    assert abs(numeric.inner(explicit)) == pytest.approx(1.0, abs=1e-9)
    assert numeric.max_abs_diff(explicit) <= 1e-9


@pytest.mark.parametrize("order", [1, 2])
@pytest.mark.parametrize("kappa", [0.0, 1.0])
def test_gamma_form_matches_transformed_closed_form(order, kappa):
    p = IonParams.from_lambda(0.1, 0.1, kappa)
    fn = cf.first_order_coherent_excited if order == 1 else cf.second_order_coherent_excited
    res = fn(p, 2.0, 1.3, T64)
    report = DeviationReport()
    numeric = transform_solution(res, 0.1, report).state
    assert len(report) == 0
    explicit = explicit_rabi_state(p, 2.0, 1.3, T64, order)
    assert numeric.max_abs_diff(res.norm_factor * explicit) <= 1e-9


def test_eta_mismatch_rejected():
    res = cf.first_order_coherent_excited(IonParams.from_lambda(0.1, 0.1, 0.0), 2.0, 1.0, T64)
    with pytest.raises(ValueError):
        transform_solution(res, 0.2)
