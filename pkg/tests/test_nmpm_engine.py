import warnings

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from nmpm_ion.errors import (
    DimensionMismatch,
    NonPositiveNormSquared,
    QuadratureNotConverged,
    ValidityWarning,
)
from nmpm_ion.fock_core import DenseOperator, FockSpinState, TruncationConfig, build_ladder, spin_operator
from nmpm_ion.ion_model import InitialStateSpec, IonParams, TimeGrid, exact_evolve, split_high_intensity
from nmpm_ion.nmpm_engine import (
    PerturbativeKets,
    QuadratureConfig,
    assemble_state,
    block_generator,
    corrections_block_matrix,
    corrections_block_matrix_grid,
    corrections_quadrature,
    normalization_factor,
    normalization_terms,
)

T64 = TruncationConfig(64)


def _setup(lam=0.1, eta=0.1, kappa=0.0, alpha=2.0, trunc=T64):
    p = IonParams.from_lambda(lam, eta, kappa)
    h0, hp = split_high_intensity(p, trunc)
    return p, h0, hp, InitialStateSpec("coherent_excited", alpha=alpha).build(trunc)


def test_block_generator_structure():
    h0 = np.eye(2)
    hp = 2 * np.eye(2)
    m = block_generator(h0, hp, 2)
    assert m.shape == (6, 6)
    assert_allclose(m[0:2, 2:4], hp)
    assert_allclose(m[2:4, 4:6], hp)
    assert_allclose(m[0:2, 4:6], 0)
    assert_allclose(m[4:6, 4:6], h0)


def test_zero_perturbation_gives_zero_corrections():
    p, h0, _, psi0 = _setup()
    zero = DenseOperator(np.zeros((T64.dim, T64.dim)), T64)
    for pk in (corrections_block_matrix(h0, zero, psi0, 1.0, 2, lam=0.1),
               corrections_quadrature(h0, zero, psi0, 1.0, 2, lam=0.1)):
        assert pk.kets[1].norm() == 0.0
        assert pk.kets[2].norm() == 0.0
        assert pk.kets[0].norm() == pytest.approx(1.0, abs=1e-10)
        assert normalization_factor(pk) == pytest.approx(1.0, abs=1e-12)


def test_small_tau_dyson_expansion():
    # psi1 = -i tau hp psi0 - tau^2/2 (h0 hp + hp h0) psi0 + O(tau^3)
    p, h0, hp, psi0 = _setup(alpha=1.0)
    for tau in (0.01, 0.005):
        pk = corrections_block_matrix(h0, hp, psi0, tau, 1, lam=0.1)
        lead = ((-1j * tau) * (hp @ psi0).amplitudes
                - (tau**2 / 2) * ((h0 @ hp + hp @ h0) @ psi0).amplitudes)
        rel = np.linalg.norm(pk.kets[1].amplitudes - lead) / np.linalg.norm(lead)
        assert rel <= 10 * tau**2


def test_two_paths_agree_at_tau_two():
    _, h0, hp, psi0 = _setup()
    blk = corrections_block_matrix(h0, hp, psi0, 2.0, 2, lam=0.1)
    quad = corrections_quadrature(h0, hp, psi0, 2.0, 2, lam=0.1)
    for b, q in zip(blk.kets, quad.kets):
        assert b.max_abs_diff(q) <= 1e-8


def test_two_paths_agree_for_generic_h0():
    # h0^2 != 1 exercises the expm branch of the quadrature route
    t = TruncationConfig(12, guard_n=6)
    a, ad, num = build_ladder(t)
    h0 = 0.5 * num + 0.3 * ((a + ad) @ spin_operator("x", t))
    hp = spin_operator("z", t) + 0.2 * (a + ad)
    psi0 = FockSpinState.product(np.eye(13)[1], "e", t)
    blk = corrections_block_matrix(h0, hp, psi0, 1.2, 2, lam=0.2)
    quad = corrections_quadrature(h0, hp, psi0, 1.2, 2, lam=0.2)
    for b, q in zip(blk.kets, quad.kets):
        assert b.max_abs_diff(q) <= 1e-8


def test_simpson_scheme_converges_to_block_path():
    _, h0, hp, psi0 = _setup()
    cfg = QuadratureConfig(scheme="composite_simpson", points_per_unit_tau=64, tol=1e-4)
    quad = corrections_quadrature(h0, hp, psi0, 1.0, 1, lam=0.1, config=cfg)
    blk = corrections_block_matrix(h0, hp, psi0, 1.0, 1, lam=0.1)
    assert quad.kets[1].max_abs_diff(blk.kets[1]) <= 1e-5


def test_quadrature_reports_non_convergence():
    _, h0, hp, psi0 = _setup()
    cfg = QuadratureConfig(scheme="composite_simpson", points_per_unit_tau=8, tol=1e-14)
    with pytest.raises(QuadratureNotConverged):
        corrections_quadrature(h0, hp, psi0, 3.0, 1, lam=0.1, config=cfg)


def test_quadrature_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(points_per_unit_tau=4)
    with pytest.raises(ValueError):
        QuadratureConfig(scheme="trapezoid")


def test_input_validation():
    _, h0, hp, psi0 = _setup()
    other = FockSpinState.product(np.eye(33)[0], "e", TruncationConfig(32))
    with pytest.raises(DimensionMismatch):
        corrections_block_matrix(h0, hp, other, 1.0, 1, lam=0.1)
    with pytest.raises(ValueError):
        corrections_block_matrix(h0, hp, psi0, 1.0, 3, lam=0.1)
    with pytest.raises(ValueError):
        PerturbativeKets((psi0,), 1, 0.1)


def test_grid_path_matches_pointwise():
    _, h0, hp, psi0 = _setup()
    taus = np.linspace(0.0, 3.0, 31)
    grid = corrections_block_matrix_grid(h0, hp, psi0, taus, 2, lam=0.1)
    for i in (0, 7, 30):
        single = corrections_block_matrix(h0, hp, psi0, taus[i], 2, lam=0.1)
        for g, s in zip(grid[i].kets, single.kets):
            assert g.max_abs_diff(s) <= 1e-11
    uneven = np.array([0.5, 0.7, 1.6])
    grid = corrections_block_matrix_grid(h0, hp, psi0, uneven, 1, lam=0.1)
    single = corrections_block_matrix(h0, hp, psi0, 1.6, 1, lam=0.1)
    assert grid[-1].kets[1].max_abs_diff(single.kets[1]) <= 1e-11


def _symbolic_norm_check(order):
    lam = sp.Symbol("lam", real=True)
    k = order
    g = {}
    for i in range(k + 1):
        for j in range(k + 1):
            if i == j:
                g[i, j] = sp.Symbol(f"n{i}", positive=True) if i else sp.Integer(1)
            elif i < j:
                g[i, j] = sp.Symbol(f"r{i}{j}", real=True) + sp.I * sp.Symbol(f"s{i}{j}", real=True)
    for i in range(k + 1):
        for j in range(i):
            g[i, j] = sp.conjugate(g[j, i])
    direct = sp.expand(sum(lam ** (i + j) * g[i, j] for i in range(k + 1) for j in range(k + 1)))
    terms = sum(w * lam**pw * (sp.re(g[i, j]) if pw else 1)
                for pw, i, j, w in normalization_terms(k))
    return sp.simplify(direct - sp.expand(terms))


@pytest.mark.parametrize("order", [1, 2, 3])
def test_normalization_terms_equal_squared_norm_symbolically(order):
    assert _symbolic_norm_check(order) == 0


def test_second_order_terms_four_term_form():
    # with Re<psi0|psi1> = 0 the second-order inverse square reduces to
    # 1 + lam^2 [2 Re<psi0|psi2> + <psi1|psi1>] + 2 lam^3 Re<psi1|psi2> + lam^4 <psi2|psi2>
    lam = 0.1
    _, h0, hp, psi0 = _setup(lam=lam)
    pk = corrections_block_matrix(h0, hp, psi0, 1.5, 2, lam=lam)
    k0, k1, k2 = pk.kets
    assert abs(k0.inner(k1).real) <= 1e-12
    four = (1 + lam**2 * (2 * k0.inner(k2).real + k1.inner(k1).real)
            + 2 * lam**3 * k1.inner(k2).real + lam**4 * k2.inner(k2).real)
    assert normalization_factor(pk) == pytest.approx(four**-0.5, abs=1e-12)


def test_first_order_factor_formula():
    lam = 0.1
    _, h0, hp, psi0 = _setup(lam=lam)
    pk = corrections_block_matrix(h0, hp, psi0, 1.0, 1, lam=lam)
    k0, k1 = pk.kets
    inv = 1 + 2 * lam * k0.inner(k1).real + lam**2 * k1.inner(k1).real
    assert normalization_factor(pk) == pytest.approx(inv**-0.5, abs=1e-12)


def test_factor_is_inverse_direct_norm_at_figure_point():
    trunc = TruncationConfig(128)
    _, h0, hp, psi0 = _setup(lam=0.1, alpha=4.0, trunc=trunc)
    pk = corrections_block_matrix(h0, hp, psi0, 1.0, 2, lam=0.1)
    assert normalization_factor(pk) == pytest.approx(1 / pk.partial_sum().norm(), abs=1e-10)


def test_lambda_zero_returns_leading_ket():
    _, h0, hp, psi0 = _setup()
    pk = corrections_block_matrix(h0, hp, psi0, 1.0, 1, lam=0.0)
    assert assemble_state(pk).max_abs_diff(pk.kets[0]) <= 1e-15


def test_validity_warning_and_non_positive():
    _, _, _, psi0 = _setup()
    lam = 0.5
    nearly = PerturbativeKets((psi0, psi0 * (-1.8)), 1, lam)
    with pytest.warns(ValidityWarning):
        normalization_factor(nearly)
    # the inverse square assumes a unit leading ket; break that to force a negative value
    broken = PerturbativeKets((psi0 * 2.0, psi0 * (-4.0)), 1, lam)
    with pytest.raises(NonPositiveNormSquared):
        normalization_factor(broken)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 0.4), st.floats(0.0, 10.0), st.sampled_from([1, 2]))
def test_assembled_norm_is_one(lam, tau, order):
    trunc = TruncationConfig(48)
    _, h0, hp, psi0 = _setup(lam=lam, alpha=2.0, trunc=trunc)
    pk = corrections_block_matrix(h0, hp, psi0, tau, order, lam=lam)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        assert abs(assemble_state(pk).norm() - 1) <= 1e-10


def test_partial_sum_is_taylor_polynomial():
    trunc = TruncationConfig(128)
    psi0 = InitialStateSpec("coherent_excited", alpha=4.0).build(trunc)
    for order, target in ((1, 4.0), (2, 8.0)):
        errs = []
        for lam in (0.1, 0.05):
            p = IonParams.from_lambda(lam, 0.1, 0.0)
            h0, hp = split_high_intensity(p, trunc)
            pk = corrections_block_matrix(h0, hp, psi0, 1.0, order, lam=lam)
            exact = exact_evolve(p, psi0, TimeGrid([1.0]))[0]
            errs.append(np.linalg.norm(pk.partial_sum().amplitudes - exact.amplitudes))
        assert errs[0] / errs[1] == pytest.approx(target, rel=0.3)


def test_second_correction_grows_with_tau():
    _, h0, hp, psi0 = _setup()
    taus = np.linspace(2.0, 10.0, 9)
    norms = [pk.kets[2].norm() for pk in corrections_block_matrix_grid(h0, hp, psi0, taus, 2, lam=0.1)]
    assert norms[-1] > norms[0]
    assert np.all(np.diff(norms[::2]) > 0)
