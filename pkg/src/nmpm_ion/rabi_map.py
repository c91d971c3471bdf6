"""Unitary map from the ion Hamiltonian to the quantum Rabi model.

``T`` sends ``nu n + (delta/2) sigma_z + Omega h0`` to
``omega n + (omega0/2) sigma_z + i g (a - a^dag)(sigma+ + sigma-)`` with
``omega = nu``, ``omega0 = 2 Omega`` and ``g = eta nu / 2``, up to the constant
``nu eta^2 / 4`` (see :func:`conjugation_offset`).  The detuning term maps to
``-(delta/2) sigma_x``.

Rabi-frame states are reported in the ``|+->`` basis with
``|+-> = (|g> +- |e>) / sqrt(2)``.  Branch kets use the real label
``b = alpha - eta/2`` with ``gamma = i b``, and derivatives are taken in ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closed_form import ClosedFormResult, f_coefficients, g_coefficients, project_on_branches
from .deviations import DeviationReport
from .fock_core import (
    DenseOperator,
    FockSpinState,
    TruncationConfig,
    build_ladder,
    coherent_derivative_kets,
    coherent_ket,
    displacement_fock,
    spin_operator,
)
from .ion_model import IonParams, hamiltonian_full

RABI_BRANCHES = ("m0", "m1", "m2", "p0", "p1", "p2")


@dataclass(frozen=True)
class RabiParams:
    omega_field: float
    omega_qubit: float
    g: float

    @classmethod
    def from_ion(cls, p: IonParams) -> "RabiParams":
        return cls(omega_field=p.nu, omega_qubit=2 * p.omega, g=p.eta * p.nu / 2)


def build_T(eta: float, trunc: TruncationConfig) -> DenseOperator:
    """``T`` assembled from ``D(+- i eta/2)`` blocks."""
    d = displacement_fock(1j * eta / 2, trunc)
    dd = d.conj().T
    s = 1 / (2 * math.sqrt(2))
    return (
        DenseOperator.lift(s * (dd + d), "identity", trunc)
        + DenseOperator.lift(s * (dd - d), "z", trunc)
        + DenseOperator.lift(d / math.sqrt(2), "plus", trunc)
        - DenseOperator.lift(dd / math.sqrt(2), "minus", trunc)
    )


def rabi_hamiltonian(rp: RabiParams, trunc: TruncationConfig) -> DenseOperator:
    a, ad, num = build_ladder(trunc)
    sx = spin_operator("x", trunc)
    return (
        rp.omega_field * num
        + (rp.omega_qubit / 2) * spin_operator("z", trunc)
        + (1j * rp.g) * ((a - ad) @ sx)
    )


def conjugation_offset(p: IonParams) -> float:
    """Constant ``nu eta^2 / 4`` separating ``T H T^dag`` from the Rabi form."""
    return p.nu * p.eta**2 / 4


def conjugate_hamiltonian(p: IonParams, trunc: TruncationConfig) -> DenseOperator:
    t = build_T(p.eta, trunc)
    return t @ hamiltonian_full(p, trunc) @ t.dag()


@dataclass(frozen=True)
class ConjugationCheck:
    unitarity: float
    literal: float
    offset_removed: float
    detuning_image: float


def check_conjugation(p: IonParams, trunc: TruncationConfig) -> ConjugationCheck:
    """Guard-subspace defects of ``T``, ``T H T^dag - H_Rabi`` and ``T sz T^dag + sx``."""
    t = build_T(p.eta, trunc)
    lhs = t @ hamiltonian_full(p, trunc) @ t.dag()
    rabi = rabi_hamiltonian(RabiParams.from_ion(p), trunc)
    shift = conjugation_offset(p) * DenseOperator.identity(trunc)
    if p.kappa:
        rabi = rabi - (p.delta / 2) * spin_operator("x", trunc)
    sz_image = t @ spin_operator("z", trunc) @ t.dag()
    return ConjugationCheck(
        unitarity=t.unitarity_defect(guard=True),
        literal=lhs.max_abs_diff(rabi, guard=True),
        offset_removed=lhs.max_abs_diff(rabi + shift, guard=True),
        detuning_image=sz_image.max_abs_diff(-spin_operator("x", trunc), guard=True),
    )


@dataclass(frozen=True, eq=False)
class TransformedState:
    """Rabi-frame state; block 0 holds the ``|+>`` amplitudes, block 1 the ``|->``."""

    state: FockSpinState
    gamma: complex

    @property
    def plus(self) -> np.ndarray:
        return self.state.excited

    @property
    def minus(self) -> np.ndarray:
        return self.state.ground

    @property
    def populations(self) -> tuple[float, float]:
        return (float(np.vdot(self.plus, self.plus).real),
                float(np.vdot(self.minus, self.minus).real))

    def in_eg_basis(self) -> FockSpinState:
        e = (self.plus - self.minus) / math.sqrt(2)
        g = (self.plus + self.minus) / math.sqrt(2)
        return FockSpinState.from_blocks(e, g, self.state.trunc)


def to_pm_basis(psi: FockSpinState) -> FockSpinState:
    plus = (psi.ground + psi.excited) / math.sqrt(2)
    minus = (psi.ground - psi.excited) / math.sqrt(2)
    return FockSpinState.from_blocks(plus, minus, psi.trunc)


def gamma_branch_basis(b: float, trunc: TruncationConfig) -> dict:
    k0 = coherent_ket(b, trunc)
    k1 = coherent_derivative_kets(b, 1, trunc)
    k2 = coherent_derivative_kets(b, 2, trunc)
    basis = {"0": k0, "1": k1 + b * k0, "2": k2 + 2 * b * k1 + b**2 * k0}
    return {s + k: v for s in ("p", "m") for k, v in basis.items()}


def gamma_branch_coefficients(p: IonParams, alpha: float, tau: float, order: int = 2) -> dict:
    """Printed Rabi-frame coefficients as ``[lam^0, lam^1, lam^2]`` arrays."""
    eta = p.eta
    f = f_coefficients(alpha, tau, eta, p.kappa)
    g = g_coefficients(alpha, tau, eta, p.kappa)
    s, c = math.sin(tau), math.cos(tau)
    coeffs = {
        "m0": [-c, -1j * (g.g1 - eta / 2 * g.g2), f.f1 + eta / 2 * f.f2 + eta**2 / 4 * f.f3],
        "p0": [-1j * s, -(g.g3 - eta / 2 * g.g4), 1j * (f.f4 + eta / 2 * f.f5 - eta**2 / 4 * f.f6)],
        "m1": [0, 1j * g.g2, f.f2 + eta * f.f3],
        "p1": [0, -g.g4, -1j * (f.f5 - eta * f.f6)],
        "m2": [0, 0, f.f3],
        "p2": [0, 0, -1j * f.f6],
    }
    out = {}
    for k, v in coeffs.items():
        arr = np.array([complex(x) for x in v])
        if order == 1:
            arr[2] = 0
        out[k] = arr
    return out


def explicit_rabi_state(
    p: IonParams, alpha: float, tau: float, trunc: TruncationConfig, order: int = 2
) -> FockSpinState:
    """Unnormalized explicit Rabi-frame ket, blocks ordered ``(|+>, |->)``."""
    b = alpha - p.eta / 2
    basis = gamma_branch_basis(b, trunc)
    coeffs = gamma_branch_coefficients(p, alpha, tau, order)
    powers = np.array([1.0, p.lam, p.lam**2])
    plus = sum((coeffs["p" + k] @ powers) * basis["p" + k] for k in "012")
    minus = sum((coeffs["m" + k] @ powers) * basis["m" + k] for k in "012")
    return FockSpinState.from_blocks(plus, minus, trunc)


def transform_solution(
    ion_result: ClosedFormResult,
    eta: float,
    report: DeviationReport | None = None,
) -> TransformedState:
    """Apply ``T`` to a closed-form ion state and audit the explicit Rabi-frame ket.

    The audit runs only for coherent initial states; it projects the numeric
    Rabi-frame state onto the six ``gamma`` branches and compares coefficients.
    """
    p = ion_result.params
    if abs(eta - p.eta) > 1e-15:
        raise ValueError(f"eta={eta} does not match the ion result (eta={p.eta})")
    trunc = ion_result.state.trunc
    pm = to_pm_basis(build_T(eta, trunc) @ ion_result.state)
    init = ion_result.initial
    coherent = init is not None and init.kind == "coherent_excited"
    b = init.alpha - eta / 2 if coherent else math.nan
    out = TransformedState(pm, 1j * b)
    if report is not None and coherent:
        basis = gamma_branch_basis(b, trunc)
        claimed = gamma_branch_coefficients(p, init.alpha, ion_result.tau, ion_result.order)
        powers = np.array([1.0, p.lam, p.lam**2])
        # Both sides carry the same normalization factor; compare without it.
        unnorm = FockSpinState(pm.amplitudes / ion_result.norm_factor, trunc)
        renamed = {"e" + k[1]: v for k, v in basis.items() if k[0] == "p"}
        renamed.update({"g" + k[1]: v for k, v in basis.items() if k[0] == "m"})
        fitted, resid = project_on_branches(unnorm, renamed)
        meta = dict(order=ion_result.order, lam=p.lam, eta=eta, kappa=p.kappa,
                    alpha=init.alpha, tau=ion_result.tau)
        report.compare("transform_solution", "fit_residual", 0.0, resid, rtol=1e-9, **meta)
        for k in RABI_BRANCHES:
            key = ("e" if k[0] == "p" else "g") + k[1]
            report.compare("transform_solution", _RABI_LABELS[k], claimed[k] @ powers,
                           fitted[key], **meta)
    return out


_RABI_LABELS = {
    "m0": "|->|gam>", "m1": "|->(d+b)|gam>", "m2": "|->(d2+2b.d+b2)|gam>",
    "p0": "|+>|gam>", "p1": "|+>(d+b)|gam>", "p2": "|+>(d2+2b.d+b2)|gam>",
}


def transform_state(psi: FockSpinState, eta: float) -> FockSpinState:
    """``T psi`` in the e/g basis."""
    return build_T(eta, psi.trunc) @ psi
