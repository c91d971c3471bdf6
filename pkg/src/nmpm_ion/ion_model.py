"""Trapped-ion Hamiltonian, its high-intensity split and the exact oracle.

In rescaled time ``tau = Omega t`` the Hamiltonian divided by ``Omega`` is
``h0 + lam * hp`` with

    h0 = sigma+ D(i eta) + sigma- D^dag(i eta)
    hp = n + (kappa / 2) sigma_z
    lam = nu / Omega
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import TruncationInsufficient
from .fock_core import (
    DenseOperator,
    FockSpinState,
    HermitianPropagator,
    TruncationConfig,
    build_ladder,
    coherent_ket,
    displacement,
    fock_ket,
    spin_operator,
)

EVOLVE_LEAKAGE_TOL = 1e-6


@dataclass(frozen=True)
class IonParams:
    """Rabi frequency, trap frequency, detuning multiple and Lamb-Dicke parameter."""

    omega: float
    nu: float
    kappa: float = 0.0
    eta: float = 0.1

    def __post_init__(self) -> None:
        if self.omega <= 0 or self.nu <= 0:
            raise ValueError("omega and nu must be positive")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if float(self.kappa) != round(self.kappa):
            warnings.warn(
                f"kappa={self.kappa} is not an integer; the formulas do not need it",
                stacklevel=3,
            )

    @classmethod
    def from_lambda(
        cls, lam: float, eta: float = 0.1, kappa: float = 0.0, omega: float = 1.0
    ) -> "IonParams":
        return cls(omega=omega, nu=lam * omega, kappa=kappa, eta=eta)

    @property
    def lam(self) -> float:
        return self.nu / self.omega

    @property
    def delta(self) -> float:
        return self.nu * self.kappa

    @property
    def high_intensity(self) -> bool:
        return self.lam < 1


@dataclass(frozen=True, eq=False)
class TimeGrid:
    taus: np.ndarray

    def __post_init__(self) -> None:
        t = np.array(self.taus, dtype=float).ravel()
        if t.size == 0:
            raise ValueError("empty time grid")
        if t[0] < 0:
            raise ValueError("time grid must start at tau >= 0")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly ascending")
        t.setflags(write=False)
        object.__setattr__(self, "taus", t)

    @classmethod
    def linspace(cls, tau_max: float, steps: int) -> "TimeGrid":
        return cls(np.linspace(0.0, tau_max, steps))

    def __len__(self) -> int:
        return self.taus.size


INITIAL_KINDS = ("fock_ground", "fock_excited", "coherent_excited")


@dataclass(frozen=True)
class InitialStateSpec:
    kind: str
    n: int | None = None
    alpha: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in INITIAL_KINDS:
            raise ValueError(f"unknown initial state kind {self.kind!r}")
        if self.kind == "coherent_excited":
            if self.alpha is None or self.n is not None:
                raise ValueError("coherent_excited takes alpha only")
        else:
            if self.n is None or self.alpha is not None or self.n < 0:
                raise ValueError(f"{self.kind} takes a non-negative n only")

    @classmethod
    def parse(cls, text: str) -> "InitialStateSpec":
        """``fock_ground:3``, ``fock_excited:0`` or ``coherent_excited:4.0``."""
        kind, _, value = text.partition(":")
        kind = kind.strip()
        if kind == "coherent_excited":
            return cls(kind, alpha=float(value))
        return cls(kind, n=int(value))

    def __str__(self) -> str:
        payload = self.alpha if self.kind == "coherent_excited" else self.n
        return f"{self.kind}:{payload}"

    def build(self, trunc: TruncationConfig) -> FockSpinState:
        if self.kind == "coherent_excited":
            return FockSpinState.product(coherent_ket(self.alpha, trunc), "e", trunc)
        if self.n > trunc.guard_n:
            raise TruncationInsufficient(
                f"n={self.n} lies above guard level {trunc.guard_n}"
            )
        spin = "g" if self.kind == "fock_ground" else "e"
        return FockSpinState.product(fock_ket(self.n, trunc), spin, trunc)


def coupling_operator(eta: float, trunc: TruncationConfig) -> DenseOperator:
    """``sigma+ D(i eta) + sigma- D^dag(i eta)``."""
    d = displacement(1j * eta, trunc)
    return spin_operator("plus", trunc) @ d + spin_operator("minus", trunc) @ d.dag()


def hamiltonian_full(p: IonParams, trunc: TruncationConfig) -> DenseOperator:
    _, _, num = build_ladder(trunc)
    sz = spin_operator("z", trunc)
    return p.nu * num + (p.delta / 2) * sz + p.omega * coupling_operator(p.eta, trunc)


def split_high_intensity(
    p: IonParams, trunc: TruncationConfig
) -> tuple[DenseOperator, DenseOperator]:
    """``(h0, hp)`` with ``H / Omega = h0 + lam * hp``."""
    if not p.high_intensity:
        warnings.warn(
            f"lambda={p.lam:g} >= 1: the high-intensity split is not perturbative",
            stacklevel=2,
        )
    _, _, num = build_ladder(trunc)
    hp = num + (p.kappa / 2) * spin_operator("z", trunc)
    return coupling_operator(p.eta, trunc), hp


def propagator_h0(
    p: IonParams, tau: float, trunc: TruncationConfig, sign: int = 1
) -> DenseOperator:
    """``exp(sign * i h0 tau) = cos(tau) + sign * i sin(tau) h0``; uses ``h0^2 = 1``."""
    h0 = coupling_operator(p.eta, trunc)
    return np.cos(tau) * DenseOperator.identity(trunc) + (sign * 1j * np.sin(tau)) * h0


def exact_evolve(
    p: IonParams, psi0: FockSpinState, grid: TimeGrid
) -> list[FockSpinState]:
    """``exp(-i (h0 + lam hp) tau) psi0`` on every grid point."""
    trunc = psi0.trunc
    if abs(psi0.norm() - 1) > 1e-10:
        raise ValueError("initial state must be normalized")
    if psi0.leakage() > 1e-10:
        raise TruncationInsufficient(f"initial leakage {psi0.leakage():.3e}")
    h0, hp = split_high_intensity(p, trunc)
    rows = HermitianPropagator(h0 + p.lam * hp).evolve(psi0, grid.taus)
    states = [FockSpinState(r, trunc) for r in rows]
    worst = max(s.leakage() for s in states)
    if worst > EVOLVE_LEAKAGE_TOL:
        raise TruncationInsufficient(f"evolved state leaks {worst:.3e} past the guard")
    return states


def p_excited(psi: FockSpinState) -> float:
    """Population of the excited level."""
    e = psi.excited
    return float(np.vdot(e, e).real)
