"""Truncated Fock (x) two-level spin linear algebra.

Every vector and matrix in the package lives on the space spanned by
``|n>|s>`` with ``n = 0..N`` and ``s`` in ``{e, g}``.  The ordering is
spin-major: index ``s * (N + 1) + n`` with ``s = 0`` for the excited level
``|e> = (1, 0)`` and ``s = 1`` for the ground level ``|g> = (0, 1)``.  With
this layout the raising operator is block off-diagonal and the excited-state
population is the squared norm of the first half of the amplitude vector.

Truncation artifacts collect near ``n = N``; physics checks are made on the
guard subspace ``n <= guard_n`` only.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg as sla
from scipy.special import eval_genlaguerre, gammaln

from .errors import DimensionMismatch, NotHermitian, TruncationInsufficient

EXCITED = 0
GROUND = 1

LEAKAGE_TOL = 1e-10
HERMITIAN_TOL = 1e-10

SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
SIGMA_X = SIGMA_PLUS + SIGMA_MINUS
SPIN_IDENTITY = np.eye(2, dtype=complex)

_SPIN_MATRICES = {
    "plus": SIGMA_PLUS,
    "minus": SIGMA_MINUS,
    "z": SIGMA_Z,
    "x": SIGMA_X,
    "identity": SPIN_IDENTITY,
}


@dataclass(frozen=True)
class TruncationConfig:
    """Fock cutoff ``N`` and the highest level trusted for physics.

    ``guard_n`` defaults to ``cutoff_n // 2``.
    """

    cutoff_n: int = 128
    guard_n: int | None = None

    def __post_init__(self) -> None:
        if self.guard_n is None:
            object.__setattr__(self, "guard_n", self.cutoff_n // 2)
        if not 1 <= self.guard_n < self.cutoff_n:
            raise ValueError(
                f"need 1 <= guard_n < cutoff_n, got guard_n={self.guard_n}, "
                f"cutoff_n={self.cutoff_n}"
            )

    @property
    def fock_dim(self) -> int:
        return self.cutoff_n + 1

    @property
    def dim(self) -> int:
        return 2 * self.fock_dim

    def guard_indices(self) -> np.ndarray:
        """Full-space indices of levels ``n <= guard_n`` in both spin blocks."""
        f = self.fock_dim
        g = self.guard_n + 1
        return np.r_[0:g, f : f + g]

    def boundary_indices(self) -> np.ndarray:
        f = self.fock_dim
        g = self.guard_n + 1
        return np.r_[g:f, f + g : 2 * f]


@dataclass(frozen=True, eq=False)
class FockSpinState:
    """Amplitude vector ``[psi_e(0..N), psi_g(0..N)]``; read-only."""

    amplitudes: np.ndarray
    trunc: TruncationConfig

    def __post_init__(self) -> None:
        amp = np.array(self.amplitudes, dtype=complex)
        if amp.shape != (self.trunc.dim,):
            raise DimensionMismatch(
                f"state length {amp.shape} does not match dimension {self.trunc.dim}"
            )
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def from_blocks(
        cls, excited: np.ndarray, ground: np.ndarray, trunc: TruncationConfig
    ) -> "FockSpinState":
        return cls(np.concatenate([excited, ground]), trunc)

    @classmethod
    def product(
        cls, fock: np.ndarray, spin: str, trunc: TruncationConfig
    ) -> "FockSpinState":
        """``|fock>|e>`` or ``|fock>|g>``; ``spin`` is ``"e"`` or ``"g"``."""
        fock = np.asarray(fock, dtype=complex)
        zero = np.zeros_like(fock)
        if spin == "e":
            return cls.from_blocks(fock, zero, trunc)
        if spin == "g":
            return cls.from_blocks(zero, fock, trunc)
        raise ValueError(f"spin must be 'e' or 'g', got {spin!r}")

    @property
    def excited(self) -> np.ndarray:
        return self.amplitudes[: self.trunc.fock_dim]

    @property
    def ground(self) -> np.ndarray:
        return self.amplitudes[self.trunc.fock_dim :]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def leakage(self) -> float:
        """Weight carried by levels above ``guard_n``."""
        tail = self.amplitudes[self.trunc.boundary_indices()]
        return float(np.vdot(tail, tail).real)

    def normalized(self) -> "FockSpinState":
        return FockSpinState(self.amplitudes / self.norm(), self.trunc)

    def inner(self, other: "FockSpinState") -> complex:
        """``<self|other>``."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def max_abs_diff(self, other: "FockSpinState") -> float:
        return float(np.max(np.abs(self.amplitudes - other.amplitudes)))

    def _check(self, other: "FockSpinState") -> None:
        if other.trunc != self.trunc:
            raise DimensionMismatch("states live on different truncations")

    def __add__(self, other: "FockSpinState") -> "FockSpinState":
        self._check(other)
        return FockSpinState(self.amplitudes + other.amplitudes, self.trunc)

    def __sub__(self, other: "FockSpinState") -> "FockSpinState":
        self._check(other)
        return FockSpinState(self.amplitudes - other.amplitudes, self.trunc)

    def __mul__(self, scalar: complex) -> "FockSpinState":
        return FockSpinState(self.amplitudes * scalar, self.trunc)

    __rmul__ = __mul__

    def __neg__(self) -> "FockSpinState":
        return FockSpinState(-self.amplitudes, self.trunc)

    def __len__(self) -> int:
        return self.trunc.dim


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Square complex matrix on the truncated Fock (x) spin space; read-only."""

    entries: np.ndarray
    trunc: TruncationConfig

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=complex)
        if m.shape != (self.trunc.dim, self.trunc.dim):
            raise DimensionMismatch(
                f"operator shape {m.shape} does not match dimension {self.trunc.dim}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @classmethod
    def identity(cls, trunc: TruncationConfig) -> "DenseOperator":
        return cls(np.eye(trunc.dim, dtype=complex), trunc)

    @classmethod
    def lift(
        cls,
        fock: np.ndarray | None,
        spin: Union[str, np.ndarray],
        trunc: TruncationConfig,
    ) -> "DenseOperator":
        """``spin (x) fock``; ``fock=None`` means the Fock identity."""
        if isinstance(spin, str):
            spin = _SPIN_MATRICES[spin]
        if fock is None:
            fock = np.eye(trunc.fock_dim)
        return cls(np.kron(spin, fock), trunc)

    def dag(self) -> "DenseOperator":
        return DenseOperator(self.entries.conj().T, self.trunc)

    def guard_block(self) -> np.ndarray:
        idx = self.trunc.guard_indices()
        return self.entries[np.ix_(idx, idx)]

    def hermiticity_defect(self, guard: bool = False) -> float:
        m = self.entries - self.entries.conj().T
        if guard:
            idx = self.trunc.guard_indices()
            m = m[np.ix_(idx, idx)]
        return float(np.max(np.abs(m)))

    def unitarity_defect(self, guard: bool = False) -> float:
        m = self.entries.conj().T @ self.entries - np.eye(self.trunc.dim)
        if guard:
            idx = self.trunc.guard_indices()
            m = m[np.ix_(idx, idx)]
        return float(np.max(np.abs(m)))

    def max_abs_diff(self, other: "DenseOperator", guard: bool = False) -> float:
        m = self.entries - other.entries
        if guard:
            idx = self.trunc.guard_indices()
            m = m[np.ix_(idx, idx)]
        return float(np.max(np.abs(m)))

    def _check(self, other) -> None:
        if other.trunc != self.trunc:
            raise DimensionMismatch("operands live on different truncations")

    def __matmul__(self, other):
        if isinstance(other, DenseOperator):
            self._check(other)
            return DenseOperator(self.entries @ other.entries, self.trunc)
        if isinstance(other, FockSpinState):
            self._check(other)
            return FockSpinState(self.entries @ other.amplitudes, self.trunc)
        return NotImplemented

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        if not isinstance(other, DenseOperator):
            return NotImplemented
        self._check(other)
        return DenseOperator(self.entries + other.entries, self.trunc)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        if not isinstance(other, DenseOperator):
            return NotImplemented
        self._check(other)
        return DenseOperator(self.entries - other.entries, self.trunc)

    def __mul__(self, scalar: complex) -> "DenseOperator":
        if isinstance(scalar, (DenseOperator, FockSpinState)):
            return NotImplemented
        return DenseOperator(self.entries * scalar, self.trunc)

    __rmul__ = __mul__

    def __neg__(self) -> "DenseOperator":
        return DenseOperator(-self.entries, self.trunc)


# ---------------------------------------------------------------------------
# construction


def _fock_ladder(fock_dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, fock_dim, dtype=float)), 1).astype(complex)


def build_ladder(
    trunc: TruncationConfig,
) -> tuple[DenseOperator, DenseOperator, DenseOperator]:
    """Annihilation, creation and number operators, each ``I_spin (x) .``."""
    a = _fock_ladder(trunc.fock_dim)
    num = np.diag(np.arange(trunc.fock_dim, dtype=float)).astype(complex)
    return (
        DenseOperator.lift(a, "identity", trunc),
        DenseOperator.lift(a.conj().T, "identity", trunc),
        DenseOperator.lift(num, "identity", trunc),
    )


def spin_operator(name: str, trunc: TruncationConfig) -> DenseOperator:
    """``sigma (x) I_fock`` for ``name`` in plus, minus, z, x, identity."""
    return DenseOperator.lift(None, name, trunc)


@functools.lru_cache(maxsize=64)
def _displacement_expm(beta: complex, fock_dim: int) -> np.ndarray:
    a = _fock_ladder(fock_dim)
    m = sla.expm(beta * a.conj().T - np.conj(beta) * a)
    m.setflags(write=False)
    return m


@functools.lru_cache(maxsize=64)
def _displacement_laguerre(beta: complex, fock_dim: int) -> np.ndarray:
    if beta == 0:
        return np.eye(fock_dim, dtype=complex)
    x = abs(beta) ** 2
    lg = gammaln(np.arange(fock_dim) + 1.0)
    out = np.zeros((fock_dim, fock_dim), dtype=complex)
    for n in range(fock_dim):
        m = np.arange(n, fock_dim)
        k = m - n
        # <m|D|n>, m >= n
        log_mag = 0.5 * (lg[n] - lg[m]) + k * np.log(abs(beta)) - x / 2
        phase = np.exp(1j * np.angle(beta) * k)
        out[m, n] = np.exp(log_mag) * phase * eval_genlaguerre(n, k, x)
        # <n|D|m>, n < m uses (-beta*) in place of beta
        upper = m[1:]
        ku = k[1:]
        phase_u = np.exp(1j * np.angle(-np.conj(beta)) * ku)
        out[n, upper] = (
            np.exp(0.5 * (lg[n] - lg[upper]) + ku * np.log(abs(beta)) - x / 2)
            * phase_u
            * eval_genlaguerre(n, ku, x)
        )
    out.setflags(write=False)
    return out


def displacement_fock(
    beta: complex, trunc: TruncationConfig, method: str = "expm"
) -> np.ndarray:
    """Fock-space matrix of ``D(beta) = exp(beta a^dag - beta^* a)``.

    ``method="expm"`` exponentiates the truncated generator (exactly unitary
    on the truncated space); ``method="laguerre"`` uses the analytic matrix
    elements of the untruncated operator.  They agree on the guard subspace.
    """
    beta = complex(beta)
    if method == "expm":
        return _displacement_expm(beta, trunc.fock_dim)
    if method == "laguerre":
        return _displacement_laguerre(beta, trunc.fock_dim)
    raise ValueError(f"unknown displacement method {method!r}")


def displacement(
    beta: complex, trunc: TruncationConfig, method: str = "expm"
) -> DenseOperator:
    return DenseOperator.lift(displacement_fock(beta, trunc, method), "identity", trunc)


def _scaled_power(alpha: float, exponents: np.ndarray, n: np.ndarray) -> np.ndarray:
    """``exp(-alpha^2/2) alpha^m / sqrt(n!)`` elementwise, zero where ``m < 0``."""
    out = np.zeros(exponents.shape, dtype=float)
    ok = exponents >= 0
    m = exponents[ok].astype(float)
    if alpha == 0.0:
        out[ok] = np.where(m == 0, np.exp(-0.5 * gammaln(n[ok] + 1.0)), 0.0)
        return out
    log_mag = m * np.log(abs(alpha)) - alpha**2 / 2 - 0.5 * gammaln(n[ok] + 1.0)
    sign = np.where((alpha < 0) & (m % 2 == 1), -1.0, 1.0)
    out[ok] = sign * np.exp(log_mag)
    return out


def _check_leakage(vec: np.ndarray, trunc: TruncationConfig, what: str) -> None:
    tail = vec[trunc.guard_n + 1 :]
    leak = float(np.vdot(tail, tail).real)
    if leak > LEAKAGE_TOL:
        raise TruncationInsufficient(
            f"{what}: weight {leak:.3e} above guard level {trunc.guard_n}; "
            f"raise cutoff_n (currently {trunc.cutoff_n})"
        )


def _require_real(alpha) -> float:
    if isinstance(alpha, complex) or np.iscomplexobj(alpha):
        if np.imag(alpha) != 0:
            raise ValueError("alpha must be real; the coherent amplitude is i*alpha")
        alpha = np.real(alpha)
    return float(alpha)


def coherent_ket(alpha: float, trunc: TruncationConfig) -> np.ndarray:
    """Fock coefficients of ``|i alpha>``: ``exp(-alpha^2/2) (i alpha)^n / sqrt(n!)``."""
    alpha = _require_real(alpha)
    n = np.arange(trunc.fock_dim)
    vec = (1j**n) * _scaled_power(alpha, n, n)
    _check_leakage(vec, trunc, f"coherent ket alpha={alpha}")
    return vec


def coherent_derivative_kets(
    alpha: float, order: int, trunc: TruncationConfig
) -> np.ndarray:
    """Termwise first or second alpha-derivative of the ``|i alpha>`` coefficients."""
    alpha = _require_real(alpha)
    n = np.arange(trunc.fock_dim)
    if order == 1:
        body = n * _scaled_power(alpha, n - 1, n) - _scaled_power(alpha, n + 1, n)
    elif order == 2:
        body = (
            n * (n - 1) * _scaled_power(alpha, n - 2, n)
            - (2 * n + 1) * _scaled_power(alpha, n, n)
            + _scaled_power(alpha, n + 2, n)
        )
    else:
        raise ValueError("order must be 1 or 2")
    vec = (1j**n) * body
    _check_leakage(vec, trunc, f"coherent derivative ket alpha={alpha}")
    return vec


def fock_ket(k: int, trunc: TruncationConfig) -> np.ndarray:
    vec = np.zeros(trunc.fock_dim, dtype=complex)
    vec[k] = 1.0
    return vec


def displaced_number_ket(beta: complex, k: int, trunc: TruncationConfig) -> np.ndarray:
    """``|beta; k> = D(beta)|k>`` as a Fock vector."""
    return displacement_fock(beta, trunc)[:, k].copy()


# ---------------------------------------------------------------------------
# exponentials


def _as_matrix(H) -> np.ndarray:
    return H.entries if isinstance(H, DenseOperator) else np.asarray(H, dtype=complex)


def expm_unitary(H: DenseOperator, t: float, method: str = "eigh") -> DenseOperator:
    """``exp(-i H t)`` for hermitian ``H``.

    ``eigh`` diagonalizes once; ``pade`` is the scaling-and-squaring
    cross-check.
    """
    m = _as_matrix(H)
    defect = float(np.max(np.abs(m - m.conj().T)))
    if defect > HERMITIAN_TOL:
        raise NotHermitian(f"hermiticity defect {defect:.3e}")
    if method == "eigh":
        u = HermitianPropagator(H).unitary(t)
    elif method == "pade":
        u = sla.expm(-1j * t * m)
    else:
        raise ValueError(f"unknown method {method!r}")
    return DenseOperator(u, H.trunc)


def expm_general(matrix: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i M t)`` for an arbitrary (possibly defective) square matrix."""
    return sla.expm(-1j * t * np.asarray(matrix, dtype=complex))


class HermitianPropagator:
    """Eigendecomposition of a hermitian ``H``, reused for many times ``t``."""

    def __init__(self, H: DenseOperator):
        m = _as_matrix(H)
        defect = float(np.max(np.abs(m - m.conj().T)))
        if defect > HERMITIAN_TOL:
            raise NotHermitian(f"hermiticity defect {defect:.3e}")
        self.trunc = H.trunc
        self.energies, self.vectors = np.linalg.eigh(0.5 * (m + m.conj().T))

    def unitary(self, t: float) -> np.ndarray:
        v = self.vectors
        return (v * np.exp(-1j * self.energies * t)) @ v.conj().T

    def evolve(self, psi0: FockSpinState, taus: np.ndarray) -> np.ndarray:
        """Rows are ``exp(-i H tau) psi0`` for each ``tau``."""
        taus = np.asarray(taus, dtype=float)
        coeffs = self.vectors.conj().T @ psi0.amplitudes
        phases = np.exp(-1j * np.outer(taus, self.energies))
        return (phases * coeffs) @ self.vectors.T
