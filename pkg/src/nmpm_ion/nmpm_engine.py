"""Order-by-order correction kets for ``exp(-i (h0 + lam hp) tau) psi0``.

Two independent routes produce the same kets ``psi^(n)``:

* block matrix: the ``(k+1) x (k+1)`` block upper-bidiagonal generator with
  ``h0`` on the diagonal and ``hp`` above it is exponentiated; block
  ``(1, n+1)`` of ``exp(-i M tau)`` applied to ``psi0`` is ``psi^(n)``.
* quadrature: the nested time-ordered integrals of the interaction-picture
  perturbation are evaluated with composite Gauss-Legendre rules.

The normalized order-k state is ``N^(k) * sum_n lam^n psi^(n)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NonPositiveNormSquared,
    QuadratureNotConverged,
    ValidityWarning,
)
from .fock_core import DenseOperator, FockSpinState, expm_general

MAX_PUBLIC_ORDER = 2
INVOLUTION_TOL = 1e-10
VALIDITY_FLOOR = 0.1
_GL_PANEL = 16


@dataclass(frozen=True, eq=False)
class PerturbativeKets:
    """``psi^(0) .. psi^(order)`` (unnormalized) together with ``lam``."""

    kets: tuple[FockSpinState, ...]
    order: int
    lam: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "kets", tuple(self.kets))
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if len(self.kets) != self.order + 1:
            raise ValueError(f"expected {self.order + 1} kets, got {len(self.kets)}")

    def partial_sum(self) -> FockSpinState:
        """``sum_n lam^n psi^(n)`` without normalization."""
        amp = sum(self.lam**n * k.amplitudes for n, k in enumerate(self.kets))
        return FockSpinState(amp, self.kets[0].trunc)

    def with_lambda(self, lam: float) -> "PerturbativeKets":
        return PerturbativeKets(self.kets, self.order, lam)


@dataclass(frozen=True)
class QuadratureConfig:
    scheme: str = "gauss_legendre_nested"
    points_per_unit_tau: int = 16
    tol: float = 1e-7

    def __post_init__(self) -> None:
        if self.scheme not in ("gauss_legendre_nested", "composite_simpson"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.points_per_unit_tau < 8:
            raise ValueError("points_per_unit_tau must be >= 8")


def _check_inputs(h0, hp, psi0, order) -> None:
    if h0.trunc != hp.trunc or h0.trunc != psi0.trunc:
        raise DimensionMismatch("h0, hp and psi0 must share one truncation")
    if order not in range(1, MAX_PUBLIC_ORDER + 1):
        raise ValueError(f"order must be 1..{MAX_PUBLIC_ORDER}, got {order}")


def block_generator(h0: np.ndarray, hp: np.ndarray, order: int) -> np.ndarray:
    """Block upper-bidiagonal matrix with ``h0`` on the diagonal, ``hp`` above."""
    d = h0.shape[0]
    m = np.zeros(((order + 1) * d, (order + 1) * d), dtype=complex)
    for i in range(order + 1):
        m[i * d : (i + 1) * d, i * d : (i + 1) * d] = h0
        if i < order:
            m[i * d : (i + 1) * d, (i + 1) * d : (i + 2) * d] = hp
    return m


def _unstack(w: np.ndarray, d: int, order: int) -> list[np.ndarray]:
    # exp(-iM tau) is block Toeplitz, so block j of exp(-iM tau) [0,..,0,psi0]
    # holds the correction of order (order - j).
    return [w[(order - n) * d : (order - n + 1) * d] for n in range(order + 1)]


def _seed(psi0: np.ndarray, order: int) -> np.ndarray:
    d = psi0.size
    v = np.zeros((order + 1) * d, dtype=complex)
    v[order * d :] = psi0
    return v


def _block_corrections(
    h0: np.ndarray, hp: np.ndarray, psi0: np.ndarray, tau: float, order: int
) -> list[np.ndarray]:
    m = block_generator(h0, hp, order)
    w = expm_general(m, tau) @ _seed(psi0, order)
    return _unstack(w, psi0.size, order)


def corrections_block_matrix(
    h0: DenseOperator,
    hp: DenseOperator,
    psi0: FockSpinState,
    tau: float,
    order: int = 2,
    *,
    lam: float,
) -> PerturbativeKets:
    _check_inputs(h0, hp, psi0, order)
    kets = _block_corrections(h0.entries, hp.entries, psi0.amplitudes, tau, order)
    return PerturbativeKets(
        tuple(FockSpinState(k, psi0.trunc) for k in kets), order, lam
    )


def corrections_block_matrix_grid(
    h0: DenseOperator,
    hp: DenseOperator,
    psi0: FockSpinState,
    taus,
    order: int = 2,
    *,
    lam: float,
) -> list[PerturbativeKets]:
    """Block-matrix kets on an ascending grid, stepping one propagator along it.

    Uniform grids need a single matrix exponential for the step.
    """
    _check_inputs(h0, hp, psi0, order)
    taus = np.asarray(taus, dtype=float)
    m = block_generator(h0.entries, hp.entries, order)
    d = psi0.trunc.dim
    v = _seed(psi0.amplitudes, order)
    if taus[0] != 0.0:
        v = expm_general(m, taus[0]) @ v
    steps = np.diff(taus)
    uniform = steps.size > 0 and np.allclose(steps, steps[0], rtol=1e-12, atol=0)
    cache: dict[float, np.ndarray] = {}
    if uniform:
        cache[None] = expm_general(m, (taus[-1] - taus[0]) / steps.size)
    out = []
    for j in range(taus.size):
        if j > 0:
            key = None if uniform else float(steps[j - 1])
            if key not in cache:
                cache[key] = expm_general(m, steps[j - 1])
            v = cache[key] @ v
        kets = _unstack(v, d, order)
        out.append(
            PerturbativeKets(tuple(FockSpinState(k, psi0.trunc) for k in kets), order, lam)
        )
    return out


# ---------------------------------------------------------------------------
# quadrature route


class _InteractionPicture:
    """Applies ``exp(-i h0 s)`` and ``exp(i h0 s) hp exp(-i h0 s)`` to vectors."""

    def __init__(self, h0: np.ndarray, hp: np.ndarray):
        self.h0 = h0
        self.hp = hp
        sq = h0 @ h0
        self.involutory = bool(
            np.max(np.abs(sq - np.eye(h0.shape[0]))) <= INVOLUTION_TOL
        )
        self._cache: dict[float, np.ndarray] = {}

    def propagate(self, s: float, v: np.ndarray, sign: int = -1) -> np.ndarray:
        """``exp(sign * i h0 s) v``."""
        if self.involutory:
            return np.cos(s) * v + (sign * 1j * np.sin(s)) * (self.h0 @ v)
        key = sign * s
        if key not in self._cache:
            self._cache[key] = expm_general(self.h0, -key)
        return self._cache[key] @ v

    def perturbation(self, s: float, v: np.ndarray) -> np.ndarray:
        return self.propagate(s, self.hp @ self.propagate(s, v, -1), +1)


def _rule(t: float, density: int, scheme: str) -> tuple[np.ndarray, np.ndarray]:
    if scheme == "gauss_legendre_nested":
        panels = max(1, math.ceil(t * density / _GL_PANEL))
        x, w = np.polynomial.legendre.leggauss(_GL_PANEL)
        h = t / panels
        starts = np.arange(panels) * h
        nodes = (starts[:, None] + (x[None, :] + 1) * h / 2).ravel()
        weights = np.tile(w * h / 2, panels)
        return nodes, weights
    intervals = max(2, 2 * math.ceil(t * density / 2))
    nodes = np.linspace(0.0, t, intervals + 1)
    weights = np.ones(intervals + 1)
    weights[1:-1:2] = 4
    weights[2:-1:2] = 2
    return nodes, weights * (t / intervals) / 3


def _iterated_integral(
    pic: _InteractionPicture,
    psi0: np.ndarray,
    level: int,
    t: float,
    density: int,
    scheme: str,
) -> np.ndarray:
    """``int_0^t ds1 A(s1) int_0^s1 ds2 A(s2) ... psi0`` with ``level`` nestings."""
    if level == 0:
        return psi0
    if t == 0.0:
        return np.zeros_like(psi0)
    nodes, weights = _rule(t, density, scheme)
    acc = np.zeros_like(psi0)
    for s, w in zip(nodes, weights):
        inner = _iterated_integral(pic, psi0, level - 1, s, density, scheme)
        acc = acc + w * pic.perturbation(s, inner)
    return acc


def _quadrature_kets(
    pic: _InteractionPicture, psi0: np.ndarray, tau: float, order: int, density: int, scheme: str
) -> list[np.ndarray]:
    kets = [pic.propagate(tau, psi0)]
    for n in range(1, order + 1):
        g = _iterated_integral(pic, psi0, n, tau, density, scheme)
        kets.append((-1j) ** n * pic.propagate(tau, g))
    return kets


def corrections_quadrature(
    h0: DenseOperator,
    hp: DenseOperator,
    psi0: FockSpinState,
    tau: float,
    order: int = 2,
    *,
    lam: float,
    config: QuadratureConfig = QuadratureConfig(),
) -> PerturbativeKets:
    """Nested time-ordered integrals, checked by doubling the node density."""
    _check_inputs(h0, hp, psi0, order)
    pic = _InteractionPicture(h0.entries, hp.entries)
    p = config.points_per_unit_tau
    coarse = _quadrature_kets(pic, psi0.amplitudes, tau, order, p, config.scheme)
    fine = _quadrature_kets(pic, psi0.amplitudes, tau, order, 2 * p, config.scheme)
    change = max(float(np.max(np.abs(c - f))) for c, f in zip(coarse, fine))
    if change > config.tol:
        raise QuadratureNotConverged(
            f"doubling density to {2 * p} moved the kets by {change:.3e}"
        )
    return PerturbativeKets(
        tuple(FockSpinState(k, psi0.trunc) for k in fine), order, lam
    )


# ---------------------------------------------------------------------------
# normalization


def normalization_terms(order: int) -> list[tuple[int, int, int, int]]:
    """Terms ``(power, i, j, weight)`` of ``N^-2 = sum weight lam^power Re<psi_i|psi_j>``.

    The leading ``(0, 0, 0, 1)`` entry stands for the constant 1.
    """
    terms = [(0, 0, 0, 1)]
    terms += [(n, 0, n, 2) for n in range(1, order + 1)]
    terms += [(2 * n, n, n, 1) for n in range(1, order + 1)]
    for n in range(1, order):
        for m in range(2 * n + 1, n + order + 1):
            terms.append((m, n, m - n, 2))
    return terms


def normalization_factor(pk: PerturbativeKets) -> float:
    inv_sq = 0.0
    for power, i, j, weight in normalization_terms(pk.order):
        if power == 0:
            inv_sq += weight
            continue
        inv_sq += weight * pk.lam**power * pk.kets[i].inner(pk.kets[j]).real
    if inv_sq <= 0:
        raise NonPositiveNormSquared(
            f"N^-2 = {inv_sq:.3e} at lambda={pk.lam}; the series has diverged"
        )
    if inv_sq < VALIDITY_FLOOR:
        warnings.warn(
            f"N^-2 = {inv_sq:.3e}: normalization is rescuing a diverged sum",
            ValidityWarning,
            stacklevel=2,
        )
    return 1.0 / math.sqrt(inv_sq)


def assemble_state(pk: PerturbativeKets) -> FockSpinState:
    return normalization_factor(pk) * pk.partial_sum()
