"""Hand-integrated high-intensity solutions and their coefficient functions.

Every ``cos(tau) * tan(tau)`` product in the explicit solutions is rewritten
before evaluation, so nothing here divides by ``cos(tau)``:

    cos(t) tan(t)                 -> sin(t)
    cos(t) [t - tan(t)]           -> t cos(t) - sin(t)
    sin(2t) [t - tan(t)]          -> 2 sin(t) (t cos(t) - sin(t))

States are built numerically from the explicit ket expansions and normalized
by their direct norm.  The explicit normalization constants and excitation
probability are evaluated alongside; disagreements go to a
:class:`~nmpm_ion.deviations.DeviationReport` when one is supplied.

Coherent-state kets are written in a six-element branch basis: for the
excited block ``|i a>``, ``(d/da + a)|i a>`` and ``(d2/da2 + 2a d/da + a^2)|i a>``
with ``a = alpha``; the ground block uses the same three with
``a = alpha - eta``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .deviations import DeviationReport
from .errors import TruncationInsufficient, ValidityWarning
from .fock_core import (
    DenseOperator,
    FockSpinState,
    TruncationConfig,
    _require_real,
    build_ladder,
    coherent_derivative_kets,
    coherent_ket,
    displaced_number_ket,
    fock_ket,
    spin_operator,
)
from .ion_model import InitialStateSpec, IonParams, coupling_operator, p_excited

BRANCHES = ("e0", "e1", "e2", "g0", "g1", "g2")
BRANCH_LABELS = {
    "e0": "e|ia>",
    "e1": "e(d+a)|ia>",
    "e2": "e(d2+2a.d+a2)|ia>",
    "g0": "g|i(a-eta)>",
    "g1": "g(d+a)|i(a-eta)>",
    "g2": "g(d2+2a.d+a2)|i(a-eta)>",
}


def _ctt(tau):
    """``cos(tau) [tau - tan(tau)]`` without the pole."""
    return tau * np.cos(tau) - np.sin(tau)


@dataclass(frozen=True)
class FCoefficients:
    f1: float
    f2: float
    f3: float
    f4: float
    f5: float
    f6: float

    def as_tuple(self):
        return (self.f1, self.f2, self.f3, self.f4, self.f5, self.f6)


@dataclass(frozen=True)
class GCoefficients:
    g1: float
    g2: float
    g3: float
    g4: float


def f_coefficients(alpha, tau, eta: float, kappa: float) -> FCoefficients:
    """Second-order coefficient functions ``F1..F6``; broadcasts over ``tau``."""
    a, t = alpha, np.asarray(tau, dtype=float)
    s, c, ctt = np.sin(t), np.cos(t), _ctt(t)
    f1 = t / 8 * (eta * ctt * (a**2 * eta + (eta**2 + 1) * (eta - 2 * a)) + kappa**2 * s)
    f2 = t / 4 * (
        2 * a * t * c
        + eta * (3 * eta * a - 2 * a**2 - (eta**2 + 1)) * ctt
        + 2 * a * kappa * s
    )
    f3 = t / 8 * (4 * t * a**2 * c + eta * (eta - 4 * a) * ctt)
    f4 = eta / 8 * t**2 * (a * eta * (a + eta) + 3 * a - eta) * s - (
        2 * eta * (a * kappa + eta - a) + eta**2 * (a**2 + 1) + kappa**2
    ) / 8 * ctt
    f5 = (eta * (a * eta + kappa + 1) * ctt - (2 * a - eta) * (a * eta + 1) * t**2 * s) / 4
    f6 = (t**2 * (4 * a * (eta - a) - eta**2) * s + eta**2 * ctt) / 8
    return FCoefficients(f1, f2, f3, f4, f5, f6)


def g_coefficients(alpha, tau, eta: float, kappa: float) -> GCoefficients:
    a, t = alpha, np.asarray(tau, dtype=float)
    s, c, ctt = np.sin(t), np.cos(t), _ctt(t)
    g1 = (eta * (a - eta) * ctt - kappa * s) / 2
    g2 = (2 * a * t * c - eta * ctt) / 2
    g3 = t * a * eta / 2 * s
    g4 = t / 2 * (2 * a - eta) * s
    return GCoefficients(g1, g2, g3, g4)


@dataclass(frozen=True, eq=False)
class ClosedFormResult:
    state: FockSpinState
    norm_factor: float
    order: int
    validity: str
    params: IonParams
    tau: float
    initial: InitialStateSpec | None = None
    paper_norm_sq: float = math.nan

    @property
    def p_excited(self) -> float:
        return p_excited(self.state)


def _validity(p: IonParams, tau: float) -> str:
    if p.lam * tau > 1:
        warnings.warn(
            f"lambda*tau = {p.lam * tau:.3g} > 1; perturbative result is unreliable",
            ValidityWarning,
            stacklevel=3,
        )
        return "warning_lambda_tau"
    return "ok"


def _finish(
    unnormalized: FockSpinState,
    p: IonParams,
    tau: float,
    order: int,
    initial: InitialStateSpec | None,
    paper_norm_sq: float,
    report: DeviationReport | None,
    operation: str,
    rtol: float,
) -> ClosedFormResult:
    direct_sq = unnormalized.norm() ** 2
    if report is not None:
        report.compare(
            operation, "norm_sq", paper_norm_sq, direct_sq,
            order=order, lam=p.lam, eta=p.eta, kappa=p.kappa,
            alpha=initial.alpha if initial and initial.alpha is not None else math.nan,
            tau=tau, rtol=rtol,
        )
    factor = 1.0 / math.sqrt(direct_sq)
    return ClosedFormResult(
        state=factor * unnormalized,
        norm_factor=factor,
        order=order,
        validity=_validity(p, tau),
        params=p,
        tau=float(tau),
        initial=initial,
        paper_norm_sq=float(paper_norm_sq),
    )


# ---------------------------------------------------------------------------
# first order, arbitrary initial state


def _first_order_operator(p: IonParams, tau: float, trunc: TruncationConfig) -> DenseOperator:
    lam, eta, kap = p.lam, p.eta, p.kappa
    a, ad, num = build_ladder(trunc)
    sz = spin_operator("z", trunc)
    one = DenseOperator.identity(trunc)
    h0 = coupling_operator(eta, trunc)
    s, c = math.sin(tau), math.cos(tau)
    shift = eta * one + 1j * ((a - ad) @ sz)
    cos_branch = c * one - 1j * lam * (
        (tau * c) * num + (eta / 2 * _ctt(tau)) * shift + (kap / 2 * s) * sz
    )
    sin_branch = (-1j * s) * (
        h0
        @ (
            one
            + (lam * eta * tau / 2) * ((a - ad) @ sz)
            - (1j * lam * tau) * (num + (eta**2 / 2) * one)
        )
    )
    return cos_branch + sin_branch


def norm_sq_first_order_general(p: IonParams, psi0: FockSpinState, tau: float) -> float:
    """Printed ``[N^(1)]^-2`` for an arbitrary initial state (expectation-value form)."""
    trunc = psi0.trunc
    lam, eta, kap = p.lam, p.eta, p.kappa
    a, ad, num = build_ladder(trunc)
    sz = spin_operator("z", trunc)
    one = DenseOperator.identity(trunc)

    def ev(op: DenseOperator) -> complex:
        return psi0.inner(op @ psi0)

    s = math.sin(tau)
    q = s**2 + tau * (tau - math.sin(2 * tau))
    amad = a - ad
    val = 1 + lam**2 * eta**2 / 4 * (eta**2 + 1) * q + lam**2 * kap**2 / 4 * s**2
    val += lam**2 * tau**2 * ev(num @ num)
    val += lam**2 * eta**2 / 4 * q * ev(
        2 * num - (a @ a + ad @ ad) + (2j * eta) * (amad @ sz)
    )
    val += lam**2 * tau * eta / 4 * (2 * tau - math.sin(2 * tau)) * ev(
        (2 * eta) * num + 1j * ((2 * (amad @ num) - (a + ad)) @ sz)
    )
    val += lam**2 * kap / 2 * ev(
        ((math.sin(2 * tau) * tau) * num
         + (eta * s * _ctt(tau)) * (eta * one + 1j * (amad @ sz))) @ sz
    )
    return float(np.real(val))


def first_order_general(
    p: IonParams,
    psi0: FockSpinState,
    tau: float,
    report: DeviationReport | None = None,
) -> ClosedFormResult:
    """First-order solution for any initial state via operator composition."""
    if abs(psi0.norm() - 1) > 1e-10:
        raise ValueError("initial state must be normalized")
    if psi0.leakage() > 1e-10:
        raise TruncationInsufficient(f"initial leakage {psi0.leakage():.3e}")
    unnorm = _first_order_operator(p, tau, psi0.trunc) @ psi0
    claimed = norm_sq_first_order_general(p, psi0, tau)
    return _finish(unnorm, p, tau, 1, None, claimed, report, "first_order_general", 1e-9)


# ---------------------------------------------------------------------------
# first order, number-state initial conditions


def norm_sq_fock_ground(p: IonParams, n: int, tau) -> float:
    lam, eta, kap = p.lam, p.eta, p.kappa
    t = np.asarray(tau, dtype=float)
    s = np.sin(t)
    val = 1 + lam**2 / 8 * (
        4 * t**2 * n * (eta**2 + 2 * n)
        + 2 * (eta**2 * (eta**2 + 2 * n + 1) + kap**2) * s**2
        + 2 * t * eta**2 * (eta**2 + 4 * n + 1) * (t - np.sin(2 * t))
    )
    return val - lam**2 * kap / 4 * _kappa_cross(n, t, eta)


def _kappa_cross(n: int, t, eta: float):
    # sin(2t) {2 n t + eta^2 [t - tan t]}
    return np.sin(2 * t) * 2 * n * t + eta**2 * 2 * np.sin(t) * _ctt(t)


def norm_sq_fock_excited(p: IonParams, n: int, tau) -> float:
    t = np.asarray(tau, dtype=float)
    return norm_sq_fock_ground(p, n, t) + p.lam**2 * p.kappa / 2 * _kappa_cross(n, t, p.eta)


def _check_fock_level(n: int, trunc: TruncationConfig) -> None:
    if n < 0 or n > trunc.guard_n - 2:
        raise TruncationInsufficient(
            f"n={n} must satisfy 0 <= n <= guard_n - 2 = {trunc.guard_n - 2}"
        )


def _number_state_solution(p: IonParams, n: int, tau: float, trunc, spin: str):
    lam, eta, kap = p.lam, p.eta, p.kappa
    s, c, ctt = math.sin(tau), math.cos(tau), _ctt(tau)
    sign = 1 if spin == "e" else -1  # sigma_z eigenvalue of the initial spin
    beta = -1j * eta * sign  # |g> flips to D(i eta), |e> to D(-i eta)
    ladder_diff = np.zeros(trunc.fock_dim, dtype=complex)  # (a - a^dag)|n>
    if n > 0:
        ladder_diff[n - 1] = math.sqrt(n)
    ladder_diff[n + 1] = -math.sqrt(n + 1)
    same = (
        c - 1j * lam * tau * n * c - 1j * lam * eta**2 / 2 * ctt - sign * 1j * lam * kap / 2 * s
    ) * fock_ket(n, trunc) + sign * (lam * eta / 2 * ctt) * ladder_diff
    displaced = lambda k: displaced_number_ket(beta, k, trunc)  # noqa: E731
    shifted = math.sqrt(n) * displaced(n - 1) if n > 0 else 0 * displaced(0)
    shifted = shifted - math.sqrt(n + 1) * displaced(n + 1)
    flipped = (-1j * s) * (1 - 1j * lam * tau * (n + eta**2 / 2)) * displaced(n)
    flipped = flipped - sign * (1j * lam * eta * tau / 2 * s) * shifted
    if spin == "g":
        return FockSpinState.from_blocks(flipped, same, trunc)
    return FockSpinState.from_blocks(same, flipped, trunc)


def first_order_fock_ground(
    p: IonParams, n: int, tau: float, trunc: TruncationConfig,
    report: DeviationReport | None = None,
) -> ClosedFormResult:
    """Initial state ``|n>|g>``; ket written with displaced number states."""
    _check_fock_level(n, trunc)
    unnorm = _number_state_solution(p, n, tau, trunc, "g")
    return _finish(unnorm, p, tau, 1, InitialStateSpec("fock_ground", n=n),
                   float(norm_sq_fock_ground(p, n, tau)), report,
                   "first_order_fock_ground", 1e-9)


def first_order_fock_excited(
    p: IonParams, n: int, tau: float, trunc: TruncationConfig,
    report: DeviationReport | None = None,
) -> ClosedFormResult:
    """Initial state ``|n>|e>``."""
    _check_fock_level(n, trunc)
    unnorm = _number_state_solution(p, n, tau, trunc, "e")
    return _finish(unnorm, p, tau, 1, InitialStateSpec("fock_excited", n=n),
                   float(norm_sq_fock_excited(p, n, tau)), report,
                   "first_order_fock_excited", 1e-9)


# ---------------------------------------------------------------------------
# coherent initial condition |i alpha>|e>


def coherent_branch_basis(alpha: float, eta: float, trunc: TruncationConfig) -> dict:
    """Fock vectors of the six branches (see module docstring)."""
    out = {}
    for block, label in (("e", alpha), ("g", alpha - eta)):
        k0 = coherent_ket(label, trunc)
        k1 = coherent_derivative_kets(label, 1, trunc)
        k2 = coherent_derivative_kets(label, 2, trunc)
        out[block + "0"] = k0
        out[block + "1"] = k1 + label * k0
        out[block + "2"] = k2 + 2 * label * k1 + label**2 * k0
    return out


def coherent_branch_coefficients(
    p: IonParams, alpha: float, tau: float, order: int = 2
) -> dict[str, np.ndarray]:
    """Printed branch coefficients as ``[lam^0, lam^1, lam^2]`` arrays.

    ``order=1`` zeroes the ``lam^2`` column, giving the first-order solution.
    """
    eta, kap = p.eta, p.kappa
    s, c, ctt = math.sin(tau), math.cos(tau), _ctt(tau)
    f = f_coefficients(alpha, tau, eta, kap)
    coeffs = {
        "e0": [c, 0.5j * (eta * (alpha - eta) * ctt - kap * s), -f.f1],
        "e1": [0, -0.5j * ((2 * alpha - eta) * tau * c + eta * s), -f.f2],
        "e2": [0, 0, -f.f3],
        "g0": [-1j * s, -alpha * eta * tau / 2 * s, 1j * f.f4],
        "g1": [0, -(2 * alpha - eta) * tau / 2 * s, -1j * f.f5],
        "g2": [0, 0, -1j * f.f6],
    }
    out = {}
    for k, v in coeffs.items():
        arr = np.array([complex(x) for x in v])
        if order == 1:
            arr[2] = 0
        out[k] = arr
    return out


def _assemble_branches(coeffs, basis, lam: float, trunc) -> FockSpinState:
    powers = np.array([1.0, lam, lam**2])
    e = sum((coeffs[b] @ powers) * basis[b] for b in ("e0", "e1", "e2"))
    g = sum((coeffs[b] @ powers) * basis[b] for b in ("g0", "g1", "g2"))
    return FockSpinState.from_blocks(e, g, trunc)


def norm_sq_coherent_first(p: IonParams, alpha: float, tau) -> float:
    lam, eta, kap, a = p.lam, p.eta, p.kappa, alpha
    t = np.asarray(tau, dtype=float)
    s, c = np.sin(t), np.cos(t)
    val = 1 + lam**2 / 2 * (
        a * eta * (a - eta) * (eta - 4 * a * t**2)
        + 2 * a * t**2 * (a * (a**2 + 1) - eta * (eta**2 + 1))
    ) + lam**2 * kap**2 / 4 * s**2
    val -= lam**2 / 8 * (
        eta**2 * ((2 * a - eta) ** 2 + 1) * np.cos(2 * t)
        - 2 * t * eta * (2 * a - eta) * (eta**2 + 2 * a * (a - eta) + 1) * np.sin(2 * t)
    )
    val += lam**2 * kap / 4 * (
        np.sin(2 * t) * 2 * a**2 * t - (2 * a - eta) * eta * 2 * s * _ctt(t)
    )
    val += lam**2 * eta**2 / 8 * (eta**2 + 1) * (2 * t**2 + 1)
    return val


def norm_sq_coherent_second(p: IonParams, alpha: float, tau) -> float:
    """Printed ``[N^(2)]^-2`` for ``|i alpha>|e>``."""
    lam, eta, a = p.lam, p.eta, alpha
    t = np.asarray(tau, dtype=float)
    f1, f2, f3, f4, f5, f6 = f_coefficients(a, t, eta, p.kappa).as_tuple()
    b = a - eta
    l4 = lam**4
    val = 1 - t**2 * lam**2 / 4 * a * eta * (eta**2 + 1) * np.sin(t) ** 2
    val += l4 * (f1**2 + f2**2 + 2 * (f3**2 + f6**2) + f4**2 + f5**2)
    val += a**2 * l4 * (2 * (f1 + 2 * f3) * f3 + f2**2)
    val += a**3 * l4 * (2 * f2 + a * f3) * f3
    val += 2 * a * l4 * (f1 + 2 * f3) * f2
    val += 2 * b * l4 * (2 * f6 - f4) * f5
    val += b**2 * l4 * (f5**2 - 2 * (f4 - 2 * f6) * f6)
    val += b**3 * l4 * (2 * f5 + b * f6) * f6
    return val


def _coherent_solution(
    p: IonParams, alpha: float, tau: float, trunc: TruncationConfig, order: int,
    report: DeviationReport | None,
) -> ClosedFormResult:
    alpha = _require_real(alpha)
    basis = coherent_branch_basis(alpha, p.eta, trunc)
    coeffs = coherent_branch_coefficients(p, alpha, tau, order)
    unnorm = _assemble_branches(coeffs, basis, p.lam, trunc)
    if order == 1:
        claimed, op = norm_sq_coherent_first(p, alpha, tau), "first_order_coherent_excited"
    else:
        claimed, op = norm_sq_coherent_second(p, alpha, tau), "second_order_coherent_excited"
    return _finish(unnorm, p, tau, order, InitialStateSpec("coherent_excited", alpha=alpha),
                   float(claimed), report, op, 1e-9 if order == 1 else 1e-6)


def first_order_coherent_excited(
    p: IonParams, alpha: float, tau: float, trunc: TruncationConfig,
    report: DeviationReport | None = None,
) -> ClosedFormResult:
    """Initial state ``|i alpha>|e>``, first order."""
    return _coherent_solution(p, alpha, tau, trunc, 1, report)


def second_order_coherent_excited(
    p: IonParams, alpha: float, tau: float, trunc: TruncationConfig,
    report: DeviationReport | None = None,
) -> ClosedFormResult:
    """Initial state ``|i alpha>|e>``, second order, from the explicit branch expansion."""
    return _coherent_solution(p, alpha, tau, trunc, 2, report)


# ---------------------------------------------------------------------------
# excitation probability


def p_excited_second_order(
    p: IonParams, alpha: float, tau, trunc: TruncationConfig | None = None,
    report: DeviationReport | None = None,
):
    """Printed second-order ``Pe(tau)`` built from ``F``, ``g`` and ``[N^(2)]^-2``.

    With ``report`` and ``trunc`` given, each value is cross-checked against
    the excited population of :func:`second_order_coherent_excited`.
    """
    lam, a = p.lam, alpha
    t = np.asarray(tau, dtype=float)
    f1, f2, f3, _, _, _ = f_coefficients(a, t, p.eta, p.kappa).as_tuple()
    g = g_coefficients(a, t, p.eta, p.kappa)
    n2 = norm_sq_coherent_second(p, a, t)
    c = np.cos(t)
    l2, l4 = lam**2, lam**4
    inner = (
        -l2 * c * (2 * a**2 * f3 + a * f2 + 2 * f1)
        + l4 * (f1**2 + f2**2 + 2 * f3**2)
        + c**2
        + l2 * (g.g1**2 + (a**2 + 1) * g.g2**2 - 2 * a * g.g1 * g.g2)
        + 2 * l4 * a**3 * f2 * f3
    )
    pe = n2 * inner
    pe = pe + a**2 * l4 * n2 * (f2**2 + 2 * f3 * (f1 + 2 * f3))
    pe = pe + a * l4 * n2 * (2 * f2 * (f1 + 2 * f3) + a**3 * f3**2)
    if report is not None and trunc is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            for ti, pi in zip(np.atleast_1d(t), np.atleast_1d(pe)):
                direct = second_order_coherent_excited(p, a, float(ti), trunc).p_excited
                report.compare("p_excited_second_order", "Pe", float(pi), direct,
                               order=2, lam=p.lam, eta=p.eta, kappa=p.kappa,
                               alpha=a, tau=float(ti))
    return pe if np.ndim(pe) else float(pe)


def p_excited_small_rotation(alpha: float, eta: float, lam: float, tau):
    """Small-rotation reference curve with ``chi = -lam^2 eta^2 / 2``."""
    t = np.asarray(tau, dtype=float)
    chi = -(lam**2) * eta**2 / 2
    b2 = (alpha - eta / 2) ** 2
    envelope = np.exp(-2 * b2 * np.sin(t * chi) ** 2)
    phase = t * (2 - chi) - b2 * np.sin(2 * t * chi)
    pe = 0.5 * (1 + envelope * np.cos(phase))
    return pe if np.ndim(pe) else float(pe)


# ---------------------------------------------------------------------------
# branch audit against the engine


def project_on_branches(state: FockSpinState, basis: dict) -> tuple[dict, float]:
    """Least-squares branch coefficients of ``state`` and the worst fit residual."""
    coeffs, resid = {}, 0.0
    for block, vec in (("e", state.excited), ("g", state.ground)):
        names = [block + "0", block + "1", block + "2"]
        mat = np.stack([basis[n] for n in names], axis=1)
        sol, *_ = np.linalg.lstsq(mat, vec, rcond=None)
        resid = max(resid, float(np.max(np.abs(mat @ sol - vec))))
        coeffs.update(dict(zip(names, sol)))
    return coeffs, resid


def audit_coherent_branches(
    p: IonParams, alpha: float, tau: float, trunc: TruncationConfig,
    report: DeviationReport, order: int = 2,
) -> dict[str, np.ndarray]:
    """Compare explicit branch coefficients with those of the block-matrix kets.

    Returns the engine's ``[lam^0 .. lam^order]`` coefficients per branch.
    """
    from .ion_model import split_high_intensity
    from .nmpm_engine import corrections_block_matrix

    h0, hp = split_high_intensity(p, trunc)
    psi0 = InitialStateSpec("coherent_excited", alpha=alpha).build(trunc)
    pk = corrections_block_matrix(h0, hp, psi0, tau, order, lam=p.lam)
    basis = coherent_branch_basis(alpha, p.eta, trunc)
    claimed = coherent_branch_coefficients(p, alpha, tau, order)
    engine = {b: np.zeros(order + 1, dtype=complex) for b in BRANCHES}
    op = "first_order_coherent_excited" if order == 1 else "second_order_coherent_excited"
    for n, ket in enumerate(pk.kets):
        fitted, resid = project_on_branches(ket, basis)
        meta = dict(order=order, lam=p.lam, eta=p.eta, kappa=p.kappa, alpha=alpha, tau=tau)
        report.compare(op, f"fit_residual:lam^{n}", 0.0, resid, rtol=1e-9, **meta)
        for b in BRANCHES:
            engine[b][n] = fitted[b]
            report.compare(op, f"{BRANCH_LABELS[b]}:lam^{n}", claimed[b][n], fitted[b],
                           rtol=1e-7, **meta)
    return engine
