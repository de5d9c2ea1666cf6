"""Harmonic S-matrix elements and first-order transition probabilities.

The zero-order (harmonic) matrix S0_mn is available through three
independent routes:

- direct overlap quadrature of the evolved basis states against the
  out-states, evaluated at several late times and checked time-independent;
- exact Taylor-coefficient assembly of the two-variable generating function
  I(z1, z2) = (1-rho)^{1/4} exp{ [sqrt(rho)(z1^2 - z2^2)
                                  + 2 sqrt(1-rho) z1 z2] / 2 },
  S0_mn = (m! n!)^{-1/2} d^m_{z1} d^n_{z2} I at 0   (force-free case);
- the associated-Legendre closed form for the probabilities
  W0_mn = (n_<! / n_>!) sqrt(1-rho) |P^{(n_> - n_<)/2}_{(n_< + n_>)/2}(sqrt(1-rho))|^2.

First-order corrections combine the out-channel ladder coefficients (bra
side, conjugated) with the asymptotic in-evolution coefficients (ket side):

    S1_mn = sum_l conj(w^f_l(m)) S0_{m-l,n} - sum_p conj(u^f_p(m)) S0_{m-p,n}
    S2_mn = sum_l w^+_l(n) S0_{m,n-l}      - sum_p u^+_p(n) S0_{m,n-p}
    W_mn  = exp(-2 lam Re v0+) [1 + 2 lam Re((S1+S2)/S0)] |S0|^2

The exponent enters squared ("double") in the modulus; a "single" variant
is kept selectable because the closed-form surface below uses it.  Entries
where |S0| is below a floor are flagged first-order-indeterminate instead
of divided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import lpmv

from .basis import eval_f0, overlap, phi_out, spatial_grid, zero_order_state
from .classical import ClassicalSolution
from .errors import (CapacityError, DomainError, InvalidParameterError,
                     LimitNotReachedError)
from .firstorder import (P_RANGE, FinalStateCoeffs, FirstOrderCorrections,
                         chi_coeffs, u_from_chi)

EXP_SINGLE = "single"
EXP_DOUBLE = "double"


def _check_rho(rho: float) -> None:
    if not (0.0 <= rho < 1.0):
        raise DomainError(f"rho must lie in [0, 1), got {rho}")


def s0_generating(m: int, n: int, rho: float) -> float:
    """Force-free harmonic S-matrix element from the generating function.

    Exact finite Taylor sum, no numeric differentiation; zero for odd m+n.
    """
    _check_rho(rho)
    if m < 0 or n < 0:
        raise DomainError("indices must be non-negative")
    if (m + n) % 2 == 1:
        return 0.0
    a = 0.5 * math.sqrt(rho)       # z1^2 weight
    b = -0.5 * math.sqrt(rho)      # z2^2 weight
    c = math.sqrt(1.0 - rho)       # z1 z2 weight
    total = 0.0
    for k in range(m % 2, min(m, n) + 1, 2):
        i = (m - k) // 2
        j = (n - k) // 2
        total += (a ** i) * (b ** j) * (c ** k) / (
            math.factorial(i) * math.factorial(j) * math.factorial(k))
    return (1.0 - rho) ** 0.25 * math.sqrt(math.factorial(m) * math.factorial(n)) * total


def s0_matrix_generating(size: int, rho: float) -> np.ndarray:
    """Matrix of s0_generating for 0 <= m, n < size (real in this gauge)."""
    s = np.zeros((size, size))
    for m in range(size):
        for n in range(size):
            if (m + n) % 2 == 0:
                s[m, n] = s0_generating(m, n, rho)
    return s


def w0_legendre(m: int, n: int, rho: float) -> float:
    """Harmonic transition probability in associated-Legendre form."""
    _check_rho(rho)
    if (m + n) % 2 == 1:
        return 0.0
    lo, hi = min(m, n), max(m, n)
    order = (hi - lo) // 2
    degree = (hi + lo) // 2
    x = math.sqrt(1.0 - rho)
    p = float(lpmv(order, degree, x))
    return (math.factorial(lo) / math.factorial(hi)) * math.sqrt(1.0 - rho) * p * p


def s0_quadrature(m: int, n: int, classical: ClassicalSolution, tau_eval_set,
                  n_points: int = 2048, consistency_tol: float = 1e-6) -> complex:
    """S0_mn as the late-time overlap of the evolved state with the out-state.

    Evaluated at every tau in tau_eval_set; the spread across the set is the
    asymptotic-limit criterion and must stay below consistency_tol.
    """
    mat, spread = s0_quadrature_matrix(classical, (m,), (n,), tau_eval_set,
                                       n_points=n_points)
    if spread > consistency_tol:
        raise LimitNotReachedError(
            f"S0[{m},{n}] drifts by {spread:.3e} across the evaluation times")
    return complex(mat[0, 0])


def s0_quadrature_matrix(classical: ClassicalSolution, m_values, n_values,
                         tau_eval_set, n_points: int = 2048):
    """Overlap matrix <out m | evolved n> averaged over the evaluation times.

    Returns (matrix, max spread across times).  Vectorized over the grid;
    one basis evaluation per (state, tau).
    """
    m_values = list(m_values)
    n_values = list(n_values)
    n_top = max(n_values)
    w_out = classical.omega_out
    x = spatial_grid(classical, n_top, n_points=n_points)
    half_out = 8.0 * math.sqrt((2 * max(m_values) + 1) / w_out)
    if x[-1] < half_out:
        x = np.linspace(-half_out, half_out, n_points)
    dx = x[1] - x[0]

    out_states = np.array([phi_out(mm, w_out, x) for mm in m_values])
    snaps = []
    for tau in tau_eval_set:
        # conj of the out-state phase e^{-i(m+1/2) w tau}; spatial parts are real
        phases = np.exp(1j * (np.array(m_values) + 0.5) * w_out * tau)
        kets = np.array([eval_f0(zero_order_state(classical, nn), x, tau)
                         for nn in n_values])
        snaps.append(phases[:, None] * (out_states @ kets.T) * dx)
    snaps = np.array(snaps)
    spread = float(np.max(np.abs(snaps - snaps.mean(axis=0)))) if len(snaps) > 1 else 0.0
    return snaps.mean(axis=0), spread


@dataclass(frozen=True)
class LadderSet:
    """Asymptotic ladder coefficients of one state's first-order correction."""

    w: np.ndarray  # shape (4,), ladder steps 1..4
    u: np.ndarray  # shape (9,), ladder shifts -4..4


def ladder_set_from_final(coeffs: FinalStateCoeffs) -> LadderSet:
    return LadderSet(w=coeffs.w_f.copy(), u=coeffs.u_f.copy())


def ladder_set_from_corrections(corr: FirstOrderCorrections) -> LadderSet:
    return LadderSet(w=corr.wcorr.w_plus.copy(), u=corr.vcorr.u_plus())


def first_order_smatrix(s0: np.ndarray, out_sets: list[LadderSet],
                        plus_sets: list[LadderSet], n_max: int):
    """Assemble S1 and S2 up to n_max from a padded S0 matrix.

    s0 must extend to index n_max + 4 in both directions (ladder shifts
    reach outside the reported block); negative indices contribute zero.
    out_sets[m] carries the out-channel (bra) coefficients, conjugated here;
    plus_sets[n] carries the asymptotic in-evolution (ket) coefficients.
    """
    need = n_max + 5
    if s0.shape[0] < need or s0.shape[1] < need:
        raise CapacityError(
            f"S0 must be padded to {need} rows/cols for n_max={n_max}")
    size = n_max + 1
    s1 = np.zeros((size, size), dtype=complex)
    s2 = np.zeros((size, size), dtype=complex)
    for m in range(size):
        wf = out_sets[m].w
        uf = out_sets[m].u
        for n in range(size):
            wp = plus_sets[n].w
            up = plus_sets[n].u
            acc1 = 0.0 + 0.0j
            for l in range(1, 5):
                if m - l >= 0:
                    acc1 += np.conjugate(wf[l - 1]) * s0[m - l, n]
            for idx, p in enumerate(P_RANGE):
                if 0 <= m - p < need:
                    acc1 -= np.conjugate(uf[idx]) * s0[m - p, n]
            acc2 = 0.0 + 0.0j
            for l in range(1, 5):
                if n - l >= 0:
                    acc2 += wp[l - 1] * s0[m, n - l]
            for idx, p in enumerate(P_RANGE):
                if 0 <= n - p < need:
                    acc2 -= up[idx] * s0[m, n - p]
            s1[m, n] = acc1
            s2[m, n] = acc2
    return s1, s2


def transition_probability(s0: np.ndarray, s1: np.ndarray, s2: np.ndarray,
                           lam: float, v0_plus: complex,
                           exponent: str = EXP_DOUBLE, s0_floor: float = 1e-12):
    """First-order transition probabilities; see the module docstring formula.

    Only Re v0+ enters; the imaginary part is a pure phase (level shift) and
    is reported by the caller as a diagnostic.  Returns (W, indeterminate)
    where indeterminate flags entries whose |S0| is below s0_floor: there
    the ratio correction is meaningless and the harmonic value is kept.
    """
    if lam < 0.0:
        raise InvalidParameterError("lam must be >= 0")
    if exponent not in (EXP_SINGLE, EXP_DOUBLE):
        raise InvalidParameterError(f"unknown exponent convention {exponent!r}")
    k = 2.0 if exponent == EXP_DOUBLE else 1.0
    s0 = np.atleast_2d(np.asarray(s0, dtype=complex))
    num = np.atleast_2d(np.asarray(s1, dtype=complex) + np.asarray(s2, dtype=complex))
    if num.shape != s0.shape:
        raise InvalidParameterError("S0, S1, S2 must share one shape")
    base = np.abs(s0) ** 2
    indeterminate = np.abs(s0) < s0_floor
    ratio = np.zeros(s0.shape)
    safe = ~indeterminate
    ratio[safe] = (num[safe] / s0[safe]).real
    w = math.exp(-k * lam * float(np.real(v0_plus))) * (1.0 + 2.0 * lam * ratio) * base
    return w, indeterminate


def w00_closed_form(lambda_tilde: float, rho: float,
                    exponent: str = EXP_SINGLE) -> float:
    """Closed-form ground-to-ground probability surface.

    W00 = sqrt(1-rho) * {1 - lt * [1 - g(rho)] * (1 - rho/3)} * exp(-k * lt * g(rho)),
    g(rho) = ((1+rho)/(1-rho))^3, lt the rescaled coupling.  The printed
    form has k = 1 ("single"); "double" applies the squared-modulus
    convention k = 2 used by the assembled pipeline.
    """
    _check_rho(rho)
    if lambda_tilde < 0.0:
        raise InvalidParameterError("lambda_tilde must be >= 0")
    if exponent not in (EXP_SINGLE, EXP_DOUBLE):
        raise InvalidParameterError(f"unknown exponent convention {exponent!r}")
    k = 1.0 if exponent == EXP_SINGLE else 2.0
    g = ((1.0 + rho) / (1.0 - rho)) ** 3
    bracket = 1.0 - lambda_tilde * (1.0 - g) * (1.0 - rho / 3.0)
    return math.sqrt(1.0 - rho) * bracket * math.exp(-k * lambda_tilde * g)


@dataclass(frozen=True)
class TransitionTable:
    """Assembled matrices up to n_max with per-entry provenance."""

    n_max: int
    lam: float
    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    w: np.ndarray
    indeterminate: np.ndarray
    method: str                      # quadrature | generating-function
    v0_plus: complex = 0.0 + 0.0j
    exponent: str = EXP_DOUBLE
    notes: dict = field(default_factory=dict)

    def dump_csv(self, fh) -> None:
        fh.write("m,n,re_s0,im_s0,re_s1,im_s1,re_s2,im_s2,w,method,flags\n")
        for m in range(self.n_max + 1):
            for n in range(self.n_max + 1):
                flag = "indeterminate" if self.indeterminate[m, n] else ""
                fh.write(
                    f"{m},{n},{self.s0[m, n].real:.17g},{self.s0[m, n].imag:.17g},"
                    f"{self.s1[m, n].real:.17g},{self.s1[m, n].imag:.17g},"
                    f"{self.s2[m, n].real:.17g},{self.s2[m, n].imag:.17g},"
                    f"{self.w[m, n]:.17g},{self.method},{flag}\n")


def unitarity_deficit(rho: float, n_max: int, column: int = 0) -> float:
    """1 - sum_m W0_{m,column} for m <= n_max at coupling zero."""
    total = sum(w0_legendre(m, column, rho) for m in range(n_max + 1))
    return 1.0 - total


@dataclass(frozen=True)
class SnapshotResult:
    """First-order S-matrix elements assembled at several late times."""

    s_mean: np.ndarray       # (m_max+1, n_count) time-averaged elements
    modulus_spread: float    # max spread of |S| across the evaluation times
    w: np.ndarray            # time-averaged |S|^2


def assemble_snapshots(classical: ClassicalSolution, corrs: dict,
                       out_coeffs: list[FinalStateCoeffs], lam: float,
                       tau_eval_set, m_max: int, n_points: int = 2048
                       ) -> SnapshotResult:
    """Full first-order S-matrix elements evaluated at each late time.

    ``corrs`` maps the in-state quantum number n to its FirstOrderCorrections
    (coefficients must be in the physical gauge of the evolved potential).
    Every ladder phase is carried explicitly, so the assembled elements are
    time-independent up to O(lam^2) and finite-flatness residue; the spread
    of the moduli across the evaluation times is returned as a diagnostic.
    Probabilities are the time-averaged squared moduli.
    """
    n_values = sorted(corrs)
    w_out = classical.omega_out
    k_top = max(max(n_values) + 4, m_max + 4)
    snaps = []
    for tau in tau_eval_set:
        o_mat, _ = s0_quadrature_matrix(classical, range(m_max + 5),
                                        range(k_top + 1), [tau], n_points=n_points)
        s_tau = np.zeros((m_max + 1, len(n_values)), dtype=complex)
        for col, n in enumerate(n_values):
            corr = corrs[n]
            v = corr.vcorr.v(tau)
            v0 = complex(v[0])
            u_tau = u_from_chi(
                np_chi := __import__('oscatter.firstorder', fromlist=['chi_coeffs'])
                .chi_coeffs(v, n, corr.vcorr.coupling), n)
            wbar = corr.wcorr.w_bar(tau)
            L_abs = classical.lambda_phase_abs(tau)
            u_bar = u_tau * np.exp(-1j * P_RANGE * L_abs)
            for m in range(m_max + 1):
                acc = o_mat[m, n]
                ket = 0.0 + 0.0j
                for l in range(1, 5):
                    if n - l >= 0:
                        ket += wbar[l - 1] * o_mat[m, n - l]
                for idx, p in enumerate(P_RANGE):
                    if 0 <= n - p <= k_top:
                        ket -= u_bar[idx] * o_mat[m, n - p]
                fin = out_coeffs[m]
                bra = 0.0 + 0.0j
                for l in range(1, 5):
                    if m - l >= 0:
                        bra += (np.conjugate(fin.w_f[l - 1])
                                * np.exp(1j * l * w_out * tau) * o_mat[m - l, n])
                for idx, p in enumerate(P_RANGE):
                    if 0 <= m - p < m_max + 5:
                        bra -= (np.conjugate(fin.u_f[idx])
                                * np.exp(1j * p * w_out * tau) * o_mat[m - p, n])
                s_tau[m, col] = np.exp(-lam * v0) * (acc + lam * (ket + bra))
        snaps.append(s_tau)
    snaps = np.array(snaps)
    mods = np.abs(snaps)
    spread = float(np.max(mods.max(axis=0) - mods.min(axis=0))) if len(snaps) > 1 else 0.0
    return SnapshotResult(s_mean=snaps.mean(axis=0), modulus_spread=spread,
                          w=(mods ** 2).mean(axis=0))
