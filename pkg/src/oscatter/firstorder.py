"""First-order corrections to the oscillator wave function.

The total state is written as psi = f * exp(-Phi) with both factors expanded
in the coupling lam.  At first order the phase correction is a quartic
polynomial in the scaled coordinate y,

    Phi_1 = sum_k v_k(n; tau) y^k,   k = 0..4,

and the amplitude correction is carried by four ladder coefficients,

    f_1 = sum_j wbar_j(n; tau) f0(n - j; x, tau),   j = 1..4.

The v_k obey  i dv_j/dtau = c_j v_j + d_j  with c_j = j kappa0 and sources
d_j built from the potential expansion coefficients b_m plus cross-coupling
feed-down terms; the wbar_j obey  i dwbar_j/dtau = ebar_j with sources
linear in the v's.  Everything is linear in the perturbation, so scaling
(alpha, beta) scales every coefficient identically.

Sign conventions
----------------
``potential_sign`` is the sign of lam*V in the evolved Hamiltonian that the
coefficients describe (V = alpha x^3 + beta x^4).  The default -1 is the
convention in which the canonical adiabatic reference values come out as
v4+ = -beta+ / (4 kbar0^3); transition probabilities for the physical
potential +lam*V (the one the grid propagator evolves) are obtained by
solving with potential_sign=+1.  The two solution sets differ only by an
overall sign.

``coupling`` selects the sign variant of the cross-coupling feed-down terms
in d_2, d_1, d_0 (and the matching variant of one amplitude source and one
ladder weight).  "conserving" (default) is the variant that conserves the
first-order norm identity Re[v_0 + chi_0] and agrees with stationary
perturbation theory and with the grid propagator; "alternate" is the
sign-flipped variant kept because the tabulated adiabatic reference values
for v2 and the final-state coefficients follow it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .classical import ClassicalSolution, ScatteringParams, extract_scattering_params
from .errors import (InconsistencyError, IntegrationFailureError,
                     InvalidParameterError, NotAsymptoticError)
from .profiles import Scenario

COUPLING_CONSERVING = "conserving"
COUPLING_ALTERNATE = "alternate"
_COUPLINGS = (COUPLING_CONSERVING, COUPLING_ALTERNATE)

P_RANGE = np.arange(-4, 5)  # ladder shifts carried by the y-expansion


def b_coeffs(alpha: float, beta: float, eta: float, zeta_mod: float,
             omega_in: float) -> np.ndarray:
    """Expansion of alpha x^3 + beta x^4 in powers of y = sqrt(w)(x - eta)/|zeta|."""
    if zeta_mod <= 0.0 or omega_in <= 0.0:
        raise InvalidParameterError("zeta_mod and omega_in must be positive")
    s = zeta_mod / math.sqrt(omega_in)
    return np.array([
        eta ** 3 * (beta * eta + alpha),
        s * eta ** 2 * (4.0 * beta * eta + 3.0 * alpha),
        3.0 * s ** 2 * eta * (2.0 * beta * eta + alpha),
        s ** 3 * (4.0 * beta * eta + alpha),
        s ** 4 * beta,
    ])


# ----------------------------------------------------------------------
# cached smooth coefficients along the classical solution
# ----------------------------------------------------------------------

class _Coefficients:
    """Cubic-spline cache of every tau-dependent coefficient the ODEs need."""

    def __init__(self, scenario: Scenario, classical: ClassicalSolution,
                 pts_per_period: int = 48):
        t0, t1 = classical.tau_span
        w_max = max(scenario.omega_in, scenario.omega_out)
        n_pts = int(min(max(3000, (t1 - t0) * pts_per_period * w_max / math.pi), 400_000))
        taus = np.linspace(t0, t1, n_pts)
        z = classical.zeta(taus)
        zd = classical.zeta_dot(taus)
        mod = np.abs(z)
        dmod = (z.conjugate() * zd).real / mod
        w_in = classical.omega_in
        eta = classical.eta(taus) if classical.has_response else np.zeros_like(taus)
        eta_dot = classical.eta_dot(taus) if classical.has_response else np.zeros_like(taus)

        self.tau_span = (t0, t1)
        self.omega_in = w_in
        self.kappa0 = CubicSpline(taus, w_in / mod ** 2)
        self.lam_phase = CubicSpline(taus, classical.lambda_phase(taus))
        # absolute-time reference for ladder phases, see basis level phases
        self.lam_phase_offset = w_in * t0
        self.a1 = CubicSpline(taus, 1j * eta_dot * mod / math.sqrt(w_in))
        self.a2 = CubicSpline(taus, 0.5 * (1j * mod * dmod / w_in - 1.0))
        alpha = scenario.alpha(taus)
        beta = scenario.beta(taus)
        s = mod / math.sqrt(w_in)
        b = np.empty((5, n_pts))
        b[0] = eta ** 3 * (beta * eta + alpha)
        b[1] = s * eta ** 2 * (4.0 * beta * eta + 3.0 * alpha)
        b[2] = 3.0 * s ** 2 * eta * (2.0 * beta * eta + alpha)
        b[3] = s ** 3 * (4.0 * beta * eta + alpha)
        b[4] = s ** 4 * beta
        self.b = CubicSpline(taus, b, axis=1)


def _d_sources(b, kappa, v, n: int, coupling: str) -> np.ndarray:
    """Sources d_0..d_4 of the phase system; v holds the current v_0..v_4."""
    sign = -1.0 if coupling == COUPLING_CONSERVING else 1.0
    d = np.empty(5, dtype=complex)
    d[4] = b[4]
    d[3] = b[3]
    d[2] = b[2] + sign * 2.0 * (2 * n + 3) * kappa * v[4]
    d[1] = b[1] + sign * 3.0 * (n + 1) * kappa * v[3]
    d[0] = b[0] + sign * ((2 * n + 1) * kappa * v[2] + 2.0 * n * (n - 1) * kappa * v[4])
    return d


def _initial_v(b0, kappa0, n: int, coupling: str) -> np.ndarray:
    """Stationary start: v_j = -d_j / c_j resolved in the order j = 4..1, v_0 = 0."""
    v = np.zeros(5, dtype=complex)
    v[4] = -b0[4] / (4.0 * kappa0)
    v[3] = -b0[3] / (3.0 * kappa0)
    d = _d_sources(b0, kappa0, v, n, coupling)  # d[2] needs v[4], d[1] needs v[3]
    v[2] = -d[2] / (2.0 * kappa0)
    v[1] = -d[1] / kappa0
    return v


@dataclass(frozen=True)
class PolyPhaseCorrection:
    """Phase-correction coefficients v_0..v_4 on the scenario span."""

    n: int
    coupling: str
    potential_sign: int
    classical: ClassicalSolution = field(repr=False)
    v_minus: np.ndarray
    v_plus: np.ndarray          # oscillation-averaged values at tau_end
    v_end: np.ndarray           # raw values at tau_end
    route_mismatch: float       # sup-norm gap between ODE and kernel-integral routes
    scattering: ScatteringParams
    _vsol: object = field(repr=False, default=None)
    _coef: object = field(repr=False, default=None)

    def v(self, tau):
        """All five coefficients at tau; shape (5,) or (5, len(tau))."""
        return self._vsol.sol(np.asarray(tau, dtype=float))

    def sigma(self, tau):
        """Regularizer polynomial coefficients sigma_0..sigma_4 at tau (diagnostic)."""
        v = self.v(tau)
        k = self._coef.kappa0(tau)
        a1 = self._coef.a1(tau)
        a2 = self._coef.a2(tau)
        n = self.n
        return np.stack([
            k * (a1 * v[1] + 2.0 * n * v[2] + 2.0 * n * (n - 1) * v[4]),
            2.0 * k * (a2 * v[1] + a1 * v[2] + 1.5 * n * v[3]),
            4.0 * k * (a2 * v[2] + 0.75 * a1 * v[3] + n * v[4]),
            6.0 * k * (a2 * v[3] + (2.0 / 3.0) * a1 * v[4]),
            8.0 * k * a2 * v[4],
        ])

    def chi_plus(self) -> np.ndarray:
        return chi_coeffs(self.v_plus, self.n, self.coupling)

    def u_plus(self) -> np.ndarray:
        return u_from_chi(self.chi_plus(), self.n)

    def norm_identity(self, tau):
        """Re[v_0 + chi_0] along the span; conserved in the conserving variant."""
        v = self.v(np.atleast_1d(np.asarray(tau, dtype=float)))
        chi0 = np.array([chi_coeffs(v[:, i], self.n, self.coupling)[4]
                         for i in range(v.shape[1])])
        return (v[0] + chi0).real


def solve_v(scenario: Scenario, classical: ClassicalSolution, n: int,
            tol: float = 1e-10, coupling: str = COUPLING_CONSERVING,
            potential_sign: int = -1, _coef: _Coefficients | None = None
            ) -> PolyPhaseCorrection:
    """Integrate the phase-correction system and cross-check both routes.

    The direct ODE integration is compared in sup-norm against the
    evolution-kernel integral representation

        v_j(tau) = e^{-i j L(tau)} [ v_j(-) - i * integral e^{+i j L} d_j ],

    with L the accumulated kappa0 phase; disagreement beyond 100*tol times
    the coefficient scale raises InconsistencyError.
    """
    if coupling not in _COUPLINGS:
        raise InvalidParameterError(f"unknown coupling variant {coupling!r}")
    if potential_sign not in (-1, 1):
        raise InvalidParameterError("potential_sign must be +1 or -1")
    coef = _coef if _coef is not None else _Coefficients(scenario, classical)
    t0, t1 = classical.tau_span
    src = float(-potential_sign)  # sources enter for H0 - lam V; flip for +lam V

    def b_at(tau):
        return src * coef.b(tau)

    kappa_start = float(coef.kappa0(t0))
    v0 = _initial_v(b_at(t0), kappa_start, n, coupling)
    cj = np.arange(5, dtype=float)

    def rhs(tau, v):
        k = float(coef.kappa0(tau))
        d = _d_sources(b_at(tau), k, v, n, coupling)
        return -1j * (cj * k * v + d)

    res = solve_ivp(rhs, (t0, t1), v0, method="DOP853", rtol=tol, atol=tol * 1e-2,
                    dense_output=True)
    if not res.success:
        raise IntegrationFailureError(f"phase-correction integration failed: {res.message}")

    # Kernel-integral route: accumulate I_j = integral e^{i j L} d_j with the
    # same sources rebuilt from the kernel-route values themselves.
    def rhs_quad(tau, I):
        k = float(coef.kappa0(tau))
        L = float(coef.lam_phase(tau))
        ph = np.exp(1j * cj * L)
        v_quad = (v0 - 1j * I) / ph
        d = _d_sources(b_at(tau), k, v_quad, n, coupling)
        return ph * d

    res_q = solve_ivp(rhs_quad, (t0, t1), np.zeros(5, dtype=complex), method="DOP853",
                      rtol=tol, atol=tol * 1e-2, dense_output=True)
    if not res_q.success:
        raise IntegrationFailureError(f"kernel-route integration failed: {res_q.message}")

    taus = np.linspace(t0, t1, 1500)
    v_ode = res.sol(taus)
    L = coef.lam_phase(taus)
    v_quad = (v0[:, None] - 1j * res_q.sol(taus)) * np.exp(-1j * np.outer(cj, L))
    scale = max(1.0, float(np.max(np.abs(v_ode))))
    mismatch = float(np.max(np.abs(v_ode - v_quad)))
    if mismatch > 100.0 * tol * scale:
        raise InconsistencyError(
            f"phase-correction routes disagree by {mismatch:.3e} (scale {scale:.3e})")

    params = extract_scattering_params(classical)
    v_plus = _window_average(res.sol, (t0, t1), params.kbar0, j_values=range(5))
    return PolyPhaseCorrection(
        n=n, coupling=coupling, potential_sign=potential_sign, classical=classical,
        v_minus=v0, v_plus=v_plus, v_end=res.sol(t1), route_mismatch=mismatch,
        scattering=params, _vsol=res, _coef=coef)


def _window_average(dense_sol, tau_span, kbar0: float, j_values,
                    n_samples: int = 400) -> np.ndarray:
    """Sliding mean over one rotation period of each channel at tau_end.

    Channel j rotates at frequency j * kbar0 around its adiabatic mean;
    averaging over exactly one period removes the residual oscillation.
    """
    t0, t1 = tau_span
    out = []
    for idx, j in enumerate(j_values):
        period = 2.0 * math.pi / (max(j, 1) * kbar0)
        period = min(period, 0.25 * (t1 - t0))
        taus = np.linspace(t1 - period, t1, n_samples)
        out.append(np.mean(dense_sol(taus)[idx]))
    return np.array(out, dtype=complex)


# ----------------------------------------------------------------------
# amplitude corrections
# ----------------------------------------------------------------------

def _ladder_factor(n: int, j: int) -> float:
    """sqrt(n! / (n-j)!) for n >= j, else 0."""
    if n - j < 0:
        return 0.0
    return math.sqrt(math.factorial(n) / math.factorial(n - j))


def amplitude_sources(v: np.ndarray, kappa: float, n: int, coupling: str) -> np.ndarray:
    """Co-rotating sources E_1..E_4 of the amplitude system (zero when n-j < 0)."""
    e = np.zeros(4, dtype=complex)
    if n >= 1:
        e[0] = kappa * _ladder_factor(n, 1) / math.sqrt(2.0) * (2.0 * v[1] + 3.0 * (n - 1) * v[3])
    if n >= 2:
        v2_weight = 2.0 if coupling == COUPLING_CONSERVING else 1.0
        e[1] = kappa * _ladder_factor(n, 2) * (v2_weight * v[2] + 2.0 * (2 * n - 3) * v[4])
    if n >= 3:
        e[2] = 3.0 * kappa * _ladder_factor(n, 3) / math.sqrt(2.0) * v[3]
    if n >= 4:
        e[3] = 2.0 * kappa * _ladder_factor(n, 4) * v[4]
    return e


@dataclass(frozen=True)
class AmplitudeCorrection:
    """Ladder amplitudes of the first-order wave-function correction.

    ``w`` holds the co-rotating amplitudes W_j; the ladder coefficients that
    multiply f0(n - j) are wbar_j = W_j * exp(-i j L(tau)).
    """

    n: int
    coupling: str
    potential_sign: int
    w_minus: np.ndarray
    w_plus: np.ndarray
    w_end: np.ndarray
    _wsol: object = field(repr=False, default=None)
    _coef: object = field(repr=False, default=None)
    _vcorr: PolyPhaseCorrection = field(repr=False, default=None)

    def w(self, tau):
        return self._wsol.sol(np.asarray(tau, dtype=float))

    def w_bar(self, tau):
        """Ladder coefficients multiplying f0(n - j): absolute-phase rotated."""
        L = self._coef.lam_phase(tau) + self._coef.lam_phase_offset
        j = np.arange(1, 5)
        return self.w(tau) * np.exp(-1j * np.multiply.outer(j, L))

    def e_bar(self, tau: float) -> np.ndarray:
        v = self._vcorr.v(tau)
        k = float(self._coef.kappa0(tau))
        e = amplitude_sources(v, k, self.n, self.coupling)
        L = float(self._coef.lam_phase(tau)) + self._coef.lam_phase_offset
        return e * np.exp(-1j * np.arange(1, 5) * L)


def solve_w(scenario: Scenario, classical: ClassicalSolution,
            vcorr: PolyPhaseCorrection, tol: float = 1e-10) -> AmplitudeCorrection:
    """Integrate the amplitude system on top of a solved phase correction.

    For n = 0 every source vanishes identically and the correction is zero;
    the integration is skipped.
    """
    n = vcorr.n
    coef = vcorr._coef
    coupling = vcorr.coupling
    t0, t1 = classical.tau_span
    jj = np.arange(1, 5, dtype=float)

    if n == 0:
        zeros = np.zeros(4, dtype=complex)

        class _Zero:
            def sol(self, tau):
                tau = np.asarray(tau, dtype=float)
                return np.zeros((4,) + tau.shape, dtype=complex)

        return AmplitudeCorrection(n=n, coupling=coupling,
                                   potential_sign=vcorr.potential_sign,
                                   w_minus=zeros, w_plus=zeros, w_end=zeros,
                                   _wsol=_Zero(), _coef=coef, _vcorr=vcorr)

    k0 = float(coef.kappa0(t0))
    e0 = amplitude_sources(vcorr.v_minus, k0, n, coupling)
    w0 = np.zeros(4, dtype=complex)
    nz = jj > 0
    w0[nz] = e0[nz] / (jj[nz] * k0)

    def rhs(tau, w):
        k = float(coef.kappa0(tau))
        v = vcorr.v(tau)
        e = amplitude_sources(v, k, n, coupling)
        return 1j * jj * k * w - 1j * e

    res = solve_ivp(rhs, (t0, t1), w0, method="DOP853", rtol=tol, atol=tol * 1e-2,
                    dense_output=True)
    if not res.success:
        raise IntegrationFailureError(f"amplitude integration failed: {res.message}")

    w_plus = _window_average(res.sol, (t0, t1), vcorr.scattering.kbar0,
                             j_values=range(1, 5))
    return AmplitudeCorrection(n=n, coupling=coupling, potential_sign=vcorr.potential_sign,
                               w_minus=w0, w_plus=w_plus, w_end=res.sol(t1),
                               _wsol=res, _coef=coef, _vcorr=vcorr)


# ----------------------------------------------------------------------
# ladder expansion coefficients of the phase polynomial
# ----------------------------------------------------------------------

def chi_coeffs(v: np.ndarray, n: int, coupling: str = COUPLING_CONSERVING) -> np.ndarray:
    """Hermite-ladder components chi_p (p = -4..4) of sum_k v_k y^k acting on level n.

    Index p counts how many levels the term lowers; negative p raises.
    Returned array is indexed chi[p + 4].
    """
    chi = np.zeros(9, dtype=complex)
    chi[-4 + 4] = v[4] / 16.0
    chi[-3 + 4] = v[3] / 8.0
    chi[-2 + 4] = 0.5 * (n + 1.5) * v[4] + 0.25 * v[2]
    chi[-1 + 4] = 0.75 * (n + 1) * v[3] + 0.5 * v[1]
    chi[0 + 4] = 1.5 * (n * n + n + 0.5) * v[4] + (n + 0.5) * v[2]
    if n >= 1:
        chi[1 + 4] = 1.5 * n * n * v[3] + n * v[1]
    if n >= 2:
        if coupling == COUPLING_CONSERVING:
            quartic = n * (n - 1) * (2 * n - 1)
        else:
            quartic = 3 * n * (n - 1) ** 2
        chi[2 + 4] = quartic * v[4] + n * (n - 1) * v[2]
    if n >= 3:
        chi[3 + 4] = n * (n - 1) * (n - 2) * v[3]
    if n >= 4:
        chi[4 + 4] = n * (n - 1) * (n - 2) * (n - 3) * v[4]
    return chi


def u_from_chi(chi: np.ndarray, n: int) -> np.ndarray:
    """u_p = sqrt((n-p)! / (2^p n!)) chi_p, zero when n - p < 0."""
    u = np.zeros(9, dtype=complex)
    for idx, p in enumerate(P_RANGE):
        if n - p < 0:
            continue
        u[idx] = math.sqrt(math.factorial(n - p) / (2.0 ** p * math.factorial(n))) * chi[idx]
    return u


def chi_u_coeffs(v: np.ndarray, n: int, coupling: str = COUPLING_CONSERVING):
    """Both ladder-coefficient sets for a given v_0..v_4."""
    chi = chi_coeffs(v, n, coupling)
    return chi, u_from_chi(chi, n)


# ----------------------------------------------------------------------
# final-state (out-channel) coefficients
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class FinalStateCoeffs:
    """Stationary first-order coefficients of the out-channel state."""

    m: int
    omega_out: float
    coupling: str
    potential_sign: int
    v_f: np.ndarray   # five phase coefficients, v_f[0] = 0 by phase convention
    w_f: np.ndarray   # four ladder amplitudes
    u_f: np.ndarray   # nine ladder coefficients of the phase polynomial
    chi_f: np.ndarray


def final_state_coeffs(scenario_or_none, omega_out: float | None = None,
                       m: int = 0, coupling: str = COUPLING_CONSERVING,
                       potential_sign: int = -1,
                       alpha_plus: float | None = None,
                       beta_plus: float | None = None,
                       flat_tol: float = 1e-6) -> FinalStateCoeffs:
    """Coefficients of the stationary out-channel problem at frequency omega_out.

    Either pass a Scenario (asymptotes are read off and checked flat at the
    trailing end) or pass alpha_plus / beta_plus / omega_out directly.
    """
    if scenario_or_none is not None:
        sc = scenario_or_none
        omega_out = sc.omega_out if omega_out is None else omega_out
        t1 = sc.tau_span[1]
        window = 2.0 * math.pi / omega_out
        for prof, name in ((sc.alpha, "alpha"), (sc.beta, "beta")):
            taus = np.linspace(t1 - window, t1, 64)
            dev = float(np.max(np.abs(prof(taus) - prof.value_plus)))
            if dev > flat_tol:
                raise NotAsymptoticError(
                    f"{name} deviates by {dev:.3e} from its limit near tau_end")
        alpha_plus = sc.alpha.value_plus
        beta_plus = sc.beta.value_plus
    if omega_out is None or alpha_plus is None or beta_plus is None:
        raise InvalidParameterError("need omega_out, alpha_plus and beta_plus")
    if coupling not in _COUPLINGS:
        raise InvalidParameterError(f"unknown coupling variant {coupling!r}")

    src = float(-potential_sign)
    b = src * b_coeffs(alpha_plus, beta_plus, eta=0.0, zeta_mod=1.0, omega_in=omega_out)
    v = _initial_v(b, omega_out, m, coupling)   # stationary values, v[0] = 0
    e = amplitude_sources(v, omega_out, m, coupling)
    jj = np.arange(1, 5, dtype=float)
    w_sign = 1.0 if coupling == COUPLING_CONSERVING else -1.0
    w = w_sign * e / (jj * omega_out)
    chi, u = chi_u_coeffs(v, m, coupling)
    return FinalStateCoeffs(m=m, omega_out=float(omega_out), coupling=coupling,
                            potential_sign=potential_sign, v_f=v, w_f=w, u_f=u,
                            chi_f=chi)


# ----------------------------------------------------------------------
# assembled states
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class FirstOrderCorrections:
    """Bundle of everything first order for one (scenario, n)."""

    scenario: Scenario
    classical: ClassicalSolution
    vcorr: PolyPhaseCorrection
    wcorr: AmplitudeCorrection

    @property
    def n(self) -> int:
        return self.vcorr.n

    @property
    def scattering(self) -> ScatteringParams:
        return self.vcorr.scattering

    def dump_coefficients(self, path, n_samples: int = 1500) -> None:
        """Columnar dump: tau, Re/Im v_0..v_4, Re/Im w_1..w_4 (co-rotating)."""
        taus = np.linspace(*self.classical.tau_span, n_samples)
        v = self.vcorr.v(taus)
        w = self.wcorr.w(taus)
        cols = [taus]
        for j in range(5):
            cols += [v[j].real, v[j].imag]
        for j in range(4):
            cols += [w[j].real, w[j].imag]
        header = ("tau " + " ".join(f"re_v{j} im_v{j}" for j in range(5)) + " "
                  + " ".join(f"re_w{j} im_w{j}" for j in range(1, 5)))
        np.savetxt(path, np.column_stack(cols), header=header, fmt="%.17g")


def solve_first_order(scenario: Scenario, classical: ClassicalSolution, n: int,
                      tol: float = 1e-10, coupling: str = COUPLING_CONSERVING,
                      potential_sign: int = -1) -> FirstOrderCorrections:
    vcorr = solve_v(scenario, classical, n, tol=tol, coupling=coupling,
                    potential_sign=potential_sign)
    wcorr = solve_w(scenario, classical, vcorr, tol=tol)
    return FirstOrderCorrections(scenario=scenario, classical=classical,
                                 vcorr=vcorr, wcorr=wcorr)


def assemble_wavefunction(corr: FirstOrderCorrections, x, tau: float, lam: float,
                          form: str = "exponential"):
    """First-order state on a grid at time tau.

    "exponential" keeps the phase factor unexpanded:
        [f0(n) + lam * sum_j wbar_j f0(n-j)] * exp(-lam * sum_k v_k y^k)
    "expanded" linearizes the exponential (same content through first order).
    """
    from .basis import eval_f0, zero_order_state

    n = corr.n
    cl = corr.classical
    v = corr.vcorr.v(tau)
    wbar = corr.wcorr.w_bar(tau)
    state_n = zero_order_state(cl, n)
    f0_n = eval_f0(state_n, x, tau)
    f1 = np.zeros_like(f0_n)
    for j in range(1, 5):
        if n - j >= 0 and wbar[j - 1] != 0.0:
            f1 = f1 + wbar[j - 1] * eval_f0(zero_order_state(cl, n - j), x, tau)
    y = state_n.y(x, tau)
    poly = v[0] + y * (v[1] + y * (v[2] + y * (v[3] + y * v[4])))
    if form == "exponential":
        return (f0_n + lam * f1) * np.exp(-lam * poly)
    if form == "expanded":
        return f0_n + lam * (f1 - poly * f0_n)
    raise InvalidParameterError(f"unknown form {form!r}")


def assemble_out_state(coeffs: FinalStateCoeffs, x, tau: float, lam: float):
    """First-order out-channel state (expanded form) at time tau.

    All terms share the common phase exp(-i (m + 1/2) omega_out tau); the
    ladder pieces use the stationary coefficients.
    """
    from .basis import phi_out

    m = coeffs.m
    w_out = coeffs.omega_out
    base = phi_out(m, w_out, x).astype(complex)
    corr = np.zeros_like(base)
    for j in range(1, 5):
        if m - j >= 0 and coeffs.w_f[j - 1] != 0.0:
            corr = corr + coeffs.w_f[j - 1] * phi_out(m - j, w_out, x)
    for idx, p in enumerate(P_RANGE):
        if m - p >= 0 and coeffs.u_f[idx] != 0.0:
            corr = corr - coeffs.u_f[idx] * phi_out(m - p, w_out, x)
    return (base + lam * corr) * np.exp(-1j * (m + 0.5) * w_out * tau)
