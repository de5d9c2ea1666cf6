"""Classical auxiliary problems behind the oscillator basis.

Two linear problems on the scenario span:

    mode:     zeta'' + Omega^2(tau) zeta = 0,   zeta(tau_start) = exp(i Omega_in tau_start),
                                                zeta'(tau_start) = i Omega_in exp(i Omega_in tau_start)
    response: eta''  + Omega^2(tau) eta  = F(tau),   eta = eta' = 0 at tau_start

The mode normalization fixes the conserved bilinear Im(zeta* zeta') = Omega_in,
which in the flat out-region forces

    zeta -> c1 exp(i Omega_out tau) - c2 exp(-i Omega_out tau),
    Omega_out (|c1|^2 - |c2|^2) = Omega_in.

The driven response is also accumulated through the complex drive amplitude

    d(tau) = (i / sqrt(2 Omega_in)) * integral_{tau_start}^{tau} zeta F dtau',

from which eta can be reconstructed as eta = (zeta d* + zeta* d) / sqrt(2 Omega_in);
the ODE and reconstruction routes are cross-checked.  |d|^2 at the end of the
span is the mean number of quanta pumped in by the force (Poisson mean for a
ground-state start at constant frequency).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (IntegrationFailureError, InconsistencyError,
                     InvalidParameterError, NotAsymptoticError, RangeError)
from .profiles import ScalarProfile


@dataclass(frozen=True)
class ClassicalSolution:
    """Dense solution of the mode / response problems on one span.

    All evaluators interpolate the integrator's dense output; interpolation
    error is bounded by the integrator tolerance.  Instances are immutable
    and safe to share between threads.
    """

    omega: ScalarProfile
    tau_span: tuple[float, float]
    tol: float
    tau_grid: np.ndarray
    _zeta_sol: object = field(repr=False)
    _eta_sol: object | None = field(repr=False, default=None)
    force: ScalarProfile | None = None

    # -- mode quantities -------------------------------------------------
    @property
    def omega_in(self) -> float:
        return self.omega.value_minus

    @property
    def omega_out(self) -> float:
        return self.omega.value_plus

    def _check_tau(self, tau):
        t0, t1 = self.tau_span
        t = np.asarray(tau, dtype=float)
        if np.any(t < t0 - 1e-12) or np.any(t > t1 + 1e-12):
            raise RangeError(f"tau outside solved span {self.tau_span}")

    def zeta(self, tau):
        self._check_tau(tau)
        return self._zeta_sol.sol(tau)[0]

    def zeta_dot(self, tau):
        self._check_tau(tau)
        return self._zeta_sol.sol(tau)[1]

    def lambda_phase(self, tau):
        """integral of kappa0 from tau_start to tau (kappa0 = Omega_in/|zeta|^2)."""
        self._check_tau(tau)
        return self._zeta_sol.sol(tau)[2].real

    def lambda_phase_abs(self, tau):
        """Absolute-time level phase: Omega_in * tau_start + the kappa0 integral.

        In the flat in-region this equals Omega_in * tau, matching the
        absolute phase convention of the basis states.
        """
        return self.omega_in * self.tau_span[0] + self.lambda_phase(tau)

    def kappa0(self, tau):
        """Local level-spacing Omega_in / |zeta(tau)|^2; strictly positive."""
        z = self.zeta(tau)
        return self.omega_in / np.abs(z) ** 2

    def mod_zeta(self, tau):
        return np.abs(self.zeta(tau))

    def dmod_zeta(self, tau):
        """d|zeta|/dtau, the signed derivative of the modulus."""
        z = self.zeta(tau)
        zd = self.zeta_dot(tau)
        return (z.conjugate() * zd).real / np.abs(z)

    def wronskian(self, tau):
        z = self.zeta(tau)
        zd = self.zeta_dot(tau)
        return (z.conjugate() * zd).imag

    # -- response quantities ----------------------------------------------
    @property
    def has_response(self) -> bool:
        return self._eta_sol is not None

    def _eta_state(self, tau):
        if self._eta_sol is None:
            z = np.zeros_like(np.asarray(tau, dtype=float), dtype=complex)
            return z, z, z, z
        self._check_tau(tau)
        y = self._eta_sol.sol(tau)
        return y[0], y[1], y[2], y[3]

    def eta(self, tau):
        return self._eta_state(tau)[0].real

    def eta_dot(self, tau):
        return self._eta_state(tau)[1].real

    def drive(self, tau):
        """Complex drive amplitude d(tau)."""
        return self._eta_state(tau)[2]

    def action_phase(self, tau):
        """integral of the classical Lagrangian along the response trajectory."""
        return self._eta_state(tau)[3].real

    def eta_reconstructed(self, tau):
        """Response rebuilt from the mode and drive amplitude (redundant route)."""
        z = self.zeta(tau)
        d = self.drive(tau)
        return (z * d.conjugate() + z.conjugate() * d).real / math.sqrt(2.0 * self.omega_in)

    def nu(self) -> float:
        """|d|^2 at the end of the span: quanta pumped in by the force."""
        return float(np.abs(self.drive(self.tau_span[1])) ** 2)

    def dump_trajectory(self, path, n_samples: int = 2000) -> None:
        """Columnar text dump: tau, Re/Im zeta, Re/Im zeta', eta, eta', Re/Im d."""
        taus = np.linspace(*self.tau_span, n_samples)
        z = self.zeta(taus)
        zd = self.zeta_dot(taus)
        e, ed, d, _ = self._eta_state(taus)
        cols = np.column_stack([taus, z.real, z.imag, zd.real, zd.imag,
                                e.real, ed.real, d.real, d.imag])
        header = "tau re_zeta im_zeta re_zeta_dot im_zeta_dot eta eta_dot re_d im_d"
        np.savetxt(path, cols, header=header, fmt="%.17g")


def solve_zeta(omega: ScalarProfile, tau_span: tuple[float, float],
               tol: float = 1e-10) -> ClassicalSolution:
    """Integrate the homogeneous mode equation with oscillatory initial data.

    Raises IntegrationFailureError if the integrator fails or the conserved
    bilinear Im(zeta* zeta') drifts by more than 100*tol over the span.
    """
    if tol <= 0.0:
        raise InvalidParameterError("tol must be positive")
    t0, t1 = tau_span
    w_in = omega.value_minus
    if w_in <= 0.0:
        raise InvalidParameterError("omega must be positive on the span")

    def rhs(tau, y):
        z, zd, _ = y
        w = omega(tau)
        return [zd, -(w * w) * z, w_in / (z.real ** 2 + z.imag ** 2)]

    y0 = np.array([np.exp(1j * w_in * t0), 1j * w_in * np.exp(1j * w_in * t0), 0.0 + 0.0j])
    res = solve_ivp(rhs, (t0, t1), y0, method="DOP853", rtol=tol, atol=tol * 1e-2,
                    dense_output=True)
    if not res.success:
        raise IntegrationFailureError(f"mode integration failed: {res.message}")

    sol = ClassicalSolution(omega=omega, tau_span=(t0, t1), tol=tol,
                            tau_grid=res.t, _zeta_sol=res)
    drift = np.max(np.abs(sol.wronskian(res.t) - w_in))
    if drift > 100.0 * tol:
        raise IntegrationFailureError(
            f"Wronskian drift {drift:.3e} exceeds {100 * tol:.3e}; "
            "tighten tol or shorten the span")
    return sol


def solve_eta(omega: ScalarProfile, force: ScalarProfile, zeta: ClassicalSolution,
              tol: float = 1e-10) -> ClassicalSolution:
    """Integrate the driven response plus drive amplitude and action phase.

    The response is computed twice: directly from its ODE and reconstructed
    from the drive amplitude; disagreement beyond 100*tol in sup-norm raises
    InconsistencyError (an integrator misconfiguration signal).
    """
    t0, t1 = zeta.tau_span
    w_in = zeta.omega_in
    pref = 1j / math.sqrt(2.0 * w_in)

    def rhs(tau, y):
        eta, eta_dot = y[0], y[1]
        w = omega(tau)
        f = force(tau)
        z = zeta.zeta(tau)
        lagrangian = 0.5 * eta_dot ** 2 - 0.5 * (w * w) * eta ** 2 + f * eta
        lagrangian = lagrangian.real
        return [eta_dot, f - (w * w) * eta, pref * z * f, lagrangian]

    y0 = np.zeros(4, dtype=complex)
    res = solve_ivp(rhs, (t0, t1), y0, method="DOP853", rtol=tol, atol=tol * 1e-2,
                    dense_output=True)
    if not res.success:
        raise IntegrationFailureError(f"response integration failed: {res.message}")

    sol = ClassicalSolution(omega=omega, tau_span=(t0, t1), tol=tol,
                            tau_grid=zeta.tau_grid, _zeta_sol=zeta._zeta_sol,
                            _eta_sol=res, force=force)

    taus = np.linspace(t0, t1, 800)
    direct = sol.eta(taus)
    rebuilt = sol.eta_reconstructed(taus)
    scale = max(1.0, float(np.max(np.abs(direct))))
    mismatch = float(np.max(np.abs(direct - rebuilt)))
    if mismatch > 100.0 * tol * scale:
        raise InconsistencyError(
            f"response ODE and drive-amplitude routes disagree by {mismatch:.3e}")
    return sol


@dataclass(frozen=True)
class ScatteringParams:
    """Asymptotic constants of the classical mode and response."""

    c1: complex
    c2: complex
    rho: float
    delta1: float
    delta2: float
    nu: float
    beta_phase: float
    theta: float
    kbar0: float
    fit_residual: float
    # Both normalization diagnostics: the conserved bilinear fixes
    # |c1|^2 - |c2|^2 = omega_in / omega_out, not 1.
    c_norm_difference: float
    wronskian_of_fit: float


def extract_scattering_params(sol: ClassicalSolution, window: float | None = None,
                              n_samples: int = 600) -> ScatteringParams:
    """Project the out-region mode onto the two asymptotic exponentials.

    Least-squares fit of zeta(tau) ~ c1 e^{i w_out tau} - c2 e^{-i w_out tau}
    over the trailing window (default: 3 out-periods).  The relative fit
    residual must be <= 1e-6, otherwise the profile is not yet flat there.
    """
    w_out = sol.omega_out
    t0, t1 = sol.tau_span
    if window is None:
        window = 3.0 * 2.0 * math.pi / w_out
    if window <= 0.0 or window > (t1 - t0):
        raise InvalidParameterError("bad trailing window")

    taus = np.linspace(t1 - window, t1, n_samples)
    z = sol.zeta(taus)
    basis = np.column_stack([np.exp(1j * w_out * taus), -np.exp(-1j * w_out * taus)])
    coef, *_ = np.linalg.lstsq(basis, z, rcond=None)
    c1, c2 = complex(coef[0]), complex(coef[1])
    resid = float(np.linalg.norm(basis @ coef - z) / np.linalg.norm(z))
    if resid > 1e-6:
        raise NotAsymptoticError(
            f"trailing-window fit residual {resid:.3e} > 1e-6; "
            "frequency profile not asymptotically flat")

    rho = abs(c2) ** 2 / abs(c1) ** 2
    d_end = sol.drive(t1) if sol.has_response else 0.0 + 0.0j
    nu = abs(d_end) ** 2
    beta_phase = math.atan2(d_end.imag, d_end.real) if nu > 0.0 else 0.0
    delta1 = math.atan2(c1.imag, c1.real)
    delta2 = math.atan2(c2.imag, c2.real) if abs(c2) > 0.0 else 0.0
    theta = 0.5 * (delta1 + delta2) - beta_phase
    kbar0 = sol.omega_in / (abs(c1) ** 2 + abs(c2) ** 2)
    return ScatteringParams(
        c1=c1, c2=c2, rho=rho, delta1=delta1, delta2=delta2, nu=nu,
        beta_phase=beta_phase, theta=theta, kbar0=kbar0, fit_residual=resid,
        c_norm_difference=abs(c1) ** 2 - abs(c2) ** 2,
        wronskian_of_fit=w_out * (abs(c1) ** 2 - abs(c2) ** 2),
    )


def kappa0(sol: ClassicalSolution, tau):
    """Module-level alias for the local level spacing."""
    return sol.kappa0(tau)
