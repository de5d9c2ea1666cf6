"""Exact oscillator wave functions and inner products.

The time-dependent basis is built on the classical mode zeta(tau):

    f0(n; x, tau) = K(n; tau) exp(a1 y + a2 y^2) H_n(y),
    y = sqrt(Omega_in) (x - eta) / |zeta|,
    a1 = i eta' |zeta| / sqrt(Omega_in),
    a2 = (i |zeta| d|zeta|/dtau / Omega_in - 1) / 2,

with K carrying the 1/sqrt(2^n n! |zeta|) normalization and the accumulated
action / level phases.  Re a2 = -1/2 identically, which keeps every f0
square integrable and exactly unit-norm for all tau.  Phases are referenced
so that in the flat in-region f0(n; x, tau) = phi(n; Omega_in; x) times
exp(-i (n + 1/2) Omega_in tau) with absolute tau.

Out-states are ordinary stationary oscillator states at the final frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classical import ClassicalSolution
from .errors import CapacityError, TruncatedSupportError

DEFAULT_N_MAX = 64

_SQRT_PI = math.sqrt(math.pi)


def hermite_phys(n: int, y, n_max: int = DEFAULT_N_MAX):
    """Physicists' Hermite polynomial H_n(y) by the three-term recurrence.

    H_{k+1} = 2 y H_k - 2 k H_{k-1}.  Vectorized over y.
    """
    if n < 0 or int(n) != n:
        raise CapacityError(f"n must be a non-negative integer, got {n}")
    if n > n_max:
        raise CapacityError(f"n={n} exceeds capacity n_max={n_max}")
    y = np.asarray(y)
    h_prev = np.ones_like(y, dtype=float)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = 2.0 * y
    for k in range(1, n):
        h, h_prev = 2.0 * y * h - 2.0 * k * h_prev, h
    return h if np.ndim(h) else float(h)


def phi_out(m: int, omega: float, x):
    """Stationary oscillator eigenfunction at frequency omega (real)."""
    norm = (math.sqrt(omega / math.pi) / (2.0 ** m * math.factorial(m))) ** 0.5
    xi = math.sqrt(omega) * np.asarray(x)
    return norm * np.exp(-0.5 * xi * xi) * hermite_phys(m, xi, n_max=max(DEFAULT_N_MAX, m))


@dataclass(frozen=True)
class OutState:
    """Asymptotic final-channel state phi(m) exp(-i (m + 1/2) omega tau)."""

    m: int
    omega_out: float

    def spatial(self, x):
        return phi_out(self.m, self.omega_out, x)

    def __call__(self, x, tau: float):
        return self.spatial(x) * np.exp(-1j * (self.m + 0.5) * self.omega_out * tau)


@dataclass(frozen=True)
class ZeroOrderState:
    """Exact oscillator solution of quantum number n on a classical solution."""

    n: int
    classical: ClassicalSolution

    @property
    def omega_in(self) -> float:
        return self.classical.omega_in

    def y(self, x, tau: float):
        sol = self.classical
        return math.sqrt(self.omega_in) * (np.asarray(x) - sol.eta(tau)) / sol.mod_zeta(tau)

    def a1(self, tau: float) -> complex:
        sol = self.classical
        return 1j * sol.eta_dot(tau) * sol.mod_zeta(tau) / math.sqrt(self.omega_in)

    def a2(self, tau: float) -> complex:
        sol = self.classical
        return 0.5 * (1j * sol.mod_zeta(tau) * sol.dmod_zeta(tau) / self.omega_in - 1.0)

    def level_phase(self, tau: float) -> float:
        """Accumulated level phase: (n + 1/2) * (absolute kappa0 integral)."""
        sol = self.classical
        t0 = sol.tau_span[0]
        return (self.n + 0.5) * (self.omega_in * t0 + sol.lambda_phase(tau))

    def K(self, tau: float) -> complex:
        sol = self.classical
        mod = sol.mod_zeta(tau)
        amp = (math.sqrt(self.omega_in / math.pi)
               / (2.0 ** self.n * math.factorial(self.n) * mod)) ** 0.5
        return amp * np.exp(1j * (sol.action_phase(tau) - self.level_phase(tau)))

    def __call__(self, x, tau: float):
        return eval_f0(self, x, tau)


def zero_order_state(classical: ClassicalSolution, n: int) -> ZeroOrderState:
    if n < 0 or int(n) != n:
        raise CapacityError(f"quantum number must be a non-negative integer, got {n}")
    return ZeroOrderState(n=int(n), classical=classical)


def eval_f0(state: ZeroOrderState, x, tau: float):
    """Evaluate the exact basis state at (x, tau); tau must lie in the span."""
    y = state.y(x, tau)
    envelope = np.exp(state.a1(tau) * y + state.a2(tau) * y * y)
    return state.K(tau) * envelope * hermite_phys(state.n, y,
                                                  n_max=max(DEFAULT_N_MAX, state.n))


def spatial_grid(classical: ClassicalSolution, n: int, n_points: int = 2048,
                 sigma_factor: float = 8.0, n_tau_samples: int = 200) -> np.ndarray:
    """Uniform grid covering the moving, breathing packet with negligible tails.

    Half-width: max over tau of |eta| + sigma_factor * |zeta| sqrt(2n+1) / sqrt(Omega_in).
    """
    taus = np.linspace(*classical.tau_span, n_tau_samples)
    mod = np.abs(classical.zeta(taus))
    eta = classical.eta(taus) if classical.has_response else np.zeros_like(taus)
    half = float(np.max(np.abs(eta) + sigma_factor * mod
                        * math.sqrt(2 * n + 1) / math.sqrt(classical.omega_in)))
    return np.linspace(-half, half, n_points)


def overlap(bra, ket, x, tail_tol: float = 1e-10, with_error: bool = False):
    """Inner product integral of conj(bra) * ket over a shared uniform grid.

    Both arrays must decay to negligible tails at the grid edges; otherwise a
    TruncatedSupportError is raised.  The error estimate compares the
    trapezoid result against a Simpson evaluation.
    """
    bra = np.asarray(bra)
    ket = np.asarray(ket)
    x = np.asarray(x)
    dx = x[1] - x[0]
    edge = max(2, len(x) // 100)
    for arr in (bra, ket):
        tail = (np.sum(np.abs(arr[:edge]) ** 2) + np.sum(np.abs(arr[-edge:]) ** 2)) * dx
        if tail > tail_tol:
            raise TruncatedSupportError(
                f"tail mass {tail:.3e} at grid edges exceeds {tail_tol:.1e}")
    integrand = np.conjugate(bra) * ket
    value = np.trapezoid(integrand, dx=dx)
    if not with_error:
        return complex(value)
    from scipy.integrate import simpson
    err = abs(complex(simpson(integrand, dx=dx)) - complex(value))
    return complex(value), float(err)


def norm_l2(psi, x) -> float:
    """sqrt of the probability integral on the grid."""
    psi = np.asarray(psi)
    return float(np.sqrt(np.trapezoid(np.abs(psi) ** 2, x=np.asarray(x)).real))


def dump_wavefunction(path, x, psi) -> None:
    """Columnar text dump: x, Re psi, Im psi."""
    psi = np.asarray(psi, dtype=complex)
    np.savetxt(path, np.column_stack([x, psi.real, psi.imag]),
               header="x re_psi im_psi", fmt="%.17g")
