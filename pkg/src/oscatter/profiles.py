"""Time-dependent scenario inputs.

A scenario is built from smooth real profiles of dimensionless time tau:
the oscillator frequency Omega(tau) (positive, with constant limits
Omega_in / Omega_out), an external force F(tau) vanishing at both ends,
and the cubic / quartic anharmonicity coefficients alpha(tau), beta(tau).
Profiles declare their infinite-time limits explicitly so that downstream
code can validate flatness before reading asymptotic values.

All profiles are immutable and evaluate as pure functions; repeated
evaluation at the same tau is bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import InvalidParameterError, InvalidSpanError

PROFILE_KINDS = ("constant", "tanh-switch", "gaussian-pulse", "adiabatic-switch", "tabulated")


@dataclass(frozen=True)
class ScalarProfile:
    """Smooth real function of tau with declared limits at tau -> -/+ infinity.

    ``parameters`` is kind-specific:

    - constant:          value
    - tanh-switch:       omega_in, omega_out, ramp_time, center
                         (Omega^2 interpolates between the squared limits)
    - gaussian-pulse:    amplitude, center, width
    - adiabatic-switch:  value_plus, ramp_time, center
                         (monotone 0 -> value_plus, |d/dtau| <= |value_plus|/(2 ramp_time))
    - tabulated:         handled via the ``table`` field, cubic interpolation
                         inside the table span, declared limits outside
    """

    kind: str
    parameters: dict
    value_minus: float
    value_plus: float
    table: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise InvalidParameterError(f"unknown profile kind {self.kind!r}")

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        p = self.parameters
        if self.kind == "constant":
            out = np.full_like(tau, p["value"])
        elif self.kind == "tanh-switch":
            w2_in = p["omega_in"] ** 2
            w2_out = p["omega_out"] ** 2
            s = 0.5 * (1.0 + np.tanh((tau - p["center"]) / p["ramp_time"]))
            out = np.sqrt(w2_in + (w2_out - w2_in) * s)
        elif self.kind == "gaussian-pulse":
            z = (tau - p["center"]) / p["width"]
            out = p["amplitude"] * np.exp(-0.5 * z * z)
        elif self.kind == "adiabatic-switch":
            s = 0.5 * (1.0 + np.tanh((tau - p["center"]) / p["ramp_time"]))
            out = p["value_plus"] * s
        else:  # tabulated
            grid, values = self.table
            out = np.interp(tau, grid, values, left=self.value_minus, right=self.value_plus)
        return out if out.ndim else float(out)

    def derivative(self, tau, h: float = 1e-6):
        """Central finite difference; profiles are smooth so this is adequate."""
        return (self(np.asarray(tau) + h) - self(np.asarray(tau) - h)) / (2.0 * h)

    def shifted(self, a: float) -> "ScalarProfile":
        """Profile translated in time: returns q with q(tau) = p(tau - a)."""
        if self.kind == "constant":
            return self
        if self.kind == "tabulated":
            grid, values = self.table
            return ScalarProfile(self.kind, self.parameters, self.value_minus,
                                 self.value_plus, (tuple(g + a for g in grid), values))
        p = dict(self.parameters)
        p["center"] = p.get("center", 0.0) + a
        return ScalarProfile(self.kind, p, self.value_minus, self.value_plus)


def make_constant(value: float) -> ScalarProfile:
    if not math.isfinite(value):
        raise InvalidParameterError("constant profile value must be finite")
    return ScalarProfile("constant", {"value": float(value)}, float(value), float(value))


def make_tanh_frequency(omega_in: float, omega_out: float, ramp_time: float,
                        center: float = 0.0) -> ScalarProfile:
    """Smooth frequency switch: Omega^2 ramps between the squared limits.

    Omega^2(tau) = Omega_in^2 + (Omega_out^2 - Omega_in^2) * (1 + tanh((tau-center)/ramp_time)) / 2
    """
    for name, val in (("omega_in", omega_in), ("omega_out", omega_out), ("ramp_time", ramp_time)):
        if not (math.isfinite(val) and val > 0.0):
            raise InvalidParameterError(f"{name} must be positive and finite, got {val}")
    if omega_in == omega_out:
        return make_constant(omega_in)
    return ScalarProfile(
        "tanh-switch",
        {"omega_in": float(omega_in), "omega_out": float(omega_out),
         "ramp_time": float(ramp_time), "center": float(center)},
        float(omega_in), float(omega_out),
    )


def make_gaussian_pulse(amplitude: float, center: float, width: float) -> ScalarProfile:
    if not (math.isfinite(width) and width > 0.0):
        raise InvalidParameterError(f"width must be positive, got {width}")
    if not math.isfinite(amplitude):
        raise InvalidParameterError("amplitude must be finite")
    return ScalarProfile(
        "gaussian-pulse",
        {"amplitude": float(amplitude), "center": float(center), "width": float(width)},
        0.0, 0.0,
    )


def make_adiabatic_switch(value_plus: float, ramp_time: float,
                          center: float = 0.0) -> ScalarProfile:
    """Monotone switch 0 -> value_plus with bounded slope.

    The slope satisfies |d/dtau| <= |value_plus| / (2 ramp_time) everywhere,
    with the maximum attained at the center.  Whether ramp_time is actually
    slow on the oscillator timescale is the caller's responsibility; see
    ``Scenario.adiabaticity_ratio``.
    """
    if not (math.isfinite(ramp_time) and ramp_time > 0.0):
        raise InvalidParameterError(f"ramp_time must be positive, got {ramp_time}")
    if value_plus == 0.0:
        return make_constant(0.0)
    return ScalarProfile(
        "adiabatic-switch",
        {"value_plus": float(value_plus), "ramp_time": float(ramp_time), "center": float(center)},
        0.0, float(value_plus),
    )


def make_tabulated(tau_grid: Iterable[float], values: Iterable[float],
                   value_minus: float, value_plus: float) -> ScalarProfile:
    grid = tuple(float(t) for t in tau_grid)
    vals = tuple(float(v) for v in values)
    if len(grid) != len(vals) or len(grid) < 2:
        raise InvalidParameterError("tabulated profile needs >= 2 matching samples")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidParameterError("tabulated tau grid must be strictly increasing")
    return ScalarProfile("tabulated", {}, float(value_minus), float(value_plus), (grid, vals))


@dataclass(frozen=True)
class Scenario:
    """Full problem definition for one run.

    The evolved potential is  (1/2) Omega^2(tau) x^2 - F(tau) x
    + lam * (alpha(tau) x^3 + beta(tau) x^4), with hbar = mass = 1.
    """

    omega: ScalarProfile
    force: ScalarProfile
    alpha: ScalarProfile
    beta: ScalarProfile
    lam: float
    tau_span: tuple[float, float]
    n_in: int = 0

    def __post_init__(self):
        if self.force.value_minus != 0.0 or self.force.value_plus != 0.0:
            raise InvalidParameterError("force profile must vanish at both ends")
        if self.omega.value_minus <= 0.0 or self.omega.value_plus <= 0.0:
            raise InvalidParameterError("frequency limits must be positive")
        if self.lam < 0.0:
            raise InvalidParameterError("coupling lam must be >= 0")
        if int(self.n_in) != self.n_in or self.n_in < 0:
            raise InvalidParameterError("n_in must be a non-negative integer")
        t0, t1 = self.tau_span
        if not (math.isfinite(t0) and math.isfinite(t1) and t1 > t0):
            raise InvalidSpanError(f"bad tau_span {self.tau_span}")

    @property
    def omega_in(self) -> float:
        return self.omega.value_minus

    @property
    def omega_out(self) -> float:
        return self.omega.value_plus

    def adiabaticity_ratio(self) -> float:
        """Slowest anharmonicity ramp time in units of the oscillation period.

        Large values mean slowly varying alpha/beta.  Recorded, not enforced.
        """
        ramps = [p.parameters["ramp_time"] for p in (self.alpha, self.beta)
                 if p.kind == "adiabatic-switch"]
        if not ramps:
            return math.inf
        return min(ramps) * self.omega.value_minus


@dataclass(frozen=True)
class AsymptoticReport:
    """Measured deviation of each profile from its declared limits."""

    eps: float
    tau_window: float
    deviations: dict  # name -> (max dev over leading window, max dev over trailing window)
    passed: bool

    def worst(self) -> float:
        return max(max(pair) for pair in self.deviations.values())


def validate_asymptotics(scenario: Scenario, eps: float, tau_window: float,
                         samples: int = 400) -> AsymptoticReport:
    """Check every profile is flat at its declared limit near both span ends."""
    if tau_window <= 0.0:
        raise InvalidParameterError("tau_window must be positive")
    t0, t1 = scenario.tau_span
    if t1 - t0 < 2.0 * tau_window:
        raise InvalidSpanError("tau_span shorter than twice the asymptotic window")
    head = np.linspace(t0, t0 + tau_window, samples)
    tail = np.linspace(t1 - tau_window, t1, samples)
    deviations = {}
    for name in ("omega", "force", "alpha", "beta"):
        prof = getattr(scenario, name)
        dev_head = float(np.max(np.abs(prof(head) - prof.value_minus)))
        dev_tail = float(np.max(np.abs(prof(tail) - prof.value_plus)))
        deviations[name] = (dev_head, dev_tail)
    passed = all(d <= eps for pair in deviations.values() for d in pair)
    return AsymptoticReport(eps=eps, tau_window=tau_window, deviations=deviations, passed=passed)
