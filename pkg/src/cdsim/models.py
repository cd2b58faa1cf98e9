"""Hamiltonian families, named protocols, and ramp schedules.

Both model families share the same unperturbed part

    H0 = (px^2 + py^2)/2 + (x^2 + y^2)/2

and are linear in the drive strength: H(beta) = H0 + beta * V.  The
"integrable" family perturbs with the radially symmetric quartic
(x^2+y^2)^2/4 (angular momentum stays conserved); the "nonintegrable" family
couples the oscillators with x^2 y^2 / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import OutOfRange
from .polyalg import PhasePolynomial, X, Y, multiply

# Ramp kind codes, shared with the numba-compiled copies in dynamics.
RAMP_HOLD = 0
RAMP_LINEAR = 1
RAMP_SMOOTH = 2

_KIND_CODES = {"hold": RAMP_HOLD, "linear": RAMP_LINEAR, "smooth_sine": RAMP_SMOOTH}


def ramp_value(kind: int, beta_i: float, beta_f: float, tau: float, t: float) -> float:
    """beta(t) for one schedule kind; single source for python and numba."""
    if kind == RAMP_HOLD:
        return beta_i
    if kind == RAMP_LINEAR:
        return beta_i + (beta_f - beta_i) * (t / tau)
    u = math.sin(math.pi * t / (2.0 * tau))
    g = math.sin(0.5 * math.pi * u * u)
    return beta_i + (beta_f - beta_i) * g * g


def ramp_slope(kind: int, beta_i: float, beta_f: float, tau: float, t: float) -> float:
    """d beta/dt, the exact derivative of ramp_value."""
    if kind == RAMP_HOLD:
        return 0.0
    if kind == RAMP_LINEAR:
        return (beta_f - beta_i) / tau
    u = math.pi * t / (2.0 * tau)
    g = 0.5 * math.pi * math.sin(u) ** 2
    return (beta_f - beta_i) * (math.pi ** 2 / (4.0 * tau)) \
        * math.sin(2.0 * g) * math.sin(2.0 * u)


@dataclass(frozen=True)
class RampSchedule:
    """A closed-form drive beta(t) on [0, tau].

    smooth_sine is (beta_f-beta_i)*sin^2[(pi/2) sin^2(pi t / 2 tau)] + beta_i,
    which starts and ends with zero slope; linear is beta_i + v t.
    """

    kind: str
    tau: float
    beta_i: float
    beta_f: float

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not (math.isfinite(self.tau) and self.tau > 0.0):
            raise ValueError("tau must be positive and finite")
        if self.kind == "hold" and self.beta_i != self.beta_f:
            raise ValueError("hold schedule requires beta_i == beta_f")

    @classmethod
    def smooth(cls, beta_i: float, beta_f: float, tau: float) -> "RampSchedule":
        return cls("smooth_sine", tau, beta_i, beta_f)

    @classmethod
    def linear(cls, beta_i: float, beta_f: float, tau: float) -> "RampSchedule":
        return cls("linear", tau, beta_i, beta_f)

    @classmethod
    def linear_velocity(cls, beta_i: float, beta_f: float, v: float) -> "RampSchedule":
        """Linear ramp with |d beta/dt| = v."""
        if v <= 0.0:
            raise ValueError("velocity must be positive")
        return cls("linear", abs(beta_f - beta_i) / v, beta_i, beta_f)

    @classmethod
    def hold(cls, beta: float, tau: float) -> "RampSchedule":
        return cls("hold", tau, beta, beta)

    @property
    def kind_code(self) -> int:
        return _KIND_CODES[self.kind]

    @property
    def velocity(self) -> float:
        """Signed slope of a linear schedule."""
        if self.kind != "linear":
            raise ValueError("velocity is defined for linear schedules only")
        return (self.beta_f - self.beta_i) / self.tau

    def _check_time(self, t: float) -> None:
        # Tolerate rounding at the endpoints so segment handoffs line up.
        if t < -1e-12 * self.tau or t > self.tau * (1.0 + 1e-12):
            raise OutOfRange(f"t = {t} outside [0, {self.tau}]")

    def beta_at(self, t: float) -> float:
        self._check_time(t)
        return ramp_value(self.kind_code, self.beta_i, self.beta_f, self.tau, t)

    def beta_dot_at(self, t: float) -> float:
        self._check_time(t)
        return ramp_slope(self.kind_code, self.beta_i, self.beta_f, self.tau, t)

    def reverse(self) -> "RampSchedule":
        """The time-mirrored schedule: reverse(s).beta_at(t) = s.beta_at(tau-t).

        For all three kinds the mirror is the same kind with endpoints
        swapped (the smooth ramp satisfies g(tau-t) = 1 - g(t)).
        """
        return RampSchedule(self.kind, self.tau, self.beta_f, self.beta_i)

    def time_at_beta(self, beta: float) -> float:
        """Inverse of beta_at for monotone (non-hold) schedules."""
        span = self.beta_f - self.beta_i
        if span == 0.0 or self.kind == "hold":
            raise ValueError("schedule is constant; time_at_beta undefined")
        u = (beta - self.beta_i) / span
        if u < -1e-12 or u > 1.0 + 1e-12:
            raise OutOfRange(f"beta = {beta} outside schedule range")
        u = min(max(u, 0.0), 1.0)
        if self.kind == "linear":
            return u * self.tau
        inner = math.asin(math.sqrt(u)) * 2.0 / math.pi
        return math.asin(math.sqrt(inner)) * 2.0 * self.tau / math.pi


@dataclass(frozen=True)
class ModelSpec:
    """A Hamiltonian family H(beta) = H0 + beta * V with symbolic dH/dbeta."""

    name: str
    H0: PhasePolynomial
    V: PhasePolynomial
    dH_dbeta: PhasePolynomial
    # Optional exact shell sampler (beta, E0, n, seed) -> (n, 4) points, used
    # where the microcanonical measure is known in closed form.
    shell_sampler: Optional[Callable[[float, float, int, int], np.ndarray]] = field(
        default=None, compare=False, repr=False
    )

    def hamiltonian(self, beta: float) -> PhasePolynomial:
        return self.H0 + beta * self.V


@dataclass(frozen=True)
class ProtocolSpec:
    """A named drive protocol: which model, and where beta starts and ends."""

    name: str
    model: ModelSpec
    beta_i: float
    beta_f: float
    E0: float = 1.0

    def forward_schedule(self, tau: float) -> RampSchedule:
        return RampSchedule.smooth(self.beta_i, self.beta_f, tau)


_HALF = 0.5
HARMONIC_H0 = (
    PhasePolynomial({(0, 0, 2, 0): _HALF, (0, 0, 0, 2): _HALF,
                     (2, 0, 0, 0): _HALF, (0, 2, 0, 0): _HALF})
)

_R2 = multiply(X, X) + multiply(Y, Y)
_V_INTEGRABLE = 0.25 * multiply(_R2, _R2)
_V_NONINTEGRABLE = PhasePolynomial({(2, 2, 0, 0): 0.5})

INTEGRABLE = ModelSpec(
    name="integrable",
    H0=HARMONIC_H0,
    V=_V_INTEGRABLE,
    dH_dbeta=_V_INTEGRABLE,
)

NONINTEGRABLE = ModelSpec(
    name="nonintegrable",
    H0=HARMONIC_H0,
    V=_V_NONINTEGRABLE,
    dH_dbeta=_V_NONINTEGRABLE,
)


def _harmonic_1d_points(beta: float, E0: float, n: int, seed: int) -> np.ndarray:
    """Exact microcanonical (time-uniform) sampling of the 1d oscillator orbit.

    H = px^2/2 + (1+beta) x^2/2 at energy E0: x = sqrt(2 E0 / w^2) sin(theta),
    px = sqrt(2 E0) cos(theta) with theta uniform; y and py stay zero.
    """
    w2 = 1.0 + beta
    amp_x = math.sqrt(2.0 * E0 / w2)
    amp_p = math.sqrt(2.0 * E0)
    pts = np.zeros((n, 4))
    for i in range(n):
        theta = np.random.default_rng((seed, 0, i)).uniform(0.0, 2.0 * math.pi)
        pts[i, 0] = amp_x * math.sin(theta)
        pts[i, 2] = amp_p * math.cos(theta)
    return pts


#: 1d harmonic family H = px^2/2 + (1+beta) x^2/2, whose exact drive
#: generator is known in closed form; used as an end-to-end oracle.
HARMONIC_1D = ModelSpec(
    name="harmonic1d",
    H0=PhasePolynomial({(0, 0, 2, 0): _HALF, (2, 0, 0, 0): _HALF}),
    V=PhasePolynomial({(2, 0, 0, 0): _HALF}),
    dH_dbeta=PhasePolynomial({(2, 0, 0, 0): _HALF}),
    shell_sampler=_harmonic_1d_points,
)

MODELS = {m.name: m for m in (INTEGRABLE, NONINTEGRABLE, HARMONIC_1D)}

PROTOCOLS = {
    "I-I": ProtocolSpec("I-I", INTEGRABLE, 0.0, 0.229),
    "I-N": ProtocolSpec("I-N", NONINTEGRABLE, 0.0, 1.0),
    "N-N": ProtocolSpec("N-N", NONINTEGRABLE, 5.0, 8.85),
}


def get_model(name: str) -> ModelSpec:
    try:
        return MODELS[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; known: {sorted(MODELS)}") from None


def get_protocol(name: str) -> ProtocolSpec:
    try:
        return PROTOCOLS[name]
    except KeyError:
        raise KeyError(f"unknown protocol {name!r}; known: {sorted(PROTOCOLS)}") from None
