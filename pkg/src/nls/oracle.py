"""Closed-form reduced dynamics: self-similar amplitude law and the exact
pointwise nonlinear flow.

The self-similar family u(t,x) = rho(t) exp(i|x|^2/(4(t+t0))) reduces, after
z = (t+t0)^{N/2} rho, to

    z' = -i kappa (t+t0)^{-N alpha/2} |z|^alpha z,

whose modulus obeys |z(t)|^{-alpha} = |z(0)|^{-alpha} + alpha Im(kappa) W(t)
with W the weight integral below.  The same Bernoulli reduction with constant
weight solves u_t = i kappa |u|^alpha u exactly; that flow is the solver's
nonlinear substep.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .exponents import ModelParams


class SubstepBlowupError(ArithmeticError):
    """The exact nonlinear substep left its domain (bracket <= 0)."""


class PastBlowupError(ArithmeticError):
    """Amplitude requested at or beyond the blowup time."""


class Classification(Enum):
    GLOBAL = "Global"
    FINITE_TIME_BLOWUP = "FiniteTimeBlowup"


@dataclass(frozen=True)
class SelfSimilarParams:
    """Reduced-flow initial data: offset t0 > 0 and complex amplitude z0."""

    t0: float
    z0: complex
    model: ModelParams

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError(f"t0 must be positive, got {self.t0}")


@dataclass(frozen=True)
class OracleVerdict:
    classification: Classification
    blowup_time: Optional[float]
    amplitude_at: Callable[[float], float]

    def __post_init__(self):
        has_t = self.blowup_time is not None
        if has_t != (self.classification is Classification.FINITE_TIME_BLOWUP):
            raise ValueError("blowup_time present iff classification is blowup")


def weight_integral(model: ModelParams, t0: float, t: float) -> float:
    """Integral of (s+t0)^(-N alpha/2) over s in [0, t]; t may be math.inf."""
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    beta = model.dim * model.alpha / 2.0
    if math.isinf(t):
        if beta <= 1.0:
            return math.inf
        return t0 ** (1.0 - beta) / (beta - 1.0)
    if beta == 1.0:
        return math.log((t + t0) / t0)
    return ((t + t0) ** (1.0 - beta) - t0 ** (1.0 - beta)) / (1.0 - beta)


def _invert_weight_integral(model: ModelParams, t0: float, value: float) -> float:
    """Solve weight_integral(t) = value for t (value < weight_integral(inf)).

    Inversion is algebraic for every exponent; times beyond double range
    come back as math.inf.
    """
    beta = model.dim * model.alpha / 2.0
    try:
        if beta == 1.0:
            return t0 * math.expm1(value)
        base = t0 ** (1.0 - beta) + (1.0 - beta) * value
        if base <= 0:
            raise ValueError("value beyond the range of the weight integral")
        return base ** (1.0 / (1.0 - beta)) - t0
    except OverflowError:
        return math.inf


def blowup_time(p: SelfSimilarParams) -> Optional[float]:
    """Finite blowup time of |z|, or None if the reduced flow is global.

    Below the critical power the time is finite for every z0 but can exceed
    double range for tiny amplitudes; such times come back as math.inf while
    the classification stays FiniteTimeBlowup.
    """
    ki = p.model.kappa.imag
    if ki >= 0 or p.z0 == 0:
        return None
    c = abs(p.z0) ** (-p.model.alpha) / (p.model.alpha * (-ki))
    total = weight_integral(p.model, p.t0, math.inf)
    if c >= total:
        return None
    return _invert_weight_integral(p.model, p.t0, c)


def reduced_amplitude(p: SelfSimilarParams, t: float) -> float:
    """|z(t)| from the closed-form modulus law; exact to rounding."""
    al = p.model.alpha
    bracket = abs(p.z0) ** (-al) + al * p.model.kappa.imag * weight_integral(
        p.model, p.t0, t
    )
    if bracket <= 0:
        raise PastBlowupError(f"t={t} is at or past the blowup time")
    return bracket ** (-1.0 / al)


def classify(p: SelfSimilarParams) -> OracleVerdict:
    """Global vs finite-time blowup for the self-similar reduced flow."""
    if p.z0 == 0:
        raise ValueError("z0 = 0 is the trivial solution")
    T = blowup_time(p)
    if T is None:
        return OracleVerdict(
            Classification.GLOBAL, None, lambda t: reduced_amplitude(p, t)
        )
    return OracleVerdict(
        Classification.FINITE_TIME_BLOWUP, T, lambda t: reduced_amplitude(p, t)
    )


def nonlinear_flow(values: np.ndarray, model: ModelParams, dt: float) -> np.ndarray:
    """Exact flow of u_t = i kappa |u|^alpha u over time dt, elementwise.

    Modulus: m(dt) = (m0^-alpha + alpha Im(kappa) dt)^(-1/alpha).
    Phase increment: Re(kappa)/(alpha Im(kappa)) * log(1 + alpha Im(kappa)
    m0^alpha dt), degenerating to Re(kappa) m0^alpha dt when Im(kappa) = 0.
    Zero entries are fixed points.  Raises SubstepBlowupError if the bracket
    1 + alpha Im(kappa) m0^alpha dt is nonpositive anywhere.
    """
    al = model.alpha
    kr, ki = model.kappa.real, model.kappa.imag
    values = np.asarray(values, dtype=np.complex128)
    m2 = values.real**2 + values.imag**2
    ma = m2 ** (al / 2.0)  # |u|^alpha, exactly 0 at u = 0 since alpha > 0
    if ki != 0.0:
        bracket = 1.0 + al * ki * ma * dt
        if np.min(bracket) <= 0.0:
            raise SubstepBlowupError(
                f"nonlinear substep blowup: min bracket {np.min(bracket):.3e} at dt={dt:.3e}"
            )
        factor = bracket ** (-1.0 / al)
        dtheta = (kr / (al * ki)) * np.log(bracket)
    else:
        factor = 1.0
        dtheta = kr * ma * dt
    return values * (factor * np.exp(1j * dtheta))


def pointwise_nonlinear_flow(u0: complex, model: ModelParams, dt: float) -> complex:
    """Scalar form of nonlinear_flow for a single amplitude."""
    if u0 == 0:
        return 0.0 + 0.0j
    return complex(nonlinear_flow(np.array([u0]), model, dt)[0])


def reduced_rhs(t: float, z: np.ndarray, p: SelfSimilarParams) -> np.ndarray:
    """Right-hand side of z' = i kappa (t+t0)^(-N alpha/2) |z|^alpha z.

    The sign is the one consistent with the modulus law (|z| grows when
    Im(kappa) < 0): substituting the self-similar ansatz into the PDE gives
    +i kappa.  State as (Re z, Im z); used by the independent
    adaptive-integrator cross-checks in the test suite.
    """
    zc = complex(z[0], z[1])
    w = (t + p.t0) ** (-p.model.dim * p.model.alpha / 2.0)
    dz = 1j * p.model.kappa * w * abs(zc) ** p.model.alpha * zc
    return np.array([dz.real, dz.imag])


def reduced_trajectory(p: SelfSimilarParams, t: float) -> complex:
    """Full complex z(t): closed-form modulus plus the derived phase.

    z(t) is the exact pointwise flow of u_t = i kappa |u|^alpha u evaluated
    at the reparametrized time W(t) = weight_integral(t), so modulus and
    phase share one closed form.  The modulus law is the primary object;
    the phase is a derived companion, and comparison tests treat the
    modulus as authoritative.
    """
    m0 = abs(p.z0)
    if m0 == 0:
        return 0.0 + 0.0j
    W = weight_integral(p.model, p.t0, t)
    al = p.model.alpha
    kr, ki = p.model.kappa.real, p.model.kappa.imag
    bracket = 1.0 + al * ki * m0**al * W
    if bracket <= 0:
        raise PastBlowupError(f"t={t} is at or past the blowup time")
    m = m0 * bracket ** (-1.0 / al)
    if ki != 0.0:
        dtheta = (kr / (al * ki)) * math.log(bracket)
    else:
        dtheta = kr * m0**al * W
    return m * cmath.exp(1j * (cmath.phase(p.z0) + dtheta))
