"""Monitored quantities: mass balance, localized masses, the growth-rate
ledger, median radius, linear confinement, and scattering residuals.

The localized-mass machinery uses the tent cutoff theta(r) = 1 on [0,1],
2-r on [1,2], 0 beyond, normalized so psi(x) = nu theta(|x|) has unit L2
norm; phi_lambda(x) = psi(lambda x) then satisfies ||phi_lambda||_L2 =
lambda^(-N/2) exactly.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import scipy.integrate

from .exponents import ModelParams
from .field import (
    FieldState,
    GridSpec,
    gradient_norm,
    l2_norm,
    linear_propagate,
    lp_norm,
    weighted_l2_norm,
)

_SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


def tent_profile(r):
    """theta(r): 1 on [0,1], 2-r on [1,2], 0 beyond (vectorized)."""
    r = np.asarray(r, dtype=float)
    return np.clip(np.minimum(1.0, 2.0 - r), 0.0, 1.0)


@lru_cache(maxsize=8)
def cutoff_normalization(dim: int) -> float:
    """nu with ||nu theta(|x|)||_L2 = 1, by adaptive radial quadrature."""
    area = _SPHERE_AREA[dim]
    integral, _ = scipy.integrate.quad(
        lambda r: tent_profile(r) ** 2 * r ** (dim - 1), 0.0, 2.0, points=[1.0]
    )
    return 1.0 / math.sqrt(area * integral)


@dataclass(frozen=True)
class CutoffFamily:
    """Tent cutoffs phi_lambda(x) = nu theta(lambda |x|) for a lambda ladder."""

    dim: int
    lambdas: tuple
    nu: float

    @classmethod
    def build(cls, dim: int, lambdas: Sequence[float]) -> "CutoffFamily":
        lam = tuple(float(v) for v in lambdas)
        if any(v <= 0 for v in lam):
            raise ValueError("lambdas must be positive")
        return cls(dim=dim, lambdas=lam, nu=cutoff_normalization(dim))

    def phi_values(self, grid: GridSpec, lam: float) -> np.ndarray:
        r = np.sqrt(grid.radius_squared())
        return self.nu * tent_profile(lam * r)

    def phi_l2_norm_quadrature(self, lam: float) -> float:
        """||phi_lambda||_L2 by adaptive radial quadrature (exact: lam^(-N/2))."""
        area = _SPHERE_AREA[self.dim]
        integral, _ = scipy.integrate.quad(
            lambda r: (self.nu * tent_profile(lam * r)) ** 2 * r ** (self.dim - 1),
            0.0,
            2.0 / lam,
            points=[1.0 / lam],
        )
        return math.sqrt(area * integral)

    def grad_phi_linf(self, lam: float) -> float:
        """sup |grad phi_lambda| = nu lambda (attained on the tent slope)."""
        return self.nu * lam

    def check_support(self, grid: GridSpec) -> None:
        worst = 2.0 / min(self.lambdas)
        if worst > grid.box_length / 2 * (1 + 1e-9):
            raise ValueError(
                f"cutoff support radius {worst:.4g} exceeds box half-length "
                f"{grid.box_length / 2:.4g}"
            )


def default_lambdas(box_length: float, data_width: float, count: int = 5) -> tuple:
    """Geometric ladder spanning [4/L (just inside the box), 4/w0]."""
    lo = 4.0 / box_length * (1.0 + 1e-3)
    hi = 4.0 / data_width
    if hi <= lo:
        hi = 2.0 * lo
    return tuple(np.geomspace(lo, hi, count))


def localized_mass(state: FieldState, cutoffs: CutoffFamily) -> np.ndarray:
    """f_lambda = ||u phi_lambda||_L2 for every lambda in the family."""
    cutoffs.check_support(state.grid)
    g = state.grid
    m2 = state.values.real**2 + state.values.imag**2
    hN = g.spacing**g.dim
    out = np.empty(len(cutoffs.lambdas))
    for i, lam in enumerate(cutoffs.lambdas):
        w = cutoffs.phi_values(g, lam)
        out[i] = math.sqrt(float(np.sum(m2 * w**2)) * hN)
    return out


def median_radius(state: FieldState) -> float:
    """Radius enclosing half the total mass (radial bins of width h).

    Cumulative mass at bin boundaries is interpolated linearly; cumulative
    monotonicity guarantees a unique crossing.  Samples landing exactly on a
    bin boundary are split half-and-half between the adjacent bins (the
    trapezoid-consistent convention; on axis-aligned grids every node radius
    is a boundary, and whole-bin assignment would bias R by +h/2).
    """
    g = state.grid
    m2 = (state.values.real**2 + state.values.imag**2).reshape(-1)
    total = float(np.sum(m2))
    if total <= 0:
        raise ValueError("zero field has no median radius")
    r = np.sqrt(g.radius_squared()).reshape(-1)
    h = g.spacing
    scaled = r / h
    near = np.rint(scaled)
    on_boundary = (np.abs(scaled - near) < 1e-9) & (near >= 1)
    idx = np.floor(scaled).astype(np.int64)
    idx[on_boundary] = near[on_boundary].astype(np.int64)
    nb = int(np.max(idx)) + 2
    binned = np.bincount(idx, weights=m2, minlength=nb)
    if np.any(on_boundary):
        kb = near[on_boundary].astype(np.int64)
        halfmass = 0.5 * m2[on_boundary]
        binned -= np.bincount(kb, weights=halfmass, minlength=nb)
        binned += np.bincount(kb - 1, weights=halfmass, minlength=nb)
    cum = np.concatenate([[0.0], np.cumsum(binned)])  # cum[k] = mass below k h
    half = total / 2.0
    k = int(np.searchsorted(cum, half))
    if k == 0:
        return 0.0
    lo, hi = cum[k - 1], cum[k]
    frac = 0.0 if hi == lo else (half - lo) / (hi - lo)
    return (k - 1 + frac) * h


# ---------------------------------------------------------------------------
# trace


@dataclass
class DiagnosticTrace:
    """Time-indexed record of all monitored scalars for one run."""

    times: np.ndarray
    mass: np.ndarray
    lp: np.ndarray  # L^(alpha+2) norm
    grad_l2: np.ndarray
    K_t: np.ndarray  # running sup of grad_l2
    linf: np.ndarray
    R_t: np.ndarray  # median radius (nan when not probed)
    weighted_l2: np.ndarray
    scatter_residual: np.ndarray  # nan when not probed
    lambdas: tuple = ()
    loc_mass: np.ndarray = dc_field(default_factory=lambda: np.empty((0, 0)))

    def __len__(self) -> int:
        return len(self.times)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = "t,mass,lp,grad_l2,K_t,linf,R_t,weighted_l2,scatter_residual"
        for lam in self.lambdas:
            cols += f",loc_mass_λ={lam:.6g}"
        buf.write(cols + "\n")
        for i in range(len(self.times)):
            row = [
                repr(float(v))
                for v in (
                    self.times[i],
                    self.mass[i],
                    self.lp[i],
                    self.grad_l2[i],
                    self.K_t[i],
                    self.linf[i],
                )
            ]
            for v in (self.R_t[i], self.weighted_l2[i], self.scatter_residual[i]):
                row.append("" if math.isnan(v) else repr(float(v)))
            for j in range(len(self.lambdas)):
                row.append(repr(float(self.loc_mass[i, j])))
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "DiagnosticTrace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split(",")
        lambdas = tuple(
            float(c.split("=", 1)[1]) for c in header if c.startswith("loc_mass_")
        )
        rows = [ln.split(",") for ln in lines[1:]]

        def col(j):
            return np.array(
                [float(r[j]) if r[j] != "" else math.nan for r in rows]
            )

        nfix = 9
        loc = (
            np.array([[float(v) for v in r[nfix:]] for r in rows])
            if lambdas
            else np.empty((len(rows), 0))
        )
        return cls(
            times=col(0),
            mass=col(1),
            lp=col(2),
            grad_l2=col(3),
            K_t=col(4),
            linf=col(5),
            R_t=col(6),
            weighted_l2=col(7),
            scatter_residual=col(8),
            lambdas=lambdas,
            loc_mass=loc,
        )


@dataclass(frozen=True)
class ProbeSet:
    """Which diagnostics to record along a run."""

    cutoffs: Optional[CutoffFamily] = None
    median_radius: bool = True
    weighted_l2: bool = True
    scatter: bool = False
    store_states_every: int = 0  # 0 = keep no full-state checkpoints
    store_at_times: tuple = ()  # exact times to checkpoint (the run lands on them)


class TraceRecorder:
    """Accumulates DiagnosticTrace rows; K_t is the running max by construction."""

    def __init__(self, model: ModelParams, probes: ProbeSet):
        self.model = model
        self.probes = probes
        self.rows: list = []
        self.K_t = 0.0
        self._w_prev: Optional[FieldState] = None
        if probes.cutoffs is not None:
            self.lambdas = probes.cutoffs.lambdas
        else:
            self.lambdas = ()

    def record(self, state: FieldState) -> None:
        p = self.probes
        grad = gradient_norm(state)
        self.K_t = max(self.K_t, grad)
        scatter = math.nan
        if p.scatter:
            w = linear_propagate(state, -state.time)
            if self._w_prev is not None:
                d = w.with_values(w.values - self._w_prev.values)
                scatter = math.sqrt(
                    l2_norm(d) ** 2 + gradient_norm(d) ** 2 + weighted_l2_norm(d) ** 2
                )
            self._w_prev = w
        row = (
            state.time,
            l2_norm(state),
            lp_norm(state, self.model.alpha + 2.0),
            grad,
            self.K_t,
            float(np.max(np.abs(state.values))),
            median_radius(state) if p.median_radius else math.nan,
            weighted_l2_norm(state) if p.weighted_l2 else math.nan,
            scatter,
            localized_mass(state, p.cutoffs) if p.cutoffs is not None else None,
        )
        self.rows.append(row)

    def trace(self) -> DiagnosticTrace:
        n = len(self.rows)
        arr = lambda j: np.array([r[j] for r in self.rows])
        loc = (
            np.array([r[9] for r in self.rows])
            if self.lambdas
            else np.empty((n, 0))
        )
        return DiagnosticTrace(
            times=arr(0),
            mass=arr(1),
            lp=arr(2),
            grad_l2=arr(3),
            K_t=arr(4),
            linf=arr(5),
            R_t=arr(6),
            weighted_l2=arr(7),
            scatter_residual=arr(8),
            lambdas=self.lambdas,
            loc_mass=loc,
        )


# ---------------------------------------------------------------------------
# post-hoc checks over completed traces


@dataclass(frozen=True)
class MassBalanceReport:
    max_relative_mismatch: float
    scale: float
    mismatch: np.ndarray  # per interior row, absolute
    derivative: np.ndarray
    rhs: np.ndarray


def mass_balance_check(trace: DiagnosticTrace, model: ModelParams) -> MassBalanceReport:
    """Central-difference d/dt(mass^2) against -2 Im(kappa) * ||u||_{a+2}^{a+2}.

    The relative scale is the largest magnitude among both sides, floored by
    mass^2 per unit trace time so the kappa-real case (both sides zero)
    reports its rounding noise as a small relative number.
    """
    if len(trace) < 3:
        raise ValueError("need at least 3 trace rows")
    t, m2 = trace.times, trace.mass**2
    lp = trace.lp
    deriv = (m2[2:] - m2[:-2]) / (t[2:] - t[:-2])
    rhs = -2.0 * model.kappa.imag * lp[1:-1] ** (model.alpha + 2.0)
    mismatch = np.abs(deriv - rhs)
    span = t[-1] - t[0]
    scale = max(
        float(np.max(np.abs(rhs))),
        float(np.max(np.abs(deriv))),
        float(np.max(m2)) / span if span > 0 else 0.0,
    )
    rel = float(np.max(mismatch)) / scale if scale > 0 else 0.0
    return MassBalanceReport(rel, scale, mismatch, deriv, rhs)


@dataclass(frozen=True)
class InequalityLedger:
    lambdas: tuple
    min_slack: np.ndarray  # per lambda
    scale: np.ndarray  # per lambda
    normalized_min_slack: float  # min over lambdas of min_slack/scale
    dominance_fraction: np.ndarray  # per lambda


def differential_inequality_ledger(
    trace: DiagnosticTrace, model: ModelParams, cutoffs: CutoffFamily
) -> InequalityLedger:
    """Slack of f_lambda' >= -2 nu lambda K_t - Im(kappa) lambda^(N a/2) f^(a+1).

    The inequality holds for true solutions; a normalized slack dipping well
    below zero flags a solver (or resolution) bug.  Also reports, per lambda,
    the fraction of rows where the blowup-driving dominance
    f^(a+1) >= 4 (-Im kappa)^(-1) lambda^((2-N a)/2) nu K_t holds.
    """
    if len(trace) < 3:
        raise ValueError("need at least 3 trace rows")
    if model.kappa.imag >= 0:
        raise ValueError("ledger applies to Im(kappa) < 0")
    if trace.loc_mass.shape[1] != len(cutoffs.lambdas):
        raise ValueError("trace was recorded without this cutoff family")
    ki = model.kappa.imag
    nu = cutoffs.nu
    n, al = model.dim, model.alpha
    t = trace.times
    K = trace.K_t
    min_slack = np.empty(len(cutoffs.lambdas))
    scale = np.empty(len(cutoffs.lambdas))
    dom = np.empty(len(cutoffs.lambdas))
    for j, lam in enumerate(cutoffs.lambdas):
        f = trace.loc_mass[:, j]
        fprime = (f[2:] - f[:-2]) / (t[2:] - t[:-2])
        rhs = -2.0 * nu * lam * K[1:-1] - ki * lam ** (n * al / 2.0) * f[1:-1] ** (
            al + 1.0
        )
        slack = fprime - rhs
        min_slack[j] = float(np.min(slack))
        scale[j] = float(
            np.max(
                2.0 * nu * lam * K[1:-1]
                + np.abs(ki) * lam ** (n * al / 2.0) * f[1:-1] ** (al + 1.0)
                + np.abs(fprime)
            )
        )
        thresh = 4.0 / (-ki) * lam ** ((2.0 - n * al) / 2.0) * nu * K
        dom[j] = float(np.mean(f ** (al + 1.0) >= thresh))
    normalized = float(np.min(min_slack / np.where(scale > 0, scale, 1.0)))
    return InequalityLedger(cutoffs.lambdas, min_slack, scale, normalized, dom)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    theoretical_exponent: float
    verdict: bool
    rows_used: int


def rate_fit(
    trace: DiagnosticTrace,
    model: ModelParams,
    window: float = 0.5,
    blowup_detected: bool = False,
) -> RateFit:
    """Least-squares slope of ln K_t vs ln t over the trailing log-t window.

    The theoretical growth exponent below the Fujita power is
    (2 - N alpha)/(N alpha).  The verdict confirms the blowup dichotomy:
    fitted slope within 0.1 of the exponent from below, or the run already
    ended in detected blowup.
    """
    mask = (trace.times > 0) & (trace.K_t > 0)
    lt = np.log(trace.times[mask])
    lK = np.log(trace.K_t[mask])
    if len(lt) < 10:
        raise ValueError("trace too short for a rate fit")
    cut = lt[0] + (1.0 - window) * (lt[-1] - lt[0])
    sel = lt >= cut
    if int(np.sum(sel)) < 10:
        raise ValueError(f"window holds {int(np.sum(sel))} rows, need >= 10")
    slope, intercept = np.polyfit(lt[sel], lK[sel], 1)
    pred = slope * lt[sel] + intercept
    ss_res = float(np.sum((lK[sel] - pred) ** 2))
    ss_tot = float(np.sum((lK[sel] - np.mean(lK[sel])) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    theo = (2.0 - model.dim * model.alpha) / (model.dim * model.alpha)
    verdict = blowup_detected or (slope >= theo - 0.1)
    return RateFit(float(slope), float(intercept), r2, theo, verdict, int(np.sum(sel)))


@dataclass(frozen=True)
class ConfinementReport:
    times: tuple
    a: float
    lhs: np.ndarray
    rhs: np.ndarray
    max_violation: float
    exterior_fraction: np.ndarray


def linear_confinement_check(
    u0: FieldState, times: Sequence[float], a: Optional[float] = None
) -> ConfinementReport:
    """Free-flow confinement: int psi_M |u~|^2 <= int psi_M |u0|^2 + 2t/M ||u0|| ||grad u0||.

    psi_M(x) = min(|x|/M, 1) with M = a t and default a = 16 ||grad u0||/||u0||.
    Also reports the mass fraction outside |x| > a t (expected <= 1/4 for
    large t).  The |x| reading of psi_M is the dimension-generic one; the
    one-dimensional signed variant is not implemented.
    """
    g = u0.grid
    l2 = l2_norm(u0)
    gr = gradient_norm(u0)
    if a is None:
        a = 16.0 * gr / l2
    r = np.sqrt(g.radius_squared())
    hN = g.spacing**g.dim
    m2_0 = u0.values.real**2 + u0.values.imag**2
    lhs = np.empty(len(times))
    rhs = np.empty(len(times))
    ext = np.empty(len(times))
    for i, t in enumerate(times):
        ut = linear_propagate(u0, t - u0.time) if t != u0.time else u0
        m2_t = ut.values.real**2 + ut.values.imag**2
        M = a * t
        if M > 0:
            if M > g.box_length / 2:
                raise ValueError(
                    f"confinement radius a t = {M:.4g} exceeds box half-length"
                )
            psi = np.minimum(r / M, 1.0)
        else:
            psi = np.ones_like(r)  # t = 0: limits agree, both sides equal
        lhs[i] = float(np.sum(psi * m2_t)) * hN
        rhs[i] = float(np.sum(psi * m2_0)) * hN + (2.0 * t / M if M > 0 else 0.0) * l2 * gr
        ext[i] = float(np.sum(m2_t[r > M])) * hN / l2**2 if M > 0 else 1.0
    return ConfinementReport(
        tuple(times), a, lhs, rhs, float(np.max(lhs - rhs)), ext
    )


def scattering_residual(states: Sequence[FieldState]) -> list:
    """X-norm Cauchy increments of w(t) = e^{-it Lap} u(t).

    residual[i] = ||w(t_{i+1}) - w(t_i)||_X with the X-norm combining L2,
    gradient, and |x|-weighted L2 parts; a decreasing, summable-looking
    sequence evidences convergence to a scattering state.
    """
    if len(states) < 2:
        raise ValueError("need at least two states")
    ts = [s.time for s in states]
    if any(b <= a for a, b in zip(ts[:-1], ts[1:])):
        raise ValueError("states must be strictly increasing in time")
    ws = [linear_propagate(s, -s.time) for s in states]
    out = []
    for w0, w1 in zip(ws[:-1], ws[1:]):
        d = w1.with_values(w1.values - w0.values)
        out.append(
            math.sqrt(
                l2_norm(d) ** 2 + gradient_norm(d) ** 2 + weighted_l2_norm(d) ** 2
            )
        )
    return out
