"""Acceptance suite: one entry per numbered criterion, each with its pinned
tolerance, runnable from `nls accept` and from tests/test_acceptance.py.

The governing theorems carry existential constants, so most checks are
property- or oracle-based.  Where a criterion's literal measurement is
numerically vacuous (the split-step is *exact* on plane waves, so a
convergence-slope fit there hits rounding noise), the suite asserts the
strictly stronger exactness bound and demonstrates the convergence order on
data where the splitting error is nonzero; details are printed per line.

DELTA_SUBSTITUTION_NOTE documents the stand-ins for the theorems'
non-reproducible existential constants.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.integrate

from .conformal import equivalence_experiment
from .diagnostics import (
    CutoffFamily,
    ProbeSet,
    cutoff_normalization,
    default_lambdas,
    differential_inequality_ledger,
    linear_confinement_check,
    mass_balance_check,
    median_radius,
    rate_fit,
    scattering_residual,
)
from .exponents import ModelParams, alpha1_threshold, alpha2_threshold
from .field import (
    Gaussian,
    GridSpec,
    PlaneWave,
    free_gaussian,
    gradient_norm,
    l2_norm,
    linear_propagate,
    make_initial,
)
from .oracle import SelfSimilarParams, classify, pointwise_nonlinear_flow, reduced_rhs
from .solver import RunStatus, SolverConfig, run, run_with_checkpoints

DELTA_SUBSTITUTION_NOTE = (
    "The existential constants delta in the growth bound and in the "
    "small-data smallness threshold are not reproducible numerically; the "
    "suite substitutes criteria 1 (exponent table), 8 (dichotomy sweep), "
    "9 (non-scattering floor), and 12 (pseudo-conformal equivalence) as "
    "their property-based stand-ins."
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: str
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.number:2d} {self.name}: {self.details} ({self.seconds:.1f}s)"


def _check(cond: bool, msg: str, failures: list) -> None:
    if not cond:
        failures.append(msg)


# ---------------------------------------------------------------------------
# shared heavy runs (memoized so criteria 8 and 9 reuse them)


@lru_cache(maxsize=None)
def _growth_run_alpha1():
    """N=1, alpha=1, kappa=-i, Gaussian A=0.1: the sub-Fujita growth run."""
    grid = GridSpec(1, 80.0, 4096)
    model = ModelParams(1, 1.0, -1j)
    state0 = make_initial(grid, Gaussian(0.1, 1.0))
    cfg = SolverConfig(dt=1e-3, t_end=50.0, diagnostics_cadence=25)
    return run_with_checkpoints(
        state0, model, cfg, times=(5.0, 10.0, 20.0, 40.0),
        probes=ProbeSet(median_radius=False, weighted_l2=False),
    )


@lru_cache(maxsize=None)
def _scatter_run_alpha3():
    """N=1, alpha=3, kappa=-i, Gaussian A=0.1: the small-data scattering run."""
    grid = GridSpec(1, 160.0, 4096)
    model = ModelParams(1, 3.0, -1j)
    state0 = make_initial(grid, Gaussian(0.1, 1.0))
    cfg = SolverConfig(dt=1e-3, t_end=40.0, diagnostics_cadence=100)
    return run_with_checkpoints(
        state0, model, cfg, times=(5.0, 10.0, 20.0, 40.0),
        probes=ProbeSet(median_radius=False, weighted_l2=False),
    )


@lru_cache(maxsize=None)
def _noise_floor_run():
    """kappa=0 twin of the growth run: measures the w-residual rounding floor."""
    grid = GridSpec(1, 80.0, 4096)
    model = ModelParams(1, 1.0, 0.0 + 0.0j)
    state0 = make_initial(grid, Gaussian(0.1, 1.0))
    cfg = SolverConfig(dt=1e-3, t_end=40.0, diagnostics_cadence=100)
    return run_with_checkpoints(
        state0, model, cfg, times=(5.0, 10.0, 20.0, 40.0),
        probes=ProbeSet(median_radius=False, weighted_l2=False),
    )


@lru_cache(maxsize=None)
def _gradient_monotonicity_run():
    """N=1, alpha=1, kappa=-i Gaussian run over [0, 2] with cutoff probes."""
    grid = GridSpec(1, 40.0, 1024)
    model = ModelParams(1, 1.0, -1j)
    state0 = make_initial(grid, Gaussian(0.5, 1.0))
    cutoffs = CutoffFamily.build(1, default_lambdas(grid.box_length, 1.0))
    cfg = SolverConfig(dt=1e-3, t_end=2.0, diagnostics_cadence=5)
    probes = ProbeSet(cutoffs=cutoffs, median_radius=False, weighted_l2=False)
    return run(state0, model, cfg, probes=probes), model, cutoffs


# ---------------------------------------------------------------------------
# criteria


def criterion_01_exponent_table() -> tuple:
    failures: list = []
    for n in range(1, 65):
        a1, a2 = alpha1_threshold(n), alpha2_threshold(n)
        _check(a2 < 4.0 / n, f"alpha2({n}) >= 4/N", failures)
        if n >= 7:
            _check(a2 < a1, f"alpha2({n}) >= alpha1({n})", failures)
        else:
            _check(a2 >= a1, f"alpha2({n}) < alpha1({n}) below N=7", failures)
    return not failures, "alpha2 < 4/N for N=1..64; alpha2 < alpha1 exactly for N >= 7" \
        if not failures else "; ".join(failures[:4])


def _integrator_blowup_time(p: SelfSimilarParams) -> float:
    """Independent oracle: adaptive DOP853 on the reduced ODE up to a large
    amplitude, plus the frozen-weight dominant-balance tail to divergence."""
    big = 1e6

    def event(t, y, p):
        return math.hypot(y[0], y[1]) - big

    event.terminal = True
    event.direction = 1.0
    sol = scipy.integrate.solve_ivp(
        reduced_rhs,
        (0.0, 50.0),
        [p.z0.real, p.z0.imag],
        args=(p,),
        method="DOP853",
        rtol=1e-12,
        atol=1e-12,
        events=[event],
        max_step=0.1,
    )
    if not sol.t_events[0].size:
        raise RuntimeError("integrator never reached the blowup threshold")
    t_hit = float(sol.t_events[0][0])
    m = math.hypot(*sol.y_events[0][0])
    w = (t_hit + p.t0) ** (-p.model.dim * p.model.alpha / 2.0)
    return t_hit + m ** (-p.model.alpha) / (
        p.model.alpha * (-p.model.kappa.imag) * w
    )


def criterion_02_oracle_closed_forms() -> tuple:
    failures: list = []
    cases = [
        (ModelParams(2, 1.0, -1j), math.e - 1.0),
        (ModelParams(2, 2.0, -1j), 1.0),
    ]
    details = []
    for model, t_exact in cases:
        p = SelfSimilarParams(t0=1.0, z0=1.0 + 0.0j, model=model)
        verdict = classify(p)
        t_closed = verdict.blowup_time
        _check(
            t_closed is not None and abs(t_closed - t_exact) / t_exact < 1e-10,
            f"closed-form T={t_closed} vs {t_exact}",
            failures,
        )
        t_int = _integrator_blowup_time(p)
        _check(
            abs(t_int - t_exact) / t_exact < 1e-6,
            f"integrator T={t_int} vs {t_exact}",
            failures,
        )
        details.append(f"alpha={model.alpha:g}: T={t_closed:.10g} (ivp {t_int:.8g})")
    return not failures, "; ".join(details if not failures else failures)


def criterion_03_solver_exactness_and_order() -> tuple:
    failures: list = []
    # (a) kappa = 0 run against the closed-form free Gaussian
    grid = GridSpec(1, 40.0, 1024)
    spec = Gaussian(1.0, math.sqrt(2.0))  # exp(-x^2/4)
    state0 = make_initial(grid, spec)
    model0 = ModelParams(1, 2.0, 0.0 + 0.0j)
    out = run(state0, model0, SolverConfig(dt=1e-2, t_end=1.0, diagnostics_cadence=10**9))
    exact = free_gaussian(grid, spec, 1.0)
    sup_err = float(np.max(np.abs(out.final_state.values - exact.values)))
    _check(sup_err <= 1e-8, f"free-Gaussian sup error {sup_err:.2e} > 1e-8", failures)

    # (b) plane wave at dt in {1e-2, 5e-3, 2.5e-3}: the splitting commutator
    # vanishes on single-mode data (both substeps act as scalar flows on the
    # modulus/phase pair), so a convergence-slope fit there has no signal;
    # assert the stronger statement that the error stays at rounding level.
    gridp = GridSpec(1, 2 * math.pi, 256)
    model = ModelParams(1, 1.3, 0.7 - 0.9j)
    A = 0.9
    km = 4 * 2 * math.pi / gridp.box_length
    statep = make_initial(gridp, PlaneWave(A, (4,)))
    T = 0.4
    pw_errors = []
    xs = gridp.axis_coordinates()
    zT = _pointwise_reference(A, model, T)
    exact_vals = zT * np.exp(1j * km * xs) * np.exp(-1j * km**2 * T)
    for dt in (1e-2, 5e-3, 2.5e-3):
        o = run(statep, model, SolverConfig(dt=dt, t_end=T, diagnostics_cadence=10**9))
        pw_errors.append(float(np.max(np.abs(o.final_state.values - exact_vals))))
    _check(
        max(pw_errors) <= 1e-12,
        f"plane-wave errors {pw_errors} above rounding",
        failures,
    )

    # (c) the order-2 property measured where the splitting error is nonzero
    gridg = GridSpec(1, 40.0, 1024)
    modelg = ModelParams(1, 1.0, -1j)
    st0 = make_initial(gridg, Gaussian(1.0, 1.0))
    Tg = 0.5
    ref = run(st0, modelg, SolverConfig(dt=Tg / 4096, t_end=Tg, diagnostics_cadence=10**9))
    errs = []
    dts = (1e-2, 5e-3, 2.5e-3)
    for dt in dts:
        o = run(st0, modelg, SolverConfig(dt=dt, t_end=Tg, diagnostics_cadence=10**9))
        d = o.final_state.with_values(o.final_state.values - ref.final_state.values)
        errs.append(l2_norm(d))
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    _check(abs(slope - 2.0) <= 0.1, f"Strang order slope {slope:.3f} not 2.0+-0.1", failures)

    detail = (
        f"free-Gaussian sup err {sup_err:.1e}; plane-wave exact to "
        f"{max(pw_errors):.1e} (slope fit vacuous at rounding); Gaussian "
        f"order slope {slope:.3f}"
    )
    return not failures, detail if not failures else "; ".join(failures)


def _pointwise_reference(amplitude: float, model: ModelParams, t: float) -> complex:
    """Exact spatially-uniform solution amplitude at time t (no dispersion)."""
    return pointwise_nonlinear_flow(amplitude + 0.0j, model, t)


def criterion_04_mass_law() -> tuple:
    failures: list = []
    # kappa real: drift per unit time
    grid = GridSpec(1, 40.0, 1024)
    model_r = ModelParams(1, 2.0, 1.0 + 0.0j)
    drifts = []
    for init in (Gaussian(1.0, 1.0), PlaneWave(1.0, (3,))):
        st = make_initial(grid, init)
        o = run(st, model_r, SolverConfig(dt=1e-3, t_end=1.0, diagnostics_cadence=100))
        m = o.trace.mass
        drifts.append(float(np.max(np.abs(m - m[0])) / m[0]))
    _check(max(drifts) <= 1e-10, f"mass drift {max(drifts):.2e} > 1e-10", failures)

    # kappa = -i: mismatch order under dt halving
    model_i = ModelParams(1, 2.0, -1j)
    st = make_initial(grid, Gaussian(1.0, 1.0))
    mismatches = []
    for dt in (2e-3, 1e-3, 5e-4):
        o = run(st, model_i, SolverConfig(dt=dt, t_end=0.4, diagnostics_cadence=1))
        mismatches.append(mass_balance_check(o.trace, model_i).max_relative_mismatch)
    orders = [math.log2(a / b) for a, b in zip(mismatches[:-1], mismatches[1:])]
    _check(
        min(orders) >= 1.9,
        f"mass-balance orders {orders} below 1.9 (mismatches {mismatches})",
        failures,
    )
    detail = f"drift {max(drifts):.1e}/unit time; mismatch orders {[f'{o:.2f}' for o in orders]}"
    return not failures, detail if not failures else "; ".join(failures)


def criterion_05_uniform_blowup() -> tuple:
    failures: list = []
    grid = GridSpec(1, 1.0, 16)
    model = ModelParams(1, 2.0, -1j)
    st = make_initial(grid, PlaneWave(1.0, (0,)))  # u = 1 everywhere
    cfg = SolverConfig(
        dt=1e-3, t_end=1.0, blowup_dt_floor=1e-10, diagnostics_cadence=10
    )
    o = run(st, model, cfg)
    _check(o.status is RunStatus.BLOWUP_DETECTED, f"status {o.status}", failures)
    est = o.blowup_time_estimate
    _check(
        est is not None and 0.499 <= est <= 0.5,
        f"blowup estimate {est} outside [0.499, 0.5]",
        failures,
    )
    detail = f"status {o.status.value}, estimate {est:.12g} (exact 0.5)"
    return not failures, detail if not failures else "; ".join(failures)


def criterion_06_gradient_monotonicity() -> tuple:
    failures: list = []
    outcome, model, _ = _gradient_monotonicity_run()
    _check(
        outcome.status is RunStatus.REACHED_T_END,
        f"run ended {outcome.status} before t=2",
        failures,
    )
    g = outcome.trace.grad_l2
    scale = float(np.max(g))
    worst = float(np.min(np.diff(g)))
    _check(
        worst >= -1e-8 * scale,
        f"gradient decreased by {-worst:.2e} (tol {1e-8 * scale:.2e})",
        failures,
    )
    detail = f"min row-to-row gradient increment {worst:.2e} over [0,2], scale {scale:.3g}"
    return not failures, detail if not failures else "; ".join(failures)


def criterion_07_localized_mass_machinery() -> tuple:
    failures: list = []
    for n in (1, 2):
        fam = CutoffFamily.build(n, (0.5, 1.0, 2.0))
        for lam in fam.lambdas:
            got = fam.phi_l2_norm_quadrature(lam)
            want = lam ** (-n / 2.0)
            _check(
                abs(got - want) <= 1e-8,
                f"N={n} lambda={lam}: ||phi|| {got} vs {want}",
                failures,
            )
    nu1 = cutoff_normalization(1)
    _check(
        abs(nu1 - math.sqrt(3.0 / 8.0)) <= 1e-10,
        f"nu(1) = {nu1} vs sqrt(3/8)",
        failures,
    )
    outcome, model, cutoffs = _gradient_monotonicity_run()
    ledger = differential_inequality_ledger(outcome.trace, model, cutoffs)
    _check(
        ledger.normalized_min_slack >= -1e-3,
        f"ledger min slack {ledger.normalized_min_slack:.2e} below -1e-3*scale",
        failures,
    )
    detail = (
        f"cutoff norms exact to 1e-8 (N=1,2); nu(1)={nu1:.12f}; "
        f"ledger min slack {ledger.normalized_min_slack:.2e} (>= -1e-3)"
    )
    return not failures, detail if not failures else "; ".join(failures)


def criterion_08_fujita_dichotomy() -> tuple:
    failures: list = []
    # alpha = 1 < 2/N: blowup or confirmed growth at the theoretical rate
    growth = _growth_run_alpha1()
    blown = growth.status is RunStatus.BLOWUP_DETECTED
    slope_txt = "n/a"
    if blown:
        verdict = True
    else:
        fit = rate_fit(growth.trace, ModelParams(1, 1.0, -1j), blowup_detected=False)
        verdict = fit.slope >= 0.9
        slope_txt = f"{fit.slope:.3f}"
    _check(verdict, f"alpha=1 run: status {growth.status}, slope {slope_txt}", failures)

    # alpha = 3 > 2/N: scattering residuals through t in {5,10,20,40}
    scat = _scatter_run_alpha3()
    res = scattering_residual(scat.checkpoints)  # w-path from t=0 through samples
    decreasing = all(b < a for a, b in zip(res[:-1], res[1:]))
    _check(decreasing, f"residuals not strictly decreasing: {res}", failures)
    _check(
        res[-1] <= 0.1 * res[0],
        f"final residual {res[-1]:.3e} > 0.1 x first {res[0]:.3e}",
        failures,
    )
    detail = (
        f"alpha=1: {'BlowupDetected at t=%.3f' % growth.blowup_time_estimate if blown else 'slope ' + slope_txt}; "
        f"alpha=3 residuals {['%.2e' % r for r in res]} (final/first "
        f"{res[-1] / res[0]:.3f})"
    )
    return not failures, detail if not failures else "; ".join(failures)


def criterion_09_non_scattering_floor() -> tuple:
    failures: list = []
    growth = _growth_run_alpha1()
    # residuals only over samples actually reached (the run may blow up after 40)
    states = [s for s in growth.checkpoints if s.time <= 40.0 + 1e-9]
    res_alpha1 = scattering_residual(states)
    floor_run = _noise_floor_run()
    res_floor = scattering_residual(floor_run.checkpoints)
    floor = max(res_floor)
    _check(
        res_alpha1[-1] >= 10.0 * floor,
        f"last residual {res_alpha1[-1]:.3e} below 10x floor {floor:.3e}",
        failures,
    )
    detail = f"last alpha=1 residual {res_alpha1[-1]:.3e} vs kappa=0 floor {floor:.3e}"
    return not failures, detail if not failures else "; ".join(failures)


def criterion_10_linear_confinement() -> tuple:
    failures: list = []
    grid = GridSpec(1, 400.0, 4096)
    u0 = make_initial(grid, Gaussian(1.0, math.sqrt(2.0)))
    rep = linear_confinement_check(u0, (1.0, 2.0, 4.0, 8.0))
    _check(
        rep.max_violation <= 1e-8,
        f"confinement violation {rep.max_violation:.2e} > 1e-8",
        failures,
    )
    _check(
        rep.exterior_fraction[-1] <= 0.25,
        f"exterior fraction {rep.exterior_fraction[-1]:.3f} > 1/4",
        failures,
    )
    detail = (
        f"max violation {rep.max_violation:.2e}; exterior fraction at t=8: "
        f"{rep.exterior_fraction[-1]:.2e} (a = {rep.a:.4g})"
    )
    return not failures, detail if not failures else "; ".join(failures)


def criterion_11_median_radius_law() -> tuple:
    failures: list = []
    grid = GridSpec(1, 80.0, 2048)
    spec = Gaussian(1.0, math.sqrt(2.0))
    u0 = make_initial(grid, spec)
    a = 16.0 * gradient_norm(u0) / l2_norm(u0)
    probit75 = 0.6744897501960817  # half-mass quantile of the unit Gaussian
    rows = []
    for t in (0.0, 1.0, 2.0, 4.0):
        ut = linear_propagate(u0, t) if t > 0 else u0
        r = median_radius(ut)
        want = probit75 * math.sqrt(1.0 + t * t)
        rel = abs(r - want) / want
        rows.append((t, r, want, rel))
        _check(rel <= 0.01, f"R({t}) = {r:.4f} vs {want:.4f} ({rel:.2%})", failures)
        if t in (2.0, 4.0):
            _check(r <= a * t, f"R({t}) = {r:.3f} > a t = {a * t:.3f}", failures)
    detail = "; ".join(f"R({t:g})={r:.4f} (thy {w:.4f})" for t, r, w, _ in rows)
    return not failures, detail + f"; a={a:.3g}" if not failures else "; ".join(failures)


def criterion_12_pseudo_conformal_equivalence() -> tuple:
    failures: list = []
    grid = GridSpec(1, 80.0, 4096)
    # kappa = 0: the transform is exact for the free flow
    model0 = ModelParams(1, 3.0, 0.0 + 0.0j)
    cfg0 = SolverConfig(dt=1e-3, t_end=1.0, diagnostics_cadence=10**9)
    rep0 = equivalence_experiment(Gaussian(0.1, 1.0), grid, model0, cfg0, 0.5)
    _check(
        rep0.l2_discrepancy <= 1e-8,
        f"kappa=0 discrepancy {rep0.l2_discrepancy:.2e} > 1e-8",
        failures,
    )
    # nonlinear case at dt = 1e-4, plus the order-2 ratio at coarser steps
    model = ModelParams(1, 3.0, -1j)
    cfg = SolverConfig(dt=1e-4, t_end=1.0, diagnostics_cadence=10**9)
    rep = equivalence_experiment(Gaussian(0.1, 1.0), grid, model, cfg, 0.5)
    _check(
        rep.l2_discrepancy <= 1e-2,
        f"nonlinear discrepancy {rep.l2_discrepancy:.2e} > 1e-2",
        failures,
    )
    d_coarse = equivalence_experiment(
        Gaussian(0.1, 1.0), grid, model, replace(cfg, dt=2e-3), 0.5
    ).l2_discrepancy
    d_fine = equivalence_experiment(
        Gaussian(0.1, 1.0), grid, model, replace(cfg, dt=1e-3), 0.5
    ).l2_discrepancy
    ratio = d_coarse / d_fine
    _check(2.5 <= ratio <= 5.5, f"dt-halving ratio {ratio:.2f} not ~4", failures)
    detail = (
        f"kappa=0: {rep0.l2_discrepancy:.1e}; nonlinear at dt=1e-4: "
        f"{rep.l2_discrepancy:.1e}; halving ratio {ratio:.2f}"
    )
    return not failures, detail if not failures else "; ".join(failures)


def criterion_13_delta_documentation() -> tuple:
    documented = (
        "criteria 1" in DELTA_SUBSTITUTION_NOTE
        and "8" in DELTA_SUBSTITUTION_NOTE
        and "9" in DELTA_SUBSTITUTION_NOTE
        and "12" in DELTA_SUBSTITUTION_NOTE
    )
    return documented, DELTA_SUBSTITUTION_NOTE


CRITERIA: list = [
    (1, "exponent table", criterion_01_exponent_table),
    (2, "oracle closed forms", criterion_02_oracle_closed_forms),
    (3, "solver exactness and order", criterion_03_solver_exactness_and_order),
    (4, "mass law", criterion_04_mass_law),
    (5, "uniform-data blowup", criterion_05_uniform_blowup),
    (6, "gradient monotonicity", criterion_06_gradient_monotonicity),
    (7, "localized-mass machinery", criterion_07_localized_mass_machinery),
    (8, "Fujita dichotomy sweep", criterion_08_fujita_dichotomy),
    (9, "non-scattering below Fujita", criterion_09_non_scattering_floor),
    (10, "linear confinement", criterion_10_linear_confinement),
    (11, "median-radius law", criterion_11_median_radius_law),
    (12, "pseudo-conformal equivalence", criterion_12_pseudo_conformal_equivalence),
    (13, "existential-constant substitution documented", criterion_13_delta_documentation),
]


def run_criterion(number: int) -> CriterionResult:
    for num, name, fn in CRITERIA:
        if num == number:
            t0 = time.perf_counter()
            passed, details = fn()
            return CriterionResult(num, name, passed, details, time.perf_counter() - t0)
    raise KeyError(f"no criterion {number}")


def run_acceptance_suite(name_filter: Optional[str] = None, echo: bool = True) -> list:
    results = []
    for num, name, fn in CRITERIA:
        if name_filter and name_filter.lower() not in name.lower():
            continue
        t0 = time.perf_counter()
        try:
            passed, details = fn()
        except Exception as exc:  # a crashed criterion is a failed criterion
            passed, details = False, f"exception: {exc!r}"
        res = CriterionResult(num, name, passed, details, time.perf_counter() - t0)
        results.append(res)
        if echo:
            print(res.line(), flush=True)
    if echo and results:
        ok = sum(r.passed for r in results)
        print(f"{ok}/{len(results)} criteria passed")
        print(f"note: {DELTA_SUBSTITUTION_NOTE}")
    return results
