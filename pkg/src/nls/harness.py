"""Batch execution: single runs, parameter sweeps, and their artifacts.

Every run writes a trace CSV, optional field checkpoints, and a
summary.json echoing the fully resolved config; reruns with the same
config and seed are byte-for-byte reproducible on one machine (documented
caveat: floating-point determinism is not guaranteed across machines or
library builds).
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import json
import os
import time as _time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig, ExperimentKind
from .conformal import equivalence_experiment
from .diagnostics import (
    CutoffFamily,
    ProbeSet,
    default_lambdas,
    linear_confinement_check,
    rate_fit,
)
from .field import Gaussian, make_initial, save_checkpoint
from .solver import RunOutcome, RunStatus, run


def worker_count() -> int:
    env = os.environ.get("NLS_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator so property suites replay exactly."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[stream, 0, 0, 0]))


def _probe_set(cfg: ExperimentConfig) -> ProbeSet:
    p = cfg.probes
    cutoffs = None
    if p.localized_mass:
        lams = p.lambdas
        if not lams:
            width = getattr(cfg.initial, "width", 1.0)
            lams = default_lambdas(cfg.grid.box_length, width)
        cutoffs = CutoffFamily.build(cfg.grid.dim, lams)
    return ProbeSet(
        cutoffs=cutoffs,
        median_radius=p.median_radius,
        weighted_l2=p.weighted_l2,
        scatter=p.scatter,
        store_states_every=p.checkpoint_every,
    )


GNUPLOT_TEMPLATE = """\
# gnuplot script for {csv}; run: gnuplot -persist {name}
set datafile separator ','
set key autotitle columnhead outside
set logscale y
set xlabel 't'
plot '{csv}' using 1:2 with lines, \\
     '' using 1:4 with lines, \\
     '' using 1:5 with lines, \\
     '' using 1:6 with lines
"""


def execute_single(
    cfg: ExperimentConfig, out_dir: Optional[Path] = None, gnuplot: bool = False
) -> RunOutcome:
    """One solver run with the configured probes; writes artifacts if out_dir."""
    state0 = make_initial(cfg.grid, cfg.initial)
    outcome = run(state0, cfg.model, cfg.solver, probes=_probe_set(cfg))
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        outcome.trace.write_csv(out_dir / "trace.csv")
        for i, st in enumerate(outcome.checkpoints):
            save_checkpoint(out_dir / f"checkpoint_{i:04d}.nlsf", st, cfg.model)
        if gnuplot:
            (out_dir / "plot_trace.gp").write_text(
                GNUPLOT_TEMPLATE.format(csv="trace.csv", name="plot_trace.gp")
            )
    return outcome


def _summarize(cfg: ExperimentConfig, outcome: RunOutcome, wall: float) -> dict:
    from .config import resolved_config_dict

    tr = outcome.trace
    return {
        "code_version": __version__,
        "config": resolved_config_dict(cfg),
        "status": outcome.status.value,
        "blowup_time_estimate": outcome.blowup_time_estimate,
        "steps_accepted": outcome.steps_accepted,
        "steps_rejected": outcome.steps_rejected,
        "final_time": outcome.final_state.time,
        "final_mass": float(tr.mass[-1]),
        "final_grad_l2": float(tr.grad_l2[-1]),
        "final_linf": float(tr.linf[-1]),
        "K_T": float(tr.K_t[-1]),
        "wall_seconds": wall,
    }


def _classify_run(cfg: ExperimentConfig, outcome: RunOutcome) -> dict:
    """Scalar verdicts for one sweep cell of the blowup/scattering dichotomy."""
    row: dict = {
        "alpha": cfg.model.alpha,
        "kappa_im": cfg.model.kappa.imag,
        "status": outcome.status.value,
        "fitted_slope": None,
        "theoretical_exponent": None,
        "scatter_first": None,
        "scatter_last": None,
        "h1_final": None,
    }
    tr = outcome.trace
    row["h1_final"] = float(np.hypot(tr.mass[-1], tr.grad_l2[-1]))
    blown = outcome.status is RunStatus.BLOWUP_DETECTED
    if blown:
        row["classification"] = "BlowupDetected"
    else:
        classification = "Undetermined"
        fujita = 2.0 / cfg.model.dim
        if cfg.model.alpha < fujita:
            try:
                fit = rate_fit(tr, cfg.model, blowup_detected=blown)
                row["fitted_slope"] = fit.slope
                row["theoretical_exponent"] = fit.theoretical_exponent
                if fit.verdict:
                    classification = "GrowthConfirmed"
            except ValueError:
                pass
        else:
            res = tr.scatter_residual[~np.isnan(tr.scatter_residual)]
            if len(res) >= 2:
                row["scatter_first"] = float(res[0])
                row["scatter_last"] = float(res[-1])
                h1_bounded = tr.grad_l2[-1] <= 10.0 * max(tr.grad_l2[0], 1e-30)
                if res[-1] < res[0] and h1_bounded:
                    classification = "BoundedScattering"
        row["classification"] = classification
    return row


def dichotomy_table(rows: list, dim: int) -> str:
    """Text table of sweep verdicts; the Fujita column marks alpha vs 2/N."""
    fujita = 2.0 / dim
    lines = [
        f"{'alpha':>8}  {'vs 2/N':>6}  {'classification':<18}  "
        f"{'slope':>8}  {'scat_first':>11}  {'scat_last':>11}"
    ]
    for r in sorted(rows, key=lambda r: (r["alpha"], r.get("kappa_im", 0))):
        mark = "=" if r["alpha"] == fujita else ("<" if r["alpha"] < fujita else ">")
        sl = "-" if r["fitted_slope"] is None else f"{r['fitted_slope']:.3f}"
        sf = "-" if r["scatter_first"] is None else f"{r['scatter_first']:.3e}"
        sls = "-" if r["scatter_last"] is None else f"{r['scatter_last']:.3e}"
        cls = r["classification"] if mark != "=" else r["classification"] + "*"
        lines.append(
            f"{r['alpha']:>8.4g}  {mark:>6}  {cls:<18}  {sl:>8}  {sf:>11}  {sls:>11}"
        )
    if any(r["alpha"] == fujita for r in rows):
        lines.append("* alpha = 2/N exactly: threshold case, no theorem-backed verdict")
    return "\n".join(lines)


def _sweep_cell_config(cfg: ExperimentConfig, point: dict) -> ExperimentConfig:
    model = cfg.model
    grid = cfg.grid
    solver = cfg.solver
    initial = cfg.initial
    if "alpha" in point:
        model = dataclasses.replace(model, alpha=float(point["alpha"]))
    if "kappa_im" in point:
        model = dataclasses.replace(
            model, kappa=complex(model.kappa.real, float(point["kappa_im"]))
        )
    if "points" in point:
        grid = dataclasses.replace(grid, points=int(point["points"]))
    if "dt" in point:
        solver = dataclasses.replace(solver, dt=float(point["dt"]))
    if "amplitude" in point:
        if not isinstance(initial, Gaussian):
            raise ValueError("amplitude axis requires gaussian initial data")
        initial = dataclasses.replace(initial, amplitude=complex(point["amplitude"]))
    return dataclasses.replace(
        cfg, kind=ExperimentKind.SINGLE, model=model, grid=grid,
        solver=solver, initial=initial,
    )


def execute_sweep(cfg: ExperimentConfig, out_root: Path) -> list:
    """Run every sweep cell on a worker pool; returns per-cell verdict rows."""
    assert cfg.sweep is not None
    points = cfg.sweep.points()  # cap enforced at SweepSpec construction
    results: list = [None] * len(points)

    def one(i: int) -> dict:
        cell_cfg = _sweep_cell_config(cfg, points[i])
        cell_dir = out_root / f"run_{i:04d}"
        t0 = _time.perf_counter()
        outcome = execute_single(cell_cfg, cell_dir)
        wall = _time.perf_counter() - t0
        summary = _summarize(cell_cfg, outcome, wall)
        row = _classify_run(cell_cfg, outcome)
        row["point"] = points[i]
        summary["verdict"] = row
        (cell_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        return row

    with concurrent.futures.ThreadPoolExecutor(max_workers=worker_count()) as pool:
        futures = {pool.submit(one, i): i for i in range(len(points))}
        for fut in concurrent.futures.as_completed(futures):
            results[futures[fut]] = fut.result()
    return results


def run_experiment(cfg: ExperimentConfig, gnuplot: bool = False) -> int:
    """Dispatch on experiment kind; returns a process exit code (0 ok, 2 fail)."""
    out_root = Path(cfg.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    t0 = _time.perf_counter()
    if cfg.kind is ExperimentKind.SINGLE:
        outcome = execute_single(cfg, out_root, gnuplot=gnuplot)
        summary = _summarize(cfg, outcome, _time.perf_counter() - t0)
        (out_root / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        print(f"status: {outcome.status.value}  final t = {outcome.final_state.time:.6g}")
        if outcome.blowup_time_estimate is not None:
            print(f"blowup time estimate: {outcome.blowup_time_estimate:.10g}")
        return 0
    if cfg.kind is ExperimentKind.SWEEP:
        rows = execute_sweep(cfg, out_root)
        table = dichotomy_table(rows, cfg.model.dim)
        (out_root / "dichotomy.txt").write_text(table + "\n")
        (out_root / "sweep_rows.json").write_text(json.dumps(rows, indent=2) + "\n")
        print(table)
        return 0
    if cfg.kind is ExperimentKind.PCT_CHECK:
        report = equivalence_experiment(
            cfg.initial, cfg.grid, cfg.model, cfg.solver, cfg.pct_t_star
        )
        (out_root / "pct_report.json").write_text(
            json.dumps(report.as_dict(), indent=2) + "\n"
        )
        print(
            f"pct-check: t*={report.t_star:g} s*={report.s_star:g} "
            f"rel L2 discrepancy {report.l2_discrepancy:.3e}"
        )
        return 0
    if cfg.kind is ExperimentKind.LINEAR_CONFINEMENT:
        state0 = make_initial(cfg.grid, cfg.initial)
        rep = linear_confinement_check(state0, cfg.confinement_times)
        payload = {
            "times": list(rep.times),
            "a": rep.a,
            "lhs": rep.lhs.tolist(),
            "rhs": rep.rhs.tolist(),
            "max_violation": rep.max_violation,
            "exterior_fraction": rep.exterior_fraction.tolist(),
        }
        (out_root / "confinement.json").write_text(json.dumps(payload, indent=2) + "\n")
        print(
            f"confinement: max violation {rep.max_violation:.3e}, "
            f"exterior fraction at t={rep.times[-1]:g}: {rep.exterior_fraction[-1]:.4f}"
        )
        return 0
    if cfg.kind is ExperimentKind.ACCEPTANCE_SUITE:
        from .acceptance import run_acceptance_suite

        results = run_acceptance_suite()
        ok = all(r.passed for r in results)
        return 0 if ok else 3
    raise ValueError(f"unhandled experiment kind {cfg.kind}")
