"""
Experiment orchestration behind the command line.

Each run writes one directory with ``config.json``, command-specific CSV
tables, a deterministic ``summary.json`` and a separate ``timing.json`` holding
wall-clock figures. Floats are written in shortest round-trip form.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, build_coefficient, build_initial, expand_sweep
from .dynamics import CHParams, detect_breaking, simulate
from .peakons import PeakonState, asymptotic_momenta, simulate_peakons
from .scaling import (
    ArbitraryVorticity,
    DroppedDepthFactor,
    PhysicalParams,
    Profile,
    Sample,
    compute_kappa,
    delta_removal,
    eps_scale,
    linear_solution,
    nondim_map,
    redim_map,
    scale_params,
    verify_linear_system,
)
from .spectral import Grid1D

logger = logging.getLogger(__name__)

__all__ = ["EXIT_OK", "EXIT_VALIDATION", "EXIT_RUNTIME", "EXIT_VERIFY", "RunOutcome", "run", "fmt"]

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3


class OutputError(OSError):
    pass


def fmt(v) -> str:
    """Shortest round-trip decimal; ``None`` becomes an empty field."""
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _clean(obj):
    # JSON-safe copy: numpy scalars to Python, non-finite floats to strings
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_json(path: Path, data) -> None:
    _write_text(path, json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(r if isinstance(r, str) else fmt(r) for r in row) for row in rows)
    _write_text(path, "\n".join(lines) + "\n")


@dataclass
class RunOutcome:
    status: int
    summary: dict
    out_dir: Path
    figures: list[str] = field(default_factory=list)


def _drift(series: list[float | None]) -> dict:
    vals = [v for v in series if v is not None]
    if not vals:
        return {"abs": None, "rel": None}
    ref = vals[0]
    d = max(abs(v - ref) for v in vals)
    # a reference at roundoff level makes the relative figure meaningless
    meaningful = abs(ref) > 1e-12 * max(1.0, max(abs(v) for v in vals))
    return {"abs": d, "rel": d / abs(ref) if meaningful else None}


# --- commands -------------------------------------------------------------

def _run_simulate(cfg: RunConfig, out: Path, fail_on_breaking: bool):
    grid = Grid1D(cfg.grid.L, cfg.grid.n)
    if cfg.equation.F is not None:
        params = CHParams.generalized(build_coefficient(cfg, grid), grid, dealias=cfg.equation.dealias)
    else:
        params = CHParams.classic(cfg.kappa, grid, dealias=cfg.equation.dealias)
    u0 = build_initial(cfg, grid)
    res = simulate(u0, params, cfg.dt, cfg.T, cfg.record_every,
                   stop_below_slope=cfg.breaking_threshold if fail_on_breaking else None)
    breaking = detect_breaking(res.records, cfg.breaking_threshold)
    x = grid.x
    _write_csv(out / "trajectory.csv", ["t", "x", "u"],
               ((s.t, xi, ui) for s in res.trajectory for xi, ui in zip(x, s.values)))
    _write_csv(out / "diagnostics.csv", ["t", "M0", "E", "H3", "min_slope", "max_abs_u"],
               ((r.t, r.M0, r.E, r.H3, r.min_slope, r.max_abs_u) for r in res.records))
    summary = {
        "equation": "classic" if params.is_classic else "generalized",
        "kappa": params.kappa,
        "n": grid.n,
        "L": grid.L,
        "final_time": res.final.t,
        "records": len(res.records),
        "drift": {k: _drift([getattr(r, k) for r in res.records]) for k in ("M0", "E", "H3")},
        "breaking_threshold": cfg.breaking_threshold,
        "breaking_time": breaking,
        "aborted": res.aborted,
        "warnings": res.warnings,
    }
    status = EXIT_OK
    if res.aborted or (fail_on_breaking and breaking is not None):
        status = EXIT_RUNTIME
    return status, summary, res


def _run_peakon(cfg: RunConfig, out: Path):
    pc = cfg.peakon
    s0 = PeakonState(pc.q, pc.p, L=pc.L)
    run = simulate_peakons(s0, pc.dt, pc.T, pc.record_every)
    _write_csv(out / "peakons.csv", ["t", "index", "q", "p"],
               ((s.t, i, qi, pi) for s in run.states for i, (qi, pi) in enumerate(zip(s.q, s.p))))
    _write_csv(out / "diagnostics.csv", ["t", "H"], zip(run.times, run.H))
    summary = {
        "n_peakons": s0.n,
        "L": pc.L,
        "final_time": run.final.t,
        "final_q": run.final.q,
        "final_p": run.final.p,
        "H_drift": _drift(run.H),
        "collision_time": run.collision_time,
        "aborted": run.aborted,
    }
    if pc.L is None and s0.n <= 2:
        summary["asymptotic_momenta"] = asymptotic_momenta(s0)
    return (EXIT_RUNTIME if run.aborted else EXIT_OK), summary, run


def _physical(cfg: RunConfig) -> PhysicalParams:
    return PhysicalParams(**cfg.physical.model_dump())


def _run_scale(cfg: RunConfig, out: Path):
    p = _physical(cfg)
    sp = scale_params(p)
    rng = np.random.default_rng(cfg.seed)
    k = 16
    dim = Sample(x=rng.uniform(0, 3 * p.lam, k), z=rng.uniform(0, p.h0, k), t=rng.uniform(0, 10, k),
                 u=rng.normal(0, 0.1, k), v=rng.normal(0, 0.01, k), eta=rng.normal(0, p.a, k),
                 p=p.p0 + rng.normal(0, 50.0, k))
    fwd = delta_removal(eps_scale(nondim_map(p, dim), sp.eps), sp.eps, sp.delta)
    back = redim_map(p, eps_scale(delta_removal(fwd, sp.eps, sp.delta, inverse=True), sp.eps, inverse=True))
    rel = max(float(np.max(np.abs(np.asarray(b) - np.asarray(a)) / np.maximum(np.abs(a), 1e-300)))
              for a, b in zip(dim.values().values(), back.values().values()))
    summary = {
        "eps": sp.eps,
        "delta": sp.delta,
        "delta_removal_factor": float(np.sqrt(sp.eps) / sp.delta),
        "kappa_irrotational": compute_kappa("irrotational", p),
        "kappa_shear": compute_kappa("shear", p),
        "kappa_shear_formula": "omega0*sqrt(g*h0)/g + c0",
        "physical": cfg.physical.model_dump(),
        "round_trip_max_rel": rel,
        "round_trip_passed": rel <= 1e-12,
    }
    _write_csv(out / "scaling.csv", ["quantity", "value"],
               [(k_, summary[k_]) for k_ in ("eps", "delta", "delta_removal_factor",
                                             "kappa_irrotational", "kappa_shear", "round_trip_max_rel")])
    return (EXIT_OK if rel <= 1e-12 else EXIT_VERIFY), summary, None


def default_arbitrary(c0: float) -> ArbitraryVorticity:
    """``F = c0 + 0.3 cos(x)(z - 1/2)``, which satisfies the depth closure."""
    return ArbitraryVorticity(lambda x, z: c0 + 0.3 * np.cos(x) * (z - 0.5),
                              lambda x, z: -0.3 * np.sin(x) * (z - 0.5))


def _run_verify_linear(cfg: RunConfig, out: Path):
    p = _physical(cfg)
    lc = cfg.linear
    grid = Grid1D(2 * np.pi, lc.n)
    f = Profile.sine(lc.amplitude)
    rows, regimes, passed = [], {}, True
    for regime in ("irrotational", "shear", "arbitrary"):
        coeffs = default_arbitrary(p.c0) if regime == "arbitrary" else None
        sol = linear_solution(regime, f, grid.x, 0.5, 0.0, p, coeffs)
        rep = verify_linear_system(sol, grid, lc.times, lc.nz, lc.tolerance)
        regimes[regime] = {"worst": rep.worst, "passed": rep.passed}
        passed &= rep.passed
        rows.extend((regime, name, val) for name, val in rep.residuals.items())
    ctrl = verify_linear_system(DroppedDepthFactor.of(linear_solution("irrotational", f, grid.x, 0.5, 0.0, p)),
                                grid, lc.times, lc.nz, lc.tolerance)
    control_ok = ctrl.residuals["mass"] >= 1e-2
    rows.extend(("negative_control", name, val) for name, val in ctrl.residuals.items())
    _write_csv(out / "residuals.csv", ["regime", "check", "residual"], rows)
    summary = {"regimes": regimes, "negative_control_mass": ctrl.residuals["mass"],
               "negative_control_detected": control_ok, "tolerance": lc.tolerance,
               "passed": passed and control_ok}
    return (EXIT_OK if summary["passed"] else EXIT_VERIFY), summary, None


def _run_verify_variational(cfg: RunConfig, out: Path):
    from . import suites

    vc = cfg.variational
    grid = Grid1D(2 * np.pi, vc.n)
    rows = suites.identity_convergence(vc.n, vc.m_values, vc.eps)
    orders = suites.observed_orders(rows)
    _write_csv(out / "identity.csv", ["offset", "m", "lhs", "rhs", "gap", "estimate"],
               ((r.offset, r.m, r.lhs, r.rhs, r.gap, r.estimate) for r in rows))
    _write_csv(out / "orders.csv", ["offset", "m_coarse", "order"],
               ((off, m, o) for (off, m), o in sorted(orders.items())))
    at_m = [r for r in rows if r.m == vc.gap_at_m]
    gap_ok = bool(at_m) and all(r.gap <= vc.gap_tolerance for r in at_m)
    order_ok = bool(orders) and min(orders.values()) >= vc.min_order

    rng = np.random.default_rng(cfg.seed)
    oracle = {"inverse": 0.0, "velocity": 0.0, "velocity_gradient": 0.0}
    for _ in range(vc.oracle_pairs):
        for k_, v in suites.variation_oracles(*suites.random_pair(grid, rng)).items():
            oracle[k_] = max(oracle[k_], v)
    limits = {"inverse": 1e-5, "velocity": 1e-5, "velocity_gradient": 1e-4}
    oracle_ok = all(oracle[k_] <= limits[k_] for k_ in limits)
    path = suites.smooth_path(grid, 64)
    inv = max(suites.right_invariance_gap(path, off, suites.random_diffeo(grid, rng))
              for off in suites.default_offsets(grid) for _ in range(5))
    inv_ok = inv <= 1e-8
    summary = {
        "gap_at_m": vc.gap_at_m,
        "gap_tolerance": vc.gap_tolerance,
        "max_gap_at_m": max((r.gap for r in at_m), default=None),
        "gap_passed": gap_ok,
        "min_observed_order": min(orders.values()) if orders else None,
        "order_threshold": vc.min_order,
        "order_passed": order_ok,
        "oracle_max": oracle,
        "oracle_limits": limits,
        "oracle_passed": oracle_ok,
        "right_invariance_max": inv,
        "right_invariance_passed": inv_ok,
        "seed": cfg.seed,
    }
    summary["passed"] = gap_ok and order_ok and oracle_ok and inv_ok
    return (EXIT_OK if summary["passed"] else EXIT_VERIFY), summary, rows


_COMMANDS = {
    "peakon": _run_peakon,
    "scale": _run_scale,
    "verify-linear": _run_verify_linear,
    "verify-variational": _run_verify_variational,
}


def _child(args):
    data, out, fail_on_breaking, plot = args
    from .config import parse_config

    cfg = parse_config(data)
    try:
        res = run(cfg, out, workers=1, fail_on_breaking=fail_on_breaking, plot=plot)
        return {"status": res.status, "error": None}
    except Exception as exc:  # a failing child must not take its siblings down
        return {"status": EXIT_RUNTIME, "error": f"{type(exc).__name__}: {exc}"}


def _run_sweep(cfg: RunConfig, out: Path, workers: int, fail_on_breaking: bool, plot: bool):
    children = expand_sweep(cfg)
    jobs = [(c.model_dump(mode="json"), str(out / f"child_{i:03d}"), fail_on_breaking, plot)
            for i, (_, c) in enumerate(children)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_child, jobs))
    else:
        results = [_child(j) for j in jobs]
    entries = []
    for i, ((assign, _), r) in enumerate(zip(children, results)):
        entries.append({"child": f"child_{i:03d}", "assignment": assign, **r})
    failures = [e["child"] for e in entries if e["status"] != EXIT_OK]
    summary = {"command": cfg.sweep.command, "children": entries, "failures": failures}
    _write_csv(out / "sweep.csv", ["child", "status", *[a.parameter for a in cfg.sweep.axes]],
               ([e["child"], e["status"], *[json.dumps(v) for v in e["assignment"].values()]]
                for e in entries))
    worst = max((e["status"] for e in entries), default=EXIT_OK)
    return worst, summary, None


def run(cfg: RunConfig, out_dir, workers: int = 1, fail_on_breaking: bool = False,
        plot: bool = False, seed: int | None = None) -> RunOutcome:
    """Execute one configuration and write its artifacts under ``out_dir``."""
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": int(seed)})
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    _write_text(out / "config.json", cfg.to_json())
    start = time.perf_counter()
    payload = None
    if cfg.command == "simulate":
        status, summary, payload = _run_simulate(cfg, out, fail_on_breaking)
    elif cfg.command == "sweep":
        status, summary, payload = _run_sweep(cfg, out, max(1, int(workers)), fail_on_breaking, plot)
    else:
        status, summary, payload = _COMMANDS[cfg.command](cfg, out)
    summary = {"command": cfg.command, "exit_status": status, **summary}
    _write_json(out / "summary.json", summary)
    _write_json(out / "timing.json", {"wall_clock_seconds": time.perf_counter() - start})
    figures = []
    if plot and cfg.command != "sweep":
        from .plotting import render

        figures = render(cfg.command, out, payload)
    return RunOutcome(status, summary, out, figures)


def validation_status(exc: Exception) -> int:
    return EXIT_VALIDATION if isinstance(exc, (ConfigError, OutputError)) else EXIT_RUNTIME
