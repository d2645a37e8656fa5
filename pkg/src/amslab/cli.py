"""Command line front end: ``amslab <command> [--config PATH] [--out DIR] ...``.

Exit codes: 0 success, 1 identity check failed, 2 geometry, configuration
or planning rejection, 3 synthesis failure, 4 statistical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .coupling import induced_classical, loglog_fit
from .errors import AmslabError, GeometryError, PlanningError, SynthesisError
from .gaussian import (coherent_state, field_moment, induced_power_expectation,
                       induced_weyl_expectation, probe_efforts, vacuum_state, weyl_expectation)
from .greenops import advanced_green, pauli_jordan
from .lattice import LatticeFunction
from .measure import coverage_experiment, coverage_threshold, plan_confidence
from .synthesis import synthesize_scheme
from .swap import (GaugeProfile, conjugation_deviation, double_rotation_check,
                   swap_induced_weyl, swap_scatter_check)

EXIT_OK, EXIT_CHECK, EXIT_GEOMETRY, EXIT_SYNTHESIS, EXIT_STATISTICS = 0, 1, 2, 3, 4
IDENTITY_TOL = 1e-10


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(path: Path, header, rows, footer=()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    for name, value in footer:
        buf.write(f"# {name},{fmt(value)}\n")
    text = buf.getvalue()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return text


def _pmap(fn, items, threads: int):
    """Ordered map; ``threads`` only changes scheduling."""
    items = list(items)
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def build_scheme(cfg: ExperimentConfig, order_k=None):
    cfg.validate_geometry()
    return synthesize_scheme(cfg.system(), cfg.probe(), cfg.target_function(), cfg.N, cfg.L,
                             order_k or cfg.order_k, cut_width=cfg.cut_width,
                             ramp=cfg.window_ramp, phi_min=cfg.phi_min)


def _rel(a: LatticeFunction, b: LatticeFunction) -> float:
    scale = max(a.sup_norm(), b.sup_norm(), 1e-300)
    return (a - b).sup_norm() / scale


# ---------------------------------------------------------------------------
# commands


def cmd_synth(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    sc = build_scheme(cfg)
    S, P = sc.system, cfg.probe()
    checks = [
        ("E_S f_tilde = E_S f", _rel(pauli_jordan(S, sc.f_tilde), pauli_jordan(S, sc.target_f))),
        ("E_P h = phi", _rel(pauli_jordan(P, sc.h.component(0)), sc.probe_solution_phi.component(0))),
        ("-rho E-_P h = f_tilde", _rel(-(sc.rho.component(0) * advanced_green(P, sc.h.component(0))),
                                       sc.f_tilde)),
    ]
    out.mkdir(parents=True, exist_ok=True)
    (out / "scheme.json").write_text(sc.to_json())
    lines = [f"{name}: {fmt(dev)}" for name, dev in checks]
    report = "\n".join(["relative max deviation of each identity"] + lines) + "\n"
    (out / "synth_report.txt").write_text(report)
    sys.stdout.write(report)
    return EXIT_OK if all(d <= IDENTITY_TOL for _, d in checks) else EXIT_CHECK


def cmd_order_scan(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    sc = build_scheme(cfg)
    lams = sorted(cfg.lambdas, reverse=True)
    probe_vac = vacuum_state(sc.probe)

    def row(lam):
        res = induced_classical(sc.coupled, lam, sc.h)
        resid = (res.f_lambda - sc.f_tilde).sup_norm()
        eff = math.exp(probe_efforts(sc, lam, probe_vac)[0])
        return (lam, resid, eff)

    rows = _pmap(row, lams, threads)
    slope, _ = loglog_fit([r[0] for r in rows], [r[1] for r in rows])
    text = write_csv(out / "order_scan.csv", ["lambda", "residual_sup", "eff_value"], rows,
                     [("slope", slope)])
    sys.stdout.write(text)
    return EXIT_OK


def system_state(cfg: ExperimentConfig):
    vac = vacuum_state(cfg.system())
    if cfg.shift.amplitude == 0:
        return vac
    return coherent_state(vac, cfg.shift_function())


QUANTUM_COLUMNS = ["lambda", "weyl_error", "moment1_error", "moment2_error", "moment3_error",
                   "moment4_error", "eff_field", "log_eff_weyl"]


def cmd_quantum_scan(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    sc = build_scheme(cfg)
    lams = sorted(cfg.lambdas, reverse=True)
    sys_state = system_state(cfg)
    probe_vac = vacuum_state(sc.probe)
    w0 = weyl_expectation(sys_state, sc.target_f)
    m0 = [field_moment(sys_state, sc.target_f, n) for n in range(5)]

    def row(lam):
        iw = induced_weyl_expectation(sc, lam, sys_state, probe_vac)
        errs = [abs(induced_power_expectation(sc, lam, n, sys_state, probe_vac) - m0[n])
                for n in range(1, 5)]
        le_field, le_weyl = probe_efforts(sc, lam, probe_vac)
        return (lam, abs(iw.rescaled - w0), *errs, math.exp(le_field), le_weyl)

    rows = _pmap(row, lams, threads)
    footer = []
    for i, name in enumerate(QUANTUM_COLUMNS[1:6], start=1):
        vals = [r[i] for r in rows]
        if all(v == 0 for v in vals):
            footer.append((name + "_slope", 0.0))
            continue
        try:
            footer.append((name + "_slope", loglog_fit(lams, vals)[0]))
        except ArithmeticError:
            footer.append((name + "_slope", float("nan")))
    text = write_csv(out / "quantum_scan.csv", QUANTUM_COLUMNS, rows, footer)
    sys.stdout.write(text)
    return EXIT_OK


MEASURE_COLUMNS = ["lambda", "n_trials", "epsilon", "delta", "bias_constant",
                   "empirical_coverage", "mean_of_means", "analytic_mean", "analytic_variance"]


def cmd_measure(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    sc = build_scheme(cfg)
    plan = plan_confidence(sc, cfg.epsilon, cfg.delta, cfg.lam, system_state(cfg),
                           vacuum_state(sc.probe), cfg.seed)
    cov = coverage_experiment(plan, cfg.replications, threads)
    row = (plan.lam, plan.n_trials, plan.epsilon, plan.delta, plan.bias_constant,
           cov.coverage, cov.mean_of_means, plan.analytic_mean, plan.analytic_variance)
    text = write_csv(out / "measure.csv", MEASURE_COLUMNS, [row],
                     [("true_value", plan.true_value),
                      ("coverage_threshold", coverage_threshold(plan.delta, cfg.replications))])
    sys.stdout.write(text)
    ok = cov.coverage >= coverage_threshold(plan.delta, cfg.replications)
    return EXIT_OK if ok else EXIT_STATISTICS


def cmd_swap_demo(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    if cfg.system_mass != cfg.probe_mass:
        raise GeometryError("the swap needs equal system and probe masses")
    P = cfg.system()
    g = P.grid
    profile = GaugeProfile.ramp(g, cfg.sigma_minus, cfg.sigma_plus)
    h = cfg.swap_source_function()
    rng = np.random.default_rng(cfg.seed)
    ts = h.time_support()
    if ts is None or ts[0] <= cfg.sigma_plus:
        raise GeometryError("swap source must lie after sigma_plus")
    noise = np.zeros((1,) + g.shape, dtype=complex)
    lo, hi = ts
    noise[0, lo:hi + 1] = (rng.standard_normal((hi - lo + 1, g.nx))
                           + 1j * rng.standard_normal((hi - lo + 1, g.nx)))
    F = LatticeFunction(g, noise)
    vac = vacuum_state(P)
    sys_state = system_state(cfg)
    probe_alt = coherent_state(vac, cfg.shift_function(), "coherent probe")
    w_vac = swap_induced_weyl(P, profile, h, sys_state, vac)
    w_alt = swap_induced_weyl(P, profile, h, sys_state, probe_alt)
    checks = [
        ("conjugation E_Q = exp(-i chi) E_P exp(i chi)", conjugation_deviation(P, profile, F)),
        ("past swap E_Q F + i E_P F", swap_scatter_check(P, profile, F)),
        ("double rotation E_Q F + E_P F", double_rotation_check(P, cfg.sigma_minus, cfg.sigma_plus, F)),
        ("induced Weyl vs omega(W_S(h))", abs(w_vac.cross_check - w_vac.value)),
        ("probe-state independence", abs(w_vac.cross_check - w_alt.cross_check)),
    ]
    lines = [f"{name}: {fmt(dev)}" for name, dev in checks]
    report = "\n".join(["max deviation of each swap identity"] + lines) + "\n"
    out.mkdir(parents=True, exist_ok=True)
    (out / "swap_report.txt").write_text(report)
    sys.stdout.write(report)
    return EXIT_OK if all(d <= IDENTITY_TOL for _, d in checks) else EXIT_CHECK


COMMANDS = {
    "synth": cmd_synth,
    "order-scan": cmd_order_scan,
    "quantum-scan": cmd_quantum_scan,
    "measure": cmd_measure,
    "swap-demo": cmd_swap_demo,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="amslab",
                                 description="Asymptotic measurement schemes on a lattice cylinder")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="INI file layered over the packaged defaults")
    ap.add_argument("--out", help="output directory (overrides [output] directory)")
    ap.add_argument("--seed", type=int, help="override [statistics] seed")
    ap.add_argument("--threads", type=int, default=1, help="worker threads (speed only)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = Path(args.out or cfg.output_dir)
        return COMMANDS[args.command](cfg, out, max(1, args.threads))
    except (GeometryError, PlanningError, ConfigError, ArithmeticError, ValueError) as exc:
        print(f"amslab: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except SynthesisError as exc:
        print(f"amslab: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS
    except AmslabError as exc:
        # grid mismatches and margin violations are configuration problems too
        print(f"amslab: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY


if __name__ == "__main__":
    sys.exit(main())
