"""End-to-end acceptance checks; each test logs one PASS/FAIL line with its numbers."""
import time
from importlib.resources import files

import numpy as np

from amslab.cli import main
from amslab.config import load_config
from amslab.coupling import born_expand_induced, induced_classical, loglog_fit, residual_order_fit
from amslab.gaussian import (SmearedField, beta, beta_solutions, coherent_state,
                             effort, field_moment, induced_power_expectation,
                             induced_weyl_expectation, one_point,
                             polarization_moment, probe_efforts, vacuum_state, weyl_expectation)
from amslab.greenops import (FieldOperatorSpec, advanced_green, apply_operator, pauli_jordan,
                             retarded_green)
from amslab.lattice import LatticeFunction, Region, SpacetimeGrid, causal_future, causal_past
from amslab.measure import (coverage_experiment, coverage_threshold, outcome_distribution,
                            plan_confidence, variance_expansion)
from amslab.swap import (GaugeProfile, conjugation_deviation, double_rotation_check,
                         swap_induced_weyl, swap_scatter_check)
from amslab.synthesis import combine_schemes, synthesize_scheme
from amslab.targets import bump

from conftest import LAMBDAS, make_target, random_source, record
from oracles import symmetrized_expectation


def in_range(x, lo, hi):
    return lo <= x <= hi


def default_setup():
    g = SpacetimeGrid(64, 64, 0.05, 0.1)
    S = FieldOperatorSpec(g, (1.0,), "system")
    P = FieldOperatorSpec(g, (1.0,), "probe")
    N, L = Region.box(13, 29, 20, 25), Region.slab(44, 60)
    return g, S, P, N, L


def test_01_exact_green_identities():
    t0 = time.perf_counter()
    g, S, P, N, L = default_setup()
    f = make_target(g)
    sc = synthesize_scheme(S, P, f, N, L)
    rng = np.random.default_rng(0)
    src = random_source(g, rng, 10, 50)
    devs = {}
    supports_ok = True
    for name, green, cone in (("P E+ f - f", retarded_green, causal_future),
                              ("P E- f - f", advanced_green, causal_past)):
        u = green(S, src)
        devs[name] = float(np.max(np.abs(apply_operator(S, u).values[:, 1:-1]
                                         - src.values[:, 1:-1])))
        supports_ok &= not np.any(u.support_mask() & ~cone(g, src.support_mask()))
    devs["E P g"] = pauli_jordan(P, apply_operator(P, random_source(g, rng, 10, 50))).sup_norm()
    devs["E_S f~ - E_S f"] = (pauli_jordan(S, sc.f_tilde) - pauli_jordan(S, f)).sup_norm()
    devs["E_P h - phi"] = (pauli_jordan(P, sc.h) - sc.probe_solution_phi).sup_norm()
    devs["-rho E-_P h - f~"] = (-(sc.rho * advanced_green(P, sc.h)) - sc.f_tilde).sup_norm()
    elapsed = time.perf_counter() - t0
    worst = max(devs.values())
    ok = worst <= 1e-10 and supports_ok and elapsed < 1.0
    assert record(1, ok, "exact Green identities",
                  f"max deviation {worst:.2e} (tol 1e-10), supports inside cones {supports_ok}, "
                  f"{elapsed:.2f} s (limit 1 s)")


def test_02_classical_order_two():
    t0 = time.perf_counter()
    g, S, P, N, L = default_setup()
    sc = synthesize_scheme(S, P, make_target(g), N, L)
    slope, _, _ = residual_order_fit(sc.coupled, sc.h, sc.f_tilde, LAMBDAS)
    elapsed = time.perf_counter() - t0
    ok = in_range(slope, 1.9, 2.1) and elapsed < 5.0
    assert record(2, ok, "classical order 2", f"slope {slope:.6f} (range [1.9, 2.1]), "
                  f"{elapsed:.2f} s (limit 5 s)")


def test_03_order_2k_construction():
    t0 = time.perf_counter()
    g, S, P, N, L = default_setup()
    sc2 = synthesize_scheme(S, P, make_target(g), N, L, order_k=2)
    c2 = born_expand_induced(sc2.coupled, sc2.h, 2).f_coefficient(2).sup_norm()
    slope2, _, _ = residual_order_fit(sc2.coupled, sc2.h, sc2.f_tilde, LAMBDAS)
    cfg = load_config(str(files("amslab") / "data" / "order_k3.ini"))
    sc3 = synthesize_scheme(cfg.system(), cfg.probe(), cfg.target_function(), cfg.N, cfg.L,
                            order_k=3, cut_width=cfg.cut_width)
    slope3, _, _ = residual_order_fit(sc3.coupled, sc3.h, sc3.f_tilde, LAMBDAS)
    elapsed = time.perf_counter() - t0
    ok = (c2 <= 1e-12 and in_range(slope2, 3.8, 4.2) and in_range(slope3, 5.6, 6.4)
          and elapsed < 60.0)
    assert record(3, ok, "order 2k construction",
                  f"k=2 lambda^2 coefficient {c2:.2e} (tol 1e-12), k=2 slope {slope2:.6f} "
                  f"(range [3.8, 4.2]), k=3 slope {slope3:.6f} (range [5.6, 6.4]), "
                  f"{elapsed:.2f} s (limit 60 s)")


def test_04_odd_power_cancellation():
    g, S, P, N, L = default_setup()
    single = synthesize_scheme(S, P, make_target(g), N, L)
    parts = [synthesize_scheme(S, P, bump(g, 21, x, 3, 2, a), N, L, band=(44, 50))
             for x, a in ((29, 30.0), (35, -20.0))]
    pair = combine_schemes(parts)
    worst = 0.0
    for sc in (single, pair):
        assert all(w == 1 for w in sc.coupled.weight_exponents)
        series = born_expand_induced(sc.coupled, sc.h, 4)
        worst = max(worst, *(series.f_coefficient(q).sup_norm() for q in (1, 3)))
    assert record(4, worst <= 1e-12, "odd-power cancellation",
                  f"max odd coefficient {worst:.2e} over one- and two-probe schemes (tol 1e-12)")


def test_05_scheme_combination():
    g, S, P, N, L = default_setup()
    parts = [synthesize_scheme(S, P, bump(g, 21, x, 3, 2, a), N, L, band=(44, 50))
             for x, a in ((29, 30.0), (35, -20.0))]
    comb = combine_schemes(parts)
    total = parts[0].f_tilde + parts[1].f_tilde
    slope, _, _ = residual_order_fit(comb.coupled, comb.h, total, LAMBDAS)
    lam = 0.2
    joint = induced_classical(comb.coupled, lam, comb.h).f_lambda
    separate = (induced_classical(parts[0].coupled, lam, parts[0].h).f_lambda
                + induced_classical(parts[1].coupled, lam, parts[1].h).f_lambda)
    diff = (joint - separate).sup_norm()
    ok = in_range(slope, 1.9, 2.1) and diff >= 1e-6
    assert record(5, ok, "scheme combination",
                  f"slope to the summed targets {slope:.6f} (range [1.9, 2.1]), "
                  f"interaction at lambda=0.2 {diff:.3e} (needs >= 1e-6)")


def test_06_quasi_free_state():
    g, S, P, N, L = default_setup()
    st = vacuum_state(S)
    rng = np.random.default_rng(6)
    worst_ratio = 0.0
    for _ in range(1000):
        f = random_source(g, rng, 10, 50, x_lo=int(rng.integers(0, 32)), x_hi=int(rng.integers(33, 64)))
        h = random_source(g, rng, 10, 50)
        E = float(np.real(f.inner(pauli_jordan(S, h))))
        worst_ratio = max(worst_ratio, E**2 / (beta(st, f, f) * beta(st, h, h)))
    f, h = random_source(g, rng, 20, 40), random_source(g, rng, 25, 45)
    u, v = pauli_jordan(S, f), pauli_jordan(S, h)
    vals = [beta_solutions(st, u, v, t) for t in (2, 17, 32, 50, 61)]
    slice_dev = (max(vals) - min(vals)) / abs(vals[0])
    x = np.arange(g.nx)
    prof = np.cos(2 * np.pi * 3 * x / g.nx)
    pair = []
    for _ in range(2):
        w = np.zeros((1,) + g.shape)
        w[0, 20:40] = rng.standard_normal((20, 1)) * prof
        pair.append(LatticeFunction(g, w))
    bff, bfh = beta(st, pair[0], pair[0]), beta(st, pair[0], pair[1])
    h_perp = pair[1] - pair[0] * (bfh / bff)
    E = float(np.real(pair[0].inner(pauli_jordan(S, pair[1]))))
    sat = abs(E**2 / (bff * beta(st, h_perp, h_perp)) - 1.0)
    ok = worst_ratio <= 1.0 and slice_dev <= 1e-10 and sat <= 1e-8
    assert record(6, ok, "quasi-free state validity",
                  f"max |E|^2/(beta beta) over 1000 pairs {worst_ratio:.6f} (needs <= 1), "
                  f"slice dependence {slice_dev:.2e} (tol 1e-10), "
                  f"single-mode saturation error {sat:.2e} (tol 1e-8)")


def test_07_quantum_convergence():
    t0 = time.perf_counter()
    g, S, P, N, L = default_setup()
    sc = synthesize_scheme(S, P, make_target(g), N, L)
    vac_s, vac_p = vacuum_state(S), vacuum_state(P)
    shifted = coherent_state(vac_s, bump(g, 8, 32, 3, 6, 10.0))
    w0 = weyl_expectation(shifted, sc.f_tilde)
    weyl_err = [abs(induced_weyl_expectation(sc, lam, shifted, vac_p).rescaled - w0)
                for lam in LAMBDAS]
    slopes = {"weyl": loglog_fit(LAMBDAS, weyl_err)[0]}
    for n in (1, 2, 4):
        exact = field_moment(shifted, sc.f_tilde, n)
        errs = [abs(induced_power_expectation(sc, lam, n, shifted, vac_p) - exact)
                for lam in LAMBDAS]
        slopes[f"n={n}"] = loglog_fit(LAMBDAS, errs)[0]
    odd = max(abs(induced_power_expectation(sc, lam, 3, vac_s, vac_p)) for lam in LAMBDAS)
    elapsed = time.perf_counter() - t0
    ok = all(in_range(s, 1.9, 2.1) for s in slopes.values()) and odd == 0.0 and elapsed < 10.0
    detail = ", ".join(f"{k} slope {v:.4f}" for k, v in slopes.items())
    assert record(7, ok, "quantum convergence",
                  f"{detail} (range [1.9, 2.1]), unshifted n=3 max {odd:.1e} (needs 0), "
                  f"{elapsed:.2f} s (limit 10 s)")


def test_08_effort_law():
    g, S, P, N, L = default_setup()
    sc = synthesize_scheme(S, P, make_target(g), N, L)
    pv = vacuum_state(P)
    base = effort(pv, SmearedField(sc.h))
    rel = max(abs(effort(pv, SmearedField(sc.h * (1 / lam))) * lam / base - 1.0) for lam in LAMBDAS)
    pow2 = all(effort(pv, SmearedField(sc.h * (1 / lam))) == base / lam
               for lam in (0.5, 0.25, 0.125, 0.0625))
    weyl = [probe_efforts(sc, lam, pv)[1] for lam in LAMBDAS]
    increasing = bool(np.all(np.diff(weyl) > 0))
    ok = rel <= 1e-13 and pow2 and increasing
    assert record(8, ok, "effort law",
                  f"max relative deviation from 1/lambda {rel:.1e} (rounding tol 1e-13), "
                  f"bit-exact for powers of two {pow2}, log rescaled-Weyl effort "
                  f"{weyl[0]:.3g} -> {weyl[-1]:.4g} strictly increasing {increasing}")


def test_09_variance_decomposition():
    t0 = time.perf_counter()
    g, S, P, N, L = default_setup()
    sc = synthesize_scheme(S, P, make_target(g), N, L)
    vs, vp = vacuum_state(S), vacuum_state(P)
    a, b = variance_expansion(sc, vs, vp)
    h, rho = sc.h, sc.rho
    g1 = rho * advanced_green(S, rho * advanced_green(P, h))
    f0 = -(rho * advanced_green(P, h))
    b_formula = 0.5 * beta(vs, f0, f0) + beta(vp, h, g1)
    lam = 0.01
    lead = lam**2 * outcome_distribution(sc, lam, vs, vp)[1] / (0.5 * beta(vp, h, h))
    l1, l2 = 0.02, 0.01
    v1 = outcome_distribution(sc, l1, vs, vp)[1]
    v2 = outcome_distribution(sc, l2, vs, vp)[1]
    b_fit = (l1**2 * v1 - l2**2 * v2) / (l1**2 - l2**2)
    err_b = abs(b_fit / b_formula - 1.0)
    elapsed = time.perf_counter() - t0
    ok = abs(lead - 1) <= 0.01 and err_b <= 0.01 and abs(a / (0.5 * beta(vp, h, h)) - 1) <= 1e-12 \
        and elapsed < 10.0
    assert record(9, ok, "variance decomposition",
                  f"lambda^2 Var / (beta_P(h,h)/2) at lambda=0.01 = {lead:.5f} (within 1%), "
                  f"fitted lambda^0 coefficient {b_fit:.6f} vs formula {b_formula:.6f} "
                  f"(error {err_b:.1e}, within 1%), {elapsed:.2f} s (limit 10 s)")


def test_10_confidence_coverage():
    t0 = time.perf_counter()
    g, S, P, N, L = default_setup()
    sc = synthesize_scheme(S, P, make_target(g), N, L)
    shifted = coherent_state(vacuum_state(S), bump(g, 8, 32, 3, 6, 10.0))
    pv = vacuum_state(P)
    plan = plan_confidence(sc, 0.05, 0.1, 1.0, shifted, pv, seed=20240601)
    cov = coverage_experiment(plan, 500)
    n = lambda eps, lam: plan_confidence(sc, eps, 0.1, lam, shifted, pv).n_trials
    r_lam = n(0.05, 0.05) / n(0.05, 0.1)
    r_eps = n(0.025, 0.1) / n(0.05, 0.1)
    elapsed = time.perf_counter() - t0
    ok = (cov.coverage >= 0.9 and cov.coverage >= coverage_threshold(0.1, 500)
          and abs(r_lam / 4 - 1) <= 0.1 and abs(r_eps / 4 - 1) <= 0.1 and elapsed < 60.0)
    assert record(10, ok, "confidence coverage",
                  f"N={plan.n_trials}, coverage {cov.coverage:.3f} over 500 replications "
                  f"(needs >= 0.9), N ratio for lambda/2 {r_lam:.3f}, for eps/2 {r_eps:.3f} "
                  f"(4 within 10%), {elapsed:.2f} s (limit 60 s)")


def test_11_swap():
    t0 = time.perf_counter()
    g, S, P, N, L = default_setup()
    profile = GaugeProfile.ramp(g, 20, 36)
    rng = np.random.default_rng(11)
    F = random_source(g, rng, 40, 55, complex_=True)
    conj = conjugation_deviation(P, profile, F)
    past = swap_scatter_check(P, profile, F)
    double = double_rotation_check(P, 20, 36, F)
    vac = vacuum_state(P)
    sys_state = coherent_state(vac, bump(g, 8, 32, 3, 6, 10.0))
    h = bump(g, 48, 32, 4, 5, 3.0)
    w1 = swap_induced_weyl(P, profile, h, sys_state, vac)
    w2 = swap_induced_weyl(P, profile, h, sys_state, coherent_state(vac, bump(g, 10, 20, 3, 3, 7.0)))
    induced = abs(w1.cross_check - w1.value)
    indep = abs(w1.cross_check - w2.cross_check)
    elapsed = time.perf_counter() - t0
    worst = max(conj, past, double, induced, indep)
    ok = worst <= 1e-10 and elapsed < 2.0
    assert record(11, ok, "swap proof of principle",
                  f"E_Q F + i E_P F in the past {past:.1e}, conjugation {conj:.1e}, "
                  f"double rotation {double:.1e}, induced Weyl {induced:.1e}, "
                  f"probe-state dependence {indep:.1e} (tol 1e-10), {elapsed:.2f} s (limit 2 s)")


def test_12_polarization():
    g, S, P, N, L = default_setup()
    shifted = coherent_state(vacuum_state(S), bump(g, 8, 32, 3, 6, 10.0))
    rng = np.random.default_rng(12)
    worst = 0.0
    for n in (2, 3):
        for _ in range(3):
            fs = [random_source(g, rng, 20, 40) * 0.02 for _ in range(n)]
            mean = [one_point(shifted, f) for f in fs]
            cov = [[0.5 * beta(shifted, a, b) for b in fs] for a in fs]
            ref = symmetrized_expectation(mean, cov, n)
            worst = max(worst, abs(polarization_moment(shifted, fs) - ref) / abs(ref))
    assert record(12, worst <= 1e-10, "polarization identity",
                  f"max relative deviation {worst:.1e} for n = 2, 3 (tol 1e-10)")


def test_13_determinism(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[statistics]\nreplications = 200\n")
    files_ = ("order_scan.csv", "quantum_scan.csv", "measure.csv")
    runs = []
    for i, threads in enumerate(("1", "4")):
        out = tmp_path / f"run{i}"
        for cmd in ("order-scan", "quantum-scan", "measure"):
            assert main([cmd, "--config", str(cfg), "--out", str(out), "--seed", "7",
                         "--threads", threads]) == 0
        runs.append([(out / name).read_bytes() for name in files_])
    same = runs[0] == runs[1]
    assert record(13, same, "determinism",
                  f"{', '.join(files_)} byte-identical across two runs (1 and 4 threads): {same}")
