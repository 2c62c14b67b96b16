"""End-to-end acceptance checks, one per numbered criterion.

Each test records a one-line verdict (emitted in the terminal summary by
conftest) before asserting, so the report survives even when a check
fails.  Two checks are expected to fail, on purpose, because their
stated expectations contradict checkable arithmetic; they stay red as
the record of that analysis rather than being bent until green.

* 7b pins the step-one mass defect of the literal update mode to the
  constant 2.97e-6, which is the state-1 outflow alone; the defect the
  report is defined to carry, 1 - sum(P), is 2.64e-6 because state 7
  gains 3.3e-7 in the same step.  The hand iteration (7a) passes.
* 8a demands the analytic probability of every state inside a 99% CI
  from one million trials, but two states carry about 2e-8 and 3e-10 of
  mass, so their intervals collapse to a point at zero observed hits.
  The statistically sound version of the same cross-check (a z-test
  driven by the true probability) lives in test_simulate.py and passes.
"""

import csv
import io
import math
import time

import numpy as np
import pytest

import oracle_expm
import depmark
from conftest import record_acceptance
from depmark import (
    Method,
    SolverConfig,
    build_generator,
    check_requirements,
    compose_independent,
    metrics,
    simulate,
    solve_at,
    solve_euler,
    solve_grid,
    solve_paper_literal,
    sweep,
)
from depmark.cli import main as cli_main

TABLE3_COVERAGES = [0.90, 0.92, 0.94, 0.95, 0.96, 0.98, 0.99, 0.999, 1]
TABLE3_PFU = {0.90: 0.01311, 0.99: 0.001319, 0.999: 0.000131}
GRID = [float(t) for t in range(0, 4301, 100)] + [4380.0]


def oracle_distribution(model, t):
    return oracle_expm.transient_distribution(
        build_generator(model).entries, model.initial_vector(), t
    )


def composed_metrics(dfwcs, dfwcs_pid, coverage, t=4380.0):
    a_model = dfwcs.with_params({"C": coverage})
    b_model = dfwcs_pid.with_params({"C": coverage})
    a = metrics(solve_at(a_model, SolverConfig(), t), a_model, t)
    b = metrics(solve_at(b_model, SolverConfig(), t), b_model, t)
    return compose_independent(a, b)


def test_criterion_01_closed_form_toy(toy):
    start = time.perf_counter()
    exact = 1.0 - math.exp(-1.0)
    err_uni = abs(solve_at(toy, SolverConfig(Method.UNIFORMIZATION), 2.0)[1] - exact)
    err_exp = abs(solve_at(toy, SolverConfig(Method.MATRIX_EXP), 2.0)[1] - exact)
    elapsed = time.perf_counter() - start
    ok = err_uni <= 1e-12 and err_exp <= 1e-12 and elapsed < 1.0
    record_acceptance(
        f"{'PASS' if ok else 'FAIL'} criterion 1: toy p_down(2) vs 1-1/e, "
        f"|err| uniformization={err_uni:.2e}, expm={err_exp:.2e} (tol 1e-12); "
        f"runtime {elapsed:.3f}s (< 1s)"
    )
    assert ok


def test_criterion_02_cross_solver_agreement(dfwcs):
    start = time.perf_counter()
    worst = 0.0
    for coverage in TABLE3_COVERAGES:
        model = dfwcs.with_params({"C": coverage})
        traj = solve_grid(model, SolverConfig(Method.UNIFORMIZATION), GRID)
        q = build_generator(model).entries
        p0 = model.initial_vector()
        for k, t in enumerate(GRID):
            ref = oracle_expm.transient_distribution(q, p0, t)
            worst = max(worst, float(np.max(np.abs(traj.probs[k] - ref))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10.0
    record_acceptance(
        f"{'PASS' if ok else 'FAIL'} criterion 2: uniformization vs independent "
        f"Taylor-series expm over {len(TABLE3_COVERAGES)} coverages x {len(GRID)} "
        f"times, max |diff| = {worst:.2e} (tol 1e-10); runtime {elapsed:.2f}s (< 10s)"
    )
    assert ok


def test_criterion_03_conservation_and_class_identities(dfwcs):
    worst_mass = 0.0
    worst_total = 0.0
    closure_exact = True
    for coverage in (0.9, 0.999, 1.0):
        model = dfwcs.with_params({"C": coverage})
        traj = solve_grid(model, SolverConfig(), GRID)
        for k, t in enumerate(GRID):
            dist = traj.probs[k]
            worst_mass = max(worst_mass, abs(float(dist.sum()) - 1.0))
            m = metrics(dist, model, t)
            worst_total = max(
                worst_total,
                abs(m.reliability + m.prob_fail_safe + m.prob_fail_unsafe - 1.0),
            )
            closure_exact &= m.safety == m.reliability + m.prob_fail_safe
    ok = worst_mass <= 1e-9 and worst_total <= 1e-9 and closure_exact
    record_acceptance(
        f"{'PASS' if ok else 'FAIL'} criterion 3: max |sum(p)-1| = {worst_mass:.2e}, "
        f"max |R+Pfs+Pfu-1| = {worst_total:.2e} (tol 1e-9); "
        f"S == R+Pfs exact in floating point: {closure_exact}"
    )
    assert ok


def test_criterion_04_table_audit(capsys):
    table = str(depmark.bundled_table_path("table3.csv"))
    code = cli_main(["audit", "--table", table])
    out = capsys.readouterr().out
    rows = list(
        csv.DictReader(io.StringIO("\n".join(
            ln for ln in out.splitlines() if not ln.startswith("#")
        )))
    )
    flagged = [r for r in rows if r["status"] != "ok"]
    defect = float(flagged[0]["total_defect"]) if flagged else float("nan")
    perfect_row = next(r for r in rows if r["param"] == "1")
    ok = (
        code == 1
        and len(flagged) == 1
        and flagged[0]["param"] == "0.9"
        and abs(defect - 1.44e-3) <= 1e-5
        and perfect_row["status"] == "ok"
    )
    record_acceptance(
        f"{'PASS' if ok else 'FAIL'} criterion 4: audit of the shipped table flags "
        f"{len(flagged)} row(s); C=0.900 total defect {defect:.6g} "
        f"(expected 1.44e-3 within 1e-5); C=1 row clean; exit code {code}"
    )
    assert ok


def test_criterion_05_sweep_monotone_with_endpoint(dfwcs):
    start = time.perf_counter()
    results = sweep(dfwcs, "C", TABLE3_COVERAGES, 4380.0)
    elapsed = time.perf_counter() - start
    rs = [row.metrics.reliability for row in results]
    pfus = [row.metrics.prob_fail_unsafe for row in results]
    r_monotone = all(a <= b for a, b in zip(rs, rs[1:]))
    pfu_monotone = all(a >= b for a, b in zip(pfus, pfus[1:]))
    endpoint = pfus[-1]
    ok = r_monotone and pfu_monotone and endpoint <= 1e-12 and elapsed < 5.0
    record_acceptance(
        f"{'PASS' if ok else 'FAIL'} criterion 5: over the nine-coverage grid "
        f"R nondecreasing={r_monotone}, Pfu nonincreasing={pfu_monotone}, "
        f"Pfu(C=1) = {endpoint:.3g} (<= 1e-12, published column prints 0.000000); "
        f"runtime {elapsed:.2f}s (< 5s)"
    )
    assert ok


def test_criterion_06_order_of_magnitude_comparison(dfwcs, dfwcs_pid):
    lines = []
    ok = True
    for coverage, table_pfu in TABLE3_PFU.items():
        model = dfwcs.with_params({"C": coverage})
        single = metrics(
            solve_at(model, SolverConfig(), 4380.0), model, 4380.0
        ).prob_fail_unsafe
        composed = composed_metrics(dfwcs, dfwcs_pid, coverage).prob_fail_unsafe
        r_single = math.log10(single / table_pfu)
        r_composed = math.log10(composed / table_pfu)
        ok &= abs(r_single) <= 1.5 and abs(r_composed) <= 1.5
        lines.append(
            f"C={coverage}: computed Pfu {single:.3e} (single chain) / "
            f"{composed:.3e} (composed) vs published {table_pfu:.3e}; "
            f"log10 ratios {r_single:+.2f} / {r_composed:+.2f}"
        )
    record_acceptance(
        f"{'PASS' if ok else 'FAIL'} criterion 6: published fail-unsafe column is "
        f"about an order of magnitude above the conservation-respecting recomputation "
        f"(bound |log10| <= 1.5). " + " | ".join(lines)
    )
    assert ok


def test_criterion_07a_literal_update_fidelity(dfwcs):
    cfg = SolverConfig(Method.PAPER_LITERAL, dt=1.0, horizon=3.0)
    traj, report = solve_paper_literal(dfwcs, cfg)
    # hand-iterated before the solver existed: from all mass on state 1
    # only P1 and P7 ever move in the first steps
    expected = {
        1: (0.99999703, 3.2999999999999996e-07, 2.6400000000537105e-06),
        2: (0.9999940600088209, 6.599990198999999e-07, 5.279992159268332e-06),
        3: (0.9999910900264626, 9.899970597029108e-07, 7.919976477754886e-06),
    }
    ok = True
    for step, (p1, p7, defect) in expected.items():
        row = traj.probs[step]
        target = np.array([p1, 0.0, 0.0, 0.0, 0.0, 0.0, p7])
        ok &= bool(np.max(np.abs(row - target)) <= 1e-15)
        ok &= abs(float(report.defects[step - 1]) - defect) <= 1e-15
    record_acceptance(
        f"{'PASS' if ok else 'FAIL'} criterion 7a: three verbatim update steps and "
        f"their mass defects match the hand iteration to <= 1e-15 "
        f"(step-1 defect {float(report.defects[0]):.10e})"
    )
    assert ok


def test_criterion_07b_stated_step1_defect_constant(dfwcs):
    """Stated as: the reported mass defect after one step from P1 = 1
    with C = 0.9 and dt = 1 equals 2.97e-6 within 1e-15.

    That constant equals the step-1 outflow of state 1 alone,
    LAMBDA1 * C * dt = 3.3e-6 * 0.9 = 2.97e-6.  But the same update
    simultaneously moves LAMBDA1 * (1 - C) * dt = 3.3e-7 of mass into
    state 7, so the quantity the report is defined to carry,
    1 - sum_i P_i, is

        LAMBDA1 * dt * (2 C - 1) = 2.64e-6,

    and the hand iteration of the published equations (criterion 7a,
    frozen before the solver existed) confirms 2.6400000000537105e-06.
    The stated constant and the stated definition cannot both hold; the
    implementation honors the definition, so this check of the literal
    constant fails by design rather than the report being bent to match.
    """
    cfg = SolverConfig(Method.PAPER_LITERAL, dt=1.0, horizon=1.0)
    _, report = solve_paper_literal(dfwcs, cfg)
    defect = float(report.defects[0])
    gap = abs(defect - 2.97e-6)
    ok = gap <= 1e-15
    record_acceptance(
        f"{'PASS' if ok else 'FAIL (expected)'} criterion 7b: step-1 defect as "
        f"stated would be 2.97e-06 within 1e-15, but 1 - sum(P) after the "
        f"printed update is {defect:.10e} = LAMBDA1*dt*(2C-1); the 2.97e-06 "
        f"figure is the P1 outflow alone and ignores the 3.3e-07 that state 7 "
        f"gains in the same step (gap {gap:.3e})"
    )
    assert ok, (
        f"reported step-1 mass defect is {defect:.16e}, not 2.97e-06: the stated "
        f"constant ignores the simultaneous LAMBDA1*(1-C)*dt = 3.3e-07 inflow to "
        f"state 7; see this test's docstring and the project decision notes"
    )


def test_criterion_08a_monte_carlo_containment(dfwcs):
    trials = 1_000_000
    result = simulate(dfwcs, 4380.0, trials, seed=42)
    analytic = oracle_distribution(dfwcs, 4380.0)
    misses = []
    for k, state_id in enumerate(result.ids):
        lo, hi = result.interval(state_id)
        p = float(analytic[k])
        if not lo <= p <= hi:
            misses.append(
                f"state {state_id}: analytic {p:.3e} outside CI [{lo:.3e}, {hi:.3e}] "
                f"(observed {int(result.counts[k])} hits, expected {p * trials:.3f})"
            )
    ok = not misses
    record_acceptance(
        f"{'PASS' if ok else 'FAIL (expected)'} criterion 8a: analytic-in-CI for all "
        f"states at 1e6 trials. "
        + (
            "all contained"
            if ok
            else "; ".join(misses)
            + ". A normal-theory CI at zero observed hits is the single point "
            "{0}, which cannot contain any positive probability; states with "
            "analytic mass near 1e-8 expect ~0.02 hits per million trials, so "
            "this containment form is unattainable at this sample size for the "
            "bundled chain. The sound z-test form (slack from the true "
            "probability) passes; see test_simulate.py."
        )
    )
    assert ok, (
        "empirical 99% CIs cannot bracket sub-resolution probabilities: "
        + "; ".join(misses)
        + ". With 1e6 trials the normal-theory interval at 0 observed hits "
        "degenerates to the point {0}; analytic masses ~2.3e-8 (state 3) and "
        "~2.9e-10 (state 6) would need ~1e10 trials for expected hits >> 1. "
        "The statistically sound version of this cross-check (z-test using "
        "the true-probability standard deviation) passes for every state in "
        "test_simulate.py::TestAgainstClosedForm::test_dfwcs_z_test_against_oracle."
    )


def test_criterion_08b_monte_carlo_determinism_and_runtime(dfwcs):
    start = time.perf_counter()
    first = simulate(dfwcs, 4380.0, 1_000_000, seed=42)
    second = simulate(dfwcs, 4380.0, 1_000_000, seed=42)
    elapsed = time.perf_counter() - start
    identical = bool(np.array_equal(first.counts, second.counts))
    ok = identical and elapsed < 60.0
    record_acceptance(
        f"{'PASS' if ok else 'FAIL'} criterion 8b: repeated 1e6-trial runs with "
        f"seed 42 give bit-identical counts: {identical}; both runs took "
        f"{elapsed:.2f}s (< 60s)"
    )
    assert ok


def test_criterion_09_requirement_verdict(dfwcs, dfwcs_pid):
    composed = composed_metrics(dfwcs, dfwcs_pid, 0.999)
    verdict = check_requirements(composed)
    regression_ok = abs(composed.reliability - 0.9999755480286817) <= 1e-10
    ok = verdict.reliability_ok and regression_ok
    record_acceptance(
        f"{'PASS' if ok else 'FAIL'} criterion 9: composed two-chain reliability at "
        f"C=0.999 over six months = {composed.reliability:.10f} vs required floor "
        f"0.99 -> reliability_ok={verdict.reliability_ok}; the recomputation "
        f"reproduces the published verdict that the system meets its reliability "
        f"requirement"
    )
    assert ok


def test_criterion_10_euler_convergence_order(toy):
    exact = 1.0 - math.exp(-1.0)
    errors = []
    for dt in (0.1, 0.05, 0.025):
        traj = solve_euler(toy, SolverConfig(Method.EULER, dt=dt, horizon=2.0))
        errors.append(abs(float(traj.probs[-1, 1]) - exact))
    ratios = [errors[0] / errors[1], errors[1] / errors[2]]
    ok = all(1.8 <= r <= 2.2 for r in ratios)
    record_acceptance(
        f"{'PASS' if ok else 'FAIL'} criterion 10: Euler halving-ratio convergence "
        f"on the toy model, errors {errors[0]:.3e} / {errors[1]:.3e} / "
        f"{errors[2]:.3e}, ratios {ratios[0]:.3f}, {ratios[1]:.3f} "
        f"(first order means ~2, accepted band [1.8, 2.2])"
    )
    assert ok
