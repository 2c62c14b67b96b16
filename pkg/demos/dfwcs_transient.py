"""
Six months in the life of a feed-water controller
==================================================

Walks the bundled seven-state control-system model from full health at
t = 0 to the end of a 4380-hour mission, printing how the probability
mass drains from the operational states into the fail-safe and
fail-unsafe sinks.  The companion model `dfwcs_pid.mdl` starts the same
chain from the PID side; composing the two gives the verdict for a
system that needs both halves.
"""

import numpy as np

import depmark


def main():
    model = depmark.load_model(depmark.bundled_model_path("dfwcs.mdl"))
    print(f"model horizon: {model.horizon} hours")
    for s in model.states:
        print(f"  state {s.id}: {s.label:<22} {s.state_class.value}")

    config = depmark.SolverConfig()  # uniformization, eps = 1e-12
    grid = [0.0, 1.0, 24.0, 168.0, 730.0, 2190.0, 4380.0]
    trajectory = depmark.solve_grid(model, config, grid)

    print()
    print("     t          R              S             Pfs           Pfu")
    for m in depmark.metrics_rows(trajectory, model):
        print(f"{m.t:7.0f}   {m.reliability:.10f}   {m.safety:.10f}"
              f"   {m.prob_fail_safe:.3e}   {m.prob_fail_unsafe:.3e}")

    # Mass never appears out of thin air: every row still sums to one.
    sums = trajectory.probs.sum(axis=1)
    print()
    print(f"max |row sum - 1| over the grid: {np.max(np.abs(sums - 1.0)):.2e}")

    # Requirement check for the single chain, then for the serial
    # composition with the PID-side chain.  Both halves must deliver
    # service for the composed system to count as delivering.
    final = depmark.metrics(trajectory.probs[-1], model, 4380.0)
    verdict = depmark.check_requirements(final)
    print()
    print(f"single chain:   R = {final.reliability:.6f}  "
          f"meets R >= 0.99? {verdict.reliability_ok}  "
          f"meets Pfu <= 1e-3? {verdict.unsafe_ok}")

    pid = depmark.load_model(depmark.bundled_model_path("dfwcs_pid.mdl"))
    pid_final = depmark.metrics(depmark.solve_at(pid, config, 4380.0), pid, 4380.0)
    both = depmark.compose_independent(final, pid_final)
    verdict = depmark.check_requirements(both)
    print(f"composed pair:  R = {both.reliability:.6f}  "
          f"Pfu = {both.prob_fail_unsafe:.6e}  ok? {verdict.ok}")


if __name__ == "__main__":
    main()
