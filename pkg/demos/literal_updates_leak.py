"""
Replaying the published update equations, leak included
========================================================

The paper-literal solver iterates a published set of hourly update
equations for the seven-state controller exactly as printed.  Those
equations drop an inflow term and tie the repair rates to the detection
coverage, so summed probability drifts away from one.  The solver makes
no correction; it reports the drift instead.  This script puts the
literal iteration next to the exact transient solution so the drift is
visible.
"""

import depmark

model = depmark.load_model(depmark.bundled_model_path("dfwcs.mdl"))

literal_cfg = depmark.SolverConfig(depmark.Method.PAPER_LITERAL, dt=1.0, horizon=500.0)
trajectory, leak = depmark.solve_paper_literal(model, literal_cfg)

exact_cfg = depmark.SolverConfig()
checkpoints = [1.0, 10.0, 100.0, 500.0]

print("     t    P1 literal        P1 exact          cumulative leak")
for t in checkpoints:
    k = int(t)  # dt = 1, so step k sits at t = k hours
    p_lit = trajectory.probs[k]
    p_exact = depmark.solve_at(model, exact_cfg, t)
    defect = 1.0 - p_lit.sum()
    print(f"{t:6.0f}   {p_lit[0]:.12f}   {p_exact[0]:.12f}   {defect:.6e}")

print()
print(f"largest per-run |1 - sum(P)|: {leak.max_abs_defect:.6e}")
print("the leak grows about linearly: each step loses a slice of order")
print("lambda1 * (2C - 1) * dt of the state-1 mass")

# Perfect coverage makes the leak worse, not better: the per-step loss
# is the dropped inflow lambda1 * C * dt minus the lambda1 * (1 - C) * dt
# that still reaches state 7, and at C = 1 nothing is rerouted at all.
perfect = model.with_params({"C": 1.0})
_, leak_perfect = depmark.solve_paper_literal(
    perfect, depmark.SolverConfig(depmark.Method.PAPER_LITERAL, dt=1.0, horizon=500.0)
)
print()
print(f"same run at C = 1: max leak {leak_perfect.max_abs_defect:.6e}")

# The mode is a fidelity record, not a general solver: it refuses any
# model that is not structurally this seven-state system.
toy = depmark.parse('state 1 "up" class = operational;'
                    ' state 2 "down" class = fail_safe;'
                    " trans 1 -> 2 rate = 0.5;")
try:
    depmark.solve_paper_literal(toy, literal_cfg)
except depmark.ShapeMismatchError as err:
    print()
    print(f"foreign model correctly rejected: {err}")
