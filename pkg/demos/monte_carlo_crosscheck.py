"""
Checking the solver with dice
=============================

A million simulated missions of the bundled controller, scored against
the analytic transient solution.  Agreement here exercises a completely
different code path from the series solver: the simulator draws
exponential holding times and jump targets, and knows nothing about
matrix exponentials.
"""

import depmark

T = 4380.0
TRIALS = 1_000_000

model = depmark.load_model(depmark.bundled_model_path("dfwcs.mdl"))

result = depmark.simulate(model, T, TRIALS, seed=7)
analytic = depmark.solve_at(model, depmark.SolverConfig(), T)

print(f"{TRIALS} missions of {T:.0f} h, seed {result.seed}")
print()
print("state  label                      count   estimate      99% CI half   analytic")
for k, sid in enumerate(result.ids):
    label = model.states[k].label
    lo, hi = result.interval(sid)
    inside = "yes" if lo <= analytic[k] <= hi else "NO"
    print(f"  {sid}    {label:<22} {result.counts[k]:9d}   {result.estimates[k]:.6e}"
          f"  {result.ci99_half_widths[k]:.2e}    {analytic[k]:.6e}  in CI: {inside}")

print()
print("States 3 and 6 carry about 2e-8 and 3e-10 of mass; a 1e6-trial run")
print("usually sees zero hits there, so their intervals collapse to [0, 0]")
print("and cannot bracket the analytic value.  That is a resolution limit")
print("of sampling, not a solver defect; the populated states agree.")

# Reruns with the same seed are bit-identical, which makes simulation
# results safe to freeze into regression tests.
again = depmark.simulate(model, T, TRIALS, seed=7)
print()
print("same seed reruns identically:", bool((again.counts == result.counts).all()))
