"""
Warm-up: one component that fails at a constant rate
=====================================================

The smallest model the toolkit can express: a single unit that is either
up or down, failing at rate L per hour and never repaired.  The chance
of still being up after t hours has the closed form exp(-L t), which
lets us check the solver against something we can compute by hand.
"""

import math

import depmark

SOURCE = """
# one failing component, nothing else
param L = 0.5;

state 1 "up"   class = operational;
state 2 "down" class = fail_safe;

trans 1 -> 2 rate = L;
"""

model = depmark.parse(SOURCE)
print("states:", [s.label for s in model.states])
print("absorbing state ids:", depmark.absorbing_states(model))

# Solve at a handful of times with the default (uniformization) solver
# and put the closed form next to it.
config = depmark.SolverConfig()
print()
print("   t    p_up (solver)   p_up (exp(-L t))   difference")
for t in (0.0, 0.5, 1.0, 2.0, 4.0, 8.0):
    p = depmark.solve_at(model, config, t)
    exact = math.exp(-0.5 * t)
    print(f"{t:5.1f}   {p[0]:.12f}   {exact:.12f}     {abs(p[0] - exact):.2e}")

# The same question through the metrics layer: with state 2 classed as
# fail_safe, reliability is just the probability of being up.
m = depmark.metrics(depmark.solve_at(model, config, 2.0), model, 2.0)
print()
print(f"reliability at t=2:     {m.reliability:.12f}")
print(f"fail-safe mass at t=2:  {m.prob_fail_safe:.12f}")
print(f"sum:                    {m.reliability + m.prob_fail_safe:.12f}")

# A cruder route to the same number: explicit first-order stepping.
# Halving the step roughly halves the error, a quick wiring check.
print()
for dt in (0.2, 0.1, 0.05):
    traj = depmark.solve_euler(
        model, depmark.SolverConfig(depmark.Method.EULER, dt=dt, horizon=2.0)
    )
    err = abs(traj.probs[-1, 0] - math.exp(-1.0))
    print(f"euler dt={dt:<5}  error in p_up at t=2: {err:.6f}")
