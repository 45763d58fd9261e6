"""
Mixing on a latent coin and staying indifferent
================================================

The belief-based machine for N = 2 flips a private coin each period: with
probability rho it contributes 0, otherwise it follows its prescription.
For the mixture to be sequentially rational the two realizations must be
exactly equally valuable at every on-path history.  This script solves
the joint prescription-state Markov chain in closed form and audits that
indifference, including the strict loss from interior contributions.
"""

from eqlab.strategies import GameParams, belief_based_machines
from eqlab.verifier import belief_mixing_report, belief_state_values

params = GameParams(n_agents=2, delta=0.5, kappa=0.75)
machines = belief_based_machines(params, rho=0.1)
m = machines[0]
print("response slope alpha:", m.alpha,
      " punishment level beta:", m.punish_level)

# %%
# Exact continuation values at each joint prescription state.  The chain
# has four states: both prescribed 1, one side punishing at beta, or both.

values = belief_state_values(machines, params)
print("\nagent-0 values by (p0, p1):")
for state, v in sorted(values[0].items(), reverse=True):
    print(f"  {state}: {v}")

# %%
# The audit: at every on-path prescription-1 state the gap between
# contributing 1 and dropping to 0 is zero to machine precision, while
# interior contributions lose (1 - delta)(1 - kappa) * a because the
# partner's detector is a threshold, not a slope.

report = belief_mixing_report(machines, params)
print("\nfeasible:", report["feasible"])
for entry in report["mixing_states"]:
    print(f"  state {entry['state']}: gap(1 vs 0) = {entry['gap_one_vs_zero']}",
          f" interior losses = {entry['interior_losses']}")

# %%
# Punisher states are not mixing states: a prescribed punisher strictly
# prefers its beta prescription over both zero and full conformity.

for entry in report["punisher_diagnostics"]:
    print(f"punisher state {entry['state']}: "
          f"gain(beta vs 0) = {entry['gap_punish_vs_zero']}, "
          f"gain(0 vs 1) = {-entry['gap_zero_vs_conform']}")
