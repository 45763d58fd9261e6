"""
Cheap talk from an indifferent contractor
==========================================

A contractor observes which repair a machine needs and sends a message; a
customer then chooses an effort level to buy.  Because the customer's
acceptance rule pays the contractor the same profit after every message
it acts on, the contractor is willing to report truthfully, and the same
indifference supports an uninformative babbling outcome.
"""

from eqlab.mechanism import ContractorScenario, contractor_equilibrium

# %%
# Three effort levels with profits 0, 1, 2 and two equally likely machine
# states.  The customer's value depends on matching effort to state; their
# outside option is the best state-independent effort.

scenario = ContractorScenario(
    profits=[0.0, 1.0, 2.0],
    customer_values=[[0.2, 1.0, 0.1], [0.2, 0.1, 0.9]],
    prior=[0.5, 0.5],
    effort_grid=[0.0, 1.0, 2.0],
)
print("customer reservation utility:", scenario.reservation_utility)

# %%
# Full revelation: the target prescribes the matching contract in each
# state.  Both checks pass: the contractor's payoff is message-independent
# and the customer clears their reservation utility.

rep = contractor_equilibrium(scenario, target=[1, 2])
print("\nfull revelation target [1, 2]")
print("  sender payoffs equal:", rep.sender_payoffs_equal,
      " spread:", rep.sender_payoff_spread)
print("  customer value:", rep.customer_value)
print("  message strategy:", rep.message_strategy)

# %%
# Babbling: the same contract in both states conveys nothing.  The
# customer falls back to the outside option and gets exactly the
# reservation utility, no more.

rep = contractor_equilibrium(scenario, target=[1, 1])
print("\nbabbling target [1, 1]")
print("  customer value:", rep.customer_value,
      " (reservation:", rep.reservation_utility, ")")

# %%
# A target below the reservation utility is refused outright.

try:
    contractor_equilibrium(scenario, target=[0, 0])
except ValueError as exc:
    print("\ntarget [0, 0] rejected:", exc)
