"""
Paying every undominated action the security value
===================================================

A designer who controls the lottery from actions to consequences can make
the agent exactly indifferent across all undominated actions: each one is
paid the security value u* = max_a min_c u0(a, c).  This script builds
that mechanism for a small worked instance, checks the indifference, and
confirms that honest play passes the incentive-compatibility audit.
"""

import numpy as np

from eqlab.mechanism import (
    StrategyTable,
    build_indifference_mechanism,
    check_incentive_compat,
    expected_row_utilities,
    security_value,
    undominated_actions,
)
from eqlab.rng import stream_generator

# %%
# The worked instance: two actions, two consequences.  Action 0 is risky
# (worth 0 or 2 depending on the consequence), action 1 is safe (worth 1
# either way).  The security value is therefore 1.

u0 = np.array([[0.0, 2.0], [1.0, 1.0]])
u_star = security_value(u0)
print("base payoffs:\n", u0)
print("security value u* =", u_star)
print("undominated actions:", undominated_actions(u0).tolist())

# %%
# The construction mixes each row's worst consequence with its best one so
# the row's expected payoff lands exactly on u*.  The risky row gets a
# 50/50 lottery; the safe row is already there and collapses to a point
# mass on its cheapest consequence.

mech = build_indifference_mechanism(u0)
print("mechanism rows:\n", mech.rows)
utilities = expected_row_utilities(mech, u0)
print("expected utility per action:", utilities)
assert np.all(utilities == u_star)

# %%
# Indifference makes any support incentive compatible.  Check a strategy
# that randomizes uniformly over both actions (one state, one type).

table = StrategyTable(np.full((1, 1, 2), 0.5))
report = check_incentive_compat(table, mech, u0[np.newaxis, :, :])
print("IC feasible:", report.feasible, " worst gap:", report.worst_gap)

# %%
# The same construction works on any finite instance.  Draw a random
# payoff matrix and measure how far the undominated rows sit from u*.

rng = stream_generator(seed=2026, stream=0)
u_rand = rng.uniform(-1.0, 1.0, size=(5, 4))
mech_rand = build_indifference_mechanism(u_rand)
rows = undominated_actions(u_rand)
gaps = expected_row_utilities(mech_rand, u_rand)[rows] - security_value(u_rand)
print("random 5x4 instance, max |gap| over undominated rows:", np.abs(gaps).max())
