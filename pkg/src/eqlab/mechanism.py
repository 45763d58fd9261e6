"""Single-agent mechanism design over finite menus.

The designer commits to a map from actions to lotteries over consequences.
``build_indifference_mechanism`` constructs the map that pays every
undominated action exactly the security value

    u_star = max_a min_c u0(a, c)

by mixing each action's row-minimizing consequence with a row consequence
worth at least u_star.  Dominated actions get their row minimum outright, so
they stay dominated.  Incentive checks, informativeness, outcome-set value
analysis, the tie-frequency experiment, and the persuasion (contractor)
construction live here too.

Utilities over the finite menu are plain 2D arrays indexed [action,
consequence]; per-type utilities stack them along a leading axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from eqlab.prefs import PrevalentFamily, sample_prevalent_tables

__all__ = [
    "Mechanism",
    "StrategyTable",
    "OutcomeSet",
    "ICReport",
    "ContractorScenario",
    "security_value",
    "undominated_actions",
    "build_indifference_mechanism",
    "expected_row_utilities",
    "check_incentive_compat",
    "informativeness",
    "best_outcome_value",
    "argmax_outcomes",
    "tie_frequency_experiment",
    "semi_prevalent_check",
    "contractor_equilibrium",
]

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class Mechanism:
    """Per-action lotteries over consequences: ``rows[a, c] = P(c | a)``."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        object.__setattr__(self, "rows", rows)
        if rows.ndim != 2:
            raise ValueError("mechanism rows must be a 2D array")
        if np.any(rows < -_PROB_TOL):
            raise ValueError("negative lottery weight")
        if np.any(np.abs(rows.sum(axis=1) - 1.0) > _PROB_TOL):
            raise ValueError("lottery rows must sum to 1")

    @property
    def n_actions(self) -> int:
        return self.rows.shape[0]

    @property
    def n_consequences(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class StrategyTable:
    """Lottery over actions per (state, type): ``probs[s, w, a]``.

    Public (type-free) strategies use a singleton type axis.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 3:
            raise ValueError("strategy table must be (states, types, actions)")
        if np.any(probs < -_PROB_TOL):
            raise ValueError("negative strategy weight")
        if np.any(np.abs(probs.sum(axis=2) - 1.0) > _PROB_TOL):
            raise ValueError("strategy lotteries must sum to 1")

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_types(self) -> int:
        return self.probs.shape[1]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[2]


# ---------------------------------------------------------------------------
# security value and the indifference construction


def security_value(u0: np.ndarray) -> float:
    """max over actions of the worst-case consequence payoff."""
    u0 = np.asarray(u0, dtype=float)
    return float(u0.min(axis=1).max())


def undominated_actions(u0: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Actions whose best-case payoff reaches the security value.

    An action the designer can never push up to u_star is dominated: even
    its most favorable consequence falls short.  Ties at the boundary count
    as undominated (>= with tolerance).
    """
    u0 = np.asarray(u0, dtype=float)
    if u0.size == 0:
        raise ValueError("empty action or consequence set")
    u_star = security_value(u0)
    return np.flatnonzero(u0.max(axis=1) >= u_star - tol)


def build_indifference_mechanism(u0: np.ndarray, tol: float = 1e-12) -> Mechanism:
    """Mechanism paying exactly u_star on every undominated action.

    Row construction: mix the row's argmin consequence c_lo with its argmax
    c_hi so that p*u_hi + (1-p)*u_lo = u_star.  Constant rows at u_star and
    dominated rows collapse to a point mass on c_lo.
    """
    u0 = np.asarray(u0, dtype=float)
    n_a, n_c = u0.shape
    u_star = security_value(u0)
    undom = set(undominated_actions(u0, tol).tolist())
    rows = np.zeros((n_a, n_c))
    for a in range(n_a):
        c_lo = int(np.argmin(u0[a]))
        if a not in undom:
            rows[a, c_lo] = 1.0
            continue
        c_hi = int(np.argmax(u0[a]))
        u_lo, u_hi = u0[a, c_lo], u0[a, c_hi]
        if u_hi - u_lo <= tol:
            # constant row, already worth u_star
            rows[a, c_lo] = 1.0
            continue
        p = (u_star - u_lo) / (u_hi - u_lo)
        rows[a, c_hi] = p
        rows[a, c_lo] = 1.0 - p
    return Mechanism(rows)


def expected_row_utilities(mech: Mechanism, u: np.ndarray) -> np.ndarray:
    """U(a) = E[u(a, c)] under the mechanism's lottery for a.

    ``u`` is (actions, consequences) or (types, actions, consequences); the
    result drops the consequence axis.
    """
    u = np.asarray(u, dtype=float)
    return (u * mech.rows).sum(axis=-1)


# ---------------------------------------------------------------------------
# incentive compatibility and informativeness


@dataclass(frozen=True)
class ICReport:
    feasible: bool
    worst_gap: float
    violations: tuple  # (state, type, action, gap) for supported suboptimal actions


def check_incentive_compat(
    strategy: StrategyTable,
    mech: Mechanism,
    utilities: np.ndarray,
    tol: float = 1e-9,
) -> ICReport:
    """Does every supported action maximize the agent's expected utility?

    ``utilities`` is (types, actions, consequences).  The gap of a supported
    (state, type, action) is max_a' U(a'|type) - U(a|type); the report's
    worst_gap is the largest, and feasibility means worst_gap <= tol.
    """
    utilities = np.asarray(utilities, dtype=float)
    if utilities.ndim == 2:
        utilities = utilities[None, :, :]
    if utilities.shape[0] != strategy.n_types:
        raise ValueError("utilities/type axis mismatch")
    u_of_action = expected_row_utilities(mech, utilities)  # (types, actions)
    best = u_of_action.max(axis=1)  # (types,)
    worst_gap = 0.0
    violations = []
    supported = strategy.probs > _PROB_TOL
    for s in range(strategy.n_states):
        for w in range(strategy.n_types):
            for a in np.flatnonzero(supported[s, w]):
                gap = float(best[w] - u_of_action[w, a])
                if gap > tol:
                    violations.append((s, w, int(a), gap))
                worst_gap = max(worst_gap, gap)
    return ICReport(feasible=worst_gap <= tol, worst_gap=worst_gap, violations=tuple(violations))


def informativeness(strategy: StrategyTable, tol: float = 1e-12) -> bool:
    """True iff some type plays different lotteries in different states.

    Difference is measured in total variation; below-tolerance wiggle does
    not count.
    """
    for w in range(strategy.n_types):
        lots = strategy.probs[:, w, :]
        tv = 0.5 * np.abs(lots[:, None, :] - lots[None, :, :]).sum(axis=2)
        if tv.max(initial=0.0) > tol:
            return True
    return False


def pushforward_constant(strategy: StrategyTable, mech: Mechanism, tol: float = 1e-12) -> bool:
    """True iff the induced consequence lottery is the same in every state.

    The composition of strategy and mechanism is what an outside observer
    sees; when it is constant, the strategy reveals nothing through
    consequences even if the action choice varies.
    """
    induced = strategy.probs @ mech.rows  # (states, types, consequences)
    tv = 0.5 * np.abs(induced[:, None] - induced[None, :]).sum(axis=-1)
    return bool(tv.max(initial=0.0) <= tol)


# ---------------------------------------------------------------------------
# outcome sets: joint action/consequence lotteries reachable under a mechanism


@dataclass(frozen=True)
class OutcomeSet:
    """Generators of the convex set of reachable outcome lotteries.

    ``weights[g, a, c]`` is the joint probability of (a, c) under generator
    g.  The convex hull of the generators is the full set; a linear
    functional attains its maximum at a generator, so value queries only
    ever touch ``weights``.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.ndim != 3:
            raise ValueError("weights must be (generators, actions, consequences)")
        if np.any(w < -_PROB_TOL) or np.any(np.abs(w.sum(axis=(1, 2)) - 1.0) > _PROB_TOL):
            raise ValueError("each generator must be a joint probability table")

    @classmethod
    def from_mechanism(cls, mech: Mechanism, action_lotteries: np.ndarray | None = None):
        """Generators delta_a x mech(a), or pushforwards of given lotteries."""
        if action_lotteries is None:
            action_lotteries = np.eye(mech.n_actions)
        p = np.asarray(action_lotteries, dtype=float)
        weights = p[:, :, None] * mech.rows[None, :, :]
        return cls(weights)

    @property
    def n_generators(self) -> int:
        return self.weights.shape[0]


def best_outcome_value(u: np.ndarray, outcomes: OutcomeSet) -> float:
    """Largest expected utility over the outcome set."""
    u = np.asarray(u, dtype=float)
    return float((outcomes.weights * u).sum(axis=(1, 2)).max())


def argmax_outcomes(u: np.ndarray, outcomes: OutcomeSet, tie_tol: float = 1e-12) -> np.ndarray:
    """Generators within tie_tol of the best value."""
    vals = (outcomes.weights * np.asarray(u, dtype=float)).sum(axis=(1, 2))
    return np.flatnonzero(vals >= vals.max() - tie_tol)


def tie_frequency_experiment(
    family: PrevalentFamily,
    outcomes: OutcomeSet,
    n_samples: int,
    tie_tol: float = 1e-12,
    seed: int = 0,
    stream: int = 0,
) -> float:
    """Fraction of sampled utilities whose argmax over the set is not unique.

    For families with a density the theoretical frequency is zero: a tie
    pins the coefficient vector to a lower-dimensional hyperplane.  A
    constructed point-mass tie is the positive control.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    n_g = outcomes.n_generators
    gen_matrix = outcomes.weights.reshape(n_g, -1)  # (generators, |A x C|)
    tables = sample_prevalent_tables(family, n_samples, seed, stream)
    vals = tables @ gen_matrix.T  # (samples, generators)
    top = vals.max(axis=1, keepdims=True)
    multi = (vals >= top - tie_tol).sum(axis=1) >= 2
    return float(multi.mean())


# ---------------------------------------------------------------------------
# decomposed utilities: one public component, one idiosyncratic component


def semi_prevalent_check(
    public_part: np.ndarray,
    private_tables: np.ndarray,
    prevalent_on: str,
    mech: Mechanism,
    strategy: StrategyTable,
    tol: float = 1e-9,
) -> bool:
    """No IC-feasible strategy leaks information through the random component.

    With idiosyncrasy on actions (``prevalent_on="actions"``, utility
    public(c) + private_w(a)), an IC-feasible strategy must be
    uninformative.  With idiosyncrasy on consequences (utility public(a) +
    private_w(c)), what must be constant is the induced consequence lottery,
    not the action choice.  Returns True when the strategy is benign under
    the applicable condition or fails IC outright; False flags a violation
    witness.
    """
    public_part = np.asarray(public_part, dtype=float)
    private_tables = np.atleast_2d(np.asarray(private_tables, dtype=float))
    n_types = private_tables.shape[0]
    if prevalent_on == "actions":
        utilities = public_part[None, None, :] + private_tables[:, :, None]
    elif prevalent_on == "consequences":
        utilities = public_part[None, :, None] + private_tables[:, None, :]
    else:
        raise ValueError("prevalent_on must be 'actions' or 'consequences'")
    if n_types != strategy.n_types:
        raise ValueError("one private table per strategy type")
    report = check_incentive_compat(strategy, mech, utilities, tol)
    if not report.feasible:
        return True
    if prevalent_on == "actions":
        return not informativeness(strategy)
    return pushforward_constant(strategy, mech)


# ---------------------------------------------------------------------------
# persuasion: the contractor scenario


@dataclass(frozen=True)
class ContractorScenario:
    """A seller of contracts persuading a customer who knows the state.

    ``profits[c] >= 0`` with an outside option at zero profit;
    ``customer_values[s, c]`` is the customer's payoff from contract c in
    state s; ``prior[s]`` the contractor's belief.  ``effort_grid`` is the
    menu of costly effort levels (must include 0 and every profit level a
    target uses).
    """

    profits: np.ndarray
    customer_values: np.ndarray
    prior: np.ndarray
    effort_grid: np.ndarray

    def __post_init__(self):
        for name in ("profits", "customer_values", "prior", "effort_grid"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.profits < 0):
            raise ValueError("profits must be nonnegative")
        if not np.any(np.abs(self.profits) <= _PROB_TOL):
            raise ValueError("an outside option with zero profit is required")
        if abs(self.prior.sum() - 1.0) > _PROB_TOL or np.any(self.prior < 0):
            raise ValueError("prior must be a probability vector")
        if self.customer_values.shape != (self.prior.size, self.profits.size):
            raise ValueError("customer_values must be (states, contracts)")
        if not np.any(np.abs(self.effort_grid) <= _PROB_TOL):
            raise ValueError("effort grid must include 0")

    @property
    def reservation_utility(self) -> float:
        """Best the customer can do with the prior alone (no communication)."""
        return float((self.prior @ self.customer_values).max())


@dataclass(frozen=True)
class ContractorReport:
    sender_payoffs_equal: bool
    sender_payoff_spread: float
    customer_value: float
    reservation_utility: float
    message_strategy: tuple  # state -> (recommended contract, claimed profit)


def contractor_equilibrium(sc: ContractorScenario, target: np.ndarray) -> ContractorReport:
    """Cheap-talk outcome implementing a target contract rule.

    ``target[s]`` is the contract index recommended in state s.  Messages
    are pairs (contract, claimed profit), claims capped at the maximum
    profit.  The mechanism runs the recommended contract when the claim
    matches its profit, and otherwise a lottery between the outside option
    and the most profitable contract with expected profit equal to the
    claim.  Either way the sender's profit equals the claim, and exerting
    the claimed effort nets exactly zero: the sender is indifferent over all
    messages, so truthful recommendation is incentive compatible.

    Rejected when the target is worth less to the customer than staying
    with the prior-best contract.
    """
    target = np.asarray(target, dtype=int)
    if target.shape != (sc.prior.size,):
        raise ValueError("target must pick one contract per state")
    u_res = sc.reservation_utility
    target_value = float(sum(sc.prior[s] * sc.customer_values[s, target[s]] for s in range(target.size)))
    if target_value < u_res - 1e-12:
        raise ValueError(
            f"target gives the customer {target_value:.6f}, below the reservation utility {u_res:.6f}"
        )
    pi_bar = float(sc.profits.max())
    rich = int(np.argmax(sc.profits))
    outside = int(np.argmin(np.abs(sc.profits)))
    # sender payoff of message (m1, m2): implemented expected profit minus
    # the effort matching the claim; equals m2 - m2 = 0 for every message
    payoffs = []
    for m1 in range(sc.profits.size):
        for m2 in sc.effort_grid:
            if m2 > pi_bar + _PROB_TOL:
                continue  # claims above the best profit are not in the message set
            if abs(sc.profits[m1] - m2) <= _PROB_TOL:
                expected_profit = sc.profits[m1]
            else:
                q = 0.0 if pi_bar == 0 else m2 / pi_bar
                expected_profit = q * sc.profits[rich] + (1 - q) * sc.profits[outside]
            payoffs.append(expected_profit - m2)
    spread = float(np.ptp(payoffs))
    strategy = tuple((int(c), float(sc.profits[c])) for c in target)
    for _, claim in strategy:
        if not np.any(np.abs(sc.effort_grid - claim) <= _PROB_TOL):
            raise ValueError(f"effort grid is missing the profit level {claim}")
    return ContractorReport(
        sender_payoffs_equal=spread <= 1e-9,
        sender_payoff_spread=spread,
        customer_value=target_value,
        reservation_utility=u_res,
        message_strategy=strategy,
    )
