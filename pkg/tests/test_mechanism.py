import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from eqlab.mechanism import (
    ContractorScenario,
    Mechanism,
    OutcomeSet,
    StrategyTable,
    argmax_outcomes,
    best_outcome_value,
    build_indifference_mechanism,
    check_incentive_compat,
    contractor_equilibrium,
    expected_row_utilities,
    informativeness,
    pushforward_constant,
    security_value,
    semi_prevalent_check,
    tie_frequency_experiment,
    undominated_actions,
)
from eqlab.prefs import OutcomeSpace, PrevalentFamily, UtilityFn

# the small worked instance used throughout: two actions, two consequences
U_2X2 = np.array([[0.0, 2.0], [1.0, 1.0]])


def uniform_over(actions, n_actions):
    probs = np.zeros((1, 1, n_actions))
    probs[0, 0, actions] = 1.0 / len(actions)
    return StrategyTable(probs)


class TestIndifferenceConstruction:
    def test_worked_instance_security_value(self):
        assert security_value(U_2X2) == 1.0

    def test_worked_instance_rows(self):
        mech = build_indifference_mechanism(U_2X2)
        # action 0 mixes its extremes fifty-fifty to hit u_star = 1;
        # action 1 is constant at 1 and collapses to a point mass
        assert np.allclose(mech.rows[0], [0.5, 0.5])
        assert np.allclose(mech.rows[1], [1.0, 0.0])

    def test_worked_instance_utilities_exactly_one(self):
        mech = build_indifference_mechanism(U_2X2)
        np.testing.assert_array_equal(expected_row_utilities(mech, U_2X2), [1.0, 1.0])

    def test_worked_instance_ic(self):
        mech = build_indifference_mechanism(U_2X2)
        rep = check_incentive_compat(uniform_over([0, 1], 2), mech, U_2X2)
        assert rep.feasible and rep.worst_gap == 0.0 and rep.violations == ()

    def test_dominated_action_stays_dominated(self):
        u0 = np.array([[0.0, 2.0], [1.0, 1.0], [-1.0, 0.5]])
        assert undominated_actions(u0).tolist() == [0, 1]
        mech = build_indifference_mechanism(u0)
        vals = expected_row_utilities(mech, u0)
        assert np.allclose(vals[:2], 1.0)
        assert vals[2] == -1.0  # row minimum outright

    @given(
        u0=hnp.arrays(
            dtype=np.float64,
            shape=st.tuples(st.integers(1, 6), st.integers(1, 6)),
            elements=st.floats(-2.0, 2.0),
        )
    )
    @settings(max_examples=120, deadline=None)
    def test_every_undominated_action_pays_the_security_value(self, u0):
        u_star = security_value(u0)
        mech = build_indifference_mechanism(u0)
        vals = expected_row_utilities(mech, u0)
        undom = undominated_actions(u0)
        assert undom.size >= 1
        assert np.max(np.abs(vals[undom] - u_star)) <= 1e-9
        rep = check_incentive_compat(uniform_over(undom, u0.shape[0]), mech, u0)
        assert rep.feasible


class TestStrategyDiagnostics:
    def test_informativeness(self):
        flat = StrategyTable(np.tile([[0.5, 0.5]], (3, 1, 1)))
        assert not informativeness(flat)
        probs = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
        assert informativeness(StrategyTable(probs))

    def test_pushforward_constant_with_duplicate_rows(self):
        # two actions mapping to the same lottery: switching between them is
        # informative in actions but invisible in consequences
        mech = Mechanism(np.array([[0.3, 0.7], [0.3, 0.7]]))
        probs = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
        assert pushforward_constant(StrategyTable(probs), mech)
        assert not pushforward_constant(
            StrategyTable(probs), Mechanism(np.array([[0.3, 0.7], [0.4, 0.6]]))
        )


class TestOutcomeSets:
    def test_default_generators_are_pure_actions(self):
        mech = build_indifference_mechanism(U_2X2)
        outs = OutcomeSet.from_mechanism(mech)
        assert outs.n_generators == 2
        np.testing.assert_allclose(outs.weights.sum(axis=(1, 2)), 1.0)
        assert best_outcome_value(U_2X2, outs) == 1.0
        # both generators are worth exactly u_star, a designed tie
        assert argmax_outcomes(U_2X2, outs).tolist() == [0, 1]

    def test_generic_utility_breaks_the_tie(self):
        mech = build_indifference_mechanism(U_2X2)
        outs = OutcomeSet.from_mechanism(mech)
        u = np.array([[0.0, 2.0], [1.1, 1.0]])
        assert argmax_outcomes(u, outs).tolist() == [1]


class TestTieFrequency:
    def family(self, size):
        space = OutcomeSpace(labels=tuple(f"x{k}" for k in range(size)))
        return PrevalentFamily(
            space=space,
            base=UtilityFn(space=space, table=(0.0,) * size),
            lambda_density=("gaussian", 0.0, 1.0),
            dim=size,
        )

    def test_density_draws_never_tie(self):
        mech = Mechanism(np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]))
        outs = OutcomeSet.from_mechanism(mech)
        freq = tie_frequency_experiment(self.family(6), outs, n_samples=20_000, seed=5)
        assert freq == 0.0

    def test_duplicated_lotteries_always_tie(self):
        mech = Mechanism(np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]))
        same = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0]])
        outs = OutcomeSet.from_mechanism(mech, action_lotteries=same)
        freq = tie_frequency_experiment(self.family(6), outs, n_samples=5_000, seed=5)
        assert freq == 1.0


class TestSemiPrevalent:
    def test_action_idiosyncrasy_flags_informative_strategy(self):
        mech = Mechanism(np.eye(2))
        informative = StrategyTable(np.array([[[1.0, 0.0]], [[0.0, 1.0]]]))
        flat = StrategyTable(np.tile([[0.5, 0.5]], (2, 1, 1)))
        public_c = np.zeros(2)
        private_a = np.zeros((1, 2))  # indifferent type: IC holds everywhere
        assert not semi_prevalent_check(public_c, private_a, "actions", mech, informative)
        assert semi_prevalent_check(public_c, private_a, "actions", mech, flat)

    def test_consequence_idiosyncrasy_permits_invisible_variation(self):
        mech = Mechanism(np.array([[0.3, 0.7], [0.3, 0.7]]))
        informative = StrategyTable(np.array([[[1.0, 0.0]], [[0.0, 1.0]]]))
        public_a = np.zeros(2)
        private_c = np.zeros((1, 2))
        assert semi_prevalent_check(public_a, private_c, "consequences", mech, informative)

    def test_ic_infeasible_strategies_are_vacuously_benign(self):
        mech = Mechanism(np.eye(2))
        bad = StrategyTable(np.array([[[0.0, 1.0]], [[0.0, 1.0]]]))
        public_c = np.zeros(2)
        private_a = np.array([[1.0, 0.0]])  # action 0 strictly better
        assert semi_prevalent_check(public_c, private_a, "actions", mech, bad)


class TestContractor:
    def scenario(self):
        return ContractorScenario(
            profits=[0.0, 1.0, 2.0],
            customer_values=[[0.2, 1.0, 0.1], [0.2, 0.1, 0.9]],
            prior=[0.5, 0.5],
            effort_grid=[0.0, 1.0, 2.0],
        )

    def test_reservation_utility(self):
        assert self.scenario().reservation_utility == 0.55

    def test_full_revelation_passes_both_checks(self):
        rep = contractor_equilibrium(self.scenario(), target=[1, 2])
        assert rep.sender_payoffs_equal
        assert rep.sender_payoff_spread <= 1e-9
        assert rep.customer_value == pytest.approx(0.95)
        assert rep.message_strategy == ((1, 1.0), (2, 2.0))

    def test_babbling_achieves_exactly_the_reservation_value(self):
        rep = contractor_equilibrium(self.scenario(), target=[1, 1])
        assert rep.customer_value == rep.reservation_utility == 0.55

    def test_below_reservation_target_rejected(self):
        with pytest.raises(ValueError, match="reservation"):
            contractor_equilibrium(self.scenario(), target=[0, 0])

    def test_scenario_validation(self):
        with pytest.raises(ValueError, match="outside option"):
            ContractorScenario(
                profits=[1.0, 2.0],
                customer_values=[[1.0, 0.0]],
                prior=[1.0],
                effort_grid=[0.0, 1.0, 2.0],
            )
        with pytest.raises(ValueError, match="missing the profit level"):
            contractor_equilibrium(
                ContractorScenario(
                    profits=[0.0, 1.0, 2.0],
                    customer_values=[[0.2, 1.0, 0.1], [0.2, 0.1, 0.9]],
                    prior=[0.5, 0.5],
                    effort_grid=[0.0, 1.0],
                ),
                target=[1, 2],
            )
