import numpy as np
import pytest

from eqlab.monitoring import SignalRecord, SignalStructure
from eqlab.strategies import (
    Atonement,
    BeliefBased,
    GameParams,
    GrimTrigger,
    atonement_machines,
    belief_based_machines,
    constant_machines,
    grim_machines,
    grim_trigger_threshold,
    proportional_response_machines,
    proportionality_constant,
    public_proportional_machines,
    simulate,
    stage_payoff,
)

PERFECT2 = SignalStructure("perfect", 2)
SUM2 = SignalStructure("deterministic_public_sum", 2)


def test_stage_payoff():
    p = GameParams(2, 0.5, 0.75)
    np.testing.assert_allclose(stage_payoff(p, [1.0, 0.5]), [0.125, 0.625])
    batch = stage_payoff(p, np.array([[1.0, 1.0], [0.0, 0.0]]))
    np.testing.assert_allclose(batch, [[0.5, 0.5], [0.0, 0.0]])


def test_params_domain():
    with pytest.raises(ValueError):
        GameParams(1, 0.5, 0.75)
    with pytest.raises(ValueError):
        GameParams(2, 1.0, 0.75)
    with pytest.raises(ValueError):
        GameParams(2, 0.5, 0.5)  # boundary excluded
    with pytest.raises(ValueError):
        GameParams(2, 0.5, (0.75, 1.0))


def test_reaction_slopes_are_the_offsetting_ones():
    assert proportionality_constant(GameParams(2, 0.5, 0.75), "neighbor") == pytest.approx(2 / 3)
    assert proportionality_constant(GameParams(3, 0.5, 0.75), "public") == pytest.approx(1 / 3)
    assert grim_trigger_threshold(0.6, 2) == pytest.approx(2 / 3)


class TestGrim:
    def test_punishment_is_absorbing(self):
        m = GrimTrigger(n_agents=2)
        s = m.initial_state()
        assert m.act(s)[0] == 1.0
        s = m.transition(s, 1.0, SignalRecord(own_action=1.0, public=(1.0, 1.0)))
        assert not s.punished
        s = m.transition(s, 1.0, SignalRecord(own_action=1.0, public=(1.0, 0.4)))
        assert s.punished and m.act(s)[0] == 0.0
        s = m.transition(s, 0.0, SignalRecord(own_action=0.0, public=(1.0, 1.0)))
        assert s.punished  # no forgiveness


class TestProportionalResponse:
    def test_prescription_tracks_the_neighbor_surprise(self):
        p = GameParams(2, 0.5, 0.75, x=(0.5, 0.5))
        m = proportional_response_machines(p, (0.5, 0.5))[0]
        s = m.initial_state()
        assert m.act(s)[0] == 0.5
        s = m.transition(s, 0.5, SignalRecord(own_action=0.5, private=0.35))
        assert m.act(s)[0] == pytest.approx(0.5 + (2 / 3) * (0.35 - 0.5))

    def test_infeasible_targets_raise_named_bounds(self):
        p = GameParams(2, 0.5, 0.75)
        with pytest.raises(ValueError, match="lower feasibility bound"):
            proportional_response_machines(p, (0.1, 0.5))
        with pytest.raises(ValueError, match="upper feasibility bound"):
            proportional_response_machines(p, (0.9, 0.5))

    def test_clip_mode_clamps_instead(self):
        p = GameParams(2, 0.5, 0.75)
        m = proportional_response_machines(p, (0.9, 0.5), enforce_bounds=False)[0]
        s = m.transition(m.initial_state(), 0.9, SignalRecord(own_action=0.9, private=1.0))
        assert m.act(s)[0] == 1.0

    def test_noise_margins_tighten_the_bounds(self):
        p = GameParams(2, 0.75, 0.75)
        noisy = SignalStructure("private_neighbor", 2, eps0=0.8, eps1=0.8)
        # feasible without margins, infeasible once the support widens
        proportional_response_machines(p, (0.4, 0.4))
        with pytest.raises(ValueError, match="feasibility bound"):
            proportional_response_machines(p, (0.4, 0.4), ss=noisy)


class TestPublicProportional:
    def test_full_contribution_feasibility_threshold(self):
        # x = 1 for all three agents is constructible iff
        # delta >= (1-kappa)/kappa * N/(N-1), which is 0.5 here
        ok = GameParams(3, 0.52, 0.75)
        bad = GameParams(3, 0.48, 0.75)
        public_proportional_machines(ok, (1.0, 1.0, 1.0))
        with pytest.raises(ValueError, match="feasibility bound"):
            public_proportional_machines(bad, (1.0, 1.0, 1.0))

    def test_reaction_uses_the_total(self):
        p = GameParams(3, 0.6, 0.75)
        m = public_proportional_machines(p, (0.5, 0.5, 0.5))[0]
        s = m.transition(m.initial_state(), 0.5, SignalRecord(own_action=0.5, public=1.2))
        alpha = proportionality_constant(p, "public")
        assert m.act(s)[0] == pytest.approx(0.5 + alpha * (1.2 - 1.5))


class TestAtonement:
    def params(self):
        return GameParams(2, 0.5, 0.75)

    def test_sole_deviator_is_prescribed_full_effort_again(self):
        m = atonement_machines(self.params())[0]
        assert m.alpha == pytest.approx(2 / 3)
        s = m.initial_state()
        # deviator's view: own action 0.5 explains the whole shortfall
        s = m.transition(s, 0.5, SignalRecord(own_action=0.5, public=1.5))
        assert s.prescription == pytest.approx(1.0)
        assert s.expected_total == pytest.approx(5 / 3)

    def test_worked_deviation_path_is_bit_consistent(self):
        p = self.params()
        tr = simulate(p, atonement_machines(p), SUM2, horizon=4, seed=0, deviations={(0, 1): 0.5})
        # shortfall account after the deviation is exactly 2 - 1/3
        assert tr.states[1][0].expected_total == 5 / 3
        assert tr.states[1][1].expected_total == 5 / 3
        np.testing.assert_allclose(tr.actions[0], [1.0, 0.5])
        np.testing.assert_allclose(tr.actions[1], [2 / 3, 1.0])  # punisher vs atoner
        np.testing.assert_allclose(tr.actions[2], [1.0, 1.0])  # clean signal resets
        np.testing.assert_allclose(tr.actions[3], [1.0, 1.0])

    def test_clean_signal_resets_the_account(self):
        m = atonement_machines(self.params())[0]
        s = m.transition(m.initial_state(), 1.0, SignalRecord(own_action=1.0, public=1.5))
        s = m.transition(s, m.act(s)[0], SignalRecord(own_action=2 / 3, public=5 / 3))
        assert s == m.initial_state()

    def test_prescriptions_below_zero_are_clamped_when_acting(self):
        deep = Atonement(n_agents=2, alpha=2.0)
        s = deep.transition(deep.initial_state(), 1.0, SignalRecord(own_action=1.0, public=1.0))
        assert s.prescription < 0
        assert deep.act(s)[0] == 0.0


class TestBeliefBased:
    def test_inflated_slope_and_punish_level(self):
        p = GameParams(2, 0.5, 0.75)
        m = belief_based_machines(p, rho=0.1)[0]
        assert m.alpha == pytest.approx(20 / 27)
        assert m.punish_level == pytest.approx(7 / 27)

    def test_punishes_only_unexplained_shortfalls(self):
        m = BeliefBased(n_agents=2, alpha=20 / 27, rho=0.1)
        s0 = m.initial_state()
        # own shortfall accounts for everything: no punishment prescribed
        s = m.transition(s0, 0.0, SignalRecord(own_action=0.0, public=1.0))
        assert s.prescription == 1.0
        assert s.expected_total == pytest.approx(1.0 + m.punish_level)
        # the other side fell short: punish for one period
        s = m.transition(s0, 1.0, SignalRecord(own_action=1.0, public=1.0))
        assert s.prescription == pytest.approx(m.punish_level)

    def test_coin_is_recorded_and_seed_dependent(self):
        p = GameParams(2, 0.5, 0.75)
        ss = SignalStructure("deterministic_public_sum", 2)
        tr1 = simulate(p, belief_based_machines(p, 0.4), ss, horizon=30, seed=5)
        tr2 = simulate(p, belief_based_machines(p, 0.4), ss, horizon=30, seed=5)
        tr3 = simulate(p, belief_based_machines(p, 0.4), ss, horizon=30, seed=6)
        assert np.array_equal(tr1.actions, tr2.actions)
        assert not np.array_equal(tr1.actions, tr3.actions)
        fired = [st.coin_fired for period in tr1.states for st in period]
        assert any(fired)  # rho = 0.4 over 60 cells


class TestSimulate:
    def test_constant_profile_value(self):
        p = GameParams(2, 0.6, 0.75)
        tr = simulate(p, constant_machines(p, 1.0), PERFECT2, horizon=80, seed=0)
        # (1-delta)-normalized value of a constant stream kappa*N - 1
        want = (0.75 * 2 - 1) * (1 - 0.6**80)
        np.testing.assert_allclose(tr.discounted_values(), want, atol=1e-12)

    def test_deviations_are_played_and_observed(self):
        p = GameParams(2, 0.6, 0.75)
        tr = simulate(p, grim_machines(p), PERFECT2, horizon=3, seed=0, deviations={(0, 1): 0.3})
        assert tr.actions[0, 1] == 0.3
        np.testing.assert_allclose(tr.actions[1:], 0.0)  # both trigger

    def test_trace_csv_round_trips_doubles(self, tmp_path):
        p = GameParams(2, 0.5, 0.75)
        tr = simulate(p, atonement_machines(p), SUM2, horizon=3, seed=0, deviations={(0, 1): 0.5})
        path = tmp_path / "trace.csv"
        tr.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,agent,action,own_echo,public_signal,private_signal,stage_payoff,state"
        assert len(lines) == 1 + 3 * 2
        cell = lines[3].split(",")[2]  # period 1, agent 0 action
        assert float(cell) == tr.actions[1, 0]  # 17g is lossless
