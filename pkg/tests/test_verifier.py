"""Deviation-gain oracles, thresholds, classifiers, and fragility.

Expected values come from closed forms derived independently of the engine:
full-defection gains against trigger strategies are geometric sums, the
atonement gain telescopes to (1-delta)*(1-kappa-delta*kappa), and the
belief-chain values solve a 4-state linear system by hand.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqlab.monitoring import SignalStructure
from eqlab.rng import stream_generator
from eqlab.strategies import (
    GameParams,
    atonement_machines,
    belief_based_machines,
    constant_machines,
    grim_machines,
    proportional_response_machines,
    public_proportional_machines,
    proportionality_constant,
)
from eqlab.verifier import (
    ValueQuery,
    belief_action_value,
    belief_mixing_report,
    belief_state_values,
    classify_all,
    classify_ppe,
    default_horizon,
    discount_threshold_check,
    fragility_experiment,
    one_shot_deviation_gain,
    value,
    verify_equilibrium,
)

SUM2 = SignalStructure("deterministic_public_sum", 2)
SUM3 = SignalStructure("deterministic_public_sum", 3)
PRIV2 = SignalStructure("private_neighbor", 2)


def grim_defection_gain(delta, kappa, n):
    # deviate to 0 once, eat permanent zero-funding afterwards
    return (1 - delta) * (1 - kappa) - delta * (kappa * n - 1)


def test_default_horizon_truncates_below_reporting_tolerance():
    for delta in (0.5, 0.9, 0.99):
        p = GameParams(3, delta, 0.75)
        t = default_horizon(p)
        assert delta**t * (0.75 * 3 + 1) < 1e-10


def test_values_of_constant_profiles():
    p = GameParams(2, 0.6, 0.75)
    zeros = value(ValueQuery(tuple(constant_machines(p, 0.0)), p, SUM2))
    np.testing.assert_array_equal(zeros.values, 0.0)
    full = value(ValueQuery(tuple(constant_machines(p, 1.0)), p, SUM2))
    np.testing.assert_allclose(full.values, 0.75 * 2 - 1, atol=1e-10)
    assert full.truncation_bound < 1e-10


class TestProportionalResponse:
    def test_exact_indifference_on_path(self):
        p = GameParams(2, 0.75, 0.75)
        m = proportional_response_machines(p, (0.6, 0.6))
        rep = verify_equilibrium(ValueQuery(tuple(m), p, SignalStructure("perfect", 2)))
        assert rep.feasible
        assert rep.worst_gain == 0.0  # the slope cancels algebraically
        assert rep.indifference_residual <= 1e-12
        assert rep.method == "analytic"

    def test_grid_of_feasible_calibrations(self):
        # every constructible (kappa, delta, x) cell verifies to 1e-9
        checked = 0
        for kappa in np.linspace(0.55, 0.75, 5):
            for delta in np.linspace(0.5, 0.9, 5):
                p = GameParams(2, float(delta), float(kappa))
                for x in (0.35, 0.5, 0.65):
                    try:
                        m = proportional_response_machines(p, (x, x), ss=PRIV2)
                    except ValueError:
                        continue
                    rep = verify_equilibrium(ValueQuery(tuple(m), p, PRIV2))
                    assert rep.feasible and rep.indifference_residual <= 1e-9, (kappa, delta, x)
                    checked += 1
        assert checked >= 30

    def test_monte_carlo_agrees_with_the_analytic_slope(self):
        # fixed-seed audit over 50 random parameterizations: the 3-SE bound
        # has a ~0.3% per-example tail, so the draws must be recorded
        rng = stream_generator(509)
        checked = 0
        while checked < 50:
            kappa = float(rng.uniform(0.55, 0.9))
            delta = float(rng.uniform(0.5, 0.85))
            x = float(rng.uniform(0.3, 0.7))
            alt = float(rng.uniform(0.0, 1.0))
            seed = int(rng.integers(2**32))
            p = GameParams(2, delta, kappa)
            try:
                m = proportional_response_machines(p, (x, x), ss=PRIV2)
            except ValueError:
                continue
            exact = one_shot_deviation_gain(ValueQuery(tuple(m), p, PRIV2), 0, alt)
            mc = one_shot_deviation_gain(
                ValueQuery(tuple(m), p, PRIV2, method="monte_carlo", n_reps=1200, seed=seed), 0, alt
            )
            assert mc.standard_error is not None
            # common random numbers keep the SE well below the gain scale
            assert abs(mc.gain - exact.gain) <= 3 * mc.standard_error, (kappa, delta, x, alt, seed)
            checked += 1


class TestGrimThreshold:
    def test_closed_form_gain_below_threshold(self):
        # kappa = 0.6, N = 2 puts the boundary at delta* = 2/3
        for delta in (0.55, 0.647):
            p = GameParams(2, delta, 0.6)
            rep = verify_equilibrium(ValueQuery(tuple(grim_machines(p)), p, SUM2))
            assert not rep.feasible
            assert rep.worst_gain == pytest.approx(grim_defection_gain(delta, 0.6, 2), abs=1e-9)

    def test_feasible_above_threshold(self):
        p = GameParams(2, 0.687, 0.6)
        rep = verify_equilibrium(ValueQuery(tuple(grim_machines(p)), p, SUM2))
        assert rep.feasible and rep.worst_gain <= 1e-9

    def test_threshold_report(self):
        rep = discount_threshold_check("grim", GameParams(2, 0.647, 0.6), SUM2)
        assert rep.printed_threshold == pytest.approx(2 / 3)
        assert rep.measured_threshold == pytest.approx(2 / 3)
        assert not rep.feasible


class TestAtonementThreshold:
    def test_brackets_the_printed_boundary(self):
        # printed: delta >= (1-kappa)/kappa = 1/3 at kappa = 0.75
        lo = GameParams(2, 0.32, 0.75)
        hi = GameParams(2, 0.34, 0.75)
        rep_lo = verify_equilibrium(ValueQuery(tuple(atonement_machines(lo)), lo, SUM2))
        rep_hi = verify_equilibrium(ValueQuery(tuple(atonement_machines(hi)), hi, SUM2))
        assert not rep_lo.feasible
        # one defection, one period of atonement at full effort:
        # gain telescopes to (1-delta)*(1-kappa-delta*kappa)
        assert rep_lo.worst_gain == pytest.approx(0.68 * 0.01, abs=1e-9)
        assert rep_hi.feasible and rep_hi.worst_gain <= 1e-9

    def test_measured_threshold_matches_printed(self):
        rep = discount_threshold_check("atonement", GameParams(2, 0.34, 0.75), SUM2)
        assert rep.printed_threshold == pytest.approx(1 / 3)
        assert rep.measured_threshold == pytest.approx(1 / 3, abs=1e-6)
        assert rep.feasible


class TestPublicProportionalCalibration:
    """The printed reaction slope does not null the public-sum deviation gain.

    An agent's own deviation feeds back into their own next-period response
    through the public signal, cascading with ratio N*delta*alpha; at
    kappa = 0.75, N = 3 the per-unit gain slope works out to (1-delta)/6
    for every delta, so the printed calibration never verifies there.
    """

    def test_construction_threshold_brackets(self):
        ok = discount_threshold_check("public_proportional", GameParams(3, 0.52, 0.75), SUM3)
        bad = discount_threshold_check("public_proportional", GameParams(3, 0.48, 0.75), SUM3)
        assert ok.printed_threshold == 0.5
        assert ok.feasible and ok.bound_violation is None
        assert not bad.feasible
        assert "feasibility bound" in bad.bound_violation

    def test_residual_slope_is_one_sixth_of_one_minus_delta(self):
        for delta in (0.52, 0.6, 0.75):
            rep = discount_threshold_check("public_proportional", GameParams(3, delta, 0.75), SUM3)
            assert rep.worst_gain == pytest.approx((1 - delta) / 6, abs=1e-9)

    def test_verify_reports_the_calibration_failure(self):
        p = GameParams(3, 0.52, 0.75)
        m = public_proportional_machines(p, (1.0, 1.0, 1.0), SUM3)
        rep = verify_equilibrium(ValueQuery(tuple(m), p, SUM3))
        assert not rep.feasible
        assert rep.indifference_residual == pytest.approx((1 - 0.52) / 6, abs=1e-9)

    @pytest.mark.xfail(
        strict=True,
        reason="printed public-sum calibration has a nonzero gain slope at every "
        "constructible cell; recorded as a calibration finding",
    )
    def test_all_constructible_cells_verify(self):
        for kappa in np.linspace(0.55, 0.75, 5):
            for delta in np.linspace(0.52, 0.9, 5):
                p = GameParams(3, float(delta), float(kappa))
                for x in (0.35, 0.5, 1.0):
                    try:
                        m = public_proportional_machines(p, (x,) * 3, SUM3)
                    except ValueError:
                        continue
                    rep = verify_equilibrium(ValueQuery(tuple(m), p, SUM3))
                    assert rep.feasible and rep.indifference_residual <= 1e-9


class TestBeliefChain:
    def machines(self):
        return belief_based_machines(GameParams(2, 0.5, 0.75), rho=0.1)

    def params(self):
        return GameParams(2, 0.5, 0.75)

    def test_state_values_solve_the_hand_system(self):
        m = self.machines()
        beta = m[0].punish_level
        assert m[0].alpha == pytest.approx(20 / 27)
        assert beta == pytest.approx(7 / 27)
        vals = belief_state_values(m, self.params())
        v0 = vals[0]
        assert v0[(1.0, 1.0)] == pytest.approx(13 / 30, abs=1e-12)
        assert v0[(1.0, beta)] == pytest.approx(11 / 60, abs=1e-12)
        assert v0[(beta, 1.0)] == pytest.approx(31 / 60, abs=1e-12)
        assert v0[(beta, beta)] == pytest.approx(4 / 15, abs=1e-12)
        # the game is symmetric, so agent 1's values mirror agent 0's
        assert vals[1][(beta, 1.0)] == pytest.approx(v0[(1.0, beta)], abs=1e-12)

    def test_exact_indifference_where_the_coin_mixes(self):
        m = self.machines()
        rep = belief_mixing_report(m, self.params(), tol=1e-6)
        assert rep["feasible"]
        assert len(rep["mixing_states"]) == 4
        for entry in rep["mixing_states"]:
            assert entry["gap_one_vs_zero"] == pytest.approx(0.0, abs=1e-12)
            for a, loss in entry["interior_losses"].items():
                # any visible shortfall triggers the same response, so the
                # interior value is linear: exactly the stage cost of a
                assert loss == pytest.approx(-(1 - 0.5) * (1 - 0.75) * float(a), abs=1e-12)

    def test_punisher_states_are_diagnosed_not_asserted(self):
        m = self.machines()
        rep = belief_mixing_report(m, self.params())
        assert len(rep["punisher_diagnostics"]) == 4
        for d in rep["punisher_diagnostics"]:
            assert d["gap_punish_vs_zero"] == pytest.approx(5 / 54, abs=1e-12)
            assert d["gap_zero_vs_conform"] == pytest.approx(-1 / 12, abs=1e-12)

    def test_action_value_is_consistent_with_state_values(self):
        m = self.machines()
        p = self.params()
        vals = belief_state_values(m, p)
        # conforming from (1,1) under the coin: rho * U(0) + (1-rho) * U(1)
        u0 = belief_action_value(m, p, 0, (1.0, 1.0), 0.0, vals)
        u1 = belief_action_value(m, p, 0, (1.0, 1.0), 1.0, vals)
        mix = 0.1 * u0 + 0.9 * u1
        assert mix == pytest.approx(vals[0][(1.0, 1.0)], abs=1e-12)


class TestDeviationHistories:
    def test_forced_history_equals_explicit_states(self):
        p = GameParams(2, 0.5, 0.75)
        m = atonement_machines(p)
        q = ValueQuery(tuple(m), p, SUM2)
        via_forced = one_shot_deviation_gain(q, 0, 0.0, deviations={(0, 1): 0.5})
        # replay the forced period by hand
        from eqlab.monitoring import SignalRecord

        states = []
        for i, mach in enumerate(m):
            own = 1.0 if i == 0 else 0.5
            states.append(mach.transition(mach.initial_state(), own, SignalRecord(own_action=own, public=1.5)))
        via_states = one_shot_deviation_gain(q, 0, 0.0, states=tuple(states))
        assert via_forced.gain == via_states.gain
        assert via_forced.method == "deterministic"

    def test_monte_carlo_request_rejected_off_support(self):
        p = GameParams(2, 0.5, 0.75)
        mixed = (constant_machines(p, 0.0)[0], atonement_machines(p)[0])
        with pytest.raises(ValueError, match="not supported"):
            one_shot_deviation_gain(
                ValueQuery(mixed, p, SUM2, method="monte_carlo"), 0, 0.5
            )


class TestClassifiers:
    def suite(self):
        cases = {}
        p3 = GameParams(3, 0.6, 0.75)
        cases["public_proportional"] = (public_proportional_machines(p3, (0.5,) * 3, SUM3), SUM3, p3)
        p2 = GameParams(2, 0.5, 0.75)
        cases["atonement_n2"] = (atonement_machines(p2), SUM2, p2)
        p3a = GameParams(3, 0.5, 0.75)
        cases["atonement_n3"] = (atonement_machines(p3a), SUM3, p3a)
        ppr = GameParams(2, 0.75, 0.75)
        cases["proportional_response"] = (
            proportional_response_machines(ppr, (0.6, 0.6)),
            SignalStructure("perfect", 2),
            ppr,
        )
        cases["grim"] = (grim_machines(p2), SUM2, p2)
        cases["all_zero"] = (constant_machines(p3, 0.0), SUM3, p3)
        return cases

    def test_matrix_matches_the_stated_labels(self):
        flags = {name: classify_all(m, ss, p) for name, (m, ss, p) in self.suite().items()}
        pp = flags["public_proportional"]
        assert pp["ppe"] and pp["info_subset"]
        assert not pp["belief_free"] and not pp["atonement"] and not pp["reneg_proof"]
        a2 = flags["atonement_n2"]
        assert a2["ppe"] and a2["atonement"] and a2["reneg_proof"]
        assert not a2["info_subset"] and not a2["belief_free"]
        assert not flags["atonement_n3"]["ppe"]
        pr = flags["proportional_response"]
        assert pr["belief_free"] and not pr["info_subset"]
        assert not flags["grim"]["reneg_proof"]
        z = flags["all_zero"]
        assert z["stage_nash"] and z["ppe"] and not z["atonement"]

    def test_no_profile_is_both_ppe_and_atonement(self):
        # under the strict public-path filtration even the N = 2 atonement
        # machine stops being a public strategy, which is the separation
        for name, (m, ss, p) in self.suite().items():
            flags = classify_all(m, ss, p)
            strict = classify_ppe(m, ss, filtration="public-path")
            assert not (strict and flags["atonement"]), name

    def test_strict_filtration_separates_atonement_n2(self):
        p2 = GameParams(2, 0.5, 0.75)
        m = atonement_machines(p2)
        assert classify_ppe(m, SUM2)  # deducible partner action at N = 2
        assert not classify_ppe(m, SUM2, filtration="public-path")


class TestFragility:
    def test_uniform_shock_identity(self):
        p = GameParams(2, 0.6, 0.75)
        rep = fragility_experiment(p, ("uniform", 0.7, 0.8), n_draws=2_000, seed=4)
        assert rep.interior_br_frequency == 0.0
        assert rep.br_state_dependence_frequency == 0.0
        analytic = (1 - 0.6) * np.mean(np.abs(rep.kappas / 0.75 - 1.0))
        assert rep.mean_ic_violation > 0
        assert rep.mean_ic_violation == pytest.approx(analytic, abs=1e-6)

    def test_no_draw_keeps_the_informative_plan_feasible(self):
        # belief-free play plus signal-independent best responses forces the
        # prescribed plan to fail IC for almost every private coefficient
        p = GameParams(2, 0.6, 0.75)
        m = proportional_response_machines(p, (0.5, 0.5))
        assert classify_all(m, PRIV2, p)["belief_free"]
        rep = fragility_experiment(p, ("uniform", 0.7, 0.8), n_draws=2_000, seed=4)
        per_draw = (1 - 0.6) * np.abs(rep.kappas / 0.75 - 1.0)
        assert np.count_nonzero(per_draw <= 1e-12) == 0

    def test_point_mass_recovers_public_indifference(self):
        p = GameParams(2, 0.6, 0.75)
        rep = fragility_experiment(p, ("point", 0.75), n_draws=50, seed=4)
        assert rep.interior_br_frequency == 1.0

    def test_one_sided_shock_biases_the_best_response(self):
        p = GameParams(2, 0.5, 0.75)
        rep = fragility_experiment(p, ("point", 0.8), n_draws=50, seed=4)
        assert rep.interior_br_frequency == 0.0
        assert rep.br_state_dependence_frequency == 0.0
        assert rep.mean_ic_violation == pytest.approx((1 - 0.5) * (0.8 / 0.75 - 1.0), abs=1e-12)

    @given(
        lo=st.floats(0.55, 0.85),
        width=st.floats(0.02, 0.1),
        seed=st.integers(0, 2**32),
    )
    @settings(max_examples=20, deadline=None)
    def test_interior_best_responses_have_measure_zero(self, lo, width, seed):
        hi = min(lo + width, 0.99)
        kbar = (lo + hi) / 2  # interior of the support
        p = GameParams(2, 0.6, kbar)
        rep = fragility_experiment(p, ("uniform", lo, hi), n_draws=500, seed=seed)
        assert rep.interior_br_frequency == 0.0
