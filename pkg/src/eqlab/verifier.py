"""Equilibrium verification and classification for strategy machines.

The workhorse question: does any agent gain from a one-shot deviation,
reverting to their machine afterwards?  Four engines answer it, picked by
profile structure:

* analytic: Proportional Response, Public Proportional and constant
  machines react linearly to signals with exact-mean noise, so a deviation
  impulse propagates through the reaction matrix M and the gain is
  (1 - delta) * dev * [(kappa_i - 1) + (kappa_i 1 - e_i)' dM(I - dM)^-1 e_i],
  independent of history.  Exact, noise included.
* deterministic rollout: with deterministic monitoring and deterministic
  machines, two exact rollouts (deviate vs conform) truncated where
  delta^T times the payoff range is negligible.
* Markov solve: the two-agent belief-based mixture lives on a four-state
  prescription chain; values solve a linear system and deviation gains are
  exact event-probability sums.
* Monte Carlo: everything else, vectorized across replications with common
  random numbers between the deviation and conformity branches.

Classifiers are structural probes over finite history sets (on-path plus
single deviations, signals from a small alphabet for noisy kinds).  They
certify properties on the probe set only and are named accordingly in
reports.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from eqlab.monitoring import SignalRecord, SignalStructure
from eqlab.prefs import liquidity_shock_draw
from eqlab.rng import stream_generator, substream
from eqlab.strategies import (
    Atonement,
    BeliefBased,
    GameParams,
    grim_trigger_threshold,
    proportionality_constant,
    stage_payoff,
)

__all__ = [
    "ValueQuery",
    "ValueResult",
    "GainResult",
    "VerificationReport",
    "ThresholdReport",
    "FragilityReport",
    "default_horizon",
    "value",
    "one_shot_deviation_gain",
    "verify_equilibrium",
    "discount_threshold_check",
    "classify_ppe",
    "info_subset_check",
    "belief_free_check",
    "atonement_check",
    "reneg_proof_check",
    "stage_nash_check",
    "classify_all",
    "fragility_experiment",
    "belief_state_values",
    "belief_action_value",
    "belief_mixing_report",
]

_TOL = 1e-12
_LINEAR_KINDS = ("proportional_response", "public_proportional", "constant")
_DET_STRUCTURES = ("perfect", "deterministic_public_sum", "deterministic_private_neighbor")


def _payoff_range(params: GameParams) -> float:
    # stage payoff lies in [-1, kappa*N]
    return float(np.max(params.kappa_vector()) * params.n_agents + 1.0)


def default_horizon(params: GameParams, target: float = 1e-11) -> int:
    """Smallest T with delta^T times the payoff range below target."""
    t = int(np.ceil(np.log(target / _payoff_range(params)) / np.log(params.delta)))
    return int(min(max(t, 40), 40000))


def _is_latent(machines) -> bool:
    return any(isinstance(m, BeliefBased) and m.rho > 0 for m in machines)


def _all_linear(machines) -> bool:
    return all(m.kind in _LINEAR_KINDS and not getattr(m, "clip", False) for m in machines)


# ---------------------------------------------------------------------------
# query/report types


@dataclass(frozen=True)
class ValueQuery:
    machines: tuple
    params: GameParams
    structure: SignalStructure
    horizon: int | None = None
    method: str = "auto"  # auto | analytic_linear | monte_carlo
    n_reps: int = 10_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "machines", tuple(self.machines))
        if len(self.machines) != self.params.n_agents:
            raise ValueError("one machine per agent")
        if self.method not in ("auto", "analytic_linear", "monte_carlo"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be at least 1")

    def resolved_horizon(self) -> int:
        return self.horizon if self.horizon is not None else default_horizon(self.params)


@dataclass(frozen=True)
class ValueResult:
    values: np.ndarray
    truncation_bound: float
    horizon: int
    method: str
    standard_errors: np.ndarray | None = None


@dataclass(frozen=True)
class GainResult:
    gain: float
    method: str
    standard_error: float | None = None


@dataclass(frozen=True)
class ThresholdReport:
    kind: str
    printed_threshold: float
    delta: float
    feasible: bool
    measured_threshold: float | None = None
    worst_gain: float | None = None
    bound_violation: str | None = None
    note: str = ""


@dataclass(frozen=True)
class VerificationReport:
    values: np.ndarray
    worst_gain: float
    indifference_residual: float
    feasible: bool
    tol: float
    truncation_bound: float
    horizon: int
    method: str
    mc_standard_error: float | None = None
    flags: dict | None = None
    threshold: ThresholdReport | None = None
    notes: tuple = ()


@dataclass(frozen=True)
class FragilityReport:
    interior_br_frequency: float
    mean_ic_violation: float
    br_state_dependence_frequency: float
    n_draws: int
    kappas: np.ndarray


# ---------------------------------------------------------------------------
# deterministic records and probe histories


def _deterministic_records(ss: SignalStructure, actions: Sequence[float]) -> list[SignalRecord]:
    a = [float(v) for v in actions]
    n = ss.n_agents
    if ss.kind == "perfect":
        prof = tuple(a)
        return [SignalRecord(own_action=a[i], public=prof) for i in range(n)]
    if ss.kind == "deterministic_public_sum":
        s = float(sum(a))
        return [SignalRecord(own_action=a[i], public=s) for i in range(n)]
    if ss.kind == "deterministic_private_neighbor":
        return [SignalRecord(own_action=a[i], private=a[ss.neighbor[i]]) for i in range(n)]
    raise ValueError(f"{ss.kind} is not deterministic")


def _records_with_choice(ss: SignalStructure, actions, choice) -> list[SignalRecord]:
    """Records for a probed signal realization (noisy kinds)."""
    a = [float(v) for v in actions]
    n = ss.n_agents
    if ss.kind == "noisy_public_sum":
        return [SignalRecord(own_action=a[i], public=float(choice)) for i in range(n)]
    if ss.kind == "private_neighbor":
        return [SignalRecord(own_action=a[i], private=float(choice[i])) for i in range(n)]
    raise ValueError(f"{ss.kind} takes no signal choice")


def _signal_alphabet(ss: SignalStructure, mean: float) -> list[float]:
    """Probe values for one noisy signal: mean, mean +- half-support, ends."""
    lo, hi = ss.support()
    half = 0.5 * (hi - lo)
    vals = {mean, max(lo, mean - half), min(hi, mean + half), lo, hi}
    return sorted(vals)


def _period_choices(ss: SignalStructure, actions) -> list:
    """Enumerate signal realizations to probe for one period."""
    if ss.kind in _DET_STRUCTURES:
        return [None]
    if ss.kind == "noisy_public_sum":
        return _signal_alphabet(ss, float(np.sum(actions)))
    # private noisy: joint per-agent choices; keep the alphabet tiny
    lo, hi = ss.support()
    per_agent = [
        sorted({float(actions[ss.neighbor[i]]), lo, hi}) for i in range(ss.n_agents)
    ]
    return [tuple(c) for c in itertools.product(*per_agent)]


def _make_records(ss, actions, choice):
    if choice is None:
        return _deterministic_records(ss, actions)
    return _records_with_choice(ss, actions, choice)


@dataclass(frozen=True)
class ProbePoint:
    """A probed history: machine states after it, plus what was seen."""

    states: tuple
    plays: tuple  # per period: tuple of actions
    records: tuple  # per period: tuple of SignalRecord

    @property
    def depth(self) -> int:
        return len(self.plays)


def probe_points(machines, ss: SignalStructure, depth: int = 3, dev_actions=(0.0, 0.5)) -> list[ProbePoint]:
    """On-path history plus all single-deviation histories up to depth.

    Deviations force an absolute action for one (period, agent).  Noisy
    kinds branch over a small signal alphabet each period.  Machines with
    latent randomization cannot be probed this way.
    """
    if _is_latent(machines):
        raise ValueError("probe enumeration requires deterministic machines")
    n = len(machines)
    out: list[ProbePoint] = []

    def rec(states, plays, records, dev_used, t):
        out.append(ProbePoint(tuple(states), tuple(plays), tuple(records)))
        if t == depth:
            return
        options = [None]
        if not dev_used:
            options += [(j, float(d)) for j in range(n) for d in dev_actions]
        for opt in options:
            acts = []
            for i, m in enumerate(machines):
                a, _ = m.act(states[i])
                acts.append(a)
            if opt is not None:
                j, d = opt
                if abs(acts[j] - d) < 1e-12:
                    continue  # not actually a deviation
                acts[j] = d
            for choice in _period_choices(ss, acts):
                recs = _make_records(ss, acts, choice)
                nxt = [m.transition(states[i], acts[i], recs[i]) for i, m in enumerate(machines)]
                rec(nxt, plays + [tuple(acts)], records + [tuple(recs)], dev_used or (opt is not None), t + 1)

    rec([m.initial_state() for m in machines], [], [], False, 0)
    return out


# ---------------------------------------------------------------------------
# analytic engine for linear profiles


def _reaction_matrix(machines) -> np.ndarray:
    """M[j, k]: next-period response of agent j to agent k's current action."""
    n = len(machines)
    m_mat = np.zeros((n, n))
    for j, m in enumerate(machines):
        if m.kind == "proportional_response":
            m_mat[j, m.partner] = m.alpha
        elif m.kind == "public_proportional":
            m_mat[j, :] = m.alpha
        elif m.kind == "constant":
            pass
        else:
            raise ValueError(f"{m.kind} is not a linear machine")
    return m_mat


def _analytic_gain_slopes(machines, params: GameParams) -> np.ndarray:
    """Per-agent derivative of the one-shot deviation gain in the deviation.

    Exact for linear machines under exact-mean noise; independent of the
    history.  Requires the discounted reaction cascade to converge.
    """
    n = len(machines)
    m_mat = _reaction_matrix(machines)
    d = params.delta
    if np.max(np.abs(np.linalg.eigvals(d * m_mat))) >= 1.0 - 1e-12:
        raise ValueError("discounted reaction cascade does not converge")
    resolvent = d * m_mat @ np.linalg.inv(np.eye(n) - d * m_mat)
    kap = params.kappa_vector()
    slopes = np.empty(n)
    for i in range(n):
        w = kap[i] * np.ones(n)
        w[i] -= 1.0
        slopes[i] = (1 - d) * ((kap[i] - 1.0) + w @ resolvent[:, i])
    return slopes


def _expected_action_path(machines, horizon: int) -> np.ndarray:
    """Expected on-path actions of a linear profile, (T, N)."""
    n = len(machines)
    acts = np.zeros((horizon, n))
    states = [m.initial_state() for m in machines]
    cur = np.array([m.act(states[i])[0] for i, m in enumerate(machines)])
    for t in range(horizon):
        acts[t] = cur
        nxt = np.empty(n)
        for i, m in enumerate(machines):
            if m.kind == "proportional_response":
                nxt[i] = m.x_own + m.alpha * (cur[m.partner] - m.x_partner)
            elif m.kind == "public_proportional":
                nxt[i] = m.x_own + m.alpha * (cur.sum() - m.x_total)
            else:
                nxt[i] = cur[i]
        cur = nxt
    return acts


# ---------------------------------------------------------------------------
# deterministic rollout engine


def _roll_value(machines, states, ss, params: GameParams, horizon: int, override=None) -> np.ndarray:
    """Discounted normalized values from given states, deterministic play.

    ``override=(agent, action)`` forces one action in the first period.
    Noisy structures are replaced by their signal means, which keeps the
    rollout exact for linear machines only; nonlinear machines refuse.
    """
    n = len(machines)
    if ss.is_noisy and not _all_linear(machines):
        raise ValueError("deterministic rollout under noise is exact for linear machines only")
    d = params.delta
    kap = params.kappa_vector()
    vals = np.zeros(n)
    w = 1.0 - d
    states = list(states)
    for t in range(horizon):
        acts = []
        for i, m in enumerate(machines):
            a, _ = m.act(states[i])
            acts.append(a)
        if t == 0 and override is not None:
            acts[override[0]] = float(override[1])
        total = sum(acts)
        for i in range(n):
            vals[i] += w * (kap[i] * total - acts[i])
        if ss.kind in _DET_STRUCTURES:
            recs = _deterministic_records(ss, acts)
        elif ss.kind == "noisy_public_sum":
            recs = _records_with_choice(ss, acts, total)
        else:
            recs = _records_with_choice(ss, acts, tuple(acts[ss.neighbor[i]] for i in range(n)))
        states = [m.transition(states[i], acts[i], recs[i]) for i, m in enumerate(machines)]
        w *= d
    return vals


def _gain_deterministic(machines, states, ss, params, agent, alt, horizon) -> float:
    conform = _roll_value(machines, states, ss, params, horizon)
    deviate = _roll_value(machines, states, ss, params, horizon, override=(agent, alt))
    return float(deviate[agent] - conform[agent])


# ---------------------------------------------------------------------------
# belief-based mixture: exact four-state chain at N = 2


def _belief_machine_pair(machines):
    if len(machines) != 2 or not all(isinstance(m, BeliefBased) for m in machines):
        raise ValueError("the exact chain engine handles two belief-based machines")
    return machines[0], machines[1]


def _belief_next(machine: BeliefBased, p_own, p_other, a_own, a_other):
    state = machine.initial_state()._replace(prescription=p_own, expected_total=p_own + p_other)
    rec = SignalRecord(own_action=a_own, public=a_own + a_other)
    nxt = machine.transition(state, a_own, rec)
    return nxt.prescription


def belief_state_values(machines, params: GameParams) -> dict:
    """Exact per-agent values at each joint prescription state (N = 2).

    States are pairs (p_0, p_1) of current prescriptions with the believed
    total consistent (p_0 + p_1).  Values solve the linear system induced
    by the independent latent coins.
    """
    m0, m1 = _belief_machine_pair(machines)
    beta0, beta1 = m0.punish_level, m1.punish_level
    states = [(a, b) for a in (1.0, beta0) for b in (1.0, beta1)]
    states = list(dict.fromkeys(states))
    idx = {s: k for k, s in enumerate(states)}
    d = params.delta
    kap = params.kappa_vector()
    n_s = len(states)
    values = {}
    for agent in (0, 1):
        mat = np.eye(n_s)
        rhs = np.zeros(n_s)
        for s, k in idx.items():
            p0, p1 = s
            for c0 in (False, True):
                pr0 = m0.rho if c0 else 1.0 - m0.rho
                a0 = 0.0 if c0 else min(1.0, max(0.0, p0))
                for c1 in (False, True):
                    pr1 = m1.rho if c1 else 1.0 - m1.rho
                    a1 = 0.0 if c1 else min(1.0, max(0.0, p1))
                    prob = pr0 * pr1
                    if prob == 0.0:
                        continue
                    q0 = _belief_next(m0, p0, p1, a0, a1)
                    q1 = _belief_next(m1, p1, p0, a1, a0)
                    nxt = idx[(q0, q1)]
                    u = kap[agent] * (a0 + a1) - (a0 if agent == 0 else a1)
                    rhs[k] += prob * (1 - d) * u
                    mat[k, nxt] -= prob * d
        sol = np.linalg.solve(mat, rhs)
        values[agent] = {s: float(sol[idx[s]]) for s in states}
    return values


def belief_action_value(machines, params: GameParams, agent: int, state, action: float, values=None) -> float:
    """Exact value of playing ``action`` now at a joint state, then reverting."""
    if values is None:
        values = belief_state_values(machines, params)
    m0, m1 = _belief_machine_pair(machines)
    other = 1 - agent
    m_own = machines[agent]
    m_oth = machines[other]
    p_own = state[agent]
    p_oth = state[other]
    d = params.delta
    kap = params.kappa_vector()
    total = 0.0
    for c in (False, True):
        pr = m_oth.rho if c else 1.0 - m_oth.rho
        a_oth = 0.0 if c else min(1.0, max(0.0, p_oth))
        if pr == 0.0:
            continue
        q_own = _belief_next(m_own, p_own, p_oth, action, a_oth)
        q_oth = _belief_next(m_oth, p_oth, p_own, a_oth, action)
        nxt = (q_own, q_oth) if agent == 0 else (q_oth, q_own)
        u = kap[agent] * (action + a_oth) - action
        total += pr * ((1 - d) * u + d * values[agent][nxt])
    return float(total)


def belief_mixing_report(
    machines,
    params: GameParams,
    tol: float = 1e-6,
    interior=(0.25, 0.5, 0.75),
) -> dict:
    """Does the randomizing device actually face an indifferent agent?

    At every joint state where an agent's prescription is 1 the machine
    mixes between contributing 0 and 1, so those two actions must be worth
    the same; interior contributions must lose strictly.  States where the
    prescription is the punishment level get diagnostics only: the mix there
    is 0 versus the punishment contribution, and the measured gap is
    reported rather than asserted.
    """
    vals = belief_state_values(machines, params)
    states = list(next(iter(vals.values())).keys())
    mixing = []
    diagnostics = []
    feasible = True
    for agent in (0, 1):
        for s in states:
            presc = float(s[agent])
            u0 = belief_action_value(machines, params, agent, s, 0.0, vals)
            if presc == 1.0:
                gap = belief_action_value(machines, params, agent, s, 1.0, vals) - u0
                losses = {
                    a: belief_action_value(machines, params, agent, s, float(a), vals) - u0
                    for a in interior
                }
                ok = abs(gap) <= tol and all(v < -tol for v in losses.values())
                feasible = feasible and ok
                mixing.append(
                    {
                        "agent": agent,
                        "state": [float(v) for v in s],
                        "gap_one_vs_zero": float(gap),
                        "interior_losses": {str(a): float(v) for a, v in losses.items()},
                        "ok": ok,
                    }
                )
            else:
                sup = belief_action_value(machines, params, agent, s, min(1.0, max(0.0, presc)), vals)
                diagnostics.append(
                    {
                        "agent": agent,
                        "state": [float(v) for v in s],
                        "gap_punish_vs_zero": float(sup - u0),
                        "gap_zero_vs_conform": float(u0 - vals[agent][s]),
                    }
                )
    return {"feasible": feasible, "mixing_states": mixing, "punisher_diagnostics": diagnostics}


# ---------------------------------------------------------------------------
# vectorized Monte Carlo engine (homogeneous machine kinds)


def _vec_triangle_ppf(u: np.ndarray, y: np.ndarray, lo: float, hi: float) -> np.ndarray:
    a = np.full_like(y, lo)
    b = np.full_like(y, hi)
    m = 3.0 * y - lo - hi
    low = m < a
    b = np.where(low, 3.0 * y - 2.0 * lo, b)
    m = np.where(low, a, m)
    high = m > b
    a = np.where(high, 3.0 * y - 2.0 * hi, a)
    m = np.where(high, b, m)
    span = b - a
    degenerate = span <= 1e-15
    span_safe = np.where(degenerate, 1.0, span)
    split = (m - a) / span_safe
    left = a + np.sqrt(np.clip(u, 0, None) * span_safe * (m - a))
    right = b - np.sqrt(np.clip(1.0 - u, 0, None) * span_safe * (b - m))
    out = np.where(u <= split, left, right)
    return np.where(degenerate, a, out)


_MC_KINDS = (
    "constant",
    "grim",
    "public_proportional",
    "proportional_response",
    "atonement",
    "belief_based",
)


def _mc_supported(machines, ss: SignalStructure) -> bool:
    kinds = {m.kind for m in machines}
    if len(kinds) != 1 or next(iter(kinds)) not in _MC_KINDS:
        return False
    if ss.is_noisy and ss.noise.shape != "triangular":
        return False
    return True


def _mc_rollout(machines, ss, params: GameParams, horizon, n_reps, seed, forced=None) -> np.ndarray:
    """Discounted values per replication, (n_reps, N), common-random-number safe.

    All randomness comes from fixed-shape uniform tensors derived from the
    seed, so two calls with the same seed and different ``forced`` actions
    share every draw.
    """
    if not _mc_supported(machines, ss):
        raise ValueError("Monte Carlo rollout needs a homogeneous supported profile")
    kind = machines[0].kind
    forced = forced or {}
    n = params.n_agents
    d = params.delta
    kap = params.kappa_vector()
    r = int(n_reps)
    t_max = int(horizon)

    if ss.kind == "noisy_public_sum":
        u_sig = stream_generator(seed, 0).random((t_max, r))
    elif ss.kind == "private_neighbor":
        u_sig = stream_generator(seed, 0).random((t_max, r, n))
    else:
        u_sig = None
    u_coin = stream_generator(seed, 1).random((t_max, r, n)) if kind == "belief_based" else None
    lo, hi = ss.support() if ss.is_noisy else (0.0, 0.0)

    # per-kind state arrays
    if kind == "grim":
        punished = np.zeros((r, n), dtype=bool)
    elif kind == "public_proportional":
        s_prev = None
    elif kind == "proportional_response":
        sig_prev = None
    elif kind == "atonement":
        xh = np.full((r, n), float(n))
        presc = np.ones((r, n))
    elif kind == "belief_based":
        presc = np.ones((r, n))
        xh = np.full((r, n), float(n))

    vals = np.zeros((r, n))
    w = 1.0 - d
    for t in range(t_max):
        if kind == "constant":
            acts = np.tile([m.level for m in machines], (r, 1))
        elif kind == "grim":
            acts = np.where(punished, 0.0, 1.0)
        elif kind == "public_proportional":
            if s_prev is None:
                acts = np.tile([m.x_own for m in machines], (r, 1))
            else:
                acts = np.stack(
                    [m.x_own + m.alpha * (s_prev - m.x_total) for m in machines], axis=1
                )
            if machines[0].clip:
                acts = np.clip(acts, 0.0, 1.0)
        elif kind == "proportional_response":
            if sig_prev is None:
                acts = np.tile([m.x_own for m in machines], (r, 1))
            else:
                acts = np.stack(
                    [m.x_own + m.alpha * (sig_prev[:, i] - m.x_partner) for i, m in enumerate(machines)],
                    axis=1,
                )
            if machines[0].clip:
                acts = np.clip(acts, 0.0, 1.0)
        elif kind == "atonement":
            acts = np.clip(presc, 0.0, 1.0)
        else:  # belief_based
            coins = u_coin[t] < np.array([m.rho for m in machines])
            acts = np.where(coins, 0.0, np.clip(presc, 0.0, 1.0))

        for (t0, i), a in forced.items():
            if t0 == t:
                acts[:, i] = float(a)

        total = acts.sum(axis=1)
        vals += w * (total[:, None] * kap[None, :] - acts)
        w *= d

        # observe
        if ss.kind == "deterministic_public_sum":
            s = total
        elif ss.kind == "noisy_public_sum":
            s = _vec_triangle_ppf(u_sig[t], total, lo, hi)
        elif ss.kind == "perfect":
            s = None
        elif ss.kind == "deterministic_private_neighbor":
            priv = acts[:, list(ss.neighbor)]
        else:  # private_neighbor
            priv = _vec_triangle_ppf(u_sig[t], acts[:, list(ss.neighbor)], lo, hi)

        # transition
        if kind == "grim":
            if ss.kind == "perfect":
                short = acts.min(axis=1) < 1.0 - 1e-9
                punished |= short[:, None]
            elif ss.kind in ("deterministic_public_sum", "noisy_public_sum"):
                short = s < n - 1e-9
                punished |= short[:, None]
            else:
                punished |= priv < 1.0 - 1e-9
        elif kind == "public_proportional":
            s_prev = s
        elif kind == "proportional_response":
            if ss.kind == "perfect":
                sig_prev = acts[:, [m.partner for m in machines]]
            else:
                sig_prev = priv
        elif kind == "atonement":
            low = (s[:, None] < xh - _TOL)
            alpha = machines[0].alpha
            xh_new = np.where(low, n + (n - 1) * alpha * (s[:, None] - xh), float(n))
            presc = np.where(low, 1.0 + alpha * ((s[:, None] - acts) - (xh - presc)), 1.0)
            xh = xh_new
        elif kind == "belief_based":
            beta = np.array([m.punish_level for m in machines])
            low = (s[:, None] < xh - _TOL)
            own_short = presc - acts
            others_short = (xh - s[:, None]) - own_short
            punish = low & (others_short > _TOL)
            p_next = np.where(punish, beta[None, :], 1.0)
            if n == 2:
                partner_punish = low & (own_short > _TOL)
                partner_next = np.where(partner_punish, beta[::-1][None, :], 1.0)
                xh = p_next + partner_next
            else:
                xh = p_next + (n - 1) * np.where(low, beta[None, :], 1.0)
            presc = p_next
    return vals


# ---------------------------------------------------------------------------
# values


def value(query: ValueQuery) -> ValueResult:
    """Per-agent discounted value of the profile, normalized by (1 - delta)."""
    params = query.params
    horizon = query.resolved_horizon()
    bound = params.delta**horizon * _payoff_range(params)
    method = query.method
    if method == "auto":
        if _all_linear(query.machines):
            method = "analytic_linear"
        else:
            method = "monte_carlo"
    if method == "analytic_linear":
        if not _all_linear(query.machines):
            raise ValueError("analytic_linear requires linear machines only")
        acts = _expected_action_path(query.machines, horizon)
        pays = stage_payoff(params, acts)
        wts = (1 - params.delta) * params.delta ** np.arange(horizon)
        return ValueResult(values=wts @ pays, truncation_bound=bound, horizon=horizon, method=method)
    if _mc_supported(query.machines, query.structure):
        vals = _mc_rollout(query.machines, query.structure, params, horizon, query.n_reps, query.seed)
        se = vals.std(axis=0, ddof=1) / np.sqrt(query.n_reps) if query.n_reps > 1 else np.zeros(params.n_agents)
        return ValueResult(
            values=vals.mean(axis=0),
            truncation_bound=bound,
            horizon=horizon,
            method="monte_carlo",
            standard_errors=se,
        )
    # scalar fallback: exact for deterministic structures, replicated otherwise
    from eqlab.strategies import simulate

    reps = query.n_reps if (query.structure.is_noisy or _is_latent(query.machines)) else 1
    acc = np.zeros((reps, params.n_agents))
    for rep in range(reps):
        tr = simulate(
            params, list(query.machines), query.structure, horizon,
            seed=substream(query.seed, rep), record_states=False,
        )
        acc[rep] = tr.discounted_values()
    se = acc.std(axis=0, ddof=1) / np.sqrt(reps) if reps > 1 else None
    return ValueResult(values=acc.mean(axis=0), truncation_bound=bound, horizon=horizon, method="monte_carlo", standard_errors=se)


# ---------------------------------------------------------------------------
# one-shot deviation gains


def _select_engine(machines, ss: SignalStructure) -> str:
    if _all_linear(machines):
        return "analytic"
    if _is_latent(machines):
        if (
            len(machines) == 2
            and all(isinstance(m, BeliefBased) for m in machines)
            and ss.kind in ("deterministic_public_sum", "perfect")
        ):
            return "belief_markov"
        return "monte_carlo"
    if ss.kind in _DET_STRUCTURES:
        return "deterministic"
    return "monte_carlo"


def one_shot_deviation_gain(
    query: ValueQuery,
    agent: int,
    alt_action: float,
    deviations: dict | None = None,
    states: tuple | None = None,
) -> GainResult:
    """Gain from playing ``alt_action`` once and reverting to the machine.

    The pre-deviation history is either the on-path one, a forced-action
    history (``deviations`` maps (period, agent) to actions; the probe
    happens right after the last forced period), or explicit machine
    ``states``.  Negative means the deviation loses.
    """
    machines = list(query.machines)
    params = query.params
    ss = query.structure
    horizon = query.resolved_horizon()
    engine = _select_engine(machines, ss)
    if query.method == "monte_carlo":
        if not _mc_supported(machines, ss):
            raise ValueError("monte_carlo gain not supported for this profile/structure")
        engine = "monte_carlo"

    if engine == "analytic":
        slopes = _analytic_gain_slopes(machines, params)
        if states is not None:
            st = states
        else:
            st = [m.initial_state() for m in machines]
            if deviations:
                t_end = max(t for t, _ in deviations) + 1
                for t in range(t_end):
                    acts = [m.act(st[i])[0] for i, m in enumerate(machines)]
                    for (td, j), a in deviations.items():
                        if td == t:
                            acts[j] = float(a)
                    recs = (
                        _deterministic_records(ss, acts)
                        if ss.kind in _DET_STRUCTURES
                        else _records_with_choice(
                            ss, acts,
                            float(np.sum(acts)) if ss.kind == "noisy_public_sum"
                            else tuple(acts[ss.neighbor[i]] for i in range(len(acts))),
                        )
                    )
                    st = [m.transition(st[i], acts[i], recs[i]) for i, m in enumerate(machines)]
        prescribed, _ = machines[agent].act(st[agent])
        return GainResult(gain=float(slopes[agent] * (alt_action - prescribed)), method="analytic")

    if engine == "belief_markov":
        if states is not None:
            joint = states
        else:
            joint = (1.0, 1.0)
        vals = belief_state_values(machines, params)
        conform = vals[agent][tuple(joint)]
        dev = belief_action_value(machines, params, agent, tuple(joint), float(alt_action), vals)
        return GainResult(gain=float(dev - conform), method="belief_markov")

    if engine == "deterministic":
        if states is None:
            st = [m.initial_state() for m in machines]
            if deviations:
                t_end = max(t for t, _ in deviations) + 1
                for t in range(t_end):
                    acts = [m.act(st[i])[0] for i, m in enumerate(machines)]
                    for (td, j), a in deviations.items():
                        if td == t:
                            acts[j] = float(a)
                    recs = _deterministic_records(ss, acts)
                    st = [m.transition(st[i], acts[i], recs[i]) for i, m in enumerate(machines)]
        else:
            st = states
        return GainResult(
            gain=_gain_deterministic(machines, st, ss, params, agent, float(alt_action), horizon),
            method="deterministic",
        )

    # Monte Carlo with common random numbers
    t0 = 0
    forced = dict(deviations or {})
    if forced:
        t0 = max(t for t, _ in forced) + 1
    dev_forced = dict(forced)
    dev_forced[(t0, agent)] = float(alt_action)
    conform = _mc_rollout(machines, ss, params, horizon, query.n_reps, query.seed, forced)
    deviate = _mc_rollout(machines, ss, params, horizon, query.n_reps, query.seed, dev_forced)
    diffs = (deviate[:, agent] - conform[:, agent]) / params.delta**t0
    se = float(diffs.std(ddof=1) / np.sqrt(len(diffs)))
    return GainResult(gain=float(diffs.mean()), method="monte_carlo", standard_error=se)


# ---------------------------------------------------------------------------
# full verification


def _deviation_grid(prescribed: float, grid_size: int = 21) -> np.ndarray:
    g = np.unique(np.concatenate([np.linspace(0.0, 1.0, grid_size), [0.0, 1.0, prescribed]]))
    return g


def verify_equilibrium(
    query: ValueQuery,
    tol: float = 1e-9,
    grid_size: int = 21,
    probe_depth: int = 3,
    probe_devs=(0.0, 0.5),
) -> VerificationReport:
    """Check one-shot deviations over a grid at on-path and probed histories.

    Feasible iff the worst gain is at most tol (analytic/exact engines) or
    tol plus three Monte Carlo standard errors.  The report's residual is
    the largest absolute gain, a calibration measure for strategies built
    to make agents indifferent.
    """
    machines = list(query.machines)
    params = query.params
    ss = query.structure
    horizon = query.resolved_horizon()
    bound = params.delta**horizon * _payoff_range(params)
    engine = _select_engine(machines, ss)
    notes = []
    worst = -np.inf
    residual = 0.0
    worst_se = None

    if engine == "analytic":
        slopes = _analytic_gain_slopes(machines, params)
        # linear unclipped machines: gain = slope * (dev - prescribed) at any
        # history, so one probe period already spans the worst case
        pts = probe_points(machines, ss, min(probe_depth, 1), probe_devs)
        for pt in pts:
            for i, m in enumerate(machines):
                prescribed, _ = m.act(pt.states[i])
                for g in _deviation_grid(prescribed, grid_size):
                    gain = slopes[i] * (g - prescribed)
                    worst = max(worst, gain)
                    residual = max(residual, abs(gain))
        vals = value(ValueQuery(tuple(machines), params, ss, horizon, "analytic_linear")).values
        feasible = worst <= tol
        method = "analytic"

    elif engine == "deterministic":
        pts = probe_points(machines, ss, probe_depth, probe_devs)
        for pt in pts:
            conform = _roll_value(machines, pt.states, ss, params, horizon)
            for i, m in enumerate(machines):
                prescribed, _ = m.act(pt.states[i])
                for g in _deviation_grid(prescribed, grid_size):
                    dev = _roll_value(machines, pt.states, ss, params, horizon, override=(i, float(g)))
                    gain = float(dev[i] - conform[i])
                    worst = max(worst, gain)
                    residual = max(residual, abs(gain))
        vals = _roll_value(machines, [m.initial_state() for m in machines], ss, params, horizon)
        feasible = worst <= tol
        method = "deterministic"

    elif engine == "belief_markov":
        svals = belief_state_values(machines, params)
        states = list(svals[0].keys())
        for st in states:
            for i in range(2):
                conform = svals[i][st]
                for g in _deviation_grid(st[i], grid_size):
                    gain = belief_action_value(machines, params, i, st, float(g), svals) - conform
                    worst = max(worst, gain)
                    residual = max(residual, abs(gain))
        vals = np.array([svals[0][(1.0, 1.0)], svals[1][(1.0, 1.0)]])
        feasible = worst <= tol
        notes.append("belief chain engine: exact over joint prescription states")
        method = "belief_markov"

    else:
        base = value(query)
        vals = base.values
        worst_se = 0.0
        for i in range(params.n_agents):
            prescribed, _ = machines[i].act(machines[i].initial_state())
            for g in _deviation_grid(prescribed, grid_size):
                res = one_shot_deviation_gain(query, i, float(g))
                if res.gain > worst:
                    worst = res.gain
                    worst_se = res.standard_error
                residual = max(residual, abs(res.gain))
        feasible = worst <= tol + 3.0 * (worst_se or 0.0)
        notes.append("Monte Carlo engine probes the on-path history only")
        method = "monte_carlo"

    return VerificationReport(
        values=np.asarray(vals),
        worst_gain=float(worst),
        indifference_residual=float(residual),
        feasible=bool(feasible),
        tol=tol,
        truncation_bound=float(bound),
        horizon=horizon,
        method=method,
        mc_standard_error=worst_se,
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# discount thresholds


def discount_threshold_check(
    kind: str,
    params: GameParams,
    ss: SignalStructure | None = None,
    x=None,
    tol: float = 1e-9,
) -> ThresholdReport:
    """Is the strategy's full-cooperation construction sustainable at delta?

    grim and atonement are checked by the deviation engine itself (the
    measured boundary is authoritative and compared against the printed
    formula).  Public Proportional is checked by whether the construction's
    feasibility bounds admit full contribution; its measured worst one-shot
    gain is reported as a diagnostic because the printed reaction slope
    does not null the gain exactly (the public signal feeds an agent's own
    deviation back into their own future response).
    """
    from eqlab.strategies import (
        atonement_machines,
        grim_machines,
        public_proportional_machines,
    )

    n = params.n_agents
    kappa = params.kappa_scalar()
    if ss is None:
        ss = SignalStructure(kind="deterministic_public_sum", n_agents=n)
    if kind == "grim":
        printed = grim_trigger_threshold(kappa, n)
        machines = grim_machines(params)
        rep = verify_equilibrium(ValueQuery(tuple(machines), params, ss), tol=tol)
        measured = (1.0 - kappa) / ((1.0 - kappa) + (kappa * n - 1.0))
        return ThresholdReport(
            kind=kind, printed_threshold=printed, delta=params.delta,
            feasible=rep.feasible, measured_threshold=float(measured),
            worst_gain=rep.worst_gain,
            note="measured boundary solves the exact full-defection gain",
        )
    if kind == "atonement":
        printed = (1.0 - kappa) / kappa
        machines = atonement_machines(params)
        rep = verify_equilibrium(ValueQuery(tuple(machines), params, ss), tol=tol)

        def feasible_at(d):
            p = GameParams(n, d, kappa)
            return verify_equilibrium(
                ValueQuery(tuple(atonement_machines(p)), p, ss),
                tol=tol, grid_size=3, probe_depth=2,
            ).feasible

        measured = _bisect_threshold(feasible_at)
        return ThresholdReport(
            kind=kind, printed_threshold=printed, delta=params.delta,
            feasible=rep.feasible, measured_threshold=measured, worst_gain=rep.worst_gain,
            note="pass/fail follows the measured deviation gains",
        )
    if kind == "public_proportional":
        printed = (1.0 - kappa) / kappa * n / (n - 1.0)
        if x is None:
            x = [1.0] * n
        violation = None
        try:
            machines = public_proportional_machines(params, x, ss)
        except ValueError as err:
            violation = str(err)
            machines = public_proportional_machines(params, x, ss, enforce_bounds=False)
        unclipped = [type(m)(x_own=m.x_own, x_total=m.x_total, alpha=m.alpha, clip=False) for m in machines]
        slopes = _analytic_gain_slopes(unclipped, params)
        return ThresholdReport(
            kind=kind, printed_threshold=printed, delta=params.delta,
            feasible=violation is None,
            worst_gain=float(np.max(slopes)),
            bound_violation=violation,
            note=(
                "feasibility = the construction's bounds admit the target x; "
                "worst_gain is the per-unit deviation slope of the printed calibration"
            ),
        )
    raise ValueError(f"no printed threshold for strategy kind {kind!r}")


def _bisect_threshold(feasible_at, lo: float = 0.02, hi: float = 0.98, iters: int = 40) -> float | None:
    if feasible_at(lo):
        return lo
    if not feasible_at(hi):
        return None
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if feasible_at(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


# ---------------------------------------------------------------------------
# classifiers


def _round_key(v, nd=12):
    if v is None:
        return None
    if isinstance(v, tuple):
        return tuple(_round_key(u, nd) for u in v)
    return round(float(v), nd)


def _view_key(pt: ProbePoint, agent: int) -> tuple:
    """Everything agent saw along the history: own play plus own records."""
    out = []
    for t in range(pt.depth):
        rec = pt.records[t][agent]
        out.append((
            _round_key(pt.plays[t][agent]),
            _round_key(rec.public),
            _round_key(rec.private),
        ))
    return tuple(out)


def _public_key(pt: ProbePoint) -> tuple:
    out = []
    for t in range(pt.depth):
        rec = pt.records[t][0]
        out.append(_round_key(rec.public))
    return tuple(out)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def classify_ppe(
    machines,
    ss: SignalStructure,
    depth: int = 3,
    dev_actions=(0.0, 0.5),
    filtration: str = "common-knowledge",
) -> bool:
    """Is every machine's next action adapted to what is commonly known?

    Histories are probed (on-path plus single deviations); two histories
    fall in the same common-knowledge cell when a chain of agents cannot
    tell them apart, i.e. the meet of the individual information
    partitions.  With ``filtration="public-path"`` the cell is instead the
    raw public signal path, the strictest reading: any private conditioning
    fails, even when deducible.  Mixtures over latent coins condition on
    private randomness and are never adapted.
    """
    if filtration not in ("common-knowledge", "public-path"):
        raise ValueError("filtration must be 'common-knowledge' or 'public-path'")
    if _is_latent(machines):
        return False
    pts = probe_points(machines, ss, depth, dev_actions)
    by_len: dict[int, list[ProbePoint]] = {}
    for pt in pts:
        by_len.setdefault(pt.depth, []).append(pt)
    for group in by_len.values():
        uf = _UnionFind(len(group))
        if filtration == "public-path":
            buckets: dict = {}
            for k, pt in enumerate(group):
                buckets.setdefault(_public_key(pt), []).append(k)
            for members in buckets.values():
                for k in members[1:]:
                    uf.union(members[0], k)
        else:
            for agent in range(len(machines)):
                buckets = {}
                for k, pt in enumerate(group):
                    buckets.setdefault(_view_key(pt, agent), []).append(k)
                for members in buckets.values():
                    for k in members[1:]:
                        uf.union(members[0], k)
        cells: dict[int, list[int]] = {}
        for k in range(len(group)):
            cells.setdefault(uf.find(k), []).append(k)
        for members in cells.values():
            for i, m in enumerate(machines):
                acts = [m.act(group[k].states[i])[0] for k in members]
                if max(acts) - min(acts) > 1e-9:
                    return False
    return True


def info_subset_check(machines, ss: SignalStructure, depth: int = 3, dev_actions=(0.0, 0.5)) -> bool:
    """Does each agent's action rely only on what the others jointly use?

    Probe histories are partitioned by the tuple of the other agents' next
    actions; within a cell, the agent's own next action must be constant.
    An agent reacting to a signal nobody else conditions on (a distinct
    neighbor observation, a latent coin) breaks this.
    """
    if _is_latent(machines):
        return False
    pts = probe_points(machines, ss, depth, dev_actions)
    by_len: dict[int, list[ProbePoint]] = {}
    for pt in pts:
        by_len.setdefault(pt.depth, []).append(pt)
    n = len(machines)
    for group in by_len.values():
        nexts = [[m.act(pt.states[i])[0] for i, m in enumerate(machines)] for pt in group]
        for i in range(n):
            buckets: dict = {}
            for k in range(len(group)):
                key = tuple(_round_key(nexts[k][j]) for j in range(n) if j != i)
                buckets.setdefault(key, []).append(nexts[k][i])
            for acts in buckets.values():
                if max(acts) - min(acts) > 1e-9:
                    return False
    return True


def belief_free_check(
    machines,
    ss: SignalStructure,
    params: GameParams,
    depth: int = 2,
    tol: float = 1e-9,
    grid=(0.0, 0.25, 0.5, 0.75, 1.0),
) -> bool:
    """Is conformity a best response no matter which history the others saw?

    Cross-pairs each agent's probed state with the others' states from
    every other same-length probe and checks one-shot conformity gains
    there.  Linear profiles have history-independent gains, so the check
    reduces to the sign of the reaction slope over reachable prescriptions.
    """
    if _is_latent(machines):
        raise ValueError("belief-free probing requires deterministic machines")
    pts = probe_points(machines, ss, depth, (0.0, 0.5))
    horizon = default_horizon(params)
    n = len(machines)
    if _all_linear(machines):
        slopes = _analytic_gain_slopes(machines, params)
        for pt in pts:
            for i, m in enumerate(machines):
                p, _ = m.act(pt.states[i])
                for g in grid:
                    if slopes[i] * (g - p) > tol:
                        return False
        return True
    if ss.kind not in _DET_STRUCTURES:
        raise ValueError("nonlinear belief-free probing implemented for deterministic monitoring")
    by_len: dict[int, list[ProbePoint]] = {}
    for pt in pts:
        by_len.setdefault(pt.depth, []).append(pt)
    for group in by_len.values():
        for i in range(n):
            seen = set()
            for mine in group:
                for theirs in group:
                    joint = tuple(
                        mine.states[j] if j == i else theirs.states[j] for j in range(n)
                    )
                    key = repr(joint)
                    if key in seen:
                        continue
                    seen.add(key)
                    conform = _roll_value(machines, joint, ss, params, horizon)[i]
                    prescribed, _ = machines[i].act(joint[i])
                    for g in grid:
                        if abs(g - prescribed) < 1e-12:
                            continue
                        dev = _roll_value(machines, joint, ss, params, horizon, override=(i, float(g)))[i]
                        if dev - conform > tol:
                            return False
    return True


def atonement_check(
    machines,
    ss: SignalStructure,
    params: GameParams,
    depth: int = 2,
    drops=(0.5, 1.0),
) -> bool:
    """Does choosing a myopically better action ever worsen one's continuation,
    holding the realized public path fixed?

    For each probed state, each agent, and each pair (prescribed action,
    lower alternative), the agent's continuation value is compared with
    today's public signal drawn from a shared alphabet and the entire
    future public path pinned to its keep-branch realization.  Everyone
    else then behaves identically in the two branches, so the difference
    isolates what the agent's own past action does to their own future
    burden.  True iff some pair is weakly worse at every probed signal and
    strictly worse at one: the signature of a deviator who must buy back
    cooperation with extra contributions.  Machines that condition on the
    public path alone can never differ across branches, so any profile
    adapted to the public filtration is False by construction.
    """
    if not ss.is_public:
        raise ValueError("atonement is defined against public signals")
    if _is_latent(machines):
        raise ValueError("atonement probing requires deterministic machines")
    horizon = default_horizon(params)
    n = len(machines)
    pts = probe_points(machines, ss, depth, (0.0, 0.5))
    for pt in pts:
        prescribed = [machines[i].act(pt.states[i])[0] for i in range(n)]
        base_sum = float(sum(prescribed))
        sums = sorted({max(0.0, base_sum - d) for d in (0.0, 0.5, 1.0)})
        for i in range(n):
            a = prescribed[i]
            for drop in drops:
                a_alt = max(0.0, a - drop)
                if a - a_alt < 1e-9:
                    continue
                worse_everywhere = True
                strictly_somewhere = False
                for s in sums:
                    v_keep, path = _pinned_continuation(
                        machines, pt.states, ss, params, i, a, s, horizon, None
                    )
                    v_alt, _ = _pinned_continuation(
                        machines, pt.states, ss, params, i, a_alt, s, horizon, path
                    )
                    if v_alt > v_keep + 1e-12:
                        worse_everywhere = False
                        break
                    if v_alt < v_keep - 1e-9:
                        strictly_somewhere = True
                if worse_everywhere and strictly_somewhere:
                    return True
    return False


def _pinned_continuation(machines, states, ss, params, agent, action, public_sum, horizon, pinned_path):
    """Agent's continuation value after playing ``action`` against today's
    signal ``public_sum``.

    With ``pinned_path=None`` the future public signals realize naturally
    (signal means under noise) and the realized path is returned for
    replay; otherwise every future public signal is forced to the pinned
    value while own echoes stay truthful.
    """
    n = len(machines)
    d = params.delta
    kap = params.kappa_vector()
    acts = [machines[j].act(states[j])[0] for j in range(n)]
    acts[agent] = float(action)
    recs = [SignalRecord(own_action=acts[j], public=float(public_sum)) for j in range(n)]
    cur = [machines[j].transition(states[j], acts[j], recs[j]) for j in range(n)]
    path_out = []
    val = 0.0
    w = 1.0 - d
    for t in range(horizon):
        acts = [machines[j].act(cur[j])[0] for j in range(n)]
        total = float(sum(acts))
        val += w * (kap[agent] * total - acts[agent])
        w *= d
        if pinned_path is None:
            if ss.kind == "perfect":
                pub = tuple(acts)
            else:
                pub = total
            path_out.append(pub)
        else:
            pub = pinned_path[t]
        recs = [SignalRecord(own_action=acts[j], public=pub) for j in range(n)]
        cur = [machines[j].transition(cur[j], acts[j], recs[j]) for j in range(n)]
    return float(val), path_out


def reneg_proof_check(machines, ss: SignalStructure, params: GameParams, depth: int = 3) -> bool:
    """No probed continuation-value vector Pareto-dominates another.

    Certifies only the probed paths (on-path plus single deviations).
    """
    if not ss.is_public:
        raise ValueError("renegotiation proofness compares public continuation paths")
    if _is_latent(machines):
        raise ValueError("renegotiation probing requires deterministic machines")
    horizon = default_horizon(params)
    pts = probe_points(machines, ss, depth, (0.0, 0.5))
    vecs = []
    seen = set()
    for pt in pts:
        v = _roll_value(machines, pt.states, ss, params, horizon)
        key = tuple(np.round(v, 10))
        if key not in seen:
            seen.add(key)
            vecs.append(v)
    for a, b in itertools.combinations(vecs, 2):
        lo, hi = (a, b) if (a <= b + 1e-12).all() else (b, a)
        if (lo <= hi + 1e-12).all() and (hi - lo > 1e-9).any():
            return False
    return True


def stage_nash_check(actions, params: GameParams) -> bool:
    """Stage best responses all around: here, nobody contributes.

    The stage payoff is strictly decreasing in own contribution (kappa < 1),
    so the unique stage Nash profile is all zeros.
    """
    a = np.asarray(actions, dtype=float)
    return bool(np.all(np.abs(a) <= _TOL))


def classify_all(machines, ss: SignalStructure, params: GameParams, depth: int = 3) -> dict:
    """All six classifier flags; None where a latent mixture defeats probing."""
    if _is_latent(machines):
        return {
            "ppe": False,
            "info_subset": False,
            "belief_free": None,
            "atonement": None,
            "reneg_proof": None,
            "stage_nash": False,
        }
    horizon = min(depth + 2, 6)
    states = [m.initial_state() for m in machines]
    on_path = []
    for _ in range(horizon):
        acts = [m.act(states[i])[0] for i, m in enumerate(machines)]
        on_path.append(acts)
        if ss.kind in _DET_STRUCTURES:
            recs = _deterministic_records(ss, acts)
        elif ss.kind == "noisy_public_sum":
            recs = _records_with_choice(ss, acts, float(np.sum(acts)))
        else:
            recs = _records_with_choice(ss, acts, tuple(acts[ss.neighbor[i]] for i in range(len(acts))))
        states = [m.transition(states[i], acts[i], recs[i]) for i, m in enumerate(machines)]
    flags = {
        "ppe": classify_ppe(machines, ss, depth),
        "info_subset": info_subset_check(machines, ss, depth),
        "stage_nash": all(stage_nash_check(a, params) for a in on_path),
    }

    def attempt(fn, *args):
        try:
            return fn(*args)
        except ValueError:
            return None

    flags["belief_free"] = attempt(belief_free_check, machines, ss, params, min(depth, 2))
    if ss.is_public:
        flags["atonement"] = attempt(atonement_check, machines, ss, params, min(depth, 2))
        flags["reneg_proof"] = attempt(reneg_proof_check, machines, ss, params, depth)
    else:
        flags["atonement"] = None
        flags["reneg_proof"] = None
    return flags


# ---------------------------------------------------------------------------
# fragility under private kappa


def fragility_experiment(
    params: GameParams,
    f_kappa,
    n_draws: int,
    seed: int,
    x_own: float = 1.0,
    action_grid_size: int = 21,
    probe_signals=(0.0, 0.5, 1.0),
) -> FragilityReport:
    """Best responses of privately-shocked agents to the calibrated profile.

    The profile is calibrated at the public mean kappa; an agent with
    realized kappa_i faces a continuation linear in own action with slope
    (1 - delta) * (kappa_i / kappa - 1).  Each draw's best response over
    the action grid is computed at every probe signal; reported are the
    frequency of non-singleton best-response sets, the frequency of
    signal-dependent best responses, and the mean incentive violation
    among violating draws, where a draw's violation is the value spread
    the slope creates over the feasible action range.
    """
    kappa_bar = params.kappa_scalar()
    draws = liquidity_shock_draw(f_kappa, seed=seed, stream=0, size=n_draws)
    slopes = (1.0 - params.delta) * (draws / kappa_bar - 1.0)
    grid = np.linspace(0.0, 1.0, action_grid_size)
    # value over the grid: slope * a plus a signal-dependent constant that
    # cannot move the argmax; evaluate per signal anyway as an honest probe
    util = slopes[:, None] * grid[None, :]
    interior = 0
    state_dep = 0
    for k in range(n_draws):
        br_sets = []
        for _s in probe_signals:
            u = util[k]
            top = u.max()
            br = frozenset(np.flatnonzero(u >= top - 1e-12).tolist())
            br_sets.append(br)
        if len(br_sets[0]) >= 2:
            interior += 1
        if any(b != br_sets[0] for b in br_sets[1:]):
            state_dep += 1
    action_range = grid[-1] - grid[0]
    violations = np.abs(slopes) * action_range
    positive = violations > 0.0
    mean_violation = float(violations[positive].mean()) if positive.any() else 0.0
    return FragilityReport(
        interior_br_frequency=float(interior / n_draws),
        mean_ic_violation=mean_violation,
        br_state_dependence_frequency=float(state_dep / n_draws),
        n_draws=int(n_draws),
        kappas=draws,
    )
