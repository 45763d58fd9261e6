"""Public-goods stage game and equilibrium strategy machines.

Stage game: each of N agents contributes a_i in [0, 1]; agent i's payoff is
kappa_i * sum_j a_j - a_i with kappa_i in (1/2, 1).  Contributing is
individually costly but socially valuable, so the one-shot Nash outcome is
zero funding and repetition has to do the work.

Strategy machines are value objects with pure step functions.  A machine
exposes

    initial_state()                      -> state
    act(state, rng)                      -> (action, state)
    transition(state, own_action, rec)   -> state

``act`` consumes randomness only for the belief-based mixture (its latent
coin is recorded in the returned state so traces replay bit for bit).
``transition`` receives the action actually played, which may differ from
the emitted one when a simulation injects a deviation; machines never get
to see more than their own play and their own signal record.

Implemented machines: grim trigger, Proportional Response (react to a
private neighbor signal), Public Proportional (react to the public sum),
Atonement (track a public shortfall account so that sole deviators return
to full contribution), a belief-based mixture over atonement-like plans,
and constant benchmarks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from eqlab.monitoring import SignalRecord, SignalStructure, sample_signals
from eqlab.rng import stream_generator

__all__ = [
    "GameParams",
    "Trace",
    "stage_payoff",
    "proportionality_constant",
    "grim_trigger_threshold",
    "GrimTrigger",
    "ProportionalResponse",
    "PublicProportional",
    "Atonement",
    "BeliefBased",
    "ConstantContribution",
    "grim_machines",
    "proportional_response_machines",
    "public_proportional_machines",
    "atonement_machines",
    "belief_based_machines",
    "constant_machines",
    "simulate",
]

_TOL = 1e-12


@dataclass(frozen=True)
class GameParams:
    """Shared game primitives: agent count, discount, public-good value."""

    n_agents: int
    delta: float
    kappa: float | tuple[float, ...]
    x: tuple[float, ...] | None = None  # expected contributions, when a strategy has them

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("need at least two agents")
        if not 0 < self.delta < 1:
            raise ValueError("discount factor must lie in (0, 1)")
        k = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        if np.any(k <= 0.5) or np.any(k >= 1.0):
            raise ValueError("kappa must lie strictly inside (1/2, 1)")
        if self.x is not None:
            object.__setattr__(self, "x", tuple(float(v) for v in self.x))

    def kappa_vector(self) -> np.ndarray:
        k = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        if k.size == 1:
            return np.full(self.n_agents, float(k[0]))
        if k.size != self.n_agents:
            raise ValueError("kappa vector length must match the agent count")
        return k

    def kappa_scalar(self) -> float:
        k = np.unique(self.kappa_vector())
        if k.size != 1:
            raise ValueError("operation requires a common public kappa")
        return float(k[0])


def stage_payoff(params: GameParams, actions) -> np.ndarray:
    """kappa_i * total - own contribution, per agent."""
    a = np.asarray(actions, dtype=float)
    if a.shape[-1] != params.n_agents:
        raise ValueError("wrong number of actions")
    return params.kappa_vector() * a.sum(axis=-1, keepdims=True) - a


def proportionality_constant(params: GameParams, scope: str) -> float:
    """Reaction slope making next-period responses offset a deviation.

    scope "neighbor": alpha = (1-kappa)/(delta*kappa), the two-agent chain
    where each agent mirrors one partner.  scope "public": alpha =
    (1-kappa)/(delta*(N-1)*kappa), all N-1 others react to the public sum.
    """
    kappa = params.kappa_scalar()
    if scope == "neighbor":
        return (1.0 - kappa) / (params.delta * kappa)
    if scope == "public":
        return (1.0 - kappa) / (params.delta * (params.n_agents - 1) * kappa)
    raise ValueError("scope must be 'neighbor' or 'public'")


def grim_trigger_threshold(kappa: float, n_agents: int) -> float:
    """Smallest discount at which grim trigger sustains full contribution."""
    if not 0.5 < kappa < 1.0:
        raise ValueError("kappa must lie strictly inside (1/2, 1)")
    if n_agents < 2:
        raise ValueError("need at least two agents")
    return (1.0 - kappa) / ((n_agents - 1) * kappa)


# ---------------------------------------------------------------------------
# signal access helpers


def _public_sum(rec: SignalRecord) -> float:
    if isinstance(rec.public, tuple):
        return float(sum(rec.public))
    if rec.public is None:
        raise ValueError("machine requires a public signal")
    return float(rec.public)


def _neighbor_signal(rec: SignalRecord, partner: int) -> float:
    if rec.private is not None:
        return float(rec.private)
    if isinstance(rec.public, tuple):
        return float(rec.public[partner])
    raise ValueError("machine requires a neighbor signal or the full profile")


def _bound_error(name: str, i: int, value: float, side: str, bound: float) -> ValueError:
    return ValueError(
        f"{name}: x_{i} = {value:.6g} violates the {side} feasibility bound {bound:.6g}; "
        "the reaction to an extreme signal would leave [0, 1]"
    )


def _signal_margins(ss: SignalStructure | None) -> tuple[float, float]:
    if ss is None or not ss.is_noisy:
        return 0.0, 0.0
    return ss.eps0, ss.eps1


# ---------------------------------------------------------------------------
# machines


class GrimState(NamedTuple):
    punished: bool


@dataclass(frozen=True)
class GrimTrigger:
    """Contribute fully until any observed shortfall, then never again.

    The shortfall detector compares the public sum against N (or the
    observed neighbor action against 1) with a 1e-9 slack, so deterministic
    monitoring never false-triggers while noisy monitoring visibly absorbs
    into punishment.
    """

    kind = "grim"
    n_agents: int

    def initial_state(self) -> GrimState:
        return GrimState(punished=False)

    def act(self, state: GrimState, rng=None):
        return (0.0 if state.punished else 1.0), state

    def transition(self, state: GrimState, own_action: float, rec: SignalRecord) -> GrimState:
        if state.punished:
            return state
        if isinstance(rec.public, tuple):
            short = min(rec.public) < 1.0 - 1e-9
        elif rec.public is not None:
            short = rec.public < self.n_agents - 1e-9
        else:
            short = rec.private < 1.0 - 1e-9
        return GrimState(punished=bool(short))


class PRState(NamedTuple):
    last_signal: float | None


@dataclass(frozen=True)
class ProportionalResponse:
    """Track one neighbor: contribute x_i plus alpha times their surprise."""

    kind = "proportional_response"
    x_own: float
    x_partner: float
    alpha: float
    partner: int
    clip: bool = False

    def initial_state(self) -> PRState:
        return PRState(last_signal=None)

    def act(self, state: PRState, rng=None):
        if state.last_signal is None:
            a = self.x_own
        else:
            a = self.x_own + self.alpha * (state.last_signal - self.x_partner)
        if self.clip:
            a = min(1.0, max(0.0, a))
        return float(a), state

    def transition(self, state: PRState, own_action: float, rec: SignalRecord) -> PRState:
        return PRState(last_signal=_neighbor_signal(rec, self.partner))


class PublicState(NamedTuple):
    last_signal: float | None


@dataclass(frozen=True)
class PublicProportional:
    """React to the public sum's surprise relative to the expected total."""

    kind = "public_proportional"
    x_own: float
    x_total: float
    alpha: float
    clip: bool = False

    def initial_state(self) -> PublicState:
        return PublicState(last_signal=None)

    def act(self, state: PublicState, rng=None):
        if state.last_signal is None:
            a = self.x_own
        else:
            a = self.x_own + self.alpha * (state.last_signal - self.x_total)
        if self.clip:
            a = min(1.0, max(0.0, a))
        return float(a), state

    def transition(self, state: PublicState, own_action: float, rec: SignalRecord) -> PublicState:
        return PublicState(last_signal=_public_sum(rec))


class AtoneState(NamedTuple):
    expected_total: float
    prescription: float  # unclipped; the emitted action is its clamp into [0, 1]


@dataclass(frozen=True)
class Atonement:
    """Shortfall accounting that sends sole deviators back to full effort.

    The machine tracks the expected total and its own prescription.  After
    a low public sum it lowers both by alpha times the respective surprise;
    an agent whose own play caused the whole shortfall sees the two terms
    cancel and is prescribed 1 again (atonement), while the others are
    prescribed less (punishment).  A clean signal resets to (N, 1).
    """

    kind = "atonement"
    n_agents: int
    alpha: float
    clip: bool = True  # prescriptions below 0 exist when alpha > 1; play their clamp

    def initial_state(self) -> AtoneState:
        return AtoneState(expected_total=float(self.n_agents), prescription=1.0)

    def act(self, state: AtoneState, rng=None):
        a = state.prescription
        if self.clip:
            a = min(1.0, max(0.0, a))
        return float(a), state

    def transition(self, state: AtoneState, own_action: float, rec: SignalRecord) -> AtoneState:
        s = _public_sum(rec)
        n = float(self.n_agents)
        if s < state.expected_total - _TOL:
            x_next = n + (n - 1.0) * self.alpha * (s - state.expected_total)
            p_next = 1.0 + self.alpha * (
                (s - own_action) - (state.expected_total - state.prescription)
            )
            return AtoneState(expected_total=x_next, prescription=p_next)
        return AtoneState(expected_total=n, prescription=1.0)


class BeliefState(NamedTuple):
    prescription: float
    expected_total: float  # believed sum of prescriptions, own included
    coin_fired: bool


@dataclass(frozen=True)
class BeliefBased:
    """Mixture strategy: contribute 0 with probability rho, else a plan.

    The plan prescribes full contribution, except that an agent who saw a
    low public sum not explained by their own shortfall (the other side
    fell short, whether by latent coin or by deviation) is prescribed
    max(0, 1 - alpha) for one period, with alpha = alpha_N / (1 - rho)
    inflated so punishment still bites despite only firing when the
    punisher's own coin stays quiet.

    With two agents the partner's contribution is deducible from the public
    sum, so the believed prescription total is tracked exactly.  For more
    agents the machine assumes non-tracked agents conformed; that keeps it
    well defined but unverified.
    """

    kind = "belief_based"
    n_agents: int
    alpha: float
    rho: float

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise ValueError("mixture weight rho must lie in [0, 1)")

    @property
    def punish_level(self) -> float:
        return max(0.0, 1.0 - self.alpha)

    def initial_state(self) -> BeliefState:
        return BeliefState(prescription=1.0, expected_total=float(self.n_agents), coin_fired=False)

    def act(self, state: BeliefState, rng):
        if rng is None:
            raise ValueError("belief-based machine needs an rng for its latent coin")
        coin = bool(rng.random() < self.rho)
        a = 0.0 if coin else min(1.0, max(0.0, state.prescription))
        return a, state._replace(coin_fired=coin)

    def transition(self, state: BeliefState, own_action: float, rec: SignalRecord) -> BeliefState:
        s = _public_sum(rec)
        xhat = state.expected_total
        own_short = state.prescription - own_action
        low = s < xhat - _TOL
        others_short = (xhat - s) - own_short
        punish = low and others_short > _TOL
        p_next = self.punish_level if punish else 1.0
        if self.n_agents == 2:
            # partner's prescription next period responds to my shortfall
            partner_next = self.punish_level if (low and own_short > _TOL) else 1.0
            x_next = p_next + partner_next
        else:
            others_next = self.punish_level if low else 1.0
            x_next = p_next + (self.n_agents - 1) * others_next
        return BeliefState(prescription=p_next, expected_total=x_next, coin_fired=False)


@dataclass(frozen=True)
class ConstantContribution:
    """Always contribute the same amount; level 0 is the stage-game Nash."""

    kind = "constant"
    level: float = 0.0

    def __post_init__(self):
        if not 0 <= self.level <= 1:
            raise ValueError("contribution level must lie in [0, 1]")

    def initial_state(self):
        return None

    def act(self, state, rng=None):
        return float(self.level), state

    def transition(self, state, own_action, rec):
        return state


# ---------------------------------------------------------------------------
# per-profile factories (run the feasibility checks once, for all agents)


def grim_machines(params: GameParams) -> list[GrimTrigger]:
    return [GrimTrigger(n_agents=params.n_agents) for _ in range(params.n_agents)]


def proportional_response_machines(
    params: GameParams,
    x,
    ss: SignalStructure | None = None,
    neighbor: tuple[int, ...] | None = None,
    enforce_bounds: bool = True,
) -> list[ProportionalResponse]:
    """One machine per agent, reacting to the neighbor map's signal.

    Feasibility requires alpha*(x_partner + eps0) <= x_i <= 1 -
    alpha*(1 - x_partner + eps1): only then does the reaction to any signal
    in its support stay inside [0, 1].  Violations raise and name the bound
    unless enforce_bounds is off, in which case emitted actions are clamped.
    """
    n = params.n_agents
    x = [float(v) for v in x]
    if len(x) != n:
        raise ValueError("need one expected contribution per agent")
    alpha = proportionality_constant(params, "neighbor")
    if neighbor is None:
        neighbor = ss.neighbor if (ss is not None and ss.neighbor) else tuple((i + 1) % n for i in range(n))
    eps0, eps1 = _signal_margins(ss)
    machines = []
    for i in range(n):
        xp = x[neighbor[i]]
        lo = alpha * (xp + eps0)
        hi = 1.0 - alpha * (1.0 - xp + eps1)
        if enforce_bounds:
            if x[i] < lo - _TOL:
                raise _bound_error("proportional response", i, x[i], "lower", lo)
            if x[i] > hi + _TOL:
                raise _bound_error("proportional response", i, x[i], "upper", hi)
        machines.append(
            ProportionalResponse(
                x_own=x[i], x_partner=xp, alpha=alpha, partner=neighbor[i], clip=not enforce_bounds
            )
        )
    return machines


def public_proportional_machines(
    params: GameParams,
    x,
    ss: SignalStructure | None = None,
    enforce_bounds: bool = True,
) -> list[PublicProportional]:
    """Machines reacting to the public sum with slope alpha_N.

    Feasibility: alpha*(eps0 + x_total) <= x_i <= 1 - alpha*(N + eps1 -
    x_total) for every agent.
    """
    n = params.n_agents
    x = [float(v) for v in x]
    if len(x) != n:
        raise ValueError("need one expected contribution per agent")
    alpha = proportionality_constant(params, "public")
    x_total = float(sum(x))
    eps0, eps1 = _signal_margins(ss)
    lo = alpha * (eps0 + x_total)
    hi = 1.0 - alpha * (n + eps1 - x_total)
    if enforce_bounds:
        for i in range(n):
            if x[i] < lo - _TOL:
                raise _bound_error("public proportional", i, x[i], "lower", lo)
            if x[i] > hi + _TOL:
                raise _bound_error("public proportional", i, x[i], "upper", hi)
    return [
        PublicProportional(x_own=x[i], x_total=x_total, alpha=alpha, clip=not enforce_bounds)
        for i in range(n)
    ]


def atonement_machines(params: GameParams) -> list[Atonement]:
    alpha = proportionality_constant(params, "public")
    return [Atonement(n_agents=params.n_agents, alpha=alpha) for _ in range(params.n_agents)]


def belief_based_machines(params: GameParams, rho: float) -> list[BeliefBased]:
    if not 0 <= rho < 1:
        raise ValueError("mixture weight rho must lie in [0, 1)")
    alpha = proportionality_constant(params, "public") / (1.0 - rho)
    return [BeliefBased(n_agents=params.n_agents, alpha=alpha, rho=rho) for _ in range(params.n_agents)]


def constant_machines(params: GameParams, level: float = 0.0) -> list[ConstantContribution]:
    return [ConstantContribution(level=level) for _ in range(params.n_agents)]


# ---------------------------------------------------------------------------
# simulation


@dataclass
class Trace:
    """One simulated play path, everything needed to replay and audit."""

    params: GameParams
    kinds: tuple[str, ...]
    actions: np.ndarray  # (T, N)
    payoffs: np.ndarray  # (T, N)
    signals: list  # per period: list of SignalRecord
    states: list  # per period: per agent, state after acting (coins included)

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    def discounted_values(self) -> np.ndarray:
        """(1 - delta)-normalized discounted sum of the recorded payoffs."""
        d = self.params.delta
        w = (1 - d) * d ** np.arange(self.horizon)
        return w @ self.payoffs

    def to_csv(self, path) -> None:
        """Long format: one row per (period, agent), 17 significant digits."""

        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return str(int(v))
            if isinstance(v, tuple):
                return ";".join(f"{float(u):.17g}" for u in v)
            return f"{float(v):.17g}"

        lines = ["t,agent,action,own_echo,public_signal,private_signal,stage_payoff,state"]
        for t in range(self.horizon):
            for i in range(self.params.n_agents):
                rec = self.signals[t][i]
                st = self.states[t][i]
                state_txt = "" if st is None else "|".join(fmt(v) for v in st)
                lines.append(
                    ",".join(
                        [
                            str(t),
                            str(i),
                            fmt(self.actions[t, i]),
                            fmt(rec.own_action),
                            fmt(rec.public),
                            fmt(rec.private),
                            fmt(self.payoffs[t, i]),
                            state_txt,
                        ]
                    )
                )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def simulate(
    params: GameParams,
    machines,
    ss: SignalStructure,
    horizon: int,
    seed: int,
    deviations: dict[tuple[int, int], float] | None = None,
    record_states: bool = True,
) -> Trace:
    """Run the machines forward, optionally forcing some actions.

    ``deviations`` maps (period, agent) to a forced action; the deviating
    machine still learns the action actually played through its own echo.
    Signals use stream 0 of the seed and agent i's latent coins stream
    1 + i, so traces replay exactly.
    """
    n = params.n_agents
    if len(machines) != n:
        raise ValueError("need one machine per agent")
    deviations = deviations or {}
    sig_rng = stream_generator(seed, 0)
    coin_rngs = [stream_generator(seed, 1 + i) for i in range(n)]
    states = [m.initial_state() for m in machines]
    actions = np.zeros((horizon, n))
    recorded_states = []
    signal_log = []
    for t in range(horizon):
        played = np.zeros(n)
        acted_states = []
        for i, m in enumerate(machines):
            a, st = m.act(states[i], coin_rngs[i])
            if (t, i) in deviations:
                a = float(deviations[(t, i)])
            played[i] = a
            acted_states.append(st)
        recs = sample_signals(ss, played, sig_rng)
        actions[t] = played
        signal_log.append(recs)
        if record_states:
            recorded_states.append(list(acted_states))
        states = [m.transition(acted_states[i], float(played[i]), recs[i]) for i, m in enumerate(machines)]
    payoffs = stage_payoff(params, actions)
    return Trace(
        params=params,
        kinds=tuple(m.kind for m in machines),
        actions=actions,
        payoffs=payoffs,
        signals=signal_log,
        states=recorded_states,
    )
