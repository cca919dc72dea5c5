"""Brute-force ground truth on miniature games.

Everything here enumerates: every distinct deal, every chance draw and every
history.  It is slow on purpose and shares nothing with the belief tracker
or the search except the game engine, so it can check both.

Two independent routes to values are provided:

* a chance tree over trajectories, where undrawn cards are unknown and each
  draw is an explicit chance node (``V(traj)``, ``Q(traj, a)``);
* a sweep over all deals, grouping on-policy histories by action-observation
  history (``V(aoh)``, ``Q(aoh, a)`` and the posterior over trajectories).

Consistency between them is the law-of-total-expectation identity
``V(aoh) = sum_traj B(traj | aoh) V(traj)``.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Optional

import numpy as np

from .beliefs import condition_on_aoh, init_public_beliefs, step_observation, step_policy
from .blueprints import BlueprintPolicy, TablePolicy, make_view
from .core import (
    ConfigError,
    common_observation,
    GameConfig,
    GameState,
    HanabiError,
    IllegalMoveError,
    initial_state,
    legal_moves,
    max_game_length,
    mini_config,
    score,
    step,
)

__all__ = [
    "OracleError",
    "MiniGameSpec",
    "ExactValueReport",
    "exact_value",
    "exact_beliefs",
    "posterior_table",
    "hand_marginal",
    "trajectory_key",
    "public_key",
    "theorem1_bound",
    "SearchReturnOracle",
    "simulate_search_policy",
    "EpisodeSummary",
    "RecordingPolicy",
    "belief_sweep",
    "compare_beliefs",
    "record_table",
]


class OracleError(HanabiError):
    pass


def multiset_permutations(counts) -> list:
    """All distinct orderings of a multiset given as per-type counts, lexicographic."""
    counts = list(counts)
    total = sum(counts)
    out = []
    prefix = []

    def rec():
        if len(prefix) == total:
            out.append(tuple(prefix))
            return
        for c, n in enumerate(counts):
            if n:
                counts[c] -= 1
                prefix.append(c)
                rec()
                prefix.pop()
                counts[c] += 1

    rec()
    return out


def deal_count(config: GameConfig) -> int:
    n = math.factorial(config.deck_size)
    for k in config.composition:
        n //= math.factorial(k)
    return n


@dataclass(frozen=True)
class MiniGameSpec:
    """A game small enough to enumerate.

    ``node_bound`` counts the positions the evaluators actually touch: every
    deal, every turn, every one-step deviation and the playout after it.
    """

    config: GameConfig = field(default_factory=mini_config)
    max_nodes: int = 10**8

    def __post_init__(self):
        if self.node_bound > self.max_nodes:
            raise ConfigError(
                f"mini game too large to enumerate: {self.node_bound} nodes > {self.max_nodes}"
            )

    @property
    def horizon(self) -> int:
        return max_game_length(self.config)

    @property
    def delta(self) -> float:
        # returns lie in [0, max_score]
        return float(self.config.max_score)

    @property
    def num_actions(self) -> int:
        return self.config.num_actions

    @property
    def num_deals(self) -> int:
        return deal_count(self.config)

    @property
    def node_bound(self) -> int:
        return self.num_deals * self.horizon * (self.num_actions + 1) * self.horizon

    @cached_property
    def deals(self) -> list:
        return multiset_permutations(self.config.composition)


def trajectory_key(state: GameState) -> str:
    """Everything that has happened: cards dealt or drawn so far, and the moves."""
    cards = ",".join(str(c) for c in state.order[: state.next_draw])
    moves = ";".join(str(e.move) for e in state.log)
    return f"{cards}|{moves}"


def public_key(state: GameState) -> str:
    """The common-knowledge history: moves, hint outcomes and revealed cards."""
    parts = [f"{e.actor}:{e.move}:{''.join(map(str, e.touched))}:{e.revealed}" for e in state.log]
    return "|".join(parts)


def _policy_move(policies, state: GameState):
    actor = state.current_player
    return policies[actor].act(make_view(state, actor))


def _as_policies(policies, config: GameConfig) -> list:
    if not isinstance(policies, (list, tuple)):
        policies = [policies] * config.num_players
    if len(policies) != config.num_players:
        raise ConfigError("need one policy per player")
    return list(policies)


# --- chance-tree evaluator ----------------------------------------------------


def _fix_next(state: GameState):
    """Each distinct card that can sit at the next undrawn position, with its probability."""
    start = state.next_draw
    deck = state.order[start:]
    counts = Counter(deck)
    total = len(deck)
    for card in sorted(counts):
        rest = list(deck)
        rest.remove(card)
        order = state.order[:start] + (card,) + tuple(sorted(rest))
        yield counts[card] / total, replace(state, order=order)


def _initial_outcomes(config: GameConfig):
    """Distinct dealt hands with their probabilities; undealt cards left unordered."""
    n_dealt = config.num_players * config.hand_size
    deck = [c for c, k in enumerate(config.composition) for _ in range(k)]
    base = initial_state(config, deck)
    outcomes = [(1.0, replace(base, next_draw=0))]
    for _ in range(n_dealt):
        outcomes = [(p * q, replace(s2, next_draw=s2.next_draw + 1))
                    for p, s in outcomes for q, s2 in _fix_next(s)]
    return [(p, replace(s, next_draw=n_dealt)) for p, s in outcomes]


class _ChanceTree:
    def __init__(self, config: GameConfig, policies):
        self.config = config
        self.policies = policies
        self.gamma = config.discount
        self.values = {}
        self.qvalues = {}

    def value(self, state: GameState) -> float:
        key = trajectory_key(state)
        v = self.values.get(key)
        if v is None:
            v = 0.0 if state.is_terminal else self.q(state, _policy_move(self.policies, state))
            self.values[key] = v
        return v

    def q(self, state: GameState, move) -> float:
        key = (trajectory_key(state), move)
        v = self.qvalues.get(key)
        if v is not None:
            return v
        if not move.is_hint and state.next_draw < len(state.order):
            branches = list(_fix_next(state))
        else:
            branches = [(1.0, state)]
        v = 0.0
        for p, s in branches:
            nxt, r = step(s, move)
            v += p * (r + self.gamma * self.value(nxt))
        self.qvalues[key] = v
        return v


# --- deal sweep ---------------------------------------------------------------


def _playout(state: GameState, policies, gamma: float) -> float:
    """Discounted return from ``state`` following ``policies`` on a fixed deck."""
    total, disc = 0.0, 1.0
    while not state.is_terminal:
        state, r = step(state, _policy_move(policies, state))
        total += disc * r
        disc *= gamma
    return total


def _on_policy_path(order, config: GameConfig, policies):
    """States along the on-policy trajectory of one deal, with per-step rewards."""
    state = initial_state(config, order)
    states, rewards = [state], []
    while not state.is_terminal:
        state, r = step(state, _policy_move(policies, state))
        states.append(state)
        rewards.append(r)
    return states, rewards


@dataclass
class ExactValueReport:
    """Exact values of a joint policy on a mini game.

    ``traj_values``/``traj_q`` come from the chance tree; ``aoh_values``,
    ``aoh_q`` and ``beliefs`` from the deal sweep.  ``value`` is the expected
    return from the start.
    """

    config: GameConfig
    value: float
    horizon: int
    delta: float
    num_actions: int
    gamma: float
    traj_values: dict
    traj_q: dict
    aoh_values: dict
    aoh_q: dict
    beliefs: dict  # aoh key -> {trajectory key: probability}

    def identity_errors(self):
        """Largest violations of V(aoh) = sum B V(traj) and of its Q analog."""
        v_err = 0.0
        q_err = 0.0
        for key, post in self.beliefs.items():
            mixed = sum(p * self.traj_values[t] for t, p in post.items())
            v_err = max(v_err, abs(mixed - self.aoh_values[key]))
            if key in self.aoh_q:
                for move, q in self.aoh_q[key].items():
                    mixed = sum(p * self.traj_q[t][move] for t, p in post.items())
                    q_err = max(q_err, abs(mixed - q))
        return v_err, q_err

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "value": self.value,
            "horizon": self.horizon,
            "delta": self.delta,
            "num_actions": self.num_actions,
            "gamma": self.gamma,
            "aoh_values": self.aoh_values,
        }


def exact_value(spec: MiniGameSpec, policies) -> ExactValueReport:
    """Exact values of a deterministic joint policy by exhaustive enumeration."""
    cfg = spec.config
    policies = _as_policies(policies, cfg)
    gamma = cfg.discount
    tree = _ChanceTree(cfg, policies)

    root = 0.0
    traj_q = {}
    stack = []
    for p, s in _initial_outcomes(cfg):
        root += p * tree.value(s)
        stack.append(s)
    # Q for every legal move along every on-policy trajectory
    seen = set()
    while stack:
        s = stack.pop()
        key = trajectory_key(s)
        if key in seen or s.is_terminal:
            continue
        seen.add(key)
        traj_q[key] = {str(m): tree.q(s, m) for m in legal_moves(s)}
        move = _policy_move(policies, s)
        if not move.is_hint and s.next_draw < len(s.order):
            for _, s2 in _fix_next(s):
                stack.append(step(s2, move)[0])
        else:
            stack.append(step(s, move)[0])

    # deal sweep: every deal is equally likely
    v_sum = defaultdict(float)
    q_sum = defaultdict(lambda: defaultdict(float))
    hits = Counter()
    joint = defaultdict(Counter)
    for order in spec.deals:
        states, rewards = _on_policy_path(order, cfg, policies)
        togo = [0.0] * len(states)
        for t in range(len(rewards) - 1, -1, -1):
            togo[t] = rewards[t] + gamma * togo[t + 1]
        for t, s in enumerate(states):
            tkey = trajectory_key(s)
            if tkey not in tree.values:
                tree.value(s)
            for i in range(cfg.num_players):
                akey = make_view(s, i).aoh_key
                hits[akey] += 1
                v_sum[akey] += togo[t]
                joint[akey][tkey] += 1
                if i == s.current_player and not s.is_terminal:
                    for m in legal_moves(s):
                        nxt, r = step(s, m)
                        q_sum[akey][str(m)] += r + gamma * _playout(nxt, policies, gamma)

    aoh_values = {k: v_sum[k] / hits[k] for k in hits}
    aoh_q = {k: {m: v / hits[k] for m, v in qs.items()} for k, qs in q_sum.items()}
    beliefs = {k: {t: c / hits[k] for t, c in sorted(post.items())} for k, post in joint.items()}
    return ExactValueReport(
        config=cfg,
        value=root,
        horizon=spec.horizon,
        delta=spec.delta,
        num_actions=spec.num_actions,
        gamma=gamma,
        traj_values=dict(tree.values),
        traj_q=traj_q,
        aoh_values=aoh_values,
        aoh_q=aoh_q,
        beliefs=beliefs,
    )


# --- exact posteriors ---------------------------------------------------------


def exact_beliefs(spec: MiniGameSpec, policies, view, unconstrained=()) -> dict:
    """Posterior over deals given an agent's history, by filtering every deal.

    A deal survives when replaying the logged moves is legal, every player
    outside ``unconstrained`` chose the move its policy prescribes, and the
    observer ends with the same action-observation history.  Pass
    ``view=None`` together with ``public=...`` via :func:`public_beliefs` for
    the common-knowledge version.
    """
    cfg = spec.config
    policies = _as_policies(policies, cfg)
    target = view.aoh_key
    moves = [e.move for e in view.log]
    alive = []
    for order in spec.deals:
        state = _replay_consistent(cfg, order, moves, policies, unconstrained)
        if state is not None and make_view(state, view.player).aoh_key == target:
            alive.append(order)
    if not alive:
        raise OracleError("history is unreachable under the given policies")
    p = 1.0 / len(alive)
    return {order: p for order in alive}


def public_beliefs(spec: MiniGameSpec, policies, state: GameState, unconstrained=()) -> dict:
    """Posterior over deals given only the common-knowledge history of ``state``."""
    cfg = spec.config
    policies = _as_policies(policies, cfg)
    target = public_key(state)
    moves = [e.move for e in state.log]
    alive = []
    for order in spec.deals:
        s = _replay_consistent(cfg, order, moves, policies, unconstrained)
        if s is not None and public_key(s) == target:
            alive.append(order)
    if not alive:
        raise OracleError("history is unreachable under the given policies")
    p = 1.0 / len(alive)
    return {order: p for order in alive}


def _replay_consistent(cfg, order, moves, policies, unconstrained) -> Optional[GameState]:
    state = initial_state(cfg, order)
    for m in moves:
        if state.is_terminal:
            return None
        actor = state.current_player
        if actor not in unconstrained and _policy_move(policies, state) != m:
            return None
        try:
            state, _ = step(state, m)
        except IllegalMoveError:
            return None
    return state


def posterior_table(spec: MiniGameSpec, policies):
    """Posteriors for every on-policy history at once.

    Returns ``(private, public)``: ``private[aoh_key]`` and
    ``public[public_key]`` map deals to probabilities.  Under a deterministic
    joint policy a deal is consistent with a history exactly when its own
    on-policy trajectory passes through that history, so grouping the
    trajectories of all deals is exact Bayes with a uniform deal prior.
    """
    cfg = spec.config
    policies = _as_policies(policies, cfg)
    private = defaultdict(list)
    public = defaultdict(list)
    for order in spec.deals:
        states, _ = _on_policy_path(order, cfg, policies)
        for s in states:
            public[public_key(s)].append(order)
            for i in range(cfg.num_players):
                private[make_view(s, i).aoh_key].append(order)
    norm = lambda groups: {k: {o: 1.0 / len(v) for o in v} for k, v in groups.items()}
    return norm(private), norm(public)


def hand_marginal(posterior: dict, positions) -> dict:
    """Distribution of the cards at deck ``positions`` under a deal posterior."""
    out = defaultdict(float)
    for order, p in posterior.items():
        out[tuple(order[x] for x in positions)] += p
    return dict(sorted(out.items()))


# --- Theorem 1 --------------------------------------------------------------


def theorem1_bound(horizon: int, delta: float, num_actions: int, n_rollouts: float) -> float:
    """Worst-case loss ``2 T delta |A| / sqrt(N)`` of search against its blueprint."""
    if n_rollouts <= 0:
        raise ValueError("the number of rollouts must be positive")
    if horizon <= 0 or delta <= 0 or num_actions <= 0:
        raise ValueError("horizon, delta and num_actions must be positive")
    return 2.0 * horizon * delta * num_actions / math.sqrt(n_rollouts)


class SearchReturnOracle:
    """Exact rollout-return tables for one searcher facing blueprint partners.

    For a searcher history, the deals consistent with it are those where
    the partners' logged moves match their blueprint and the searcher's
    observations agree (the searcher's own moves carry no information about
    its hand).  A rollout of ``mc_search`` draws one such deal uniformly,
    forces an action and lets every seat follow the blueprint, so its return
    is a deterministic function of the drawn deal.  :meth:`returns` gives
    that function as a (deals x legal moves) matrix.
    """

    def __init__(self, spec: MiniGameSpec, policies, searcher: int = 0):
        self.spec = spec
        self.config = spec.config
        self.policies = _as_policies(policies, spec.config)
        self.searcher = searcher
        self._groups = {(): {d: initial_state(self.config, o) for d, o in enumerate(spec.deals)}}
        self._aoh = {}
        self._tables = {}
        self._togo = {}

    def group(self, history: tuple) -> dict:
        """Deal index -> state for deals publicly consistent with ``history``."""
        g = self._groups.get(history)
        if g is None:
            parent = self.group(history[:-1])
            move = history[-1]
            g = {}
            for d, s in parent.items():
                if s.is_terminal:
                    continue
                if s.current_player != self.searcher and _policy_move(self.policies, s) != move:
                    continue
                try:
                    g[d] = step(s, move)[0]
                except IllegalMoveError:
                    continue
            self._groups[history] = g
        return g

    def blueprint_togo(self, d: int, state: GameState) -> float:
        key = (d, tuple(e.move for e in state.log))
        v = self._togo.get(key)
        if v is None:
            v = _playout(state, self.policies, self.config.discount)
            self._togo[key] = v
        return v

    def returns(self, history: tuple, d: int):
        """(legal moves, blueprint index, returns matrix) at the searcher's history in deal ``d``."""
        group = self.group(history)
        state = group[d]
        key = make_view(state, self.searcher).aoh_key
        table = self._tables.get(key)
        if table is None:
            by_aoh = self._aoh.get(history)
            if by_aoh is None:
                by_aoh = defaultdict(list)
                for d2, s2 in group.items():
                    by_aoh[make_view(s2, self.searcher).aoh_key].append(d2)
                self._aoh[history] = by_aoh
            deals = by_aoh[key]
            legal = legal_moves(state)
            bp = legal.index(_policy_move(self.policies, state))
            gamma = self.config.discount
            mat = np.empty((len(deals), len(legal)))
            for i, d2 in enumerate(deals):
                s2 = group[d2]
                for a, m in enumerate(legal):
                    nxt, r = step(s2, m)
                    mat[i, a] = r + gamma * self.blueprint_togo(d2, nxt)
            table = (legal, bp, mat)
            self._tables[key] = table
        return table

    def exact_q(self, history: tuple, d: int) -> dict:
        legal, _, mat = self.returns(history, d)
        return {str(m): float(v) for m, v in zip(legal, mat.mean(axis=0))}


@dataclass(frozen=True)
class EpisodeSummary:
    episodes: int
    mean: float
    sem: float
    returns: dict  # return value -> episode count

    def to_dict(self) -> dict:
        return {"episodes": self.episodes, "mean": self.mean, "sem": self.sem,
                "returns": {str(k): v for k, v in sorted(self.returns.items())}}


def simulate_search_policy(spec: MiniGameSpec, policies, rollouts_per_action: int, episodes: int,
                           seed: int = 0, searcher: int = 0, threshold: float = 0.0,
                           oracle: Optional[SearchReturnOracle] = None) -> EpisodeSummary:
    """Episodes of single-agent MC search with uniform allocation, simulated exactly.

    Each search decision draws ``rollouts_per_action`` consistent deals
    (shared by all actions, as in :func:`search.mc_search`), averages the
    exact rollout returns and deviates from the blueprint when the best
    mean beats it by more than ``threshold``.  Episodes sharing a history
    are advanced together, so 10^6 episodes cost as much as the number of
    distinct histories visited.
    """
    cfg = spec.config
    policies = _as_policies(policies, cfg)
    oracle = oracle or SearchReturnOracle(spec, policies, searcher)
    rng = np.random.default_rng(seed)
    n_deals = len(spec.deals)
    gamma = cfg.discount
    counts = rng.multinomial(episodes, np.full(n_deals, 1.0 / n_deals))
    # frontier entries: (deal, history, accumulated return, discount, episode count)
    frontier = [(d, (), 0.0, 1.0, int(c)) for d, c in enumerate(counts) if c]
    finished = Counter()
    while frontier:
        nxt_frontier = []
        for d, hist, ret, disc, cnt in frontier:
            state = oracle.group(hist)[d]
            if state.is_terminal:
                finished[round(ret, 12)] += cnt
                continue
            if state.current_player != searcher:
                children = [(_policy_move(policies, state), cnt)]
            else:
                legal, bp, mat = oracle.returns(hist, d)
                idx = rng.integers(len(mat), size=(cnt, rollouts_per_action))
                est = mat[idx].mean(axis=1)
                best = est.argmax(axis=1)
                gain = est[np.arange(cnt), best] - est[:, bp]
                chosen = np.where(gain > threshold, best, bp)
                tally = np.bincount(chosen, minlength=len(legal))
                children = [(legal[a], int(c)) for a, c in enumerate(tally) if c]
            for move, c in children:
                s2, r = step(state, move)
                nxt_frontier.append((d, hist + (move,), ret + disc * r, disc * gamma, c))
        frontier = _merge(nxt_frontier)
    values = np.array(sorted(finished), dtype=float)
    weights = np.array([finished[v] for v in sorted(finished)], dtype=float)
    mean = float((values * weights).sum() / episodes)
    var = float((weights * (values - mean) ** 2).sum() / max(episodes - 1, 1))
    return EpisodeSummary(episodes, mean, math.sqrt(var / episodes), dict(finished))


def _merge(frontier):
    merged = {}
    for d, hist, ret, disc, c in frontier:
        key = (d, hist)
        if key in merged:
            merged[key] = (d, hist, ret, disc, merged[key][4] + c)
        else:
            merged[key] = (d, hist, ret, disc, c)
    return list(merged.values())


def golden_values(spec: MiniGameSpec, named_policies: dict) -> dict:
    """Root values for several blueprints, JSON-ready."""
    return {name: exact_value(spec, pol).value for name, pol in named_policies.items()}


def dump_golden(path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- table blueprints and the belief cross-check -------------------------------


class RecordingPolicy(BlueprintPolicy):
    """Wraps a policy and remembers every AOH it was asked about."""

    def __init__(self, inner):
        self.inner = inner
        self.name = f"recording:{getattr(inner, 'name', 'policy')}"
        self.table = {}

    def act(self, view):
        move = self.inner.act(view)
        self.table[view.aoh_key] = move
        return move


def belief_sweep(spec: MiniGameSpec, policy):
    """Run the belief tracker along every deal's on-policy trajectory.

    Yields ``(state, observer, hand_distribution)`` after every step, where
    the distribution is the tracker's normalized private posterior over the
    observer's current hand.  Two-player games only, as the public factors
    filter the partner of each actor.
    """
    cfg = spec.config
    if cfg.num_players != 2:
        raise ConfigError("the belief sweep covers two-player games")
    for order in spec.deals:
        state = initial_state(cfg, order)
        pb = init_public_beliefs(cfg)
        while True:
            for i in range(cfg.num_players):
                priv = condition_on_aoh(pb, i, make_view(state, i))
                hands = priv.support()
                total = sum(w for _, w in hands)
                yield state, i, {h: w / total for h, w in hands}
            if state.is_terminal:
                break
            view = make_view(state, state.current_player)
            move = policy.act(view)
            state, _ = step(state, move)
            pb = step_observation(pb, common_observation(state))
            pb = step_policy(pb, view, policy, move)


def compare_beliefs(spec: MiniGameSpec, policy) -> tuple:
    """Largest gap between tracker and oracle private posteriors, and histories checked."""
    private, _ = posterior_table(spec, policy)
    worst = 0.0
    checked = set()
    for state, i, dist in belief_sweep(spec, policy):
        key = make_view(state, i).aoh_key
        exact = hand_marginal(private[key], state.hands[i])
        for hand in set(exact) | set(dist):
            worst = max(worst, abs(exact.get(hand, 0.0) - dist.get(hand, 0.0)))
        checked.add(key)
    return worst, len(checked)


def record_table(spec: MiniGameSpec, source) -> TablePolicy:
    """Freeze ``source`` into a table covering every AOH the oracle and tracker query."""
    rec = RecordingPolicy(source)
    exact_value(spec, rec)
    posterior_table(spec, rec)
    for _ in belief_sweep(spec, rec):
        pass
    return TablePolicy(dict(rec.table))
