"""Monte Carlo search over blueprint rollouts.

* :func:`mc_search` estimates the value of every legal move by rolling out
  the blueprint from determinizations drawn from an exact private belief.
* :func:`run_single_agent` lets one seat search while the others follow the
  blueprint.
* :func:`run_multi_agent_retrospective` lets both seats of a 2-player game
  search, replaying the searcher's procedure over its whole range once the
  range is small enough (range-search), possibly several turns later.
* :func:`run_independent` is the unsound ablation where everybody searches
  and assumes the others follow the blueprint.
"""

from __future__ import annotations

import json
import math
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .beliefs import (
    ActionQueueEntry,
    HandBelief,
    InconsistencyError,
    condition_on_aoh,
    init_hand_belief,
    init_public_beliefs,
    step_observation,
    step_policy,
)
from .blueprints import SimpleBot, legal_moves_from_view, make_view, view_with_hand
from .core import (
    ConfigError,
    GameConfig,
    GameState,
    HanabiError,
    Move,
    StateError,
    apply_move,
    common_observation,
    game_trace,
    new_game,
    observe,
    score,
    step,
)
from .rng import SplitMix64, mix64, mix64_array

__all__ = [
    "SearchParams",
    "ActionStats",
    "SearchDecision",
    "GameRecord",
    "GameAborted",
    "search_seed",
    "mc_search",
    "run_single_agent",
    "run_multi_agent_retrospective",
    "run_independent",
    "run_blueprint",
    "export_search_labels",
]


@dataclass(frozen=True)
class SearchParams:
    min_rollouts_per_action: int = 100
    ucb_sigma: float = 2.0
    deviation_threshold: float = 0.05
    max_total_rollouts: int = 10_000
    max_range: int = 10_000
    belief_uncertainty: float = 0.0
    base_seed: int = 0
    prune: bool = True  # False gives uniform allocation until the budget is spent

    def __post_init__(self):
        if self.min_rollouts_per_action < 1:
            raise ConfigError("min_rollouts_per_action must be positive")
        for name in ("ucb_sigma", "deviation_threshold", "max_total_rollouts", "max_range"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 0.0 <= self.belief_uncertainty < 1.0:
            raise ConfigError("belief_uncertainty must lie in [0, 1)")

    def check_budget(self, config: GameConfig) -> None:
        if self.min_rollouts_per_action * config.num_actions > self.max_total_rollouts:
            raise ConfigError(
                f"min_rollouts_per_action x {config.num_actions} actions exceeds max_total_rollouts"
            )

    def to_dict(self) -> dict:
        out = asdict(self)
        if math.isinf(self.deviation_threshold):
            out["deviation_threshold"] = "inf"
        return out


@dataclass(frozen=True)
class ActionStats:
    move: str
    code: int
    n: int
    mean: float
    sd: float
    pruned: bool


@dataclass(frozen=True)
class SearchDecision:
    turn: int
    actor: int
    move: Move
    blueprint_move: Move
    deviated: bool
    stats: tuple
    rollouts: int
    predicted_value: float
    aoh_key: str = ""
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "turn": self.turn,
            "actor": self.actor,
            "move": str(self.move),
            "blueprint_move": str(self.blueprint_move),
            "deviated": self.deviated,
            "rollouts": self.rollouts,
            "predicted_value": self.predicted_value,
            "stats": [asdict(s) for s in self.stats],
        }


@dataclass
class GameRecord:
    seed: int
    mode: str
    score: int
    turns: int
    moves: list
    decisions: list = field(default_factory=list)
    searched_turns: int = 0
    rollouts: int = 0
    range_log: list = field(default_factory=list)
    turn_log: list = field(default_factory=list)
    wall_time: float = 0.0
    trace: dict = field(default_factory=dict)

    @property
    def search_fraction(self) -> float:
        return self.searched_turns / self.turns if self.turns else 0.0


class GameAborted(HanabiError):
    def __init__(self, seed: int, moves, reason: str):
        super().__init__(f"game seed={seed} aborted after {len(moves)} moves: {reason}")
        self.seed = seed
        self.moves = list(moves)
        self.reason = reason


def search_seed(params: SearchParams, view) -> int:
    """Rollout seed of a search; a function of the searcher's AOH only."""
    return mix64(params.base_seed, view.turn, view.aoh_hash)


# --- rollouts ----------------------------------------------------------------


class _Root:
    """Packed description of the searcher's decision point for the kernels."""

    def __init__(self, view, belief: HandBelief):
        cfg = view.config
        n, hs = cfg.num_players, cfg.hand_size
        self.view = view
        self.config = cfg
        self.owner = view.player
        self.header = np.array(
            [
                n, cfg.colors, cfg.max_rank, hs, cfg.hint_tokens_max, int(cfg.bomb_zero_score),
                -1 if cfg.max_turns is None else cfg.max_turns,
                view.turn, view.current_player, view.hint_tokens, view.life_tokens,
                -1 if view.countdown is None else view.countdown,
            ],
            dtype=np.int64,
        )
        self.composition = np.asarray(cfg.composition, dtype=np.int64)
        self.mult = np.asarray(cfg.rank_multiplicity, dtype=np.int64)
        self.fireworks = np.asarray(view.fireworks, dtype=np.int64)
        self.discards = np.bincount(np.asarray(view.discards, dtype=np.int64), minlength=cfg.num_types)
        self.hands = np.full((n, hs), -1, dtype=np.int64)
        self.knowledge = np.zeros((n, hs), dtype=np.int64)
        self.hand_len = np.zeros(n, dtype=np.int64)
        for p in range(n):
            self.hand_len[p] = len(view.slot_ids[p])
            self.knowledge[p, : self.hand_len[p]] = view.knowledge[p]
            if p != self.owner:
                self.hands[p, : self.hand_len[p]] = view.hands[p]
        counts = np.asarray(belief.counts, dtype=np.int64)
        self.pool = np.repeat(np.arange(cfg.num_types), counts).astype(np.int64)
        self.first = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
        if len(self.pool) - self.hand_len[self.owner] != view.deck_size:
            raise InconsistencyError("belief counts disagree with the deck size")

    def pools(self, own: np.ndarray) -> np.ndarray:
        """Unshuffled remaining deck for each sampled own hand."""
        k_count, size = own.shape
        marked = np.tile(self.pool, (k_count, 1))
        ar = np.arange(k_count)
        own = own.astype(np.int64)
        for j in range(size):
            occ = np.zeros(k_count, dtype=np.int64)
            for i in range(j):
                occ += own[:, i] == own[:, j]
            marked[ar, self.first[own[:, j]] + occ] = 1 << 30
        marked.sort(axis=1)
        return marked[:, : len(self.pool) - size]

    def state_for(self, own_hand, deck) -> GameState:
        view = self.view
        cfg = self.config
        seen = dict(view.seen)
        seen.update(zip(view.slot_ids[self.owner], (int(c) for c in own_hand)))
        next_draw = cfg.deck_size - len(deck)
        order = tuple([seen[p] for p in range(next_draw)] + [int(c) for c in deck])
        return GameState(
            config=cfg,
            order=order,
            next_draw=next_draw,
            hands=view.slot_ids,
            knowledge=view.knowledge,
            fireworks=view.fireworks,
            hint_tokens=view.hint_tokens,
            life_tokens=view.life_tokens,
            discards=view.discards,
            current_player=view.current_player,
            turn=view.turn,
            countdown=view.countdown,
            log=view.log,
        )


def _python_rollouts(root: _Root, own, pools, seeds, codes, policies) -> np.ndarray:
    cfg = root.config
    out = np.zeros((len(codes), len(seeds)), dtype=np.int64)
    for i, code in enumerate(codes):
        for k in range(len(seeds)):
            deck = [int(c) for c in pools[k]]
            SplitMix64(int(seeds[k])).shuffle(deck)
            state = root.state_for(own[k], deck)
            if code >= 0:
                state, _ = step(state, cfg.code_move(int(code), root.owner))
            while not state.is_terminal:
                actor = state.current_player
                state, _ = step(state, policies[actor].act(make_view(state, actor)))
            out[i, k] = score(state)
    return out


def rollout_scores(root: _Root, own, pools, seeds, codes, policies, force_python: bool = False):
    """Final scores, shape (len(codes), len(seeds)), after forcing each code.

    Column ``k`` is the same determinization for every code.
    """
    codes = np.atleast_1d(np.asarray(codes, dtype=np.int64))
    if not force_python and all(type(p) is SimpleBot for p in policies):
        return kernels.simple_rollouts(
            root.header, root.composition, root.mult, root.fireworks, root.discards, root.hands,
            root.hand_len, root.knowledge, root.owner, own, pools, seeds, True, codes,
        )
    return _python_rollouts(root, own, pools, seeds, codes, policies)


# --- MC search ---------------------------------------------------------------


def _upper_lower(n, s1, s2, sigma):
    mean = s1 / n
    var = np.maximum(s2 - n * mean * mean, 0.0) / np.maximum(n - 1, 1)
    se = np.sqrt(var / n)
    return mean, np.sqrt(var), mean + sigma * se, mean - sigma * se


def mc_search(belief: HandBelief, actor: int, view, policies, params: SearchParams,
              seed: Optional[int] = None, force_python: bool = False) -> SearchDecision:
    """Pick a move for ``actor`` by blueprint rollouts from ``belief``.

    Rollouts run in rounds of ``min_rollouts_per_action`` determinizations.
    Every surviving action is evaluated on the same determinizations of a
    round (common random numbers), determinization ``k`` being a function
    of ``(seed, k)`` only.  After each round an action is dropped when its
    upper confidence bound falls below the lower bound of the current best,
    or, for non-blueprint actions, below the blueprint's lower bound plus the
    deviation threshold (it could never justify a deviation).
    """
    if view.player != actor or view.current_player != actor:
        raise StateError("the searcher must be the player to act")
    cfg = view.config
    legal = legal_moves_from_view(view)
    if not legal:
        raise StateError("no legal moves")
    bp_move = policies[actor].act(view)
    codes = [cfg.move_code(m, actor) for m in legal]
    bp = codes.index(cfg.move_code(bp_move, actor))
    if seed is None:
        seed = search_seed(params, view)
    key = view.aoh_key
    if math.isinf(params.deviation_threshold):
        stats = tuple(ActionStats(str(m), c, 0, 0.0, 0.0, False) for m, c in zip(legal, codes))
        return SearchDecision(view.turn, actor, bp_move, bp_move, False, stats, 0, float("nan"), key, seed)
    if belief.is_empty():
        raise InconsistencyError("searcher belief has empty support")
    root = _Root(view, belief)
    codes_arr = np.asarray(codes, dtype=np.int64)
    A = len(legal)
    K = params.min_rollouts_per_action
    sigma = params.ucb_sigma
    thr = params.deviation_threshold
    n = np.zeros(A)
    s1 = np.zeros(A)
    s2 = np.zeros(A)
    alive = np.ones(A, dtype=bool)
    # without pruning every legal action gets max_total / |all actions| rollouts
    uniform_rounds = max(1, params.max_total_rollouts // cfg.num_actions // K)
    used = 0
    rnd = 0
    while True:
        own = belief.sample_hands(K, mix64(seed, 0x5A, rnd)).astype(np.int64)
        pools = root.pools(own)
        seeds = mix64_array((seed,), rnd * K + np.arange(K))
        live = np.flatnonzero(alive)
        sc = rollout_scores(root, own, pools, seeds, codes_arr[live], policies, force_python).astype(np.float64)
        n[live] += K
        s1[live] += sc.sum(axis=1)
        s2[live] += (sc * sc).sum(axis=1)
        used += K * len(live)
        rnd += 1
        if alive.sum() == 1:
            break
        if params.prune:
            mean, _, upper, lower = _upper_lower(n, s1, s2, sigma)
            live = np.flatnonzero(alive)
            best = live[np.argmax(mean[live])]
            alive &= ~(upper < lower[best])
            alive[best] = True
            others = [a for a in np.flatnonzero(alive) if a != bp]
            if not others or all(upper[a] < lower[bp] + thr for a in others):
                break
            for a in others:
                if upper[a] < lower[bp] + thr:
                    alive[a] = False
            if alive.sum() == 1:
                break
        if not params.prune and rnd >= uniform_rounds:
            break
        if used + K * int(alive.sum()) > params.max_total_rollouts:
            break
    mean, sd, _, _ = _upper_lower(n, s1, s2, sigma)
    live = np.flatnonzero(alive)
    best = live[np.argmax(mean[live])]
    chosen = best if best != bp and mean[best] - mean[bp] > thr else bp
    stats = tuple(
        ActionStats(str(legal[a]), codes[a], int(n[a]), float(mean[a]), float(sd[a]), not bool(alive[a]))
        for a in range(A)
    )
    return SearchDecision(
        turn=view.turn,
        actor=actor,
        move=legal[chosen],
        blueprint_move=bp_move,
        deviated=bool(chosen != bp),
        stats=stats,
        rollouts=used,
        predicted_value=float(mean[chosen]),
        aoh_key=key,
        seed=seed,
    )


# --- game drivers --------------------------------------------------------------


def _policies(policies, config: GameConfig) -> list:
    if not isinstance(policies, (list, tuple)):
        policies = [policies] * config.num_players
    if len(policies) != config.num_players:
        raise ConfigError("need one blueprint per player")
    for p in policies:
        p.check_players(config)
    return list(policies)


def _finish(record: GameRecord, state: GameState, started: float) -> GameRecord:
    record.score = score(state)
    record.turns = state.turn
    record.moves = [str(e.move) for e in state.log]
    record.wall_time = time.perf_counter() - started
    record.trace = game_trace(record.seed, state)
    return record


def _log_turn(record, state, actor, searched, decision=None, range_size=None):
    record.turn_log.append(
        {
            "seed": record.seed,
            "turn": state.turn,
            "actor": actor,
            "searched": searched,
            "range_size": range_size,
            "rollouts": decision.rollouts if decision else 0,
            "deviated": decision.deviated if decision else False,
            "predicted_value": decision.predicted_value if decision else None,
        }
    )


def run_blueprint(config: GameConfig, seed: int, policies) -> GameRecord:
    policies = _policies(policies, config)
    started = time.perf_counter()
    state = new_game(config, seed)
    record = GameRecord(seed, "none", 0, 0, [])
    while not state.is_terminal:
        actor = state.current_player
        state, _ = step(state, policies[actor].act(make_view(state, actor)))
    return _finish(record, state, started)


def run_single_agent(config: GameConfig, seed: int, policies, params: SearchParams,
                     searcher: int = 0, force_python: bool = False) -> GameRecord:
    """One seat searches; every other seat plays its blueprint.

    In 2-player games the searcher tracks the public factor of its own hand
    and conditions on what it sees at search time, which is exactly what the
    multi-agent driver does; with more players it tracks its private belief
    directly.
    """
    policies = _policies(policies, config)
    started = time.perf_counter()
    state = new_game(config, seed)
    record = GameRecord(seed, "single", 0, 0, [])
    two = config.num_players == 2
    belief = init_hand_belief(config, searcher, state.hands[searcher])
    if not two:
        belief = condition_on_aoh(belief, searcher, make_view(state, searcher))
    try:
        while not state.is_terminal:
            actor = state.current_player
            view = make_view(state, actor)
            if actor == searcher:
                priv = condition_on_aoh(belief, searcher, view) if two else belief
                dec = mc_search(priv, actor, view, policies, params, force_python=force_python)
                move = dec.move
                record.decisions.append(dec)
                record.searched_turns += 1
                record.rollouts += dec.rollouts
                _log_turn(record, state, actor, True, dec)
            else:
                move = policies[actor].act(view)
                _log_turn(record, state, actor, False)
            state, _ = step(state, move)
            belief = step_observation(belief, common_observation(state) if two else observe(state, searcher))
            if actor != searcher:
                belief = step_policy(belief, view, policies[actor], move, target=searcher)
    except InconsistencyError as exc:
        raise GameAborted(seed, [str(e.move) for e in state.log], str(exc)) from exc
    return _finish(record, state, started)


def _revealed(state: GameState) -> dict:
    return {e.removed_pos: e.revealed for e in state.log if e.removed_pos >= 0}


def range_search(entry: ActionQueueEntry, partner_belief: HandBelief, revealed: dict, policies,
                 params: SearchParams, force_python: bool = False):
    """Replay the searcher's procedure over its range; return the surviving partner factor."""
    hands = entry.pending_range(partner_belief, revealed, params.max_range)
    if hands is None:
        return None, None, None
    live = entry.live_positions(partner_belief)
    idx = [entry.range_positions.index(p) for p in live]
    keep = []
    for hand in hands:
        view = view_with_hand(entry.view, entry.partner, hand)
        try:
            priv = condition_on_aoh(entry.belief, entry.actor, view)
        except InconsistencyError:
            # the factors are not jointly consistent with this partner hand
            continue
        dec = mc_search(priv, entry.actor, view, policies, params, force_python=force_python)
        if view.config.move_code(dec.move, entry.actor) == entry.code:
            keep.append(tuple(hand[i] for i in idx))
    return partner_belief.keep_projections(live, keep), len(hands), set(keep)


def run_multi_agent_retrospective(config: GameConfig, seed: int, policies, params: SearchParams,
                                  force_python: bool = False, on_turn=None) -> GameRecord:
    """Two-player search with retrospective range-search.

    The searcher is the actor of the oldest queued searched action, or the
    player to act when the queue is empty.  Non-searcher actions filter the
    public belief at once; searched actions wait in the queue until the
    actor's range at that time fits in ``max_range``.

    ``on_turn(state, public_belief, queue_length)`` is called once the queue
    has been processed on every turn, and once more at the end.
    """
    if config.num_players != 2:
        raise ConfigError("multi-agent retrospective search is implemented for 2 players")
    policies = _policies(policies, config)
    started = time.perf_counter()
    state = new_game(config, seed)
    record = GameRecord(seed, "multi", 0, 0, [])
    pb = init_public_beliefs(config)
    queue: deque = deque()
    searcher = 0
    try:
        while not state.is_terminal:
            j = state.current_player
            revealed = _revealed(state)
            while queue:
                entry = queue[0]
                partner = pb.hands[entry.partner]
                new, size, kept = range_search(entry, partner, revealed, policies, params, force_python)
                if new is None:
                    break
                truth = tuple(state.order[p] for p in entry.live_positions(partner))
                if truth not in kept:
                    raise HanabiError(f"range-search replay at turn {entry.turn} lost the true hand")
                pb = pb.with_hand(entry.partner, new)
                record.range_log.append({"turn": state.turn, "entry_turn": entry.turn, "range": size})
                queue.popleft()
            if on_turn is not None:
                on_turn(state, pb, len(queue))
            if not queue:
                searcher = j
            view = make_view(state, j)
            if j == searcher:
                priv = condition_on_aoh(pb, j, view)
                dec = mc_search(priv, j, view, policies, params, force_python=force_python)
                move = dec.move
                record.decisions.append(dec)
                record.searched_turns += 1
                record.rollouts += dec.rollouts
                queue.append(
                    ActionQueueEntry(
                        turn=state.turn,
                        actor=j,
                        move=move,
                        code=config.move_code(move, j),
                        belief=pb.hands[j],
                        view=view,
                        partner=1 - j,
                        range_positions=tuple(state.hands[1 - j]),
                        seed=dec.seed,
                    )
                )
                _log_turn(record, state, j, True, dec)
            else:
                move = policies[j].act(view)
                _log_turn(record, state, j, False)
            state, _ = step(state, move)
            pb = step_observation(pb, common_observation(state))
            if j != searcher:
                pb = step_policy(pb, view, policies[j], move)
        if on_turn is not None:
            on_turn(state, pb, len(queue))
    except InconsistencyError as exc:
        raise GameAborted(seed, [str(e.move) for e in state.log], str(exc)) from exc
    return _finish(record, state, started)


def run_independent(config: GameConfig, seed: int, policies, params: SearchParams,
                    force_python: bool = False) -> GameRecord:
    """Every seat searches on every turn, assuming the others play the blueprint."""
    if params.belief_uncertainty <= 0:
        raise ConfigError("independent search needs belief_uncertainty > 0")
    policies = _policies(policies, config)
    started = time.perf_counter()
    state = new_game(config, seed)
    record = GameRecord(seed, "independent", 0, 0, [])
    n = config.num_players
    beliefs = [
        condition_on_aoh(init_hand_belief(config, p, state.hands[p]), p, make_view(state, p)) for p in range(n)
    ]
    u = params.belief_uncertainty
    while not state.is_terminal:
        actor = state.current_player
        view = make_view(state, actor)
        dec = mc_search(beliefs[actor], actor, view, policies, params, force_python=force_python)
        record.decisions.append(dec)
        record.searched_turns += 1
        record.rollouts += dec.rollouts
        _log_turn(record, state, actor, True, dec)
        state, obs, _ = apply_move(state, dec.move)
        for p in range(n):
            beliefs[p] = step_observation(beliefs[p], obs[p])
            if p != actor:
                beliefs[p] = step_policy(beliefs[p], view, policies[actor], dec.move, target=p, uncertainty=u)
    return _finish(record, state, started)


def export_search_labels(records):
    """Yield one imitation-learning record per searched turn.

    A policy trained on these would maximize sum_a pi(aoh, a) * Q(aoh, a)
    over the exported Q estimates; the training itself is not part of this
    package.
    """
    for rec in records:
        for dec in rec.decisions:
            yield {
                "seed": rec.seed,
                "turn": dec.turn,
                "actor": dec.actor,
                "aoh_key": dec.aoh_key,
                "blueprint_action": str(dec.blueprint_move),
                "chosen_action": str(dec.move),
                "deviated": dec.deviated,
                "q": {s.move: s.mean for s in dec.stats if s.n},
                "counts": {s.move: s.n for s in dec.stats},
            }


def write_jsonl(path, items) -> int:
    count = 0
    with open(path, "w") as fh:
        for item in items:
            fh.write(json.dumps(item, sort_keys=True) + "\n")
            count += 1
    return count
