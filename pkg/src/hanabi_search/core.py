"""Deterministic Hanabi engine for 1-5 players.

Cards are small integers: ``code = color * max_rank + (rank - 1)``.  Hand
slots hold *deck positions* (indices into ``GameState.order``), so every
card keeps a stable identity from the moment it is dealt.  A played or
discarded card leaves its slot, the remaining slots keep their relative
order, and the replacement card is appended as the newest slot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional

from .rng import SplitMix64

PLAY, DISCARD, HINT_COLOR, HINT_RANK = 0, 1, 2, 3
_KIND_NAMES = {PLAY: "play", DISCARD: "discard", HINT_COLOR: "color", HINT_RANK: "rank"}
_NAME_KINDS = {v: k for k, v in _KIND_NAMES.items()}
COLOR_LETTERS = "RYGWB"


class HanabiError(Exception):
    pass


class ConfigError(HanabiError, ValueError):
    pass


class StateError(HanabiError):
    pass


class IllegalMoveError(HanabiError, ValueError):
    pass


class Card(NamedTuple):
    color: int
    rank: int

    def __str__(self):
        return f"{COLOR_LETTERS[self.color]}{self.rank}"


class Move(NamedTuple):
    kind: int
    slot: int = -1
    target: int = -1
    value: int = -1  # color index for color hints, rank for rank hints

    @property
    def is_hint(self) -> bool:
        return self.kind >= HINT_COLOR

    def __str__(self):
        if self.kind in (PLAY, DISCARD):
            return f"{_KIND_NAMES[self.kind]}:{self.slot}"
        return f"{_KIND_NAMES[self.kind]}:{self.target}:{self.value}"


def Play(slot: int) -> Move:
    return Move(PLAY, slot=slot)


def Discard(slot: int) -> Move:
    return Move(DISCARD, slot=slot)


def HintColor(target: int, color: int) -> Move:
    return Move(HINT_COLOR, target=target, value=color)


def HintRank(target: int, rank: int) -> Move:
    return Move(HINT_RANK, target=target, value=rank)


def parse_move(text: str) -> Move:
    parts = text.split(":")
    kind = _NAME_KINDS[parts[0]]
    if kind in (PLAY, DISCARD):
        return Move(kind, slot=int(parts[1]))
    return Move(kind, target=int(parts[1]), value=int(parts[2]))


@dataclass(frozen=True)
class GameConfig:
    num_players: int = 2
    colors: int = 5
    max_rank: int = 5
    hand_size: Optional[int] = None
    hint_tokens_max: int = 8
    life_tokens: int = 3
    rank_multiplicity: tuple = (3, 2, 2, 2, 1)
    bomb_zero_score: bool = True
    discount: float = 1.0
    # optional hard horizon; used by the miniature oracle games
    max_turns: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "rank_multiplicity", tuple(int(m) for m in self.rank_multiplicity))
        if self.hand_size is None:
            object.__setattr__(self, "hand_size", 5 if self.num_players <= 3 else 4)
        if not 1 <= self.num_players <= 5:
            raise ConfigError(f"num_players must be in 1..5, got {self.num_players}")
        if not 1 <= self.colors <= 5 or not 1 <= self.max_rank <= 5:
            raise ConfigError("colors and max_rank must be in 1..5")
        if len(self.rank_multiplicity) != self.max_rank or min(self.rank_multiplicity) < 1:
            raise ConfigError("rank_multiplicity needs one positive entry per rank")
        if self.hand_size < 1 or self.hand_size * self.num_players > self.deck_size:
            raise ConfigError(
                f"hand_size {self.hand_size} x {self.num_players} players exceeds deck of {self.deck_size}"
            )
        if self.hint_tokens_max < 0 or self.life_tokens < 1:
            raise ConfigError("token counts out of range")
        if not 0.0 < self.discount <= 1.0:
            raise ConfigError("discount must lie in (0, 1]")
        if self.max_turns is not None and self.max_turns < 1:
            raise ConfigError("max_turns must be positive")

    @property
    def num_types(self) -> int:
        return self.colors * self.max_rank

    @property
    def deck_size(self) -> int:
        return self.colors * sum(self.rank_multiplicity)

    @property
    def max_score(self) -> int:
        return self.colors * self.max_rank

    @property
    def full_mask(self) -> int:
        return (1 << self.num_types) - 1

    @property
    def num_actions(self) -> int:
        """Size of the canonical action alphabet (see :meth:`move_code`)."""
        return 2 * self.hand_size + (self.num_players - 1) * (self.colors + self.max_rank)

    def card_code(self, color: int, rank: int) -> int:
        return color * self.max_rank + rank - 1

    def card_of(self, code: int) -> Card:
        return Card(code // self.max_rank, code % self.max_rank + 1)

    def card_str(self, code: int) -> str:
        return str(self.card_of(code))

    @cached_property
    def composition(self) -> tuple:
        return tuple(self.rank_multiplicity[code % self.max_rank] for code in range(self.num_types))

    @cached_property
    def color_masks(self) -> tuple:
        return tuple(
            sum(1 << (c * self.max_rank + r) for r in range(self.max_rank)) for c in range(self.colors)
        )

    @cached_property
    def rank_masks(self) -> tuple:
        # indexed by rank - 1
        return tuple(
            sum(1 << (c * self.max_rank + r) for c in range(self.colors)) for r in range(self.max_rank)
        )

    def move_code(self, move: Move, actor: int) -> int:
        """Actor-relative integer code of a move, in ``range(num_actions)``."""
        hs = self.hand_size
        if move.kind == PLAY:
            return move.slot
        if move.kind == DISCARD:
            return hs + move.slot
        offset = (move.target - actor) % self.num_players
        base = 2 * hs + (offset - 1) * (self.colors + self.max_rank)
        if move.kind == HINT_COLOR:
            return base + move.value
        return base + self.colors + move.value - 1

    def code_move(self, code: int, actor: int) -> Move:
        hs = self.hand_size
        if code < hs:
            return Play(code)
        if code < 2 * hs:
            return Discard(code - hs)
        rest = code - 2 * hs
        width = self.colors + self.max_rank
        target = (actor + 1 + rest // width) % self.num_players
        value = rest % width
        if value < self.colors:
            return HintColor(target, value)
        return HintRank(target, value - self.colors + 1)

    def to_dict(self) -> dict:
        return {
            "num_players": self.num_players,
            "colors": self.colors,
            "max_rank": self.max_rank,
            "hand_size": self.hand_size,
            "hint_tokens_max": self.hint_tokens_max,
            "life_tokens": self.life_tokens,
            "rank_multiplicity": list(self.rank_multiplicity),
            "bomb_zero_score": self.bomb_zero_score,
            "discount": self.discount,
            "max_turns": self.max_turns,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GameConfig":
        return cls(**data)


class Event(NamedTuple):
    actor: int
    move: Move
    touched: tuple = ()  # hint: slots of the target that matched
    revealed: int = -1  # play/discard: card code that left the hand
    success: bool = False  # play landed on its firework
    drawn_pos: int = -1  # deck position of the replacement card
    reward: float = 0.0
    removed_pos: int = -1  # deck position of the card that left the hand


@dataclass(frozen=True)
class GameState:
    config: GameConfig
    order: tuple  # full deck order, card codes by deck position
    next_draw: int
    hands: tuple  # per player, deck positions oldest -> newest
    knowledge: tuple  # per player, per slot hint-derived candidate bitmask
    fireworks: tuple
    hint_tokens: int
    life_tokens: int
    discards: tuple  # card codes in discard order
    current_player: int
    turn: int = 0
    countdown: Optional[int] = None
    log: tuple = field(default=(), compare=True)

    @property
    def deck(self) -> tuple:
        return self.order[self.next_draw:]

    @property
    def deck_size(self) -> int:
        return len(self.order) - self.next_draw

    def hand_cards(self, player: int) -> tuple:
        order = self.order
        return tuple(order[p] for p in self.hands[player])

    @property
    def points(self) -> int:
        return sum(self.fireworks)

    @property
    def is_terminal(self) -> bool:
        cfg = self.config
        if self.life_tokens == 0 or self.countdown == 0:
            return True
        if cfg.max_turns is not None and self.turn >= cfg.max_turns:
            return True
        return all(f == cfg.max_rank for f in self.fireworks)

    def played_counts(self) -> list:
        """Per card code, how many copies sit on the fireworks."""
        cfg = self.config
        counts = [0] * cfg.num_types
        for color, top in enumerate(self.fireworks):
            for rank in range(1, top + 1):
                counts[cfg.card_code(color, rank)] += 1
        return counts

    def public_counts(self) -> list:
        """Copies of each card not yet discarded or played."""
        counts = list(self.config.composition)
        for code in self.discards:
            counts[code] -= 1
        for code, n in enumerate(self.played_counts()):
            counts[code] -= n
        return counts

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "order": list(self.order),
            "next_draw": self.next_draw,
            "hands": [list(h) for h in self.hands],
            "knowledge": [list(k) for k in self.knowledge],
            "fireworks": list(self.fireworks),
            "hint_tokens": self.hint_tokens,
            "life_tokens": self.life_tokens,
            "discards": list(self.discards),
            "current_player": self.current_player,
            "turn": self.turn,
            "countdown": self.countdown,
            "moves": [str(e.move) for e in self.log],
        }


@dataclass(frozen=True)
class Observation:
    """What one observer sees right after a transition (or at rest).

    ``observer == -1`` denotes the common-knowledge observation shared by
    every player: no hand identities and no drawn-card identities.
    """

    observer: int
    turn: int
    current_player: int
    fireworks: tuple
    hint_tokens: int
    life_tokens: int
    discards: tuple
    deck_size: int
    hands: tuple  # card codes per player, None where hidden from the observer
    slot_ids: tuple  # deck positions per player (public)
    knowledge: tuple  # hint masks per player (public)
    last: Optional[Event] = None
    drawn_card: Optional[int] = None  # identity of the last drawn card if visible


def _validate_seed_config(config: GameConfig) -> None:
    if not isinstance(config, GameConfig):
        raise ConfigError("config must be a GameConfig")


def initial_state(config: GameConfig, order) -> GameState:
    """Deal a given deck order round-robin."""
    _validate_seed_config(config)
    order = tuple(int(c) for c in order)
    if sorted(order) != sorted(c for c, n in enumerate(config.composition) for _ in range(n)):
        raise ConfigError("deck order does not match the configured composition")
    n, hs = config.num_players, config.hand_size
    hands = tuple(tuple(p + n * s for s in range(hs)) for p in range(n))
    full = config.full_mask
    return GameState(
        config=config,
        order=order,
        next_draw=n * hs,
        hands=hands,
        knowledge=tuple((full,) * hs for _ in range(n)),
        fireworks=(0,) * config.colors,
        hint_tokens=config.hint_tokens_max,
        life_tokens=config.life_tokens,
        discards=(),
        current_player=0,
        turn=0,
        countdown=None if n * hs < config.deck_size else n,
    )


def new_game(config: GameConfig, seed: int) -> GameState:
    """Fresh game whose deck is a SplitMix64 Fisher-Yates shuffle of ``seed``."""
    _validate_seed_config(config)
    deck = [c for c, n in enumerate(config.composition) for _ in range(n)]
    SplitMix64(seed).shuffle(deck)
    return initial_state(config, deck)


def mini_config(**overrides) -> GameConfig:
    """Miniature 2-player game small enough for exhaustive evaluation.

    Two colors, ranks 1-2 with two 1s and one 2 per color, one-card hands
    and an 8-turn horizon: 6 cards and 180 distinct deals.
    """
    fields = dict(
        num_players=2, colors=2, max_rank=2, rank_multiplicity=(2, 1), hand_size=1, max_turns=8,
    )
    fields.update(overrides)
    return GameConfig(**fields)


def legal_moves(state: GameState) -> list:
    if state.is_terminal:
        raise StateError("no legal moves in a terminal state")
    cfg = state.config
    actor = state.current_player
    size = len(state.hands[actor])
    moves = [Play(s) for s in range(size)]
    if state.hint_tokens < cfg.hint_tokens_max:
        moves.extend(Discard(s) for s in range(size))
    if state.hint_tokens > 0:
        order = state.order
        mr = cfg.max_rank
        for offset in range(1, cfg.num_players):
            target = (actor + offset) % cfg.num_players
            codes = [order[p] for p in state.hands[target]]
            colors = sorted({c // mr for c in codes})
            ranks = sorted({c % mr + 1 for c in codes})
            moves.extend(HintColor(target, c) for c in colors)
            moves.extend(HintRank(target, r) for r in ranks)
    return moves


def _check_legal(state: GameState, move: Move) -> None:
    if state.is_terminal:
        raise StateError("game is over")
    cfg = state.config
    actor = state.current_player
    size = len(state.hands[actor])
    if move.kind in (PLAY, DISCARD):
        if not 0 <= move.slot < size:
            raise IllegalMoveError(f"{move}: slot out of range for a hand of {size}")
        if move.kind == DISCARD and state.hint_tokens >= cfg.hint_tokens_max:
            raise IllegalMoveError(f"{move}: cannot discard with full hint tokens")
        return
    if move.kind not in (HINT_COLOR, HINT_RANK):
        raise IllegalMoveError(f"unknown move kind {move.kind}")
    if state.hint_tokens <= 0:
        raise IllegalMoveError(f"{move}: no hint tokens left")
    if not 0 <= move.target < cfg.num_players or move.target == actor:
        raise IllegalMoveError(f"{move}: invalid hint target")
    mr = cfg.max_rank
    codes = state.hand_cards(move.target)
    if move.kind == HINT_COLOR:
        hit = any(c // mr == move.value for c in codes)
    else:
        hit = any(c % mr + 1 == move.value for c in codes)
    if not hit:
        raise IllegalMoveError(f"{move}: hint matches no card")


def apply_move(state: GameState, move: Move):
    """Apply ``move`` for the current player.

    Returns ``(next_state, observations, reward)`` where ``observations`` has
    one :class:`Observation` per player.
    """
    new_state, reward = step(state, move)
    observations = tuple(observe(new_state, p) for p in range(state.config.num_players))
    return new_state, observations, reward


def step(state: GameState, move: Move):
    """Transition only: ``(next_state, reward)`` without building observations."""
    _check_legal(state, move)
    cfg = state.config
    n = cfg.num_players
    actor = state.current_player
    order = state.order
    hands = list(state.hands)
    knowledge = list(state.knowledge)
    fireworks = state.fireworks
    hint_tokens = state.hint_tokens
    life_tokens = state.life_tokens
    discards = state.discards
    next_draw = state.next_draw
    countdown = state.countdown
    reward = 0.0
    touched = ()
    revealed = -1
    success = False
    drawn_pos = -1
    removed_pos = -1

    if move.is_hint:
        target = move.target
        mr = cfg.max_rank
        if move.kind == HINT_COLOR:
            mask = cfg.color_masks[move.value]
            hits = tuple(order[p] // mr == move.value for p in hands[target])
        else:
            mask = cfg.rank_masks[move.value - 1]
            hits = tuple(order[p] % mr + 1 == move.value for p in hands[target])
        touched = tuple(s for s, h in enumerate(hits) if h)
        knowledge[target] = tuple(
            k & mask if h else k & ~mask for k, h in zip(knowledge[target], hits)
        )
        hint_tokens -= 1
    else:
        slot = move.slot
        pos = removed_pos = hands[actor][slot]
        revealed = order[pos]
        color, rank = divmod(revealed, cfg.max_rank)
        rank += 1
        if move.kind == PLAY:
            if fireworks[color] + 1 == rank:
                success = True
                fireworks = fireworks[:color] + (rank,) + fireworks[color + 1:]
                reward = 1.0
                if rank == cfg.max_rank and hint_tokens < cfg.hint_tokens_max:
                    hint_tokens += 1
            else:
                life_tokens -= 1
                discards = discards + (revealed,)
        else:
            hint_tokens += 1
            discards = discards + (revealed,)
        hand = hands[actor][:slot] + hands[actor][slot + 1:]
        know = knowledge[actor][:slot] + knowledge[actor][slot + 1:]
        if next_draw < len(order):
            drawn_pos = next_draw
            hand = hand + (drawn_pos,)
            know = know + (cfg.full_mask,)
            next_draw += 1
        hands[actor] = hand
        knowledge[actor] = know
        if life_tokens == 0 and cfg.bomb_zero_score:
            # cumulative reward of a bombed game sums to zero
            reward -= sum(fireworks)

    if countdown is not None:
        countdown -= 1
    elif drawn_pos >= 0 and next_draw == len(order):
        countdown = n

    event = Event(actor, move, touched, revealed, success, drawn_pos, reward, removed_pos)
    new_state = GameState(
        config=cfg,
        order=order,
        next_draw=next_draw,
        hands=tuple(hands),
        knowledge=tuple(knowledge),
        fireworks=fireworks,
        hint_tokens=hint_tokens,
        life_tokens=life_tokens,
        discards=discards,
        current_player=(actor + 1) % n,
        turn=state.turn + 1,
        countdown=countdown,
        log=state.log + (event,),
    )
    return new_state, reward


def observe(state: GameState, player: int) -> Observation:
    """Deterministic per-player view: everything except own cards and deck order."""
    n = state.config.num_players
    if not -1 <= player < n:
        raise ValueError(f"invalid player {player}")
    order = state.order
    hands = tuple(
        None if p == player or player == -1 else tuple(order[x] for x in state.hands[p]) for p in range(n)
    )
    last = state.log[-1] if state.log else None
    drawn_card = None
    if last is not None and last.drawn_pos >= 0 and player not in (-1, last.actor):
        drawn_card = order[last.drawn_pos]
    return Observation(
        observer=player,
        turn=state.turn,
        current_player=state.current_player,
        fireworks=state.fireworks,
        hint_tokens=state.hint_tokens,
        life_tokens=state.life_tokens,
        discards=state.discards,
        deck_size=state.deck_size,
        hands=hands,
        slot_ids=state.hands,
        knowledge=state.knowledge,
        last=last,
        drawn_card=drawn_card,
    )


def common_observation(state: GameState) -> Observation:
    return observe(state, -1)


def score(state: GameState) -> int:
    if state.life_tokens == 0 and state.config.bomb_zero_score:
        return 0
    return state.points


def max_game_length(config: GameConfig) -> int:
    """Upper bound on the number of turns of any game under ``config``."""
    bound = (
        config.deck_size
        + config.num_players * (config.hand_size + 1)
        + config.hint_tokens_max
        + config.deck_size
        + config.colors
    )
    if config.max_turns is not None:
        bound = min(bound, config.max_turns)
    return bound


def replay(config: GameConfig, seed: int, moves) -> GameState:
    state = new_game(config, seed)
    for m in moves:
        if isinstance(m, str):
            m = parse_move(m)
        state, _, _ = apply_move(state, m)
    return state


def game_trace(seed: int, state: GameState) -> dict:
    """Replayable JSON-ready record of a finished (or partial) game."""
    return {
        "seed": seed,
        "config": state.config.to_dict(),
        "moves": [str(e.move) for e in state.log],
        "score": score(state),
        "turns": state.turn,
    }


def replay_trace(trace) -> GameState:
    if isinstance(trace, str):
        trace = json.loads(trace)
    config = GameConfig.from_dict(trace["config"])
    return replay(config, trace["seed"], trace["moves"])
