"""Deterministic blueprint policies over materialized agent views.

A policy never touches live engine state.  It receives an :class:`AgentView`
(the acting player's full action-observation history) and returns a move.
Because the view is a plain value, the belief code can ask "what would
player j do if player i held hand h" by building a hypothetical view with
:func:`view_with_hand`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional

import numpy as np

from .core import (
    DISCARD,
    HINT_COLOR,
    HINT_RANK,
    PLAY,
    ConfigError,
    Discard,
    GameConfig,
    GameState,
    HanabiError,
    HintColor,
    HintRank,
    Move,
    Play,
    parse_move,
)
from .rng import stable_hash


class PolicyDomainError(HanabiError, KeyError):
    """A table policy was asked about an AOH it has no entry for."""


@dataclass(frozen=True)
class AgentView:
    player: int
    config: GameConfig
    turn: int
    current_player: int
    fireworks: tuple
    hint_tokens: int
    life_tokens: int
    discards: tuple
    deck_size: int
    hands: tuple  # card codes per player, None for the viewer's own hand
    slot_ids: tuple  # deck positions per player
    knowledge: tuple  # hint masks per player
    countdown: Optional[int]
    log: tuple
    seen: tuple  # sorted (deck position, card code) pairs known to the viewer

    @cached_property
    def seen_map(self) -> dict:
        return dict(self.seen)

    @cached_property
    def aoh_key(self) -> str:
        """Canonical encoding of the viewer's action-observation history."""
        cfg = self.config
        n = cfg.num_players
        seen = self.seen_map
        parts = [f"p{self.player}"]
        deal = []
        for pos in range(n * cfg.hand_size):
            owner = pos % n
            deal.append("?" if owner == self.player else str(seen[pos]))
        parts.append(",".join(deal))
        for e in self.log:
            if e.drawn_pos < 0:
                drawn = ""
            elif e.actor == self.player:
                drawn = "?"
            else:
                drawn = str(seen[e.drawn_pos])
            touched = "".join(str(s) for s in e.touched)
            parts.append(f"{e.actor}:{e.move}:{touched}:{e.revealed}:{drawn}")
        return "|".join(parts)

    @cached_property
    def aoh_hash(self) -> int:
        return stable_hash(self.aoh_key)

    def own_hand_size(self) -> int:
        return len(self.slot_ids[self.player])

    def public_counts(self) -> list:
        """Copies of each card type not yet discarded or played."""
        cfg = self.config
        counts = list(cfg.composition)
        for code in self.discards:
            counts[code] -= 1
        for color, top in enumerate(self.fireworks):
            for rank in range(1, top + 1):
                counts[cfg.card_code(color, rank)] -= 1
        return counts

    def private_counts(self) -> list:
        """Copies of each card type the viewer has not seen anywhere."""
        counts = self.public_counts()
        for p, cards in enumerate(self.hands):
            if p != self.player and cards is not None:
                for code in cards:
                    counts[code] -= 1
        return counts

    @cached_property
    def timeline(self) -> list:
        """Public snapshot (hand positions, fireworks, discards) before each logged event."""
        cfg = self.config
        n = cfg.num_players
        hands = [[p + n * s for s in range(cfg.hand_size)] for p in range(n)]
        fireworks = [0] * cfg.colors
        discards = []
        snaps = []
        for e in self.log:
            snaps.append((tuple(tuple(h) for h in hands), tuple(fireworks), tuple(discards)))
            if e.removed_pos >= 0:
                hands[e.actor].remove(e.removed_pos)
                if e.success:
                    fireworks[e.revealed // cfg.max_rank] += 1
                else:
                    discards.append(e.revealed)
                if e.drawn_pos >= 0:
                    hands[e.actor].append(e.drawn_pos)
        return snaps


def make_view(state: GameState, player: int) -> AgentView:
    cfg = state.config
    order = state.order
    seen = {}
    for p, hand in enumerate(state.hands):
        if p != player:
            for pos in hand:
                seen[pos] = order[pos]
    for e in state.log:
        if e.removed_pos >= 0:
            seen[e.removed_pos] = e.revealed
    hands = tuple(
        None if p == player else tuple(order[x] for x in state.hands[p]) for p in range(cfg.num_players)
    )
    return AgentView(
        player=player,
        config=cfg,
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
        countdown=state.countdown,
        log=state.log,
        seen=tuple(sorted(seen.items())),
    )


def view_with_hand(view: AgentView, target: int, cards) -> AgentView:
    """The same history as seen by ``view.player`` had ``target`` held ``cards``."""
    if target == view.player:
        raise ValueError("a viewer cannot see its own hand")
    cards = tuple(int(c) for c in cards)
    positions = view.slot_ids[target]
    if len(cards) != len(positions):
        raise ValueError("hand length does not match the target's slots")
    seen = dict(view.seen)
    for pos, code in zip(positions, cards):
        seen[pos] = code
    hands = list(view.hands)
    hands[target] = cards
    return replace(view, hands=tuple(hands), seen=tuple(sorted(seen.items())))


def legal_moves_from_view(view: AgentView) -> list:
    """Legal moves of the viewer, who must be the player to act."""
    cfg = view.config
    me = view.player
    size = len(view.slot_ids[me])
    moves = [Play(s) for s in range(size)]
    if view.hint_tokens < cfg.hint_tokens_max:
        moves.extend(Discard(s) for s in range(size))
    if view.hint_tokens > 0:
        mr = cfg.max_rank
        for offset in range(1, cfg.num_players):
            target = (me + offset) % cfg.num_players
            codes = view.hands[target]
            moves.extend(HintColor(target, c) for c in sorted({x // mr for x in codes}))
            moves.extend(HintRank(target, r) for r in sorted({x % mr + 1 for x in codes}))
    return moves


def legal_count_batch(view: AgentView, target: int, hands) -> np.ndarray:
    """Number of legal moves of the viewer if ``target`` held each row of ``hands``."""
    cfg = view.config
    hands = np.asarray(hands, dtype=np.int64)
    m = len(hands)
    base = view.own_hand_size()
    if view.hint_tokens < cfg.hint_tokens_max:
        base *= 2
    if view.hint_tokens == 0:
        return np.full(m, base, dtype=np.int64)
    mr = cfg.max_rank
    for p in range(cfg.num_players):
        if p != view.player and p != target:
            codes = view.hands[p]
            base += len({c // mr for c in codes}) + len({c % mr for c in codes})
    out = np.full(m, base, dtype=np.int64)
    if target != view.player:
        colors = np.zeros((m, cfg.colors), dtype=bool)
        ranks = np.zeros((m, cfg.max_rank), dtype=bool)
        ar = np.arange(m)
        for j in range(hands.shape[1]):
            colors[ar, hands[:, j] // mr] = True
            ranks[ar, hands[:, j] % mr] = True
        out += colors.sum(axis=1) + ranks.sum(axis=1)
    return out


# --- card-type bitmask helpers shared with the rollout kernels -------------


def possible_mask(cfg: GameConfig, counts) -> int:
    return sum(1 << c for c, n in enumerate(counts) if n > 0)


def playable_mask(cfg: GameConfig, fireworks) -> int:
    mask = 0
    for color, top in enumerate(fireworks):
        if top < cfg.max_rank:
            mask |= 1 << cfg.card_code(color, top + 1)
    return mask


def useless_mask(cfg: GameConfig, fireworks, discards) -> int:
    """Card types that can never score: already played, or cut off by discards."""
    discarded = [0] * cfg.num_types
    for code in discards:
        discarded[code] += 1
    mask = 0
    for color, top in enumerate(fireworks):
        dead = False
        for rank in range(1, cfg.max_rank + 1):
            code = cfg.card_code(color, rank)
            if rank <= top or dead:
                mask |= 1 << code
            elif discarded[code] >= cfg.rank_multiplicity[rank - 1]:
                dead = True
    return mask


def _single_rank(cfg: GameConfig, mask: int) -> bool:
    return any(mask & ~rm == 0 for rm in cfg.rank_masks)


class BlueprintPolicy:
    name = "blueprint"
    supported_players = (1, 2, 3, 4, 5)

    def act(self, view: AgentView) -> Move:
        raise NotImplementedError

    def check_players(self, config: GameConfig) -> None:
        if config.num_players not in self.supported_players:
            raise ConfigError(f"{self.name} does not support {config.num_players} players")

    def batch_codes(self, view: AgentView, target: int, hands: np.ndarray) -> np.ndarray:
        """Move codes the viewer would choose if ``target`` held each row of ``hands``."""
        cfg = view.config
        out = np.empty(len(hands), dtype=np.int64)
        for i, row in enumerate(hands):
            out[i] = cfg.move_code(self.act(view_with_hand(view, target, row)), view.player)
        return out


class SimpleBot(BlueprintPolicy):
    """Fixed priority ladder.

    1. play the lowest slot whose hint mask proves it playable;
    2. with hint tokens, hint the next player's newest playable card that
       they cannot already prove playable (rank first, then color);
    3. discard the lowest slot whose mask proves it useless;
    4. discard the oldest slot, or play it when hint tokens are full and
       discarding is illegal.

    Every outcome constrains the next player's hand slot by slot, which
    :meth:`filter_belief` exploits to keep hand beliefs implicit.
    """

    name = "simple"

    @staticmethod
    def _own_move(view: AgentView, possible: int, play: int) -> Optional[Move]:
        for s, k in enumerate(view.knowledge[view.player]):
            eff = k & possible
            if eff and eff & ~play == 0:
                return Play(s)
        return None

    @staticmethod
    def _fallback(view: AgentView, possible: int) -> Move:
        cfg = view.config
        if view.hint_tokens < cfg.hint_tokens_max:
            useless = useless_mask(cfg, view.fireworks, view.discards)
            for s, k in enumerate(view.knowledge[view.player]):
                eff = k & possible
                if eff and eff & ~useless == 0:
                    return Discard(s)
            return Discard(0)
        return Play(0)

    @staticmethod
    def _target_slots(cfg: GameConfig, know, possible: int, play: int):
        """Per target slot: candidate card mask for rule 2 and whether the rank is known."""
        cand, rank_known = [], []
        for k in know:
            eff = k & possible
            cand.append(0 if eff & ~play == 0 else play)
            rank_known.append(_single_rank(cfg, eff))
        return cand, rank_known

    def _hint_target(self, view: AgentView) -> Optional[int]:
        n = view.config.num_players
        if n > 1 and view.hint_tokens > 0:
            return (view.player + 1) % n
        return None

    def act(self, view: AgentView) -> Move:
        cfg = view.config
        possible = possible_mask(cfg, view.public_counts())
        play = playable_mask(cfg, view.fireworks)
        move = self._own_move(view, possible, play)
        if move is not None:
            return move
        target = self._hint_target(view)
        if target is not None:
            cards = view.hands[target]
            cand, rank_known = self._target_slots(cfg, view.knowledge[target], possible, play)
            for s in range(len(cards) - 1, -1, -1):
                code = cards[s]
                if (cand[s] >> code) & 1:
                    if rank_known[s]:
                        return HintColor(target, code // cfg.max_rank)
                    return HintRank(target, code % cfg.max_rank + 1)
        return self._fallback(view, possible)

    def batch_codes(self, view: AgentView, target: int, hands: np.ndarray) -> np.ndarray:
        cfg = view.config
        me = view.player
        m = len(hands)
        possible = possible_mask(cfg, view.public_counts())
        play = playable_mask(cfg, view.fireworks)
        own = self._own_move(view, possible, play)
        if target != self._hint_target(view) or own is not None:
            move = own if own is not None else self.act(view)
            return np.full(m, cfg.move_code(move, me), dtype=np.int64)
        hands = np.asarray(hands, dtype=np.int64).reshape(m, -1)
        k = hands.shape[1]
        cand_masks, rank_known = self._target_slots(cfg, view.knowledge[target], possible, play)
        cand = np.zeros((m, k), dtype=bool)
        for s in range(k):
            cand[:, s] = (np.int64(cand_masks[s]) >> hands[:, s]) & 1 == 1
        has = cand.any(axis=1)
        newest = k - 1 - np.argmax(cand[:, ::-1], axis=1)
        chosen = hands[np.arange(m), newest]
        base = 2 * cfg.hand_size  # hints to the next player
        colors = chosen // cfg.max_rank
        ranks = chosen % cfg.max_rank
        hint_codes = np.where(np.asarray(rank_known)[newest], base + colors, base + cfg.colors + ranks)
        fallback = cfg.move_code(self._fallback(view, possible), me)
        return np.where(has, hint_codes, fallback).astype(np.int64)

    def filter_belief(self, belief, view: AgentView, code: int):
        """Keep the hands of ``belief.owner`` under which the viewer would play ``code``.

        Rule 2 picks the newest candidate slot, so the observed hint pins one
        of the slots that could hold a matching candidate and rules out
        candidates in every newer slot.  With a single such slot the result
        is a per-slot mask; otherwise only those slots are enumerated.
        """
        cfg = view.config
        me = view.player
        target = belief.owner
        possible = possible_mask(cfg, view.public_counts())
        play = playable_mask(cfg, view.fireworks)
        own = self._own_move(view, possible, play)
        if target != self._hint_target(view) or own is not None:
            move = own if own is not None else self.act(view)
            return belief if cfg.move_code(move, me) == code else belief.emptied()
        cand, rank_known = self._target_slots(cfg, view.knowledge[target], possible, play)
        masks = list(belief.masks)
        k = len(masks)
        move = cfg.code_move(code, me)
        if not (move.is_hint and move.target == target):
            if cfg.move_code(self._fallback(view, possible), me) != code:
                return belief.emptied()
            return belief.restrict([m & ~c for m, c in zip(masks, cand)])
        if move.kind == HINT_COLOR:
            value = cfg.color_masks[move.value]
        else:
            value = cfg.rank_masks[move.value - 1]
        want_rank_known = move.kind == HINT_COLOR
        pinned = [s for s in range(k) if rank_known[s] == want_rank_known and masks[s] & cand[s] & value]
        if not pinned:
            return belief.emptied()
        lo, hi = pinned[0], pinned[-1]
        for t in range(hi + 1, k):
            masks[t] &= ~cand[t]
        if len(pinned) == 1:
            masks[hi] &= cand[hi] & value
            return belief.restrict(masks)
        belief = belief.restrict(masks)
        slots = [s for s in range(lo, hi + 1) if s in pinned or belief.masks[s] & cand[s]]
        belief = belief.materialize([belief.positions[s] for s in slots])
        rows = belief.columns([belief.positions[s] for s in slots]).astype(np.int64)
        found = np.zeros(len(rows), dtype=bool)
        keep = np.zeros(len(rows), dtype=bool)
        for j in range(len(slots) - 1, -1, -1):
            s = slots[j]
            is_cand = ((np.int64(cand[s]) >> rows[:, j]) & 1 == 1) & ~found
            if s in pinned:
                keep |= is_cand & ((np.int64(value) >> rows[:, j]) & 1 == 1)
            found |= is_cand
        return belief.filter_rows(keep)


HAT_MODULUS = 8


class HatBot(BlueprintPolicy):
    """Hat-coding convention for 3-5 players.

    Every player's recommendation r in 0..7 is a public function of their
    hand (play slot s -> s, discard slot s -> 4 + s, looking at the four
    oldest slots).  A hinter picks a hint whose code equals the sum of all
    other players' recommendations mod 8, where a hint's code is its index
    in a fixed enumeration of every (target offset, color, rank) hint,
    mod 8.  Each receiver recovers its own recommendation by subtracting the
    recommendations it can see.
    """

    name = "hat"
    supported_players = (3, 4, 5)

    @staticmethod
    def recommendation(cfg: GameConfig, cards, fireworks, discards) -> int:
        play = playable_mask(cfg, fireworks)
        useless = useless_mask(cfg, fireworks, discards)
        head = list(cards)[:4]
        for s, c in enumerate(head):
            if (play >> c) & 1:
                return s
        for s, c in enumerate(head):
            if (useless >> c) & 1:
                return 4 + s
        # otherwise the oldest card that is not the last live copy
        left = list(cfg.composition)
        for c in discards:
            left[c] -= 1
        for s, c in enumerate(head):
            if left[c] > 1:
                return 4 + s
        return 4

    @staticmethod
    def hint_code(cfg: GameConfig, move: Move, hinter: int) -> int:
        offset = (move.target - hinter) % cfg.num_players
        index = (offset - 1) * (cfg.colors + cfg.max_rank)
        index += move.value if move.kind == HINT_COLOR else cfg.colors + move.value - 1
        return index % HAT_MODULUS

    def decode(self, view: AgentView, event_index: int) -> int:
        """Recommendation for ``view.player`` carried by the hint at ``event_index``."""
        cfg = view.config
        event = view.log[event_index]
        hands, fireworks, discards = view.timeline[event_index]
        seen = view.seen_map
        total = self.hint_code(cfg, event.move, event.actor)
        for p in range(cfg.num_players):
            if p in (event.actor, view.player):
                continue
            cards = [seen[pos] for pos in hands[p]]
            total -= self.recommendation(cfg, cards, fireworks, discards)
        return total % HAT_MODULUS

    def encode(self, view: AgentView) -> int:
        cfg = view.config
        total = 0
        for p in range(cfg.num_players):
            if p != view.player:
                total += self.recommendation(cfg, view.hands[p], view.fireworks, view.discards)
        return total % HAT_MODULUS

    def fresh_hint(self, view: AgentView) -> Optional[int]:
        """Index of the latest hint if the viewer has not acted since it was given."""
        for i in range(len(view.log) - 1, -1, -1):
            e = view.log[i]
            if e.actor == view.player:
                return None
            if e.move.is_hint:
                return i
        return None

    def act(self, view: AgentView) -> Move:
        cfg = view.config
        self.check_players(cfg)
        me = view.player
        size = view.own_hand_size()
        idx = self.fresh_hint(view)
        if idx is not None:
            rec = self.decode(view, idx)
            # a play since the hint may have made the recommended card a duplicate
            stale = view.timeline[idx][1] != view.fireworks
            if rec < 4 and rec < size and not stale:
                return Play(rec)
            if rec >= 4 and rec - 4 < size and view.hint_tokens < cfg.hint_tokens_max:
                return Discard(rec - 4)
        legal_hints = [m for m in legal_moves_from_view(view) if m.is_hint]
        if view.hint_tokens > 0:
            value = self.encode(view)
            for m in legal_hints:
                if self.hint_code(cfg, m, me) == value:
                    return m
        if view.hint_tokens < cfg.hint_tokens_max:
            return Discard(0)
        if legal_hints:
            return legal_hints[0]
        return Play(0)


class TablePolicy(BlueprintPolicy):
    """Explicit AOH -> move map."""

    name = "table"

    def __init__(self, table: dict):
        self.table = {k: (parse_move(v) if isinstance(v, str) else v) for k, v in table.items()}

    def act(self, view: AgentView) -> Move:
        try:
            return self.table[view.aoh_key]
        except KeyError:
            raise PolicyDomainError(f"no table entry for AOH {view.aoh_key!r}") from None

    def dumps(self) -> str:
        lines = [json.dumps({"aoh_key": k, "move": str(m)}) for k, m in sorted(self.table.items())]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "TablePolicy":
        table = {}
        for line in text.splitlines():
            if line.strip():
                rec = json.loads(line)
                table[rec["aoh_key"]] = rec["move"]
        return cls(table)

    @classmethod
    def load(cls, path) -> "TablePolicy":
        with open(path) as fh:
            return cls.loads(fh.read())


class HashPolicy(BlueprintPolicy):
    """Pseudo-random but deterministic legal move per AOH (source for test tables)."""

    name = "hash"

    def __init__(self, salt: int = 0):
        self.salt = salt

    def act(self, view: AgentView) -> Move:
        moves = legal_moves_from_view(view)
        return moves[stable_hash(f"{self.salt}|{view.aoh_key}") % len(moves)]


def simplebot_act(view: AgentView) -> Move:
    return SimpleBot().act(view)


def hatbot_act(view: AgentView) -> Move:
    return HatBot().act(view)


def table_policy_act(table, view: AgentView) -> Move:
    if not isinstance(table, TablePolicy):
        table = TablePolicy(table)
    return table.act(view)


def get_blueprint(name: str) -> BlueprintPolicy:
    if name == "simple":
        return SimpleBot()
    if name == "hat":
        return HatBot()
    if name.startswith("table:"):
        return TablePolicy.load(name[len("table:"):])
    raise ValueError(f"unknown blueprint {name!r}")
