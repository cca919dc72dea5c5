"""Exact beliefs over hidden hands.

A :class:`HandBelief` describes every hand one player might hold.  Slots
are keyed by deck position.  Some positions are held *explicitly* as rows of
card codes; the rest are *implicit*, constrained only by a per-slot mask.
The unnormalized weight of a full hand ``h`` is

    factor(row of h) * prod_c falling(counts[c], multiplicity of c in h)

which is the number of ways to deal ``h`` from the unseen cards, times a
likelihood factor that stays 1 unless a softened policy is applied.  Hands
that break a mask or need more copies than ``counts`` allows weigh zero.

Policy filters usually only narrow masks.  When a filter genuinely couples
several slots, those slots are materialized as explicit columns, which keeps
the row table small even when the full support has millions of hands.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .core import GameConfig, HanabiError, Observation

__all__ = [
    "InconsistencyError",
    "SlotConstraint",
    "HandBelief",
    "PublicBelief",
    "BeliefRange",
    "Overflow",
    "ActionQueueEntry",
    "falling",
    "hand_weight",
    "init_public_beliefs",
    "init_hand_belief",
    "counts_from",
    "step_observation",
    "step_policy",
    "condition_on_aoh",
    "enumerate_range",
    "sample_determinization",
]


class InconsistencyError(HanabiError):
    """A belief lost its whole support."""


def falling(n: int, m: int) -> int:
    out = 1
    for i in range(m):
        out *= n - i
    return out


def hand_weight(counts, hand) -> int:
    """Number of ordered ways to draw ``hand`` from a multiset with ``counts``."""
    used: dict = {}
    out = 1
    for c in hand:
        k = used.get(c, 0)
        out *= counts[c] - k
        used[c] = k + 1
        if out <= 0:
            return 0
    return out


@dataclass(frozen=True)
class SlotConstraint:
    mask: int

    def types(self) -> list:
        m, out, c = self.mask, [], 0
        while m:
            if m & 1:
                out.append(c)
            m >>= 1
            c += 1
        return out

    def __contains__(self, code: int) -> bool:
        return bool((self.mask >> code) & 1)


def _bits(mask: int) -> list:
    return SlotConstraint(mask).types()


def counts_from(config: GameConfig, fireworks, discards, hands=()) -> tuple:
    """Unseen copies per card type given public piles and any visible hands."""
    counts = list(config.composition)
    for code in discards:
        counts[code] -= 1
    for color, top in enumerate(fireworks):
        for rank in range(1, top + 1):
            counts[config.card_code(color, rank)] -= 1
    for cards in hands:
        if cards is not None:
            for code in cards:
                counts[code] -= 1
    return tuple(counts)


def _row_multiset_ok(rows: np.ndarray, counts: np.ndarray) -> np.ndarray:
    m, k = rows.shape
    if k == 0 or m == 0:
        return np.ones(m, dtype=bool)
    t = len(counts)
    flat = rows.astype(np.int64) + (np.arange(m, dtype=np.int64) * t)[:, None]
    used = np.bincount(flat.ravel(), minlength=m * t).reshape(m, t)
    return (used <= counts[None, :]).all(axis=1)


def _row_falling(rows: np.ndarray, counts: np.ndarray) -> np.ndarray:
    m, k = rows.shape
    out = np.ones(m, dtype=np.float64)
    for j in range(k):
        col = rows[:, j]
        prior = np.zeros(m, dtype=np.int64)
        for i in range(j):
            prior += rows[:, i] == col
        out *= np.maximum(counts[col] - prior, 0)
    return out


@dataclass(frozen=True, eq=False)
class HandBelief:
    config: GameConfig
    owner: int
    positions: tuple  # deck positions of the current slots, oldest first
    masks: tuple  # per-slot support constraint (hints and policy filters)
    counts: tuple  # unseen copies per card type from this belief's perspective
    cols: tuple = ()  # explicit positions, in slot order
    rows: np.ndarray = field(default=None)  # (M, len(cols)) card codes
    factor: np.ndarray = field(default=None)  # (M,) likelihood factors

    def __post_init__(self):
        if self.rows is None:
            object.__setattr__(self, "rows", np.zeros((1, len(self.cols)), dtype=np.int8))
        if self.factor is None:
            object.__setattr__(self, "factor", np.ones(len(self.rows), dtype=np.float64))

    # --- basic views --------------------------------------------------------

    @property
    def size(self) -> int:
        return len(self.positions)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    @property
    def is_explicit(self) -> bool:
        return len(self.cols) == len(self.positions)

    @property
    def constraints(self) -> tuple:
        return tuple(SlotConstraint(m) for m in self.masks)

    @property
    def implicit_slots(self) -> list:
        cols = set(self.cols)
        return [s for s, p in enumerate(self.positions) if p not in cols]

    def _counts_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)

    def columns(self, positions) -> np.ndarray:
        idx = [self.cols.index(p) for p in positions]
        return self.rows[:, idx]

    def emptied(self) -> "HandBelief":
        return replace(self, rows=self.rows[:0], factor=self.factor[:0])

    def __eq__(self, other):
        if not isinstance(other, HandBelief):
            return NotImplemented
        return (
            self.owner == other.owner
            and self.positions == other.positions
            and self.masks == other.masks
            and self.counts == other.counts
            and self.cols == other.cols
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.factor, other.factor)
        )

    # --- updates (all return new beliefs) -----------------------------------

    def _with_rows(self, keep: np.ndarray, **changes) -> "HandBelief":
        return replace(self, rows=self.rows[keep], factor=self.factor[keep], **changes)

    def filter_rows(self, keep: np.ndarray) -> "HandBelief":
        return self._with_rows(np.asarray(keep, dtype=bool))

    def scale_rows(self, mult: np.ndarray) -> "HandBelief":
        mult = np.asarray(mult, dtype=np.float64)
        keep = mult > 0
        return replace(self, rows=self.rows[keep], factor=self.factor[keep] * mult[keep])

    def restrict(self, masks) -> "HandBelief":
        """Intersect every slot mask with ``masks``."""
        new = tuple(a & b for a, b in zip(self.masks, masks))
        keep = np.ones(self.num_rows, dtype=bool)
        for j, pos in enumerate(self.cols):
            m = new[self.positions.index(pos)]
            keep &= (np.int64(m) >> self.rows[:, j].astype(np.int64)) & 1 == 1
        if keep.all():
            return replace(self, masks=new)
        return self._with_rows(keep, masks=new)

    def with_counts(self, counts) -> "HandBelief":
        counts = tuple(int(c) for c in counts)
        if min(counts) < 0:
            raise InconsistencyError("negative card count")
        keep = _row_multiset_ok(self.rows, np.asarray(counts, dtype=np.int64))
        if keep.all():
            return replace(self, counts=counts)
        return self._with_rows(keep, counts=counts)

    def hint(self, touched, card_mask: int) -> "HandBelief":
        touched = set(touched)
        full = self.config.full_mask
        masks = [card_mask if s in touched else full & ~card_mask for s in range(self.size)]
        return self.restrict(masks)

    def reveal(self, position: int, code: int) -> "HandBelief":
        """The card at ``position`` left the hand and turned out to be ``code``."""
        s = self.positions.index(position)
        if not (self.masks[s] >> code) & 1:
            return self.emptied()
        positions = self.positions[:s] + self.positions[s + 1:]
        masks = self.masks[:s] + self.masks[s + 1:]
        if position not in self.cols:
            return replace(self, positions=positions, masks=masks)
        j = self.cols.index(position)
        keep = self.rows[:, j] == code
        rows = np.delete(self.rows[keep], j, axis=1)
        return replace(
            self,
            positions=positions,
            masks=masks,
            cols=self.cols[:j] + self.cols[j + 1:],
            rows=rows,
            factor=self.factor[keep],
        )

    def draw(self, position: int) -> "HandBelief":
        return replace(
            self, positions=self.positions + (position,), masks=self.masks + (self.config.full_mask,)
        )

    def materialize(self, positions) -> "HandBelief":
        """Turn the given implicit positions into explicit columns."""
        todo = [p for p in self.positions if p in set(positions) and p not in self.cols]
        if not todo:
            return self
        counts = self._counts_array()
        rows, factor, cols = self.rows, self.factor, list(self.cols)
        for pos in todo:
            s = self.positions.index(pos)
            values = [c for c in _bits(self.masks[s]) if counts[c] > 0]
            m = len(rows)
            rows = np.concatenate(
                [np.repeat(rows, len(values), axis=0), np.tile(np.asarray(values, dtype=np.int8), m)[:, None]],
                axis=1,
            )
            factor = np.repeat(factor, len(values))
            keep = _row_multiset_ok(rows, counts)
            rows, factor = rows[keep], factor[keep]
            cols.append(pos)
        order = sorted(range(len(cols)), key=lambda j: self.positions.index(cols[j]))
        cols = [cols[j] for j in order]
        rows = rows[:, order]
        if len(rows) > 1 and rows.shape[1]:
            perm = np.lexsort(rows.T[::-1])
            rows, factor = rows[perm], factor[perm]
        return replace(self, cols=tuple(cols), rows=np.ascontiguousarray(rows), factor=factor)

    def materialize_all(self) -> "HandBelief":
        return self.materialize(self.positions)

    def expansion_bound(self) -> int:
        """Upper bound on the rows :meth:`materialize_all` would produce."""
        counts = self.counts
        total = self.num_rows
        for s in self.implicit_slots:
            total *= sum(1 for c in _bits(self.masks[s]) if counts[c] > 0)
        return total

    # --- weights, completion and enumeration --------------------------------

    def row_weights(self) -> np.ndarray:
        """Weight of each row's explicit part (implicit completions excluded)."""
        return self.factor * _row_falling(self.rows, self._counts_array())

    def _remaining(self, row) -> list:
        rem = list(self.counts)
        for c in row:
            rem[c] -= 1
        return rem

    def _completions(self, rem, slots, limit=None):
        """Yield implicit assignments (dict slot -> code) in canonical order."""
        masks = self.masks
        out = {}

        def rec(i):
            if i == len(slots):
                yield dict(out)
                return
            s = slots[i]
            m = masks[s]
            c = 0
            while m:
                if m & 1 and rem[c] > 0:
                    rem[c] -= 1
                    out[s] = c
                    yield from rec(i + 1)
                    rem[c] += 1
                m >>= 1
                c += 1

        return rec(0)

    def _completable(self, rem, slots) -> bool:
        for _ in self._completions(list(rem), slots):
            return True
        return False

    def row_completable(self) -> np.ndarray:
        slots = self.implicit_slots
        out = np.ones(self.num_rows, dtype=bool)
        if not slots:
            return out
        for i, row in enumerate(self.rows.tolist()):
            out[i] = self._completable(self._remaining(row), slots)
        return out

    def is_empty(self) -> bool:
        if self.num_rows == 0:
            return True
        w = self.row_weights()
        slots = self.implicit_slots
        for i in np.flatnonzero(w > 0):
            if not slots or self._completable(self._remaining(self.rows[i].tolist()), slots):
                return False
        return True

    def check(self) -> "HandBelief":
        if self.is_empty():
            raise InconsistencyError(f"belief over player {self.owner}'s hand has empty support")
        return self

    def iter_hands(self):
        """Yield (hand, weight) for every supported hand, grouped by row."""
        slots = self.implicit_slots
        col_slots = [self.positions.index(p) for p in self.cols]
        for row, f in zip(self.rows.tolist(), self.factor.tolist()):
            rem = self._remaining(row)
            if min(rem) < 0:
                continue
            for comp in self._completions(rem, slots):
                hand = [0] * self.size
                for s, c in zip(col_slots, row):
                    hand[s] = c
                for s, c in comp.items():
                    hand[s] = c
                w = f * hand_weight(self.counts, hand)
                if w > 0:
                    yield tuple(hand), w

    def support(self, limit: Optional[int] = None):
        """Sorted (hand, weight) list, or None once more than ``limit`` hands exist."""
        out = []
        for item in self.iter_hands():
            out.append(item)
            if limit is not None and len(out) > limit:
                return None
        out.sort()
        return out

    def total_weight(self) -> float:
        return float(sum(w for _, w in self.iter_hands()))

    def projections(self, positions, limit: Optional[int] = None):
        """Distinct supported sub-hands over ``positions`` (sorted), or None past ``limit``."""
        positions = list(positions)
        slots = [self.positions.index(p) for p in positions]
        cols = set(self.cols)
        free = [s for s in slots if self.positions[s] not in cols]
        rest = [s for s in self.implicit_slots if s not in free]
        col_idx = {p: j for j, p in enumerate(self.cols)}
        w = self.row_weights()
        seen = set()
        for i, row in enumerate(self.rows.tolist()):
            if w[i] <= 0:
                continue
            rem = self._remaining(row)
            base = {self.positions.index(p): row[col_idx[p]] for p in self.cols}
            for comp in self._completions(rem, free):
                key = tuple(comp[s] if s in comp else base[s] for s in slots)
                if key in seen:
                    continue
                # rem already has comp's cards taken out while the generator is suspended
                if rest and not self._completable(rem, rest):
                    continue
                seen.add(key)
                if limit is not None and len(seen) > limit:
                    return None
        return sorted(seen)

    def keep_projections(self, positions, allowed) -> "HandBelief":
        """Drop every hand whose sub-hand over ``positions`` is not in ``allowed``."""
        b = self.materialize(positions)
        if not len(positions):
            return b if allowed else b.emptied()
        sub = b.columns(positions)
        allowed = np.asarray(sorted(allowed), dtype=np.int8).reshape(-1, len(positions))
        keep = (sub[:, None, :] == allowed[None, :, :]).all(axis=2).any(axis=1)
        return b.filter_rows(keep)

    # --- sampling ------------------------------------------------------------

    def sample_hands(self, count: int, seed: int, max_rounds: int = 200) -> np.ndarray:
        """Exact draws of ``count`` hands, shape (count, size).

        A row is proposed by its explicit weight, then each implicit slot draws
        a card in proportion to the remaining copies inside its mask.  The
        proposal differs from the target only by the product of the per-slot
        mask masses, so accepting with that product over its upper bound
        yields exact samples.
        """
        out = np.empty((count, self.size), dtype=np.int8)
        if count == 0:
            return out
        w = self.row_weights()
        total = w.sum()
        if not total > 0:
            raise InconsistencyError("cannot sample from an empty belief")
        cdf = np.cumsum(w) / total
        rng = np.random.Generator(np.random.PCG64(seed & ((1 << 64) - 1)))
        col_slots = [self.positions.index(p) for p in self.cols]
        free = self.implicit_slots
        counts = self._counts_array()
        t = len(counts)
        bits = np.array([[(self.masks[s] >> c) & 1 for c in range(t)] for s in free], dtype=np.int64)
        bound = float(np.prod([(counts * b).sum() for b in bits])) if free else 1.0
        if free and bound <= 0:
            raise InconsistencyError("an implicit slot has no card left in its mask")
        filled = 0
        rate = 1.0
        for _ in range(max_rounds):
            need = count - filled
            batch = int(min(max(64, 1.5 * need / max(rate, 1e-3)), 100_000))
            ridx = np.minimum(np.searchsorted(cdf, rng.random(batch), side="right"), len(cdf) - 1)
            rows = self.rows[ridx].astype(np.int64)
            hands = np.empty((batch, self.size), dtype=np.int64)
            if col_slots:
                hands[:, col_slots] = rows
            ok = np.ones(batch, dtype=bool)
            if free:
                ar = np.arange(batch)
                rem = np.tile(counts, (batch, 1))
                for j in range(rows.shape[1]):
                    np.subtract.at(rem, (ar, rows[:, j]), 1)
                ratio = np.ones(batch)
                u = rng.random((batch, len(free)))
                for i, s in enumerate(free):
                    mass = np.maximum(rem, 0) * bits[i]
                    z = mass.sum(axis=1)
                    cum = np.cumsum(mass, axis=1)
                    pick = (cum <= (u[:, i] * z)[:, None]).sum(axis=1)
                    pick = np.minimum(pick, t - 1)
                    ok &= z > 0
                    ratio *= z
                    hands[:, s] = pick
                    rem[ar, pick] -= 1
                ok &= rng.random(batch) * bound < ratio
            got = hands[ok][:need]
            out[filled:filled + len(got)] = got
            filled += len(got)
            rate = max(ok.mean(), 1e-6)
            if filled == count:
                return out
        self.check()
        raise InconsistencyError("rejection sampler made no progress; belief nearly empty")

    # --- serialization -------------------------------------------------------

    def to_dict(self, with_support: bool = False, limit: int = 10_000) -> dict:
        out = {
            "owner": self.owner,
            "positions": list(self.positions),
            "masks": list(self.masks),
            "counts": list(self.counts),
            "cols": list(self.cols),
            "rows": self.rows.tolist(),
            "factor": self.factor.tolist(),
        }
        if with_support:
            sup = self.support(limit)
            if sup is not None:
                total = sum(w for _, w in sup)
                out["support"] = [[list(h), w / total] for h, w in sup]
        return out

    def dumps(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw), sort_keys=True)


def init_hand_belief(config: GameConfig, owner: int, positions, counts=None) -> HandBelief:
    positions = tuple(positions)
    return HandBelief(
        config=config,
        owner=owner,
        positions=positions,
        masks=(config.full_mask,) * len(positions),
        counts=tuple(config.composition) if counts is None else tuple(counts),
    )


@dataclass(frozen=True)
class PublicBelief:
    """Common-knowledge belief: one hand factor per player plus the public log."""

    config: GameConfig
    hands: tuple
    log: tuple = ()

    def hand(self, player: int) -> HandBelief:
        return self.hands[player]

    def with_hand(self, player: int, belief: HandBelief) -> "PublicBelief":
        hands = list(self.hands)
        hands[player] = belief
        return replace(self, hands=tuple(hands))

    def to_dict(self, with_support: bool = False) -> dict:
        return {
            "config": self.config.to_dict(),
            "hands": [h.to_dict(with_support) for h in self.hands],
            "log": [str(e.move) for e in self.log],
        }


@dataclass(frozen=True)
class BeliefRange:
    hands: tuple  # canonical order
    probs: np.ndarray

    @property
    def size(self) -> int:
        return len(self.hands)


@dataclass(frozen=True)
class Overflow:
    lower_bound: int

    @property
    def size(self) -> int:
        return self.lower_bound


@dataclass(frozen=True, eq=False)
class ActionQueueEntry:
    """A searched action whose range-search is still pending.

    ``range_positions`` are the partner's hand positions when the action was
    taken; the range at any later time is the set of those sub-hands still
    supported by the partner's current public factor.
    """

    turn: int
    actor: int
    move: object
    code: int
    belief: HandBelief  # public factor of the actor's own hand at ``turn``
    view: object  # the actor's AgentView at ``turn``
    partner: int
    range_positions: tuple
    seed: int

    def live_positions(self, current: HandBelief) -> tuple:
        return tuple(p for p in self.range_positions if p in current.positions)

    def pending_range(self, current: HandBelief, revealed: dict, limit: Optional[int] = None):
        """Partner hands at ``turn`` still consistent with common knowledge."""
        live = self.live_positions(current)
        subs = current.projections(live, limit)
        if subs is None:
            return None
        idx = {p: j for j, p in enumerate(live)}
        return [
            tuple(sub[idx[p]] if p in idx else revealed[p] for p in self.range_positions) for sub in subs
        ]


# --- belief operations -------------------------------------------------------


def init_public_beliefs(config: GameConfig) -> PublicBelief:
    n, hs = config.num_players, config.hand_size
    hands = tuple(init_hand_belief(config, p, [p + n * s for s in range(hs)]) for p in range(n))
    return PublicBelief(config=config, hands=hands)


def _observe_hand(b: HandBelief, obs: Observation) -> HandBelief:
    cfg = b.config
    e = obs.last
    if e is not None:
        if e.move.is_hint and e.move.target == b.owner:
            if e.move.kind == 2:
                mask = cfg.color_masks[e.move.value]
            else:
                mask = cfg.rank_masks[e.move.value - 1]
            b = b.hint(e.touched, mask)
        elif not e.move.is_hint and e.actor == b.owner:
            b = b.reveal(e.removed_pos, e.revealed)
            if e.drawn_pos >= 0:
                b = b.draw(e.drawn_pos)
    if tuple(obs.slot_ids[b.owner]) != b.positions:
        raise InconsistencyError("belief slots drifted from the observed hand")
    hands = [h for p, h in enumerate(obs.hands) if p != b.owner]
    b = b.with_counts(counts_from(cfg, obs.fireworks, obs.discards, hands))
    return b.check()


def step_observation(b: Union[PublicBelief, HandBelief], obs: Observation):
    """Fold one observation into a belief (hints, reveals, draws, counts)."""
    if isinstance(b, PublicBelief):
        hands = tuple(_observe_hand(h, obs) for h in b.hands)
        log = b.log + ((obs.last,) if obs.last is not None else ())
        return replace(b, hands=hands, log=log)
    return _observe_hand(b, obs)


SOFT_FILTER_LIMIT = 50_000


def _policy_hand(b: HandBelief, view, policy, move, uncertainty: float) -> HandBelief:
    from .blueprints import legal_count_batch, view_with_hand

    cfg = b.config
    code = move if isinstance(move, (int, np.integer)) else cfg.move_code(move, view.player)
    if uncertainty > 0:
        if b.is_explicit:
            codes = policy.batch_codes(view, b.owner, b.rows)
            legal = legal_count_batch(view, b.owner, b.rows)
            like = (1 - uncertainty) * (codes == code) + uncertainty / legal
            return b.scale_rows(like)
        # the softened update needs every hand explicitly; when that is too
        # large the update is skipped, which keeps the belief sound but coarser
        if b.expansion_bound() > SOFT_FILTER_LIMIT:
            return b
        return _policy_hand(b.materialize_all(), view, policy, code, uncertainty)
    if hasattr(policy, "filter_belief"):
        out = policy.filter_belief(b, view, code)
    else:
        full = b.materialize_all()
        codes = policy.batch_codes(view, b.owner, full.rows)
        out = full.filter_rows(codes == code)
    return out


def step_policy(b, view, policy, move, target: Optional[int] = None, uncertainty: float = 0.0):
    """Filter on the action ``view.player`` took, given their ``policy``.

    ``view`` is the actor's view before acting; hypothetical hands of the
    filtered player are substituted into it.  For a :class:`PublicBelief`
    the filtered hand defaults to the only partner in a 2-player game.
    ``uncertainty > 0`` applies the softened likelihood
    ``(1 - u) [a = policy(h)] + u / |legal(h)|`` instead of hard filtering.
    """
    if isinstance(b, PublicBelief):
        if target is None:
            if b.config.num_players != 2:
                raise ValueError("public policy filtering needs an explicit target beyond 2 players")
            target = 1 - view.player
        h = _policy_hand(b.hands[target], view, policy, move, uncertainty)
        if h.is_empty():
            raise InconsistencyError(f"player {view.player} deviated from the assumed policy")
        return b.with_hand(target, h)
    if target is not None and target != b.owner:
        raise ValueError("target must be the belief owner")
    out = _policy_hand(b, view, policy, move, uncertainty)
    if out.is_empty():
        raise InconsistencyError(f"player {view.player} deviated from the assumed policy")
    return out


def condition_on_aoh(pb: Union[PublicBelief, HandBelief], observer: int, private_view) -> HandBelief:
    """Private belief of ``observer`` over their own hand.

    Subtracts every card the observer can see from the public factor's
    counts.  Accepts an :class:`Observation` or an AgentView.
    """
    b = pb.hands[observer] if isinstance(pb, PublicBelief) else pb
    cfg = b.config
    hands = [h for p, h in enumerate(private_view.hands) if p != observer]
    counts = counts_from(cfg, private_view.fireworks, private_view.discards, hands)
    return b.with_counts(counts).check()


def enumerate_range(b: HandBelief, limit: int) -> Union[BeliefRange, Overflow]:
    if limit < 0:
        raise ValueError("limit must be non-negative")
    sup = b.support(limit)
    if sup is None:
        return Overflow(limit + 1)
    total = float(sum(w for _, w in sup))
    return BeliefRange(tuple(h for h, _ in sup), np.asarray([w / total for _, w in sup]))


def sample_determinization(b: HandBelief, view, seed: int):
    """A full GameState consistent with ``view`` with the owner's hand drawn from ``b``."""
    from .core import GameState
    from .rng import SplitMix64

    cfg = b.config
    owner = b.owner
    hand = [int(c) for c in b.sample_hands(1, seed)[0]]
    seen = dict(view.seen) if hasattr(view, "seen") else {}
    for p, cards in enumerate(view.hands):
        if cards is not None:
            seen.update(zip(view.slot_ids[p], cards))
    seen.update(zip(b.positions, hand))
    counts = list(b.counts)
    for c in hand:
        counts[c] -= 1
    deck = [c for c, n in enumerate(counts) for _ in range(n)]
    SplitMix64(seed ^ 0x5DEECE66D).shuffle(deck)
    total = len(seen) + len(deck)
    if total != cfg.deck_size or len(deck) != view.deck_size:
        raise InconsistencyError("view and belief disagree on the number of hidden cards")
    next_draw = cfg.deck_size - len(deck)
    order = [seen[p] for p in range(next_draw)] + deck
    return GameState(
        config=cfg,
        order=tuple(order),
        next_draw=next_draw,
        hands=tuple(tuple(h) for h in view.slot_ids),
        knowledge=tuple(tuple(k) for k in view.knowledge),
        fireworks=tuple(view.fireworks),
        hint_tokens=view.hint_tokens,
        life_tokens=view.life_tokens,
        discards=tuple(view.discards),
        current_player=view.current_player,
        turn=view.turn,
        countdown=view.countdown,
        log=tuple(view.log) if hasattr(view, "log") else (),
    )
