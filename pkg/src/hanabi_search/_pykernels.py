"""Pure-Python rollout kernel (reference semantics for the compiled one).

A rollout starts from a packed root state, installs one sampled hand for
the searching player, shuffles the remaining hidden cards into the deck,
forces one move and lets every seat play SimpleBot to the end.  The compiled
kernel in ``_kernels.pyx`` must return bit-identical scores.
"""

import numpy as np

from .rng import GOLDEN, MASK64, fmix64

# layout of the packed integer header
N_PLAYERS, COLORS, MAX_RANK, HAND_SIZE, HINT_MAX, BOMB_ZERO, MAX_TURNS = range(7)
TURN, CURRENT, HINTS, LIVES, COUNTDOWN = range(7, 12)
HEADER_LEN = 12


def _shuffle(deck, seed):
    state = seed & MASK64
    for i in range(len(deck) - 1, 0, -1):
        state = (state + GOLDEN) & MASK64
        j = ((fmix64(state) >> 32) * (i + 1)) >> 32
        deck[i], deck[j] = deck[j], deck[i]


class _Game:
    __slots__ = (
        "n", "colors", "mr", "hs", "hint_max", "bomb_zero", "max_turns", "turn", "cur", "hints",
        "lives", "countdown", "comp", "mult", "fw", "disc", "hands", "know", "deck", "ptr",
        "full", "color_masks", "rank_masks",
    )

    def possible(self):
        mr = self.mr
        out = 0
        for c in range(self.colors * mr):
            left = self.comp[c] - self.disc[c] - (1 if c % mr < self.fw[c // mr] else 0)
            if left > 0:
                out |= 1 << c
        return out

    def playable(self):
        out = 0
        for color in range(self.colors):
            if self.fw[color] < self.mr:
                out |= 1 << (color * self.mr + self.fw[color])
        return out

    def useless(self):
        out = 0
        mr = self.mr
        for color in range(self.colors):
            dead = False
            for r in range(mr):
                code = color * mr + r
                if r < self.fw[color] or dead:
                    out |= 1 << code
                elif self.disc[code] >= self.mult[r]:
                    dead = True
        return out

    def single_rank(self, eff):
        for rm in self.rank_masks:
            if eff & ~rm == 0:
                return True
        return False

    def simple_move(self):
        """Return (kind, a, b): kind 0 play slot a, 1 discard slot a, 2 color hint, 3 rank hint."""
        me = self.cur
        possible = self.possible()
        play = self.playable()
        for s, k in enumerate(self.know[me]):
            eff = k & possible
            if eff and eff & ~play == 0:
                return 0, s, 0
        if self.n > 1 and self.hints > 0:
            tgt = (me + 1) % self.n
            cards = self.hands[tgt]
            for s in range(len(cards) - 1, -1, -1):
                code = cards[s]
                if not (play >> code) & 1:
                    continue
                eff = self.know[tgt][s] & possible
                if eff & ~play == 0:
                    continue
                if self.single_rank(eff):
                    return 2, tgt, code // self.mr
                return 3, tgt, code % self.mr + 1
        if self.hints < self.hint_max:
            useless = self.useless()
            for s, k in enumerate(self.know[me]):
                eff = k & possible
                if eff and eff & ~useless == 0:
                    return 1, s, 0
            return 1, 0, 0
        return 0, 0, 0

    def decode(self, code):
        hs = self.hs
        if code < hs:
            return 0, code, 0
        if code < 2 * hs:
            return 1, code - hs, 0
        rest = code - 2 * hs
        width = self.colors + self.mr
        tgt = (self.cur + 1 + rest // width) % self.n
        value = rest % width
        if value < self.colors:
            return 2, tgt, value
        return 3, tgt, value - self.colors + 1

    def apply(self, kind, a, b):
        me = self.cur
        drew = False
        if kind >= 2:
            if kind == 2:
                mask = self.color_masks[b]
                hits = [c // self.mr == b for c in self.hands[a]]
            else:
                mask = self.rank_masks[b - 1]
                hits = [c % self.mr + 1 == b for c in self.hands[a]]
            self.know[a] = [k & mask if h else k & ~mask for k, h in zip(self.know[a], hits)]
            self.hints -= 1
        else:
            card = self.hands[me].pop(a)
            self.know[me].pop(a)
            color, r = divmod(card, self.mr)
            if kind == 0:
                if self.fw[color] == r:
                    self.fw[color] += 1
                    if r + 1 == self.mr and self.hints < self.hint_max:
                        self.hints += 1
                else:
                    self.lives -= 1
                    self.disc[card] += 1
            else:
                self.hints += 1
                self.disc[card] += 1
            if self.ptr < len(self.deck):
                self.hands[me].append(self.deck[self.ptr])
                self.know[me].append(self.full)
                self.ptr += 1
                drew = True
        if self.countdown >= 0:
            self.countdown -= 1
        elif drew and self.ptr == len(self.deck):
            self.countdown = self.n
        self.turn += 1
        self.cur = (me + 1) % self.n

    def terminal(self):
        if self.lives == 0 or self.countdown == 0:
            return True
        if self.max_turns >= 0 and self.turn >= self.max_turns:
            return True
        return all(f == self.mr for f in self.fw)

    def score(self):
        if self.lives == 0 and self.bomb_zero:
            return 0
        return sum(self.fw)


def simple_rollouts(header, composition, mult, fireworks, discards, hands, hand_len, knowledge,
                    owner, own_hands, pools, seeds, shuffle, forced):
    """Final scores, shape (len(forced), len(seeds)).

    Row ``i`` forces move code ``forced[i]`` first (-1 forces nothing);
    column ``k`` uses sampled hand ``own_hands[k]``, deck ``pools[k]`` and
    shuffle seed ``seeds[k]``.
    """
    header = [int(x) for x in header]
    n = header[N_PLAYERS]
    forced = [int(x) for x in np.atleast_1d(forced)]
    K = len(seeds)
    scores = np.zeros((len(forced), K), dtype=np.int64)
    comp = [int(x) for x in composition]
    mult = [int(x) for x in mult]
    colors, mr = header[COLORS], header[MAX_RANK]
    color_masks = [sum(1 << (c * mr + r) for r in range(mr)) for c in range(colors)]
    rank_masks = [sum(1 << (c * mr + r) for c in range(colors)) for r in range(mr)]
    base_hands = [[int(x) for x in hands[p][: hand_len[p]]] for p in range(n)]
    base_know = [[int(x) for x in knowledge[p][: hand_len[p]]] for p in range(n)]
    for i, code in enumerate(forced):
        for k in range(K):
            g = _Game()
            g.n, g.colors, g.mr, g.hs = n, colors, mr, header[HAND_SIZE]
            g.hint_max, g.bomb_zero, g.max_turns = header[HINT_MAX], header[BOMB_ZERO], header[MAX_TURNS]
            g.turn, g.cur, g.hints, g.lives = header[TURN], header[CURRENT], header[HINTS], header[LIVES]
            g.countdown = header[COUNTDOWN]
            g.comp, g.mult = comp, mult
            g.fw = [int(x) for x in fireworks]
            g.disc = [int(x) for x in discards]
            g.hands = [list(h) for h in base_hands]
            g.hands[owner] = [int(x) for x in own_hands[k]]
            g.know = [list(h) for h in base_know]
            g.deck = [int(x) for x in pools[k]]
            if shuffle:
                _shuffle(g.deck, int(seeds[k]))
            g.ptr = 0
            g.full = (1 << (colors * mr)) - 1
            g.color_masks, g.rank_masks = color_masks, rank_masks
            if code >= 0 and not g.terminal():
                g.apply(*g.decode(code))
            while not g.terminal():
                g.apply(*g.simple_move())
            scores[i, k] = g.score()
    return scores
