# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SimpleBot rollout kernel; mirrors ``_pykernels.simple_rollouts``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef enum:
    MAXP = 5
    MAXH = 5
    MAXT = 25
    MAXC = 5
    MAXD = 64

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef struct Game:
    int n, colors, mr, hs, hint_max, bomb_zero, max_turns
    int turn, cur, hints, lives, countdown
    int comp[MAXT]
    int mult[MAXC]
    int fw[MAXC]
    int disc[MAXT]
    int hands[MAXP][MAXH]
    int64_t know[MAXP][MAXH]
    int hlen[MAXP]
    int deck[MAXD]
    int dlen, ptr
    int64_t full
    int64_t cmask[MAXC]
    int64_t rmask[MAXC]
    int col[MAXT]
    int rk[MAXT]
    # masks cached between plays and discards
    int64_t possible, play, useless


cdef inline uint64_t fmix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline void shuffle_deck(Game* g, uint64_t seed) noexcept nogil:
    cdef uint64_t state = seed
    cdef int i, j, tmp
    i = g.dlen - 1
    while i > 0:
        state = state + GOLDEN
        j = <int>(((fmix64(state) >> 32) * <uint64_t>(i + 1)) >> 32)
        tmp = g.deck[i]
        g.deck[i] = g.deck[j]
        g.deck[j] = tmp
        i -= 1


cdef inline void refresh_color(Game* g, int color) noexcept nogil:
    cdef int64_t cm = g.cmask[color]
    cdef int64_t possible = 0, play = 0, useless = 0
    cdef int r, code, dead = 0, left
    cdef int top = g.fw[color]
    if top < g.mr:
        play = (<int64_t>1) << (color * g.mr + top)
    for r in range(g.mr):
        code = color * g.mr + r
        left = g.comp[code] - g.disc[code]
        if r < top:
            left -= 1
        if left > 0:
            possible |= (<int64_t>1) << code
        if r < top or dead:
            useless |= (<int64_t>1) << code
        elif g.disc[code] >= g.mult[r]:
            dead = 1
    g.possible = (g.possible & ~cm) | possible
    g.play = (g.play & ~cm) | play
    g.useless = (g.useless & ~cm) | useless


cdef inline void refresh(Game* g) noexcept nogil:
    cdef int color
    g.possible = 0
    g.play = 0
    g.useless = 0
    for color in range(g.colors):
        refresh_color(g, color)


cdef inline int single_rank(Game* g, int64_t eff) noexcept nogil:
    cdef int r
    for r in range(g.mr):
        if eff & ~g.rmask[r] == 0:
            return 1
    return 0


cdef inline void simple_move(Game* g, int* kind, int* a, int* b) noexcept nogil:
    cdef int me = g.cur
    cdef int64_t possible = g.possible
    cdef int64_t play = g.play
    cdef int64_t eff
    cdef int s, tgt, code
    for s in range(g.hlen[me]):
        eff = g.know[me][s] & possible
        if eff != 0 and eff & ~play == 0:
            kind[0] = 0; a[0] = s; b[0] = 0
            return
    if g.n > 1 and g.hints > 0:
        tgt = (me + 1) % g.n
        s = g.hlen[tgt] - 1
        while s >= 0:
            code = g.hands[tgt][s]
            if (play >> code) & 1:
                eff = g.know[tgt][s] & possible
                if eff & ~play != 0:
                    if single_rank(g, eff):
                        kind[0] = 2; a[0] = tgt; b[0] = g.col[code]
                    else:
                        kind[0] = 3; a[0] = tgt; b[0] = g.rk[code] + 1
                    return
            s -= 1
    if g.hints < g.hint_max:
        for s in range(g.hlen[me]):
            eff = g.know[me][s] & possible
            if eff != 0 and eff & ~g.useless == 0:
                kind[0] = 1; a[0] = s; b[0] = 0
                return
        kind[0] = 1; a[0] = 0; b[0] = 0
        return
    kind[0] = 0; a[0] = 0; b[0] = 0


cdef inline void decode(Game* g, int code, int* kind, int* a, int* b) noexcept nogil:
    cdef int rest, width, value
    if code < g.hs:
        kind[0] = 0; a[0] = code; b[0] = 0
        return
    if code < 2 * g.hs:
        kind[0] = 1; a[0] = code - g.hs; b[0] = 0
        return
    rest = code - 2 * g.hs
    width = g.colors + g.mr
    a[0] = (g.cur + 1 + rest // width) % g.n
    value = rest % width
    if value < g.colors:
        kind[0] = 2; b[0] = value
    else:
        kind[0] = 3; b[0] = value - g.colors + 1


cdef inline void apply_move(Game* g, int kind, int a, int b) noexcept nogil:
    cdef int me = g.cur
    cdef int drew = 0
    cdef int s, card, color, r, hit
    cdef int64_t mask
    if kind >= 2:
        if kind == 2:
            mask = g.cmask[b]
        else:
            mask = g.rmask[b - 1]
        for s in range(g.hlen[a]):
            card = g.hands[a][s]
            if kind == 2:
                hit = g.col[card] == b
            else:
                hit = g.rk[card] + 1 == b
            if hit:
                g.know[a][s] = g.know[a][s] & mask
            else:
                g.know[a][s] = g.know[a][s] & ~mask
        g.hints -= 1
    else:
        card = g.hands[me][a]
        for s in range(a, g.hlen[me] - 1):
            g.hands[me][s] = g.hands[me][s + 1]
            g.know[me][s] = g.know[me][s + 1]
        g.hlen[me] -= 1
        color = g.col[card]
        r = g.rk[card]
        if kind == 0:
            if g.fw[color] == r:
                g.fw[color] += 1
                if r + 1 == g.mr and g.hints < g.hint_max:
                    g.hints += 1
            else:
                g.lives -= 1
                g.disc[card] += 1
        else:
            g.hints += 1
            g.disc[card] += 1
        if g.ptr < g.dlen:
            g.hands[me][g.hlen[me]] = g.deck[g.ptr]
            g.know[me][g.hlen[me]] = g.full
            g.hlen[me] += 1
            g.ptr += 1
            drew = 1
        refresh_color(g, color)
    if g.countdown >= 0:
        g.countdown -= 1
    elif drew and g.ptr == g.dlen:
        g.countdown = g.n
    g.turn += 1
    g.cur = (me + 1) % g.n


cdef inline int terminal(Game* g) noexcept nogil:
    cdef int c
    if g.lives == 0 or g.countdown == 0:
        return 1
    if g.max_turns >= 0 and g.turn >= g.max_turns:
        return 1
    for c in range(g.colors):
        if g.fw[c] != g.mr:
            return 0
    return 1


cdef inline int final_score(Game* g) noexcept nogil:
    cdef int c, total = 0
    if g.lives == 0 and g.bomb_zero:
        return 0
    for c in range(g.colors):
        total += g.fw[c]
    return total


def simple_rollouts(header, composition, mult, fireworks, discards, hands, hand_len, knowledge,
                    int owner, own_hands, pools, seeds, bint shuffle, forced):
    cdef int64_t[:] hd = np.ascontiguousarray(header, dtype=np.int64)
    cdef int64_t[:] comp = np.ascontiguousarray(composition, dtype=np.int64)
    cdef int64_t[:] mu = np.ascontiguousarray(mult, dtype=np.int64)
    cdef int64_t[:] fwv = np.ascontiguousarray(fireworks, dtype=np.int64)
    cdef int64_t[:] dv = np.ascontiguousarray(discards, dtype=np.int64)
    cdef int64_t[:, :] hv = np.ascontiguousarray(hands, dtype=np.int64)
    cdef int64_t[:] hl = np.ascontiguousarray(hand_len, dtype=np.int64)
    cdef int64_t[:, :] kv = np.ascontiguousarray(knowledge, dtype=np.int64)
    cdef int64_t[:, :] own = np.ascontiguousarray(own_hands, dtype=np.int64)
    cdef int64_t[:, :] pv = np.ascontiguousarray(pools, dtype=np.int64)
    cdef uint64_t[:] sv = np.ascontiguousarray(seeds, dtype=np.uint64)
    cdef int64_t[:] fv = np.ascontiguousarray(np.atleast_1d(forced), dtype=np.int64)
    cdef Py_ssize_t K = sv.shape[0]
    cdef Py_ssize_t A = fv.shape[0]
    cdef Py_ssize_t D = pv.shape[1]
    cdef int n = <int>hd[0]
    cdef int colors = <int>hd[1]
    cdef int mr = <int>hd[2]
    if n > MAXP or colors > MAXC or mr > MAXC or colors * mr > MAXT or D > MAXD or hv.shape[1] > MAXH:
        raise ValueError("configuration exceeds compiled kernel limits")
    out = np.zeros((A, K), dtype=np.int64)
    cdef int64_t[:, :] ov = out
    cdef Game base
    cdef Game g
    cdef Py_ssize_t k, i
    cdef int p, s, c, r, kind, a, b
    base.n = n; base.colors = colors; base.mr = mr; base.hs = <int>hd[3]
    base.hint_max = <int>hd[4]; base.bomb_zero = <int>hd[5]; base.max_turns = <int>hd[6]
    base.turn = <int>hd[7]; base.cur = <int>hd[8]; base.hints = <int>hd[9]
    base.lives = <int>hd[10]; base.countdown = <int>hd[11]
    for c in range(colors * mr):
        base.comp[c] = <int>comp[c]
        base.disc[c] = <int>dv[c]
        base.col[c] = c // mr
        base.rk[c] = c % mr
    for r in range(mr):
        base.mult[r] = <int>mu[r]
    for c in range(colors):
        base.fw[c] = <int>fwv[c]
    base.full = ((<int64_t>1) << (colors * mr)) - 1
    for c in range(colors):
        base.cmask[c] = 0
        for r in range(mr):
            base.cmask[c] |= (<int64_t>1) << (c * mr + r)
    for r in range(mr):
        base.rmask[r] = 0
        for c in range(colors):
            base.rmask[r] |= (<int64_t>1) << (c * mr + r)
    for p in range(n):
        base.hlen[p] = <int>hl[p]
        for s in range(base.hlen[p]):
            base.hands[p][s] = <int>hv[p, s]
            base.know[p][s] = kv[p, s]
    base.dlen = <int>D
    base.ptr = 0
    refresh(&base)
    with nogil:
        for i in range(A):
            for k in range(K):
                g = base
                for s in range(g.hlen[owner]):
                    g.hands[owner][s] = <int>own[k, s]
                for s in range(D):
                    g.deck[s] = <int>pv[k, s]
                if shuffle:
                    shuffle_deck(&g, sv[k])
                if fv[i] >= 0 and not terminal(&g):
                    decode(&g, <int>fv[i], &kind, &a, &b)
                    apply_move(&g, kind, a, b)
                while not terminal(&g):
                    simple_move(&g, &kind, &a, &b)
                    apply_move(&g, kind, a, b)
                ov[i, k] = final_score(&g)
    return out
