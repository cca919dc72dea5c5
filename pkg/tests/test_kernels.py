"""Rollout kernels: compiled, Python port and engine loop must agree exactly."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hanabi_search import kernels
from hanabi_search.beliefs import condition_on_aoh, init_hand_belief
from hanabi_search.blueprints import SimpleBot, make_view
from hanabi_search.core import GameConfig, legal_moves, mini_config, new_game, step
from hanabi_search.rng import mix64_array
from hanabi_search.search import _python_rollouts, _Root, rollout_scores


def root_after(cfg, seed, picks):
    bot = SimpleBot()
    s = new_game(cfg, seed)
    rng = np.random.default_rng(seed)
    for _ in range(picks):
        if s.is_terminal:
            break
        moves = legal_moves(s)
        # mostly blueprint, sometimes random, to reach varied positions
        m = bot.act(make_view(s, s.current_player)) if rng.random() < 0.7 else moves[rng.integers(len(moves))]
        s, _ = step(s, m)
    return s


def pack(state, count, seed):
    me = state.current_player
    view = make_view(state, me)
    belief = condition_on_aoh(init_hand_belief(state.config, me, state.hands[me]), me, view)
    root = _Root(view, belief)
    own = belief.sample_hands(count, seed).astype(np.int64)
    pools = root.pools(own)
    seeds = mix64_array((seed,), np.arange(count))
    codes = np.array(
        [-1] + sorted({state.config.move_code(m, me) for m in legal_moves(state)}), dtype=np.int64
    )
    return root, own, pools, seeds, codes


def kernel_args(root):
    return (root.header, root.composition, root.mult, root.fireworks, root.discards, root.hands,
            root.hand_len, root.knowledge, root.owner)


configs = [GameConfig(num_players=n) for n in (2, 3, 4, 5)] + [
    mini_config(),
    GameConfig(colors=3, max_rank=3, rank_multiplicity=(2, 2, 1), hand_size=3, life_tokens=1),
    GameConfig(hint_tokens_max=2, bomb_zero_score=False, max_turns=30),
]


@pytest.mark.parametrize("cfg", configs, ids=lambda c: f"{c.num_players}p-{c.colors}c-{c.max_rank}r")
def test_port_matches_engine(cfg):
    bots = [SimpleBot()] * cfg.num_players
    for g in range(3):
        s = root_after(cfg, g, 7 * g)
        if s.is_terminal:
            continue
        root, own, pools, seeds, codes = pack(s, 12, g)
        port = kernels.python_rollouts(*kernel_args(root), own, pools, seeds, True, codes)
        engine = _python_rollouts(root, own, pools, seeds, codes, bots)
        assert np.array_equal(port, engine)


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
@given(seed=st.integers(0, 2**31), picks=st.integers(0, 60), players=st.integers(2, 5))
def test_compiled_matches_port(seed, picks, players):
    cfg = GameConfig(num_players=players)
    s = root_after(cfg, seed, picks)
    if s.is_terminal:
        return
    root, own, pools, seeds, codes = pack(s, 16, seed)
    fast = kernels.simple_rollouts(*kernel_args(root), own, pools, seeds, True, codes)
    port = kernels.python_rollouts(*kernel_args(root), own, pools, seeds, True, codes)
    assert fast.shape == (len(codes), 16)
    assert np.array_equal(fast, port)


def test_rollout_scores_dispatch():
    s = root_after(GameConfig(), 3, 10)
    root, own, pools, seeds, codes = pack(s, 8, 3)
    bots = [SimpleBot(), SimpleBot()]
    a = rollout_scores(root, own, pools, seeds, codes, bots)
    b = rollout_scores(root, own, pools, seeds, codes, bots, force_python=True)
    assert np.array_equal(a, b)


def test_scores_within_range():
    cfg = GameConfig()
    s = root_after(cfg, 1, 4)
    assert not s.is_terminal
    root, own, pools, seeds, codes = pack(s, 200, 1)
    out = rollout_scores(root, own, pools, seeds, codes, [SimpleBot()] * 2)
    assert out.min() >= 0 and out.max() <= cfg.max_score


def test_pure_env_selects_fallback():
    code = "from hanabi_search import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, HANABI_SEARCH_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
