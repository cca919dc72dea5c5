"""Rollout throughput of the compiled kernel against the pure-Python fallbacks.

    python3 benchmarks/bench_kernels.py --rollouts 20000 --players 2

Three implementations run the same determinizations from the same root:
the Cython extension, its line-by-line Python port, and the generic engine
loop used for non-SimpleBot blueprints.  Scores must agree exactly.
"""

import argparse
import time

import numpy as np

from hanabi_search import kernels
from hanabi_search.beliefs import condition_on_aoh, init_hand_belief
from hanabi_search.blueprints import SimpleBot, make_view
from hanabi_search.core import GameConfig, new_game
from hanabi_search.rng import mix64_array
from hanabi_search.search import _python_rollouts, _Root


def setup(players: int, game_seed: int, count: int):
    cfg = GameConfig(num_players=players)
    state = new_game(cfg, game_seed)
    view = make_view(state, 0)
    belief = condition_on_aoh(init_hand_belief(cfg, 0, state.hands[0]), 0, view)
    root = _Root(view, belief)
    own = belief.sample_hands(count, game_seed).astype(np.int64)
    pools = root.pools(own)
    seeds = mix64_array((game_seed,), np.arange(count))
    return cfg, root, own, pools, seeds


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rollouts", type=int, default=20_000, help="rollouts for the compiled kernel")
    ap.add_argument("--python-rollouts", type=int, default=1_000, help="rollouts for the Python paths")
    ap.add_argument("--players", type=int, default=2)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    cfg, root, own, pools, seeds = setup(args.players, args.seed, args.rollouts)
    codes = np.array([0], dtype=np.int64)
    bots = [SimpleBot()] * cfg.num_players
    kargs = (root.header, root.composition, root.mult, root.fireworks, root.discards, root.hands,
             root.hand_len, root.knowledge, root.owner)
    m = args.python_rollouts

    rows = []
    if kernels.BACKEND == "cython":
        fast, dt = timed(kernels.simple_rollouts, *kargs, own, pools, seeds, True, codes)
        rows.append(("cython", args.rollouts, dt, fast[0, :m]))
    else:
        print("compiled extension unavailable; timing Python paths only")
    port, dt = timed(kernels.python_rollouts, *kargs, own[:m], pools[:m], seeds[:m], True, codes)
    rows.append(("python kernel", m, dt, port[0]))
    engine, dt = timed(_python_rollouts, root, own[:m], pools[:m], seeds[:m], codes, bots)
    rows.append(("engine loop", m, dt, engine[0]))

    ref = rows[0][3]
    base = rows[0][2] / rows[0][1]
    print(f"{'backend':<14} {'rollouts':>9} {'us/rollout':>11} {'slowdown':>9} {'mean score':>11} agree")
    for name, n, dt, sc in rows:
        per = dt / n
        print(f"{name:<14} {n:>9} {per * 1e6:>11.2f} {per / base:>8.1f}x {sc.mean():>11.4f} {np.array_equal(sc, ref)}")


if __name__ == "__main__":
    main()
