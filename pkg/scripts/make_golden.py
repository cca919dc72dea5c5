"""Regenerate the golden data files under src/hanabi_search/data.

    python3 scripts/make_golden.py [--skip-baseline]

The mini-game values come from the brute-force oracle; the full-game
baseline is a plain blueprint batch.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from hanabi_search.blueprints import HashPolicy, SimpleBot
from hanabi_search.core import GameConfig
from hanabi_search.oracle import MiniGameSpec, exact_value, record_table
from hanabi_search.search import run_blueprint

DATA = Path(__file__).resolve().parent.parent / "src" / "hanabi_search" / "data"
TABLE_SALT = 11
BASELINE_GAMES = 10_000


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--skip-baseline", action="store_true", help="leave the full-game baseline untouched")
    args = ap.parse_args(argv)

    spec = MiniGameSpec()
    table = record_table(spec, HashPolicy(TABLE_SALT))
    table.save(DATA / "mini_table.jsonl")
    golden_path = DATA / "golden.json"
    golden = json.loads(golden_path.read_text()) if golden_path.exists() else {}
    golden["mini"] = {
        "config": spec.config.to_dict(),
        "table_salt": TABLE_SALT,
        "table_entries": len(table.table),
        "value_table": exact_value(spec, table).value,
        "value_simplebot": exact_value(spec, SimpleBot()).value,
    }
    if not args.skip_baseline:
        cfg = GameConfig()
        bot = SimpleBot()
        scores = np.array([run_blueprint(cfg, s, bot).score for s in range(BASELINE_GAMES)])
        golden["simplebot_2p"] = {
            "games": BASELINE_GAMES,
            "first_seed": 0,
            "score_sum": int(scores.sum()),
            "mean": float(scores.mean()),
        }
    golden_path.write_text(json.dumps(golden, indent=2, sort_keys=True) + "\n")
    print(json.dumps(golden, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
