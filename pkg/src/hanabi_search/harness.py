"""Batch runner and command-line interface.

Games are independent, so a batch is a map over seeds.  Worker processes
return finished records and the parent writes them in seed order, which
keeps the CSV byte-identical for any ``--threads``.

Example::

    hanabi-search --mode single --games 100 --max-rollouts 2000 --out runs/single.csv
    hanabi-search --mode multi --sweep max_range=0,80,400 --games 50 --out runs/mr.csv
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .blueprints import get_blueprint
from .core import ConfigError, GameConfig, mini_config
from .search import (
    GameAborted,
    GameRecord,
    SearchParams,
    export_search_labels,
    run_blueprint,
    run_independent,
    run_multi_agent_retrospective,
    run_single_agent,
    write_jsonl,
)

log = logging.getLogger(__name__)

MODES = ("none", "single", "multi", "independent")
SWEEPABLE = ("max_range", "rollouts", "deviation_threshold", "belief_uncertainty")
CSV_FIELDS = ("seed", "score", "perfect", "turns", "rollouts", "searched_turns", "search_fraction")
SWEEP_FIELDS = ("parameter", "value", "games", "search_pct", "rollouts", "mean", "sem", "perfect_pct")


class ExperimentAborted(RuntimeError):
    def __init__(self, seed: int, reason: str):
        super().__init__(f"game seed={seed} aborted: {reason}")
        self.seed = seed
        self.reason = reason


@dataclass
class ExperimentConfig:
    players: int = 2
    blueprint: str = "simple"  # one name, or one per seat separated by commas
    mode: str = "single"
    params: SearchParams = field(default_factory=SearchParams)
    num_games: int = 100
    seed: int = 0
    threads: int = 1
    searcher: int = 0
    game: Optional[GameConfig] = None  # overrides ``players`` when given
    out: Optional[str] = None
    decisions_out: Optional[str] = None
    labels_out: Optional[str] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.game is None:
            self.game = GameConfig(num_players=self.players)
        self.players = self.game.num_players
        if self.mode == "multi" and self.players != 2:
            raise ConfigError("multi-agent search needs exactly 2 players")
        if self.num_games < 1:
            raise ConfigError("num_games must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.mode != "none":
            self.params.check_budget(self.game)

    @property
    def seeds(self) -> list:
        return list(range(self.seed, self.seed + self.num_games))

    def policies(self) -> list:
        names = self.blueprint.split(",")
        if len(names) == 1:
            names = names * self.players
        if len(names) != self.players:
            raise ConfigError("give one blueprint or one per seat")
        out = [get_blueprint(n.strip()) for n in names]
        for p in out:
            p.check_players(self.game)
        return out

    def to_dict(self) -> dict:
        return {
            "players": self.players,
            "blueprint": self.blueprint,
            "mode": self.mode,
            "params": self.params.to_dict(),
            "num_games": self.num_games,
            "seed": self.seed,
            "threads": self.threads,
            "searcher": self.searcher,
            "game": self.game.to_dict(),
        }


@dataclass(frozen=True)
class ResultRow:
    seed: int
    score: int
    perfect: bool
    turns: int
    rollouts: int
    searched_turns: int
    search_fraction: float
    wall_time: float  # reported in the summary only, so CSVs stay reproducible

    @classmethod
    def from_record(cls, rec: GameRecord, max_score: int) -> "ResultRow":
        return cls(rec.seed, rec.score, rec.score == max_score, rec.turns, rec.rollouts,
                   rec.searched_turns, rec.search_fraction, rec.wall_time)

    def csv_values(self) -> list:
        return [self.seed, self.score, int(self.perfect), self.turns, self.rollouts,
                self.searched_turns, f"{self.search_fraction:.6f}"]


@dataclass(frozen=True)
class Summary:
    games: int
    mean: float
    sem: float
    perfect_pct: float
    total_rollouts: int
    search_pct: float  # searched turns over all turns, in percent
    wall_time: float

    @classmethod
    def from_rows(cls, rows) -> "Summary":
        rows = list(rows)
        if not rows:
            raise ValueError("no rows to summarize")
        scores = np.array([r.score for r in rows], dtype=np.float64)
        sd = scores.std(ddof=1) if len(rows) > 1 else 0.0
        turns = sum(r.turns for r in rows)
        return cls(
            games=len(rows),
            mean=float(scores.mean()),
            sem=float(sd / math.sqrt(len(rows))),
            perfect_pct=100.0 * float(np.mean([r.perfect for r in rows])),
            total_rollouts=int(sum(r.rollouts for r in rows)),
            search_pct=100.0 * sum(r.searched_turns for r in rows) / turns if turns else 0.0,
            wall_time=float(sum(r.wall_time for r in rows)),
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    summary: Summary
    records: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "summary": self.summary.to_dict()}


def play_game(cfg: ExperimentConfig, seed: int, policies=None) -> GameRecord:
    """Play one game of ``cfg`` with the given seed."""
    policies = policies or cfg.policies()
    game, params = cfg.game, cfg.params
    if cfg.mode == "none":
        return run_blueprint(game, seed, policies)
    if cfg.mode == "single":
        return run_single_agent(game, seed, policies, params, searcher=cfg.searcher)
    if cfg.mode == "multi":
        return run_multi_agent_retrospective(game, seed, policies, params)
    return run_independent(game, seed, policies, params)


def _play_chunk(cfg: ExperimentConfig, seeds: list) -> list:
    policies = cfg.policies()
    out = []
    for s in seeds:
        try:
            out.append(play_game(cfg, s, policies))
        except GameAborted as exc:
            return out + [exc]
    return out


def _chunks(seeds: list, threads: int) -> list:
    size = max(1, math.ceil(len(seeds) / (threads * 4)))
    return [seeds[i:i + size] for i in range(0, len(seeds), size)]


def iter_records(cfg: ExperimentConfig):
    """Yield game records in seed order; raise ExperimentAborted on the first aborted game."""
    seeds = cfg.seeds
    if cfg.threads == 1:
        results = (_play_chunk(cfg, [s]) for s in seeds)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=cfg.threads)
        chunks = _chunks(seeds, cfg.threads)
        results = pool.map(_play_chunk, [cfg] * len(chunks), chunks)
    try:
        for chunk in results:
            for rec in chunk:
                if isinstance(rec, GameAborted):
                    raise ExperimentAborted(rec.seed, rec.reason)
                yield rec
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)


def run_experiment(cfg: ExperimentConfig, keep_records: bool = False) -> ExperimentResult:
    """Play every seed of ``cfg``; write the CSV and optional JSONL outputs as games finish."""
    max_score = cfg.game.max_score
    rows, records = [], []
    writer = _RowWriter(cfg.out)
    decisions = open(cfg.decisions_out, "w") if cfg.decisions_out else None
    labels = []
    try:
        for rec in iter_records(cfg):
            row = ResultRow.from_record(rec, max_score)
            rows.append(row)
            writer.write(row)
            if decisions is not None:
                for entry in rec.turn_log:
                    decisions.write(json.dumps(entry, sort_keys=True) + "\n")
            if cfg.labels_out:
                labels.extend(export_search_labels([rec]))
            if keep_records:
                records.append(rec)
            log.debug("seed %d score %d", rec.seed, rec.score)
    finally:
        writer.close()
        if decisions is not None:
            decisions.close()
    if cfg.labels_out:
        write_jsonl(cfg.labels_out, labels)
    return ExperimentResult(cfg, rows, Summary.from_rows(rows), records)


class _RowWriter:
    def __init__(self, path):
        self.fh = None
        if path:
            _ensure_parent(path)
            self.fh = open(path, "w", newline="")
            self.csv = csv.writer(self.fh, lineterminator="\n")
            self.csv.writerow(CSV_FIELDS)

    def write(self, row: ResultRow) -> None:
        if self.fh is not None:
            self.csv.writerow(row.csv_values())
            self.fh.flush()

    def close(self) -> None:
        if self.fh is not None:
            self.fh.close()


def _ensure_parent(path) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def rows_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


def read_rows(path) -> list:
    """Rows back from a results CSV (wall time is not stored and reads as 0)."""
    with open(path, newline="") as fh:
        return [
            ResultRow(int(r["seed"]), int(r["score"]), r["perfect"] == "1", int(r["turns"]),
                      int(r["rollouts"]), int(r["searched_turns"]), float(r["search_fraction"]), 0.0)
            for r in csv.DictReader(fh)
        ]


def with_parameter(cfg: ExperimentConfig, parameter: str, value) -> ExperimentConfig:
    """Copy of ``cfg`` with one search parameter changed.

    ``rollouts`` sets the per-turn budget and keeps the ratio of the minimum
    per action to it, so a sweep scales both together.
    """
    if parameter not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {parameter!r}; choose from {SWEEPABLE}")
    p = cfg.params
    if parameter == "rollouts":
        total = int(value)
        ratio = p.min_rollouts_per_action / p.max_total_rollouts if p.max_total_rollouts else 0.0
        params = replace(p, max_total_rollouts=total, min_rollouts_per_action=max(1, int(total * ratio)))
    elif parameter == "max_range":
        params = replace(p, max_range=int(value))
    else:
        params = replace(p, **{parameter: float(value)})
    out = replace(cfg, params=params, out=None, decisions_out=None, labels_out=None)
    return out


def sweep(cfg: ExperimentConfig, parameter: str, values) -> list:
    """One summary per value; returns ``[(value, ExperimentResult), ...]``."""
    results = []
    for v in values:
        res = run_experiment(with_parameter(cfg, parameter, v))
        log.info("%s=%s mean %.3f search %.1f%%", parameter, v, res.summary.mean, res.summary.search_pct)
        results.append((v, res))
    return results


def sweep_csv(parameter: str, results) -> str:
    """Table-3-shaped CSV: % search, total rollouts and average score per value."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    for v, res in results:
        s = res.summary
        w.writerow([parameter, v, s.games, f"{s.search_pct:.2f}", s.total_rollouts,
                    f"{s.mean:.4f}", f"{s.sem:.4f}", f"{s.perfect_pct:.2f}"])
    return buf.getvalue()


@dataclass(frozen=True)
class PairedComparison:
    games: int
    mean_diff: float
    sem: float
    ci95: tuple
    diffs: tuple

    def to_dict(self) -> dict:
        return {"games": self.games, "mean_diff": self.mean_diff, "sem": self.sem, "ci95": list(self.ci95)}


def paired_comparison(rows_a, rows_b) -> PairedComparison:
    """Per-seed score differences ``a - b``; both arms must cover the same seeds."""
    a = {r.seed: r.score for r in rows_a}
    b = {r.seed: r.score for r in rows_b}
    if sorted(a) != sorted(b):
        raise ValueError("paired comparison needs identical seed lists")
    d = np.array([a[s] - b[s] for s in sorted(a)], dtype=np.float64)
    sem = float(d.std(ddof=1) / math.sqrt(len(d))) if len(d) > 1 else 0.0
    m = float(d.mean())
    return PairedComparison(len(d), m, sem, (m - 1.96 * sem, m + 1.96 * sem), tuple(d.tolist()))


# --- command line ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hanabi-search", description="Run seeded Hanabi search experiments.")
    ap.add_argument("--players", type=int, default=2)
    ap.add_argument("--blueprint", default="simple", help="simple, hat or table:PATH (comma list per seat)")
    ap.add_argument("--mode", choices=MODES, default="single")
    ap.add_argument("--max-range", type=int, default=10_000)
    ap.add_argument("--min-rollouts", type=int, default=100, help="rollouts per action before pruning")
    ap.add_argument("--max-rollouts", type=int, default=10_000, help="rollout budget per searched turn")
    ap.add_argument("--deviation-threshold", type=float, default=0.05)
    ap.add_argument("--belief-uncertainty", type=float, default=0.0)
    ap.add_argument("--ucb-sigma", type=float, default=2.0)
    ap.add_argument("--no-prune", action="store_true", help="uniform allocation instead of UCB pruning")
    ap.add_argument("--search-seed", type=int, default=0, help="base seed of the rollout streams")
    ap.add_argument("--mini", action="store_true", help="play the 2-color, 2-rank miniature game")
    ap.add_argument("--games", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0, help="first game seed")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", help="per-game CSV (or sweep table with --sweep)")
    ap.add_argument("--summary-out", help="JSON summary")
    ap.add_argument("--decisions-out", help="per-turn JSONL log")
    ap.add_argument("--labels-out", help="search labels JSONL for imitation learning")
    ap.add_argument("--compare", choices=MODES, help="also run this mode on the same seeds and report the paired difference")
    ap.add_argument("--sweep", metavar="PARAM=V1,V2,...", help=f"sweep one of {', '.join(SWEEPABLE)}")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args) -> ExperimentConfig:
    params = SearchParams(
        min_rollouts_per_action=args.min_rollouts,
        ucb_sigma=args.ucb_sigma,
        deviation_threshold=args.deviation_threshold,
        max_total_rollouts=args.max_rollouts,
        max_range=args.max_range,
        belief_uncertainty=args.belief_uncertainty,
        base_seed=args.search_seed,
        prune=not args.no_prune,
    )
    game = mini_config(num_players=args.players) if args.mini else GameConfig(num_players=args.players)
    return ExperimentConfig(
        players=args.players,
        blueprint=args.blueprint,
        mode=args.mode,
        params=params,
        num_games=args.games,
        seed=args.seed,
        threads=args.threads,
        game=game,
        out=None if args.sweep else args.out,
        decisions_out=args.decisions_out,
        labels_out=args.labels_out,
    )


def _parse_sweep(text: str):
    name, _, values = text.partition("=")
    if not values:
        raise ConfigError("--sweep expects PARAM=V1,V2,...")
    return name.strip(), [v.strip() for v in values.split(",") if v.strip()]


def _summary_line(label: str, s: Summary) -> str:
    return (f"{label}: games={s.games} mean={s.mean:.3f} +- {s.sem:.3f} perfect={s.perfect_pct:.1f}% "
            f"search={s.search_pct:.1f}% rollouts={s.total_rollouts} time={s.wall_time:.1f}s")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
        if args.sweep:
            name, values = _parse_sweep(args.sweep)
            results = sweep(cfg, name, values)
            table = sweep_csv(name, results)
            if args.out:
                _ensure_parent(args.out)
                with open(args.out, "w") as fh:
                    fh.write(table)
            sys.stdout.write(table)
            summary = {"sweep": name, "results": [{"value": v, **r.to_dict()} for v, r in results]}
        else:
            started = time.perf_counter()
            res = run_experiment(cfg)
            print(_summary_line(cfg.mode, res.summary))
            summary = res.to_dict()
            if args.compare:
                other = run_experiment(replace(cfg, mode=args.compare, out=None, decisions_out=None, labels_out=None))
                print(_summary_line(args.compare, other.summary))
                cmp = paired_comparison(res.rows, other.rows)
                print(f"paired {cfg.mode} - {args.compare}: {cmp.mean_diff:+.3f} +- {cmp.sem:.3f} "
                      f"(95% CI {cmp.ci95[0]:+.3f} .. {cmp.ci95[1]:+.3f})")
                summary["compare"] = {"mode": args.compare, "summary": other.summary.to_dict(), "paired": cmp.to_dict()}
            log.info("elapsed %.1fs", time.perf_counter() - started)
        if args.summary_out:
            _ensure_parent(args.summary_out)
            with open(args.summary_out, "w") as fh:
                json.dump(summary, fh, indent=2, sort_keys=True)
                fh.write("\n")
    except ExperimentAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
