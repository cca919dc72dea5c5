"""Monte Carlo search and the game drivers."""

import math

import pytest

import hanabi_search.search as search_mod
from hanabi_search.beliefs import condition_on_aoh, init_public_beliefs
from hanabi_search.blueprints import HatBot, SimpleBot, TablePolicy, make_view
from hanabi_search.core import (
    ConfigError,
    GameConfig,
    Play,
    StateError,
    initial_state,
    mini_config,
    new_game,
    parse_move,
    step,
)
from hanabi_search.oracle import MiniGameSpec, SearchReturnOracle, hand_marginal, posterior_table
from hanabi_search.search import (
    GameAborted,
    SearchParams,
    export_search_labels,
    mc_search,
    run_blueprint,
    run_independent,
    run_multi_agent_retrospective,
    run_single_agent,
    search_seed,
)

QUICK = SearchParams(min_rollouts_per_action=10, max_total_rollouts=200)


def root_search(cfg, state, params, bot=None):
    me = state.current_player
    view = make_view(state, me)
    priv = condition_on_aoh(init_public_beliefs(cfg), me, view)
    bots = [bot or SimpleBot()] * cfg.num_players
    return mc_search(priv, me, view, bots, params)


def moves_of(rec):
    return [str(m) for m in rec.moves]


class TestMCSearch:
    def test_single_legal_action(self):
        cfg = mini_config(hint_tokens_max=0)
        s = new_game(cfg, 0)
        params = SearchParams(min_rollouts_per_action=7, max_total_rollouts=1000)
        dec = root_search(cfg, s, params)
        assert dec.move == Play(0)
        assert not dec.deviated
        assert dec.rollouts == 7

    def test_infinite_threshold_returns_blueprint(self):
        cfg = GameConfig()
        s = new_game(cfg, 4)
        dec = root_search(cfg, s, SearchParams(deviation_threshold=math.inf))
        assert dec.move == SimpleBot().act(make_view(s, 0))
        assert dec.rollouts == 0 and not dec.deviated

    def test_budget_respected(self):
        cfg = GameConfig()
        for g in range(5):
            dec = root_search(cfg, new_game(cfg, g), QUICK)
            assert dec.rollouts <= QUICK.max_total_rollouts
            assert all(s.n % QUICK.min_rollouts_per_action == 0 for s in dec.stats)

    def test_uniform_allocation(self):
        cfg = GameConfig()
        params = SearchParams(min_rollouts_per_action=10, max_total_rollouts=800, prune=False)
        dec = root_search(cfg, new_game(cfg, 2), params)
        # 800 // 20 actions = 40 per legal action
        assert {s.n for s in dec.stats} == {40}

    def test_same_aoh_same_decision(self):
        cfg = GameConfig()
        s = new_game(cfg, 8)
        a, b = root_search(cfg, s, QUICK), root_search(cfg, s, QUICK)
        assert a == b
        assert a.seed == search_seed(QUICK, make_view(s, 0))

    def test_searcher_must_be_on_turn(self):
        cfg = GameConfig()
        s = new_game(cfg, 0)
        view = make_view(s, 1)
        priv = condition_on_aoh(init_public_beliefs(cfg), 1, view)
        with pytest.raises(StateError):
            mc_search(priv, 1, view, [SimpleBot()] * 2, QUICK)

    def test_deviation_rule(self):
        cfg = GameConfig()
        for g in range(10):
            dec = root_search(cfg, new_game(cfg, g), QUICK)
            by_move = {s.move: s for s in dec.stats}
            gain = by_move[str(dec.move)].mean - by_move[str(dec.blueprint_move)].mean
            if dec.deviated:
                assert gain > QUICK.deviation_threshold
                live = [s for s in dec.stats if not s.pruned]
                assert by_move[str(dec.move)].mean == max(s.mean for s in live)
            else:
                assert dec.move == dec.blueprint_move

    def test_large_exact_gap_found(self):
        """Mini deal 0: exact Q of play:0 beats the blueprint hint by 0.57."""
        spec = MiniGameSpec()
        oracle = SearchReturnOracle(spec, SimpleBot())
        q = oracle.exact_q((), 0)
        assert q["play:0"] == pytest.approx(2.5)
        assert q["rank:1:1"] == pytest.approx(1.9333333333333333)
        s = initial_state(spec.config, spec.deals[0])
        wins = 0
        for base in range(100):
            params = SearchParams(min_rollouts_per_action=400, max_total_rollouts=2400, prune=False,
                                  deviation_threshold=0.0, base_seed=base)
            wins += root_search(spec.config, s, params).move == Play(0)
        assert wins == 100

    def test_estimates_converge_to_exact_q(self):
        spec = MiniGameSpec()
        oracle = SearchReturnOracle(spec, SimpleBot())
        s = initial_state(spec.config, spec.deals[12])
        params = SearchParams(min_rollouts_per_action=20_000, max_total_rollouts=120_000, prune=False)
        dec = root_search(spec.config, s, params)
        exact = oracle.exact_q((), 12)
        for st_ in dec.stats:
            se = st_.sd / math.sqrt(st_.n)
            assert abs(st_.mean - exact[st_.move]) < 5 * se + 1e-9


class TestDrivers:
    def test_infinite_threshold_is_blueprint_play(self):
        cfg = GameConfig()
        params = SearchParams(deviation_threshold=math.inf)
        for g in range(5):
            a = run_single_agent(cfg, g, SimpleBot(), params)
            b = run_blueprint(cfg, g, SimpleBot())
            assert moves_of(a) == moves_of(b)
            assert a.score == b.score

    def test_single_agent_deterministic(self):
        cfg = GameConfig()
        a = run_single_agent(cfg, 11, SimpleBot(), QUICK)
        b = run_single_agent(cfg, 11, SimpleBot(), QUICK)
        assert moves_of(a) == moves_of(b)
        assert [d.to_dict() for d in a.decisions] == [d.to_dict() for d in b.decisions]

    def test_single_agent_three_players(self):
        cfg = GameConfig(num_players=3)
        rec = run_single_agent(cfg, 2, SimpleBot(), QUICK, searcher=1)
        assert rec.searched_turns > 0
        assert all(d.actor == 1 for d in rec.decisions)

    def test_single_agent_with_engine_rollouts(self):
        # HatBot has no compiled kernel; keep the budget tiny
        cfg = GameConfig(num_players=3, colors=3, max_rank=3, rank_multiplicity=(2, 2, 1), hand_size=2)
        params = SearchParams(min_rollouts_per_action=2, max_total_rollouts=60)
        rec = run_single_agent(cfg, 5, HatBot(), params, searcher=2)
        assert rec.searched_turns > 0
        assert rec.rollouts > 0

    def test_zero_range_equals_single_agent(self):
        cfg = GameConfig()
        params = SearchParams(min_rollouts_per_action=10, max_total_rollouts=200, max_range=0)
        for g in range(3):
            multi = run_multi_agent_retrospective(cfg, g, SimpleBot(), params)
            single = run_single_agent(cfg, g, SimpleBot(), params, searcher=0)
            assert moves_of(multi) == moves_of(single)

    def test_multi_agent_needs_two_players(self):
        with pytest.raises(ConfigError):
            run_multi_agent_retrospective(GameConfig(num_players=3), 0, HatBot(), QUICK)

    def test_independent_needs_uncertainty(self):
        with pytest.raises(ConfigError):
            run_independent(GameConfig(), 0, SimpleBot(), QUICK)

    def test_independent_runs(self):
        params = SearchParams(min_rollouts_per_action=10, max_total_rollouts=200, belief_uncertainty=0.05)
        rec = run_independent(GameConfig(), 1, SimpleBot(), params)
        assert rec.searched_turns == rec.turns

    def test_search_deviates_sometimes(self):
        cfg = GameConfig()
        recs = [run_single_agent(cfg, g, SimpleBot(), QUICK) for g in range(20)]
        assert any(d.deviated for r in recs for d in r.decisions)

    def test_aborted_game_carries_moves(self):
        err = GameAborted(3, ["play:0"], "boom")
        assert err.seed == 3 and err.moves == ["play:0"] and "boom" in str(err)


class TestLabels:
    def test_one_record_per_search_turn(self):
        recs = [run_single_agent(GameConfig(), g, SimpleBot(), QUICK) for g in range(3)]
        labels = list(export_search_labels(recs))
        assert len(labels) == sum(r.searched_turns for r in recs)
        for lab in labels:
            if lab["deviated"]:
                assert lab["chosen_action"] == max(lab["q"], key=lab["q"].get)
        again = list(export_search_labels([run_single_agent(GameConfig(), g, SimpleBot(), QUICK) for g in range(3)]))
        assert labels == again


def test_multi_agent_beliefs_match_oracle_under_realized_policy(monkeypatch):
    """Every turn of every mini deal: tracked private beliefs equal exact Bayes.

    Search decisions depend only on the AOH, so the realized joint policy
    is a table; the oracle posterior under that table is the ground truth.
    """
    spec = MiniGameSpec()
    cfg = spec.config
    params = SearchParams(min_rollouts_per_action=4, max_total_rollouts=200, deviation_threshold=0.0,
                          max_range=100)
    table, snaps = {}, []
    deviations = 0
    for d, order in enumerate(spec.deals):
        monkeypatch.setattr(search_mod, "new_game", lambda c, s, order=order: initial_state(c, order))
        rec = run_multi_agent_retrospective(cfg, d, SimpleBot(), params,
                                            on_turn=lambda st_, pb, q: snaps.append((st_, pb, q)))
        deviations += sum(dec.deviated for dec in rec.decisions)
        st_ = initial_state(cfg, order)
        for m in map(parse_move, rec.moves):
            key = make_view(st_, st_.current_player).aoh_key
            assert table.setdefault(key, m) == m
            st_, _ = step(st_, m)
    assert deviations > 0
    private, _ = posterior_table(spec, TablePolicy(table))
    worst, checked = 0.0, 0
    for st_, pb, pending in snaps:
        if pending:
            continue
        for i in range(2):
            view = make_view(st_, i)
            exact = hand_marginal(private[view.aoh_key], st_.hands[i])
            sup = condition_on_aoh(pb, i, view).support()
            total = sum(w for _, w in sup)
            got = {h: w / total for h, w in sup}
            for h in set(exact) | set(got):
                worst = max(worst, abs(exact.get(h, 0.0) - got.get(h, 0.0)))
            checked += 1
    assert checked > 2000
    assert worst < 1e-12
