"""Brute-force oracle: exact values, posteriors, the worst-case bound, episode simulation."""

import json
import math
from importlib import resources

import numpy as np
import pytest

from hanabi_search.blueprints import BlueprintPolicy, SimpleBot, make_view
from hanabi_search.core import ConfigError, GameConfig, HintColor, Play, initial_state, score, step
from hanabi_search.oracle import (
    MiniGameSpec,
    OracleError,
    SearchReturnOracle,
    deal_count,
    exact_beliefs,
    exact_value,
    multiset_permutations,
    public_beliefs,
    simulate_search_policy,
    theorem1_bound,
)
from hanabi_search.search import SearchParams, run_blueprint, run_single_agent


def golden() -> dict:
    return json.loads(resources.files("hanabi_search").joinpath("data/golden.json").read_text())


class HintForever(BlueprintPolicy):
    """Never plays: hints the partner's first card's color until the game times out."""

    name = "hint-forever"

    def act(self, view):
        partner = 1 - view.player
        return HintColor(partner, view.hands[partner][0] // view.config.max_rank)


class TestBound:
    def test_worked_example(self):
        assert theorem1_bound(8, 4, 6, 1024) == pytest.approx(12.0)

    def test_quadrupling_rollouts_halves(self):
        assert theorem1_bound(8, 4, 6, 4096) == pytest.approx(theorem1_bound(8, 4, 6, 1024) / 2)

    def test_full_scale_is_vacuous(self):
        assert theorem1_bound(40, 25, 20, 10**4) == pytest.approx(400.0)

    @pytest.mark.parametrize("args", [(8, 4, 6, 0), (0, 4, 6, 10), (8, -1, 6, 10), (8, 4, 0, 10)])
    def test_rejects_non_positive(self, args):
        with pytest.raises(ValueError):
            theorem1_bound(*args)


class TestEnumeration:
    def test_multiset_permutations(self):
        perms = multiset_permutations((2, 1))
        assert perms == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]

    def test_mini_sizes(self):
        spec = MiniGameSpec()
        assert deal_count(spec.config) == 180 == len(spec.deals)
        assert (spec.horizon, spec.delta, spec.num_actions) == (8, 4.0, 6)
        assert spec.node_bound == 80640

    def test_too_large_rejected(self):
        with pytest.raises(ConfigError):
            MiniGameSpec(GameConfig())


class TestExactValue:
    def test_golden_values(self):
        g = golden()["mini"]
        from test_blueprints import mini_table

        assert exact_value(MiniGameSpec(), mini_table()).value == pytest.approx(g["value_table"], abs=1e-12)
        assert exact_value(MiniGameSpec(), SimpleBot()).value == pytest.approx(g["value_simplebot"], abs=1e-12)

    def test_reproducible(self):
        a = exact_value(MiniGameSpec(), SimpleBot())
        b = exact_value(MiniGameSpec(), SimpleBot())
        assert a.value == b.value
        assert a.aoh_values == b.aoh_values

    def test_chance_tree_matches_deal_average(self):
        spec = MiniGameSpec()
        report = exact_value(spec, SimpleBot())
        scores = [run_blueprint_on(spec.config, order) for order in spec.deals]
        assert report.value == pytest.approx(np.mean(scores), abs=1e-12)

    def test_value_identities(self):
        for policy in (SimpleBot(), HintForever()):
            v_err, q_err = exact_value(MiniGameSpec(), policy).identity_errors()
            assert v_err < 1e-12 and q_err < 1e-12

    def test_zero_policy(self):
        report = exact_value(MiniGameSpec(), HintForever())
        assert report.value == 0.0
        assert set(report.aoh_values.values()) == {0.0}

    def test_single_deal(self):
        cfg = GameConfig(colors=1, max_rank=1, rank_multiplicity=(4,), hand_size=1)
        spec = MiniGameSpec(cfg)
        assert len(spec.deals) == 1
        assert exact_value(spec, SimpleBot()).value == run_blueprint(cfg, 0, SimpleBot()).score


def run_blueprint_on(cfg, order):
    s = initial_state(cfg, order)
    bot = SimpleBot()
    while not s.is_terminal:
        s, _ = step(s, bot.act(make_view(s, s.current_player)))
    return score(s)


class TestPosteriors:
    def test_empty_history_is_the_prior(self):
        spec = MiniGameSpec()
        s = initial_state(spec.config, spec.deals[0])
        post = public_beliefs(spec, SimpleBot(), s)
        assert len(post) == 180
        assert set(post.values()) == {1 / 180}

    def test_policy_constant_action_carries_no_information(self):
        spec = MiniGameSpec()
        s, _ = step(initial_state(spec.config, spec.deals[5]), Play(0))
        informed = public_beliefs(spec, Play0(), s)
        uninformed = public_beliefs(spec, Play0(), s, unconstrained=(0,))
        assert informed == uninformed

    def test_private_posterior_is_uniform_over_consistent_deals(self):
        spec = MiniGameSpec()
        s = initial_state(spec.config, spec.deals[7])
        post = exact_beliefs(spec, SimpleBot(), make_view(s, 0))
        # player 0 sees player 1's single card: every deal agreeing on position 1
        assert len(post) == sum(o[1] == spec.deals[7][1] for o in spec.deals)

    def test_unreachable_history(self):
        spec = MiniGameSpec()
        s = initial_state(spec.config, spec.deals[0])
        s, _ = step(s, HintColor(1, spec.deals[0][1] // 2))
        with pytest.raises(OracleError):
            public_beliefs(spec, Play0(), s)


class Play0(BlueprintPolicy):
    name = "play0"

    def act(self, view):
        return Play(0)


class TestEpisodeSimulation:
    def test_exact_q_rows(self):
        oracle = SearchReturnOracle(MiniGameSpec(), SimpleBot())
        legal, bp, mat = oracle.returns((), 0)
        assert mat.shape == (60, len(legal))
        assert str(legal[bp]) == "rank:1:1"

    def test_deterministic(self):
        spec = MiniGameSpec()
        a = simulate_search_policy(spec, SimpleBot(), 4, 20_000, seed=1)
        b = simulate_search_policy(spec, SimpleBot(), 4, 20_000, seed=1)
        assert a == b
        assert sum(a.returns.values()) == 20_000

    def test_huge_threshold_gives_blueprint_value(self):
        spec = MiniGameSpec()
        sim = simulate_search_policy(spec, SimpleBot(), 4, 50_000, seed=2, threshold=math.inf)
        v = golden()["mini"]["value_simplebot"]
        assert abs(sim.mean - v) < 5 * sim.sem

    def test_simulator_matches_real_search(self):
        """The exact replica and the real driver sample the same search policy."""
        spec = MiniGameSpec()
        sim = simulate_search_policy(spec, SimpleBot(), 4, 200_000, seed=3)
        games = 4000
        scores = []
        for g in range(games):
            params = SearchParams(min_rollouts_per_action=4, max_total_rollouts=4 * spec.num_actions,
                                  prune=False, deviation_threshold=0.0, base_seed=g)
            scores.append(run_single_agent(spec.config, g, SimpleBot(), params).score)
        scores = np.asarray(scores, dtype=float)
        sem = scores.std(ddof=1) / math.sqrt(games)
        assert abs(scores.mean() - sim.mean) < 4 * math.hypot(sem, sim.sem)
