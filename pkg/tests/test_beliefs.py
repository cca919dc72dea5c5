"""Exact belief tracking: priors, updates, policy filtering, ranges, sampling."""

import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hanabi_search import beliefs as beliefs_mod
from hanabi_search.beliefs import (
    BeliefRange,
    InconsistencyError,
    Overflow,
    condition_on_aoh,
    counts_from,
    enumerate_range,
    init_hand_belief,
    init_public_beliefs,
    sample_determinization,
    step_observation,
    step_policy,
)
from hanabi_search.blueprints import BlueprintPolicy, SimpleBot, legal_count_batch, make_view
from hanabi_search.core import (
    GameConfig,
    HintColor,
    HintRank,
    Play,
    common_observation,
    initial_state,
    legal_moves,
    mini_config,
    new_game,
    step,
)
from hanabi_search.oracle import MiniGameSpec, compare_beliefs, exact_beliefs

from conftest import card, make_order


def support_dict(b):
    sup = b.support()
    total = sum(w for _, w in sup)
    return {h: w / total for h, w in sup}


def ordered_draws(composition, k) -> int:
    """Ordered k-card draws from a multiset: k! [x^k] prod_t sum_{j<=m_t} x^j / j!."""
    poly = [Fraction(1)]
    for m in composition:
        term = [Fraction(1, math.factorial(j)) for j in range(m + 1)]
        out = [Fraction(0)] * (len(poly) + m)
        for i, a in enumerate(poly):
            for j, b in enumerate(term):
                out[i + j] += a * b
        poly = out[: k + 1]
    return int(poly[k] * math.factorial(k))


class PlayIfPartnerHolds(BlueprintPolicy):
    """Plays slot 0 when the partner's first card is ``code``, else hints color 0."""

    name = "probe"

    def __init__(self, code):
        self.code = code

    def act(self, view):
        partner = 1 - view.player
        if view.hands[partner][0] == self.code:
            return Play(0)
        return HintColor(partner, 0)


class AlwaysPlay(BlueprintPolicy):
    name = "always-play"

    def act(self, view):
        return Play(0)


class TestPrior:
    def test_mini_prior_weights(self):
        cfg = mini_config()
        sup = init_public_beliefs(cfg).hands[0].support()
        assert sup == [((0,), 2), ((1,), 1), ((2,), 2), ((3,), 1)]

    def test_default_support_size_matches_enumeration(self):
        cfg = GameConfig()
        b = init_hand_belief(cfg, 0, range(0, 10, 2)).materialize_all()
        assert b.num_rows == ordered_draws(cfg.composition, 5)
        # spot value from the generating function, pinned
        assert b.num_rows == 8964050

    def test_ordered_draws_small_case(self):
        # types {a, a, b}: aa, ab, ba
        assert ordered_draws((2, 1), 2) == 3

    def test_canonical_ordering_is_deterministic(self):
        a = init_public_beliefs(mini_config())
        b = init_public_beliefs(mini_config())
        assert a.hands[1].support() == b.hands[1].support()
        assert a.to_dict(True) == b.to_dict(True)


class TestObservationUpdates:
    def test_mini_posterior_after_public_discard(self):
        cfg = mini_config()
        b = init_hand_belief(cfg, 0, [0]).with_counts(counts_from(cfg, (0, 0), (0,)))
        assert b.support() == [((0,), 1), ((1,), 1), ((2,), 2), ((3,), 1)]

    def test_rank_hint_masks(self):
        cfg = GameConfig()
        b = init_hand_belief(cfg, 1, range(1, 10, 2)).hint({0}, cfg.rank_masks[0])
        assert b.masks[0] == cfg.rank_masks[0]
        for m in b.masks[1:]:
            assert m == cfg.full_mask & ~cfg.rank_masks[0]

    def test_hint_through_the_engine(self):
        cfg = GameConfig()
        s = new_game(cfg, 5)
        pb = init_public_beliefs(cfg)
        rank = s.hand_cards(1)[0] % cfg.max_rank + 1
        s, _ = step(s, HintRank(1, rank))
        pb = step_observation(pb, common_observation(s))
        touched = s.log[-1].touched
        rmask = cfg.rank_masks[rank - 1]
        for slot, m in enumerate(pb.hands[1].masks):
            assert m == (rmask if slot in touched else cfg.full_mask & ~rmask)
        assert pb.hands[0].masks == (cfg.full_mask,) * 5

    def test_count_exhaustion(self):
        cfg = GameConfig()
        red3, red4 = card(cfg, 0, 3), card(cfg, 0, 4)
        mask = (1 << red3) | (1 << red4)
        b = init_hand_belief(cfg, 0, [0, 2]).restrict([mask, mask])
        before = {h for h, _ in b.support()}
        assert any(red3 in h for h in before)
        b = b.with_counts(counts_from(cfg, (0,) * 5, (red3, red3)))
        after = b.support()
        assert after and all(red3 not in h for h, _ in after)

    def test_commuting_reveals(self):
        cfg = GameConfig(colors=3, max_rank=3, rank_multiplicity=(2, 2, 1), hand_size=3)
        b = init_hand_belief(cfg, 0, [0, 2, 4]).materialize([0, 4])
        a = b.reveal(0, 1).reveal(4, 3)
        c = b.reveal(4, 3).reveal(0, 1)
        assert a.support() == c.support()

    def test_reveal_outside_mask_empties(self):
        cfg = mini_config()
        b = init_hand_belief(cfg, 0, [0]).restrict([1 << 2])
        assert b.reveal(0, 1).is_empty()


class TestPolicyFiltering:
    def test_constant_policy_is_a_no_op(self):
        cfg = mini_config()
        s = new_game(cfg, 3)
        b = init_hand_belief(cfg, 1, s.hands[1])
        out = step_policy(b, make_view(s, 0), AlwaysPlay(), Play(0))
        assert out.support() == b.support()

    def test_forced_filtering(self):
        cfg = mini_config()
        # two equally likely hands for player 1: types 1 and 3
        s = initial_state(cfg, make_order(cfg, [0, 1]))
        b = init_hand_belief(cfg, 1, s.hands[1]).restrict([(1 << 1) | (1 << 3)])
        assert support_dict(b) == {(1,): 0.5, (3,): 0.5}
        out = step_policy(b, make_view(s, 0), PlayIfPartnerHolds(1), Play(0))
        assert support_dict(out) == {(1,): 1.0}

    def test_deviation_raises(self):
        cfg = mini_config()
        s = initial_state(cfg, make_order(cfg, [0, 1]))
        b = init_hand_belief(cfg, 1, s.hands[1]).restrict([1 << 3])
        with pytest.raises(InconsistencyError):
            step_policy(b, make_view(s, 0), PlayIfPartnerHolds(1), Play(0))

    def test_soft_update_weights(self):
        cfg = mini_config()
        s = initial_state(cfg, make_order(cfg, [0, 1]))
        view = make_view(s, 0)
        u = 0.2
        b = init_hand_belief(cfg, 1, s.hands[1]).restrict([(1 << 1) | (1 << 3)])
        out = step_policy(b, view, PlayIfPartnerHolds(1), Play(0), uncertainty=u)
        post = support_dict(out)
        n1 = legal_count_batch(view, 1, np.array([[1]]))[0]
        n3 = legal_count_batch(view, 1, np.array([[3]]))[0]
        like1, like3 = (1 - u) + u / n1, u / n3
        assert post[(1,)] == pytest.approx(like1 / (like1 + like3), abs=1e-12)
        assert post[(3,)] == pytest.approx(like3 / (like1 + like3), abs=1e-12)

    def test_soft_update_skipped_past_the_expansion_limit(self, monkeypatch):
        cfg = GameConfig()
        s = new_game(cfg, 0)
        b = init_hand_belief(cfg, 1, s.hands[1])
        monkeypatch.setattr(beliefs_mod, "SOFT_FILTER_LIMIT", 10)
        out = step_policy(b, make_view(s, 0), SimpleBot(), SimpleBot().act(make_view(s, 0)), uncertainty=0.1)
        assert out == b


class TestPrivateBeliefs:
    def test_partner_holding_every_copy(self):
        cfg = GameConfig()
        b2 = card(cfg, 3, 2)
        s = initial_state(cfg, make_order(cfg, [card(cfg, 0, 1), b2, card(cfg, 0, 1), b2]))
        priv = condition_on_aoh(init_public_beliefs(cfg), 0, make_view(s, 0))
        assert priv.counts[b2] == 0
        assert not (priv.materialize([0]).rows == b2).any()

    def test_no_other_players_private_equals_public(self):
        cfg = GameConfig(num_players=1)
        s = new_game(cfg, 0)
        pb = init_public_beliefs(cfg)
        assert condition_on_aoh(pb, 0, make_view(s, 0)) == pb.hands[0]

    @pytest.mark.parametrize("policy", ["simple", "table"])
    def test_tracker_matches_oracle_everywhere(self, policy):
        from test_blueprints import mini_table

        bot = SimpleBot() if policy == "simple" else mini_table()
        worst, n = compare_beliefs(MiniGameSpec(), bot)
        assert n > 1000
        assert worst < 1e-12


def small_game(seed, picks, players=2):
    cfg = GameConfig(num_players=players, colors=3, max_rank=3, rank_multiplicity=(2, 2, 1), hand_size=3)
    bot = SimpleBot()
    s = new_game(cfg, seed)
    pb = init_public_beliefs(cfg)
    for _ in range(picks):
        if s.is_terminal:
            break
        view = make_view(s, s.current_player)
        move = bot.act(view)
        s, _ = step(s, move)
        pb = step_observation(pb, common_observation(s))
        pb = step_policy(pb, view, bot, move)
    return s, pb


@given(seed=st.integers(0, 2**32), picks=st.integers(0, 25))
def test_private_support_within_public(seed, picks):
    s, pb = small_game(seed, picks)
    for i in range(2):
        pub = {h for h, _ in pb.hands[i].support()}
        priv = {h for h, _ in condition_on_aoh(pb, i, make_view(s, i)).support()}
        assert priv <= pub
        assert tuple(s.hand_cards(i)) in priv


@given(seed=st.integers(0, 2**32), picks=st.integers(0, 25))
def test_range_probabilities_normalized(seed, picks):
    s, pb = small_game(seed, picks)
    r = enumerate_range(condition_on_aoh(pb, 0, make_view(s, 0)), 10_000)
    assert isinstance(r, BeliefRange)
    assert r.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert list(r.hands) == sorted(r.hands)


@given(seed=st.integers(0, 2**32), picks=st.integers(0, 25), keep=st.integers(1, 7))
def test_projections_match_support(seed, picks, keep):
    s, pb = small_game(seed, picks)
    for b in pb.hands:
        positions = [p for j, p in enumerate(b.positions) if keep >> j & 1] or list(b.positions[:1])
        idx = [b.positions.index(p) for p in positions]
        brute = sorted({tuple(h[i] for i in idx) for h, _ in b.support()})
        assert b.projections(positions) == brute


class TestRanges:
    def test_shared_card_projection(self):
        # slots 0 and 2 (positions 0 and 4) pinned to the same two-copy card
        cfg = GameConfig(colors=3, max_rank=3, rank_multiplicity=(2, 2, 1), hand_size=3)
        b = init_hand_belief(cfg, 0, [0, 2, 4]).hint([0, 2], 1 << card(cfg, 1, 1))
        assert b.projections([0]) == [(card(cfg, 1, 1),)]
        assert b.projections([0, 4]) == [(card(cfg, 1, 1), card(cfg, 1, 1))]

    def test_mini_range(self):
        r = enumerate_range(init_public_beliefs(mini_config()).hands[0], 100)
        assert r.size == 4
        assert r.probs.tolist() == pytest.approx([2 / 6, 1 / 6, 2 / 6, 1 / 6])

    def test_default_opening_overflows(self):
        cfg = GameConfig()
        s = new_game(cfg, 0)
        priv = condition_on_aoh(init_public_beliefs(cfg), 0, make_view(s, 0))
        assert isinstance(enumerate_range(priv, 10_000), Overflow)

    def test_limit_zero(self):
        assert isinstance(enumerate_range(init_public_beliefs(mini_config()).hands[0], 0), Overflow)


class TestSampling:
    def test_point_mass(self):
        cfg = mini_config()
        s = initial_state(cfg, make_order(cfg, [0, 1]))
        view = make_view(s, 0)
        b = condition_on_aoh(init_hand_belief(cfg, 0, s.hands[0]), 0, view).restrict([1 << 2])
        for seed in range(50):
            st_ = sample_determinization(b, view, seed)
            assert list(st_.hand_cards(0)) == [2]
            assert list(st_.hand_cards(1)) == list(s.hand_cards(1))

    def test_frequency(self):
        cfg = GameConfig(colors=1, max_rank=2, rank_multiplicity=(3, 1), hand_size=1)
        b = init_hand_belief(cfg, 0, [0])
        hands = b.sample_hands(100_000, 1)
        p = (hands[:, 0] == 0).mean()
        assert abs(p - 0.75) < 3 * math.sqrt(0.75 * 0.25 / 100_000)

    def test_reconstructed_states_match_oracle(self):
        """Chi-square of sampled full deals against the oracle posterior."""
        spec = MiniGameSpec()
        cfg = spec.config
        bot = SimpleBot()
        s = initial_state(cfg, spec.deals[17])
        pb = init_public_beliefs(cfg)
        for _ in range(2):
            view = make_view(s, s.current_player)
            move = bot.act(view)
            s, _ = step(s, move)
            pb = step_observation(pb, common_observation(s))
            pb = step_policy(pb, view, bot, move)
        view = make_view(s, 0)
        exact = exact_beliefs(spec, bot, view)
        priv = condition_on_aoh(pb, 0, view)
        n = 20_000
        seen = Counter(sample_determinization(priv, view, seed).order for seed in range(n))
        assert set(seen) <= set(exact)
        chi2 = sum((seen.get(o, 0) - n * p) ** 2 / (n * p) for o, p in exact.items())
        df = max(len(exact) - 1, 1)
        assert chi2 < df + 5 * math.sqrt(2 * df)
