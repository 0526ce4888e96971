import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from phishreports.cooccur import (
    build_window_counts,
    compute_pmi,
    compute_soa,
    default_proper_nouns,
    select_keywords,
)

from conftest import make_post
from oracles import pmi_recount, soa_recount


def _posts_from_tokens(posts_tokens):
    # One word per token keeps the default provider's output equal to the set.
    return [
        make_post(post_id=f"p{i}", text=" ".join(sorted(tokens)))
        for i, tokens in enumerate(posts_tokens)
    ]


def _provider_passthrough(text, lang):
    return set(text.split())


class TestPmiExamples:
    def test_four_post_corpus(self):
        # Token in both positive posts of a 2/2-labeled 4-post window.
        posts_tokens = [{"Tok"}, {"Tok"}, set(), set()]
        labels = [True, True, False, False]
        counts = build_window_counts(
            _posts_from_tokens(posts_tokens), labels, _provider_passthrough
        )
        assert compute_pmi(counts, "Tok", True) == pytest.approx(1.0, abs=1e-12)
        assert compute_pmi(counts, "Tok", False) == 0.0
        assert compute_soa(counts, "Tok") == pytest.approx(1.0, abs=1e-12)

    def test_absent_cooccurrence_is_exactly_zero(self):
        posts_tokens = [{"Tok"}, set()]
        labels = [True, False]
        counts = build_window_counts(
            _posts_from_tokens(posts_tokens), labels, _provider_passthrough
        )
        assert compute_pmi(counts, "Tok", False) == 0.0

    def test_uniform_token_has_zero_pmi(self):
        posts_tokens = [{"Tok"}] * 4
        labels = [True, True, False, False]
        counts = build_window_counts(
            _posts_from_tokens(posts_tokens), labels, _provider_passthrough
        )
        assert compute_pmi(counts, "Tok", True) == pytest.approx(0.0, abs=1e-12)
        assert compute_pmi(counts, "Tok", False) == pytest.approx(0.0, abs=1e-12)
        assert abs(compute_soa(counts, "Tok")) < 1e-12

    def test_unseen_token_errors(self):
        counts = build_window_counts(
            _posts_from_tokens([{"A"}]), [True], _provider_passthrough
        )
        with pytest.raises(KeyError):
            compute_pmi(counts, "Missing", True)

    def test_report_only_token_soa_equals_pmi(self):
        posts_tokens = [{"Brand"}, {"Brand"}, set(), set(), set(), set()]
        labels = [True, True, False, False, False, False]
        counts = build_window_counts(
            _posts_from_tokens(posts_tokens), labels, _provider_passthrough
        )
        assert compute_soa(counts, "Brand") == compute_pmi(counts, "Brand", True)


class TestPmiOracle:
    def test_500_random_corpora_match_recount(self):
        rng = random.Random(1234)
        vocabulary = [f"T{k}" for k in range(20)]
        for _ in range(500):
            n = rng.randrange(1, 51)
            posts_tokens = [
                {t for t in vocabulary if rng.random() < 0.2} for _ in range(n)
            ]
            labels = [rng.random() < 0.4 for _ in range(n)]
            counts = build_window_counts(
                _posts_from_tokens(posts_tokens), labels, _provider_passthrough
            )
            for token in counts.token_counts:
                for label in (True, False):
                    got = compute_pmi(counts, token, label)
                    want = pmi_recount(posts_tokens, labels, token, label)
                    assert got == pytest.approx(want, abs=1e-9)
                assert compute_soa(counts, token) == pytest.approx(
                    soa_recount(posts_tokens, labels, token), abs=1e-9
                )

    @given(st.data())
    def test_label_swap_negates_soa(self, data):
        n = data.draw(st.integers(min_value=2, max_value=12))
        posts_tokens = [
            data.draw(st.sets(st.sampled_from(["A", "B", "C"]), max_size=3))
            for _ in range(n)
        ]
        labels = [data.draw(st.booleans()) for _ in range(n)]
        if not any(labels) or all(labels):
            return
        counts = build_window_counts(
            _posts_from_tokens(posts_tokens), labels, _provider_passthrough
        )
        flipped = build_window_counts(
            _posts_from_tokens(posts_tokens), [not l for l in labels], _provider_passthrough
        )
        for token in counts.token_counts:
            pos = counts.count_label(token, True)
            neg = counts.count_label(token, False)
            if pos and neg:
                assert compute_soa(counts, token) == pytest.approx(
                    -compute_soa(flipped, token), abs=1e-9
                )


class TestSelectKeywords:
    def _planted_corpus(self):
        # 240 posts, 12 positive; the brand appears in every positive post
        # and nowhere else, so its exact SoA is log2(240/12) ~ 4.32.
        posts, labels = [], []
        for i in range(240):
            positive = i < 12
            text = "Warning BrandCo phishing" if positive else "regular day posting"
            posts.append(make_post(post_id=f"p{i}", text=text))
            labels.append(positive)
        return posts, labels

    def test_planted_brand_selected_rank_one(self):
        posts, labels = self._planted_corpus()
        expected_soa = math.log2(240 / 12)
        assert expected_soa > 4
        selected = select_keywords(posts, labels, threshold=4.0, top_k=10, window_end=99)
        assert selected
        assert selected[0].token in ("BrandCo", "Warning BrandCo")
        tokens = {c.token for c in selected}
        assert "BrandCo" in tokens or "Warning BrandCo" in tokens
        for c in selected:
            assert c.soa == pytest.approx(expected_soa, abs=1e-9)
            assert c.window_end == 99

    def test_uniform_tokens_yield_empty_selection(self):
        posts = [make_post(post_id=f"p{i}", text="Same Thing") for i in range(10)]
        labels = [i % 2 == 0 for i in range(10)]
        assert select_keywords(posts, labels) == []

    def test_top_k_truncation(self):
        # 15 distinct single-post tokens in a tiny positive class.
        posts, labels = [], []
        for i in range(15):
            posts.append(make_post(post_id=f"pos{i}", text=f"Brand{i:02d} alert"))
            labels.append(True)
        for i in range(400):
            posts.append(make_post(post_id=f"neg{i}", text="nothing upper case"))
            labels.append(False)
        selected = select_keywords(posts, labels, threshold=4.0, top_k=10)
        above = select_keywords(posts, labels, threshold=4.0, top_k=100)
        assert len(above) >= 15
        assert len(selected) == 10

    def test_selection_invariant_under_shuffle(self):
        posts, labels = self._planted_corpus()
        rng = random.Random(7)
        order = list(range(len(posts)))
        rng.shuffle(order)
        shuffled = select_keywords(
            [posts[i] for i in order], [labels[i] for i in order], threshold=4.0
        )
        original = select_keywords(posts, labels, threshold=4.0)
        assert [c.token for c in shuffled] == [c.token for c in original]

    def test_empty_window(self):
        assert select_keywords([], []) == []

    def test_benign_post_without_tracked_tokens_keeps_ranking(self):
        posts, labels = self._planted_corpus()
        more = posts + [make_post(post_id="extra", text="plain lowercase words")]
        more_labels = labels + [False]
        a = select_keywords(posts, labels, threshold=0.5)
        b = select_keywords(more, more_labels, threshold=0.5)
        assert [c.token for c in a] == [c.token for c in b]


class TestProperNounProvider:
    def test_single_capitalized_token(self):
        assert default_proper_nouns("Amazon says your account is locked", "en") == {"Amazon"}

    def test_all_caps_brand(self):
        assert default_proper_nouns("got this from ATT today", "en") == {"ATT"}

    def test_nothing(self):
        assert default_proper_nouns("nothing here", "en") == set()

    def test_multiword_brand_joined(self):
        tokens = default_proper_nouns("beware American Express phish", "en")
        assert "American Express" in tokens

    def test_stopword_run_trimmed(self):
        tokens = default_proper_nouns("The Amazon scam is back", "en")
        assert "Amazon" in tokens
        assert "The Amazon" not in tokens

    def test_hashtag_stripped(self):
        assert "Amazon" in default_proper_nouns("watch out #Amazon", "en")

    def test_katakana_for_ja(self):
        tokens = default_proper_nouns("アマゾンを騙る詐欺に注意", "ja")
        assert "アマゾン" in tokens

    def test_latin_brands_in_ja_text(self):
        tokens = default_proper_nouns("Amazonの偽サイト", "ja")
        assert any("Amazon" in t for t in tokens)
