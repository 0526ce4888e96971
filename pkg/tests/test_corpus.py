import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from phishreports import corpus
from phishreports.corpus import (
    PostFileError,
    PostRecord,
    SyntheticConfig,
    Window,
    build_query_set,
    generate_synthetic,
    load_posts,
    save_posts,
    select_window,
)

from conftest import make_post


def _roundtrip(posts):
    buf = io.StringIO()
    save_posts(posts, buf)
    buf.seek(0)
    return load_posts(buf)


class TestLoadPosts:
    def test_three_valid_lines(self):
        posts = [make_post(post_id=f"p{i}", created_at=10 + i) for i in range(3)]
        assert _roundtrip(posts) == posts

    def test_empty_file(self):
        assert load_posts(io.StringIO("")) == []

    def test_missing_post_id_names_line(self):
        line = json.dumps({"author_id": "a", "created_at": 5, "lang": "en", "text": "x"})
        with pytest.raises(PostFileError, match="line 1"):
            load_posts(io.StringIO(line + "\n"))

    def test_malformed_json_names_line(self):
        good = json.dumps(make_post().to_json())
        with pytest.raises(PostFileError, match="line 2"):
            load_posts(io.StringIO(good + "\n{not json\n"))

    def test_duplicate_post_id_rejected(self):
        line = json.dumps(make_post().to_json())
        with pytest.raises(PostFileError, match="duplicate"):
            load_posts(io.StringIO(line + "\n" + line + "\n"))

    def test_roundtrip_preserves_image_texts(self):
        post = make_post(
            image_texts=(
                corpus.ImageText("i1", "hello"),
                corpus.ImageText("i2", None),
            )
        )
        (back,) = _roundtrip([post])
        assert back.image_texts == post.image_texts


class TestRecordInvariants:
    def test_empty_post_id_rejected(self):
        with pytest.raises(ValueError):
            make_post(post_id="")

    def test_nonpositive_timestamp_rejected(self):
        with pytest.raises(ValueError):
            make_post(created_at=0)

    def test_bad_lang_rejected(self):
        with pytest.raises(ValueError):
            make_post(lang="fr")

    def test_whitespace_hashtag_rejected(self):
        with pytest.raises(ValueError):
            make_post(hashtags=("a b",))

    def test_author_recent_texts_capped(self):
        with pytest.raises(ValueError):
            corpus.AuthorRecord(author_id="a", recent_texts=tuple("x" * 1 for _ in range(11)))


class TestSelectWindow:
    def test_boundary_inside(self):
        w = Window(end=1_000_000)
        post = make_post(created_at=w.end - 1)
        assert select_window([post], w) == [post]

    def test_end_excluded(self):
        w = Window(end=1_000_000)
        post = make_post(created_at=w.end)
        assert select_window([post], w) == []

    def test_start_included(self):
        w = Window(end=1_000_000, duration=100)
        post = make_post(created_at=w.end - 100)
        assert select_window([post], w) == [post]

    def test_against_bruteforce_filter(self):
        import random

        rng = random.Random(3)
        end = 200_000
        posts = [
            make_post(post_id=f"p{i}", created_at=rng.randrange(end - 48 * 3600, end + 3600))
            for i in range(100)
        ]
        w = Window(end=end)
        expected = [p for p in posts if end - w.duration <= p.created_at < end]
        assert select_window(posts, w) == expected

    @given(
        st.lists(st.integers(min_value=1, max_value=10_000), max_size=40),
        st.integers(min_value=1_000, max_value=11_000),
        st.integers(min_value=1, max_value=5_000),
    )
    def test_matches_naive_filter_and_idempotent(self, times, end, duration):
        posts = [make_post(post_id=f"p{i}", created_at=t) for i, t in enumerate(times)]
        w = Window(end=end, duration=duration)
        selected = select_window(posts, w)
        assert selected == [p for p in posts if end - duration <= p.created_at < end]
        assert select_window(selected, w) == selected

    def test_zero_duration_rejected(self):
        with pytest.raises(ValueError):
            Window(end=10, duration=0)


class TestBuildQuerySet:
    def test_twenty_security_keywords_alone(self):
        security = [line for line in open("src/phishreports/data/security_keywords_en.txt")]
        security = [s.strip() for s in security if s.strip()]
        assert len(security) == 20
        assert build_query_set(security, []) == security

    def test_union_with_overlap(self):
        security = [f"s{i}" for i in range(20)]
        cooccur = [f"c{i}" for i in range(9)] + ["s0"]
        queries = build_query_set(security, cooccur)
        assert len(queries) == 29
        assert queries[:20] == security

    def test_empty_security_rejected(self):
        with pytest.raises(ValueError):
            build_query_set([], ["x"])


class TestSynthetic:
    def test_same_seed_byte_identical(self):
        a = generate_synthetic(7, SyntheticConfig(n_reports=10, n_benign=30))
        b = generate_synthetic(7, SyntheticConfig(n_reports=10, n_benign=30))
        buf_a, buf_b = io.StringIO(), io.StringIO()
        save_posts(a.posts, buf_a)
        save_posts(b.posts, buf_b)
        assert buf_a.getvalue() == buf_b.getvalue()
        assert a.labels == b.labels

    def test_different_seeds_disjoint_ids(self):
        a = generate_synthetic(1, SyntheticConfig(n_reports=5, n_benign=10))
        b = generate_synthetic(2, SyntheticConfig(n_reports=5, n_benign=10))
        assert not ({p.post_id for p in a.posts} & {p.post_id for p in b.posts})

    def test_label_counts(self):
        gen = generate_synthetic(3, SyntheticConfig(n_reports=10, n_benign=90))
        assert sum(gen.labels.values()) == 10
        assert len(gen.posts) == 100

    def test_planted_brand_only_in_reports(self):
        cfg = SyntheticConfig(n_reports=12, n_benign=50, brands=("ATT",))
        gen = generate_synthetic(5, cfg)
        for post in gen.posts:
            joined = post.text + " ".join(t or "" for _, t in ((i.image_id, i.text) for i in post.image_texts))
            if "ATT" in joined:
                assert gen.labels[post.post_id]

    def test_every_report_carries_an_indicator(self):
        from phishreports.ioc import extract_post_indicators

        gen = generate_synthetic(9, SyntheticConfig(n_reports=15, n_benign=5))
        for post in gen.posts:
            if gen.labels[post.post_id]:
                assert extract_post_indicators(post), post.text

    def test_zero_posts_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic(1, SyntheticConfig(n_reports=0, n_benign=0))

    def test_every_author_has_a_record(self):
        gen = generate_synthetic(4, SyntheticConfig(n_reports=8, n_benign=20))
        known = {a.author_id for a in gen.authors}
        assert {p.author_id for p in gen.posts} <= known
