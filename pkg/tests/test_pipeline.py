import json

import numpy as np
import pytest

from phishreports import forest
from phishreports import pipeline as pl
from phishreports.corpus import SyntheticConfig, generate_synthetic
from phishreports.features import feature_matrix

SMALL = dict(visual_raw_dim=64, context_raw_dim=64)


@pytest.fixture(scope="module")
def small_config():
    return pl.PipelineConfig(**SMALL)


@pytest.fixture(scope="module")
def trained(small_config):
    cfg = SyntheticConfig(n_reports=25, n_benign=775, brands=("Amazon",), span=2 * 86_400)
    gen = generate_synthetic(101, cfg)
    artifacts = pl.train_model(gen.posts, gen.labels, small_config)
    return gen, artifacts.model


@pytest.fixture(scope="module")
def run_corpus():
    cfg = SyntheticConfig(n_reports=25, n_benign=775, brands=("Amazon",), span=2 * 86_400)
    return generate_synthetic(202, cfg)


class TestTrainModel:
    def test_projections_and_schema_embedded(self, trained, small_config):
        _, model = trained
        assert model.projections is not None
        assert model.schema.visual_raw_dim == small_config.visual_raw_dim
        assert model.n_features == model.schema.total_dim

    def test_training_labels_required(self, small_config):
        gen = generate_synthetic(5, SyntheticConfig(n_reports=4, n_benign=10))
        with pytest.raises(ValueError):
            pl.train_model(gen.posts, {}, small_config)

    def test_chronological_split_ordering(self):
        gen = generate_synthetic(6, SyntheticConfig(n_reports=5, n_benign=20))
        train_posts, test_posts = pl.chronological_split(gen.posts, 0.7)
        assert len(train_posts) + len(test_posts) == len(gen.posts)
        assert max(p.created_at for p in train_posts) <= min(p.created_at for p in test_posts)


class TestRunCycle:
    def _start(self, gen):
        return min(p.created_at for p in gen.posts) + 21 * 3600

    def test_planted_brand_enters_next_cycle_keywords(self, trained, run_corpus, small_config):
        _, model = trained
        state = pl.CycleState(cursor=self._start(run_corpus))
        ctx = pl.build_screening_context(small_config)
        providers = pl.build_providers(small_config)

        # Oracle first: the brand must actually clear the SoA threshold in
        # this window given the model's own labels.
        from phishreports.cooccur import build_window_counts, compute_soa
        from phishreports.corpus import Window, select_window

        window = Window(end=state.cursor + small_config.cycle_period)
        windowed = pl._collect(select_window(run_corpus.posts, window), small_config, state)
        labels = [
            pl.screen_and_classify(p, model, providers, ctx, window.end, 0.5)[1] is not None
            for p in windowed
        ]
        counts = build_window_counts(windowed, labels)
        assert "Amazon" in counts.token_counts
        assert compute_soa(counts, "Amazon") > 4.0

        state2, outputs = pl.run_cycle(
            state, small_config, run_corpus.posts, model, ctx=ctx, providers=providers
        )
        assert "Amazon" in state2.cooccur_keywords["en"]
        assert state2.cursor == state.cursor + small_config.cycle_period
        assert state2.cycle == state.cycle + 1

    def test_keyword_budget(self, trained, run_corpus, small_config):
        _, model = trained
        state = pl.CycleState(cursor=self._start(run_corpus))
        state2, _ = pl.run_cycle(state, small_config, run_corpus.posts, model)
        for words in state2.cooccur_keywords.values():
            assert len(words) <= small_config.top_k

    def test_empty_window_keeps_keywords(self, trained, run_corpus, small_config):
        _, model = trained
        # A cursor range before the corpus begins: no fresh posts, not yet
        # exhausted, keywords must carry over untouched.
        start = min(p.created_at for p in run_corpus.posts) - 10 * 3600
        state = pl.CycleState(
            cursor=start, cooccur_keywords={"en": ("Carried",), "ja": ()}
        )
        state2, outputs = pl.run_cycle(state, small_config, run_corpus.posts, model)
        assert outputs.reports == []
        assert state2.cooccur_keywords == {"en": ("Carried",), "ja": ()}

    def test_deterministic_outputs(self, trained, run_corpus, small_config):
        _, model = trained
        state = pl.CycleState(cursor=self._start(run_corpus))
        a_state, a_out = pl.run_cycle(state, small_config, run_corpus.posts, model)
        b_state, b_out = pl.run_cycle(state, small_config, run_corpus.posts, model)
        assert a_state == b_state
        assert [r.to_json() for r in a_out.reports] == [r.to_json() for r in b_out.reports]
        assert {k: [c.to_json() for c in v] for k, v in a_out.keywords.items()} == {
            k: [c.to_json() for c in v] for k, v in b_out.keywords.items()
        }

    def test_source_exhausted(self, trained, run_corpus, small_config):
        _, model = trained
        state = pl.CycleState(cursor=max(p.created_at for p in run_corpus.posts) + 1)
        with pytest.raises(pl.SourceExhausted):
            pl.run_cycle(state, small_config, run_corpus.posts, model)

    def test_failed_cycle_leaves_state_usable(self, trained, run_corpus, small_config):
        _, model = trained
        state = pl.CycleState(cursor=self._start(run_corpus))
        bad_providers = pl.build_providers(
            pl.PipelineConfig(visual_raw_dim=32, context_raw_dim=32)
        )
        before = state.to_json()
        with pytest.raises(pl.SchemaMismatchError):
            pl.run_cycle(state, small_config, run_corpus.posts, model, providers=bad_providers)
        assert state.to_json() == before

    def test_reports_only_from_fresh_range(self, trained, run_corpus, small_config):
        _, model = trained
        state = pl.CycleState(cursor=self._start(run_corpus))
        _, outputs = pl.run_cycle(state, small_config, run_corpus.posts, model)
        for report in outputs.reports:
            assert state.cursor <= report.created_at < state.cursor + small_config.cycle_period


class TestStatePersistence:
    def test_roundtrip(self, tmp_path):
        state = pl.CycleState(
            cycle=3,
            cursor=12345,
            cooccur_keywords={"en": ("Amazon", "ATT"), "ja": ("アマゾン",)},
            model_path="m.json",
            prev_positive=("p1",),
        )
        path = tmp_path / "state.json"
        pl.save_state(state, str(path))
        assert pl.load_state(str(path)) == state


class TestSchemaGuard:
    def test_provider_mismatch_detected(self, trained, small_config):
        _, model = trained
        bad = pl.build_providers(pl.PipelineConfig(visual_raw_dim=16, context_raw_dim=16))
        with pytest.raises(pl.SchemaMismatchError):
            pl.check_provider_schema(model.schema, bad)

    def test_matching_providers_pass(self, trained, small_config):
        _, model = trained
        pl.check_provider_schema(model.schema, pl.build_providers(small_config))


class TestEndToEndSmall:
    def test_split_train_evaluate_small(self, small_config):
        gen = generate_synthetic(31, SyntheticConfig(n_reports=40, n_benign=260))
        train_posts, test_posts = pl.chronological_split(gen.posts, 0.7)
        model = pl.train_model(train_posts, gen.labels, small_config).model
        ctx = pl.build_screening_context(small_config)
        providers = pl.build_providers(small_config)
        now = max(p.created_at for p in gen.posts) + 1
        pairs = []
        for post, kept in pl.screen_corpus(test_posts, ctx, now):
            pairs.extend(
                pl.assemble(post, kept, providers, model.projections, label=gen.labels[post.post_id])
            )
        X = feature_matrix([v for _, v in pairs])
        y = np.array([bool(i.label) for i, _ in pairs])
        assert y.any() and not y.all()
        metrics = forest.evaluate(model, X, y)
        assert metrics.accuracy >= 0.9
