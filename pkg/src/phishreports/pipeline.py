"""Hourly-cycle orchestration: collect, extract, screen, classify, mine
keywords, and emit feed increments.

Cycles are pure functions of (state, config, source, model): a failed cycle
raises and leaves the caller's state untouched, and fixed inputs reproduce
byte-identical outputs. Screening "now" is the cycle window end, never the
wall clock.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from . import forest as forest_mod
from .analysis import ClassifiedReport
from .cooccur import KeywordCandidate, select_keywords
from .corpus import DEFAULT_WINDOW_SECONDS, PostRecord, Window, build_query_set, select_window
from .features import (
    FeatureProviders,
    FeatureSchema,
    HashingEmbedder,
    ProjectionPair,
    Standardizer,
    assemble,
    embed_context,
    embed_visual,
    feature_matrix,
    fit_projection,
    make_instances,
)
from .forest import ForestModel, ForestParams
from .ioc import extract_post_indicators
from .psl import PublicSuffixList, load_suffix_file
from .screening import (
    REASON_DYNDNS,
    REASON_SHORTENER,
    FixtureWhoisClient,
    NullWhoisClient,
    RankList,
    WhoisClient,
    load_domain_set,
    screen,
    screen_post,
)


class SourceExhausted(Exception):
    """Clean termination: the cursor has moved past the last source post."""


class SchemaMismatchError(ValueError):
    """Feature configuration does not match the model's schema."""


def _bundled_text(name: str) -> str:
    return resources.files("phishreports").joinpath(f"data/{name}").read_text("utf-8")


def _bundled_keywords(lang: str) -> tuple[str, ...]:
    return tuple(
        line.strip()
        for line in _bundled_text(f"security_keywords_{lang}.txt").splitlines()
        if line.strip()
    )


@dataclass(frozen=True)
class PipelineConfig:
    security_keywords: Mapping[str, tuple[str, ...]] = field(
        default_factory=lambda: {"en": _bundled_keywords("en"), "ja": _bundled_keywords("ja")}
    )
    window_duration: int = DEFAULT_WINDOW_SECONDS
    cycle_period: int = 3600
    soa_threshold: float = 4.0
    top_k: int = 10
    rank_cutoff: int = 10_000
    whois_max_age_days: int = 365
    score_threshold: float = 0.5
    visual_raw_dim: int = 1280
    context_raw_dim: int = 768
    visual_max_dim: int = 16
    context_max_dim: int = 55
    svd_target_ratio: float = 0.99
    embed_seed: int = 0
    forest: ForestParams = field(default_factory=ForestParams)
    rank_path: str | None = None
    shortener_path: str | None = None
    dyndns_path: str | None = None
    whois_path: str | None = None
    psl_path: str | None = None

    def __post_init__(self) -> None:
        numeric = (
            self.window_duration,
            self.cycle_period,
            self.soa_threshold,
            self.top_k,
            self.rank_cutoff,
            self.whois_max_age_days,
            self.score_threshold,
            self.visual_raw_dim,
            self.context_raw_dim,
            self.visual_max_dim,
            self.context_max_dim,
            self.svd_target_ratio,
        )
        if any(v <= 0 for v in numeric):
            raise ValueError("numeric pipeline parameters must be positive")
        if not self.security_keywords or any(not v for v in self.security_keywords.values()):
            raise ValueError("security keyword lists must be nonempty")

    @classmethod
    def from_json(cls, path: str) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        if "security_keywords" in obj:
            obj["security_keywords"] = {
                lang: tuple(words) for lang, words in obj["security_keywords"].items()
            }
        if "forest" in obj:
            obj["forest"] = ForestParams.from_json(obj["forest"])
        return cls(**obj)


@dataclass
class ScreeningContext:
    ranks: RankList
    shorteners: frozenset[str]
    dyndns: frozenset[str]
    whois: WhoisClient
    psl: PublicSuffixList
    max_age_days: int = 365


def build_screening_context(config: PipelineConfig) -> ScreeningContext:
    if config.rank_path:
        ranks = RankList.from_csv(config.rank_path, cutoff=config.rank_cutoff)
    else:
        import io

        ranks = RankList.from_csv(io.StringIO(_bundled_text("rank_sample.csv")), cutoff=config.rank_cutoff)
    if config.shortener_path:
        shorteners = load_domain_set(config.shortener_path)
    else:
        shorteners = frozenset(
            l.strip().lower() for l in _bundled_text("shorteners.txt").splitlines() if l.strip()
        )
    if config.dyndns_path:
        dyndns = load_domain_set(config.dyndns_path)
    else:
        dyndns = frozenset(
            l.strip().lower() for l in _bundled_text("dynamic_dns.txt").splitlines() if l.strip()
        )
    whois: WhoisClient = (
        FixtureWhoisClient.from_json(config.whois_path) if config.whois_path else NullWhoisClient()
    )
    psl = load_suffix_file(config.psl_path) if config.psl_path else PublicSuffixList.bundled()
    return ScreeningContext(
        ranks=ranks,
        shorteners=shorteners,
        dyndns=dyndns,
        whois=whois,
        psl=psl,
        max_age_days=config.whois_max_age_days,
    )


def build_providers(config: PipelineConfig) -> FeatureProviders:
    return FeatureProviders(
        visual=HashingEmbedder(config.visual_raw_dim, seed=config.embed_seed),
        context=HashingEmbedder(config.context_raw_dim, seed=config.embed_seed + 1),
    )


@dataclass(frozen=True)
class CycleState:
    cycle: int = 0
    cursor: int = 0
    cooccur_keywords: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    model_path: str | None = None
    prev_positive: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "cycle": self.cycle,
            "cursor": self.cursor,
            "cooccur_keywords": {lang: list(words) for lang, words in self.cooccur_keywords.items()},
            "model_path": self.model_path,
            "prev_positive": list(self.prev_positive),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CycleState":
        return cls(
            cycle=obj.get("cycle", 0),
            cursor=obj.get("cursor", 0),
            cooccur_keywords={
                lang: tuple(words) for lang, words in obj.get("cooccur_keywords", {}).items()
            },
            model_path=obj.get("model_path"),
            prev_positive=tuple(obj.get("prev_positive", ())),
        )


def save_state(state: CycleState, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state.to_json(), fh, sort_keys=True)


def load_state(path: str) -> CycleState:
    with open(path, encoding="utf-8") as fh:
        return CycleState.from_json(json.load(fh))


@dataclass
class CycleOutputs:
    reports: list[ClassifiedReport]
    keywords: dict[str, list[KeywordCandidate]]
    feed_annotations: dict[str, tuple[str, ...]]
    n_collected: int
    n_screened: int


def match_queries(post: PostRecord, queries: Sequence[str]) -> tuple[str, ...]:
    """Offline stand-in for search semantics: case-insensitive substring
    match against the post text or its hashtags."""
    text = post.text.lower()
    hashtags = [f"#{tag.lower()}" for tag in post.hashtags]
    matched = []
    for query in queries:
        q = query.lower()
        if q in text or any(q in tag or q == tag.lstrip("#") for tag in hashtags):
            matched.append(query)
    return tuple(matched)


def _collect(
    posts: Sequence[PostRecord], config: PipelineConfig, state: CycleState
) -> list[PostRecord]:
    collected = []
    for post in posts:
        queries = build_query_set(
            config.security_keywords.get(post.lang, ()),
            state.cooccur_keywords.get(post.lang, ()),
        )
        matched = match_queries(post, queries)
        if matched:
            collected.append(replace(post, matched_keywords=matched))
    return collected


def screen_and_classify(
    post: PostRecord,
    model: ForestModel,
    providers: FeatureProviders,
    ctx: ScreeningContext,
    now: int,
    threshold: float,
) -> tuple[bool, ClassifiedReport | None]:
    """(survived screening, report). The report is None for posts that were
    screened out or classified negative."""
    indicators = extract_post_indicators(post, psl=ctx.psl)
    kept, excluded = screen_post(
        post, indicators, ctx.ranks, ctx.shorteners, ctx.dyndns, ctx.whois, now, ctx.max_age_days
    )
    if excluded:
        return False, None
    if model.projections is None:
        raise SchemaMismatchError("model carries no fitted projections")
    check_provider_schema(model.schema, providers)
    assembled = assemble(post, kept, providers, model.projections)
    pairs = [(inst, vec.concat()) for inst, vec in assembled]
    label, scores = forest_mod.classify_post(model, pairs, threshold=threshold)
    if not label:
        return True, None
    return True, ClassifiedReport(
        post_id=post.post_id,
        author_id=post.author_id,
        created_at=post.created_at,
        lang=post.lang,
        score=max(scores),
        indicators=tuple(kept),
        matched_keywords=post.matched_keywords,
        hashtag_count=len(post.hashtags),
        mention_count=len(post.mentions),
    )


def check_provider_schema(schema: FeatureSchema | None, providers: FeatureProviders) -> None:
    if schema is None:
        return
    if providers.visual.dim != schema.visual_raw_dim or providers.context.dim != schema.context_raw_dim:
        raise SchemaMismatchError(
            f"provider dims (visual={providers.visual.dim}, context={providers.context.dim}) "
            f"do not match model schema (visual={schema.visual_raw_dim}, "
            f"context={schema.context_raw_dim})"
        )


def run_cycle(
    state: CycleState,
    config: PipelineConfig,
    source: Sequence[PostRecord],
    model: ForestModel,
    ctx: ScreeningContext | None = None,
    providers: FeatureProviders | None = None,
) -> tuple[CycleState, CycleOutputs]:
    """Process posts in [cursor, cursor + period); returns advanced state.

    Keyword labels come from this cycle's classifier predictions over the
    trailing window. Newly selected keywords apply from the next cycle on.
    Raises SourceExhausted once the cursor passes the last source post.
    """
    if not source:
        raise SourceExhausted("empty source")
    max_time = max(p.created_at for p in source)
    if state.cursor > max_time:
        raise SourceExhausted(f"cursor {state.cursor} is past the last post at {max_time}")
    ctx = ctx or build_screening_context(config)
    providers = providers or build_providers(config)
    cycle_end = state.cursor + config.cycle_period

    fresh = [p for p in source if state.cursor <= p.created_at < cycle_end]
    collected_fresh = _collect(fresh, config, state)

    reports: list[ClassifiedReport] = []
    annotations: dict[str, tuple[str, ...]] = {}
    n_screened = 0
    for post in collected_fresh:
        survived, report = screen_and_classify(
            post, model, providers, ctx, cycle_end, config.score_threshold
        )
        n_screened += survived
        if report is None:
            continue
        reports.append(report)
        for indicator in report.indicators:
            verdict = screen(
                indicator, ctx.ranks, ctx.shorteners, ctx.dyndns, ctx.whois, cycle_end, ctx.max_age_days
            )
            flags = tuple(r for r in verdict.reasons if r in (REASON_SHORTENER, REASON_DYNDNS))
            if flags:
                annotations[indicator.normalized_url] = flags

    keywords: dict[str, list[KeywordCandidate]] = {}
    new_cooccur = dict(state.cooccur_keywords)
    positive_ids: set[str] = set()
    if fresh:
        window = Window(end=cycle_end, duration=config.window_duration)
        windowed = select_window(source, window)
        collected_window = _collect(windowed, config, state)
        labels: list[bool] = []
        for post in collected_window:
            _, report = screen_and_classify(
                post, model, providers, ctx, cycle_end, config.score_threshold
            )
            labels.append(report is not None)
            if report is not None:
                positive_ids.add(post.post_id)
        for lang in sorted(config.security_keywords):
            lang_posts = [p for p in collected_window if p.lang == lang]
            lang_labels = [
                label for p, label in zip(collected_window, labels) if p.lang == lang
            ]
            selected = select_keywords(
                lang_posts,
                lang_labels,
                threshold=config.soa_threshold,
                top_k=config.top_k,
                window_end=cycle_end,
            )
            keywords[lang] = selected
            new_cooccur[lang] = tuple(c.token for c in selected)

    next_state = CycleState(
        cycle=state.cycle + 1,
        cursor=cycle_end,
        cooccur_keywords=new_cooccur,
        model_path=state.model_path,
        prev_positive=tuple(sorted(positive_ids)),
    )
    outputs = CycleOutputs(
        reports=reports,
        keywords=keywords,
        feed_annotations=annotations,
        n_collected=len(collected_fresh),
        n_screened=n_screened,
    )
    return next_state, outputs


# --- training ------------------------------------------------------------------


@dataclass
class TrainedArtifacts:
    model: ForestModel
    instances: list  # (Instance, FeatureVector) pairs used for training


def screen_corpus(
    posts: Sequence[PostRecord], ctx: ScreeningContext, now: int, max_age_days: int | None = None
):
    """Extract and screen every post; yields (post, surviving indicators)
    for posts that pass."""
    max_age = ctx.max_age_days if max_age_days is None else max_age_days
    for post in posts:
        indicators = extract_post_indicators(post, psl=ctx.psl)
        kept, excluded = screen_post(
            post, indicators, ctx.ranks, ctx.shorteners, ctx.dyndns, ctx.whois, now, max_age
        )
        if not excluded:
            yield post, kept


def build_feature_artifacts(
    screened: Sequence[tuple[PostRecord, list]],
    providers: FeatureProviders,
    config: PipelineConfig,
) -> tuple[ProjectionPair, FeatureSchema]:
    """Fit visual/context projections on the training population only."""
    visual_rows = []
    context_rows = []
    for post, kept in screened:
        context_raw = embed_context(post.text, providers.context)
        for instance in make_instances(post, kept):
            context_rows.append(context_raw)
            if instance.image_id is not None:
                visual_rows.append(embed_visual(instance.image_id, providers.visual))
    if len(context_rows) < 2:
        raise ValueError("need at least 2 screened instances to fit projections")
    context_proj = fit_projection(
        np.vstack(context_rows), config.svd_target_ratio, config.context_max_dim
    )
    if len(visual_rows) >= 2:
        visual_proj = fit_projection(
            np.vstack(visual_rows), config.svd_target_ratio, config.visual_max_dim
        )
    else:
        # No image population to fit on; the degenerate projection keeps the
        # block shape while sending everything to zero.
        visual_proj = fit_projection(
            np.zeros((2, config.visual_raw_dim)), config.svd_target_ratio, 1
        )
    projections = ProjectionPair(visual=visual_proj, context=context_proj)
    schema = FeatureSchema(
        visual_raw_dim=config.visual_raw_dim,
        context_raw_dim=config.context_raw_dim,
        visual_dim=projections.visual.out_dim,
        context_dim=projections.context.out_dim,
        embed_seed=config.embed_seed,
    )
    return projections, schema


def train_model(
    posts: Sequence[PostRecord],
    labels: Mapping[str, bool],
    config: PipelineConfig,
    ctx: ScreeningContext | None = None,
    providers: FeatureProviders | None = None,
) -> TrainedArtifacts:
    """End-to-end training: screen, fit projections and standardizer on the
    training corpus, and grow the forest."""
    ctx = ctx or build_screening_context(config)
    providers = providers or build_providers(config)
    now = max((p.created_at for p in posts), default=1) + 1
    screened = list(screen_corpus(posts, ctx, now))
    if not screened:
        raise ValueError("no post survived screening; cannot train")
    projections, schema = build_feature_artifacts(screened, providers, config)
    pairs = []
    for post, kept in screened:
        label = labels.get(post.post_id)
        if label is None:
            continue
        pairs.extend(
            (inst, vec)
            for inst, vec in assemble(post, kept, providers, projections, label=label)
        )
    if not pairs:
        raise ValueError("no labeled instances to train on")
    X = feature_matrix([vec for _, vec in pairs])
    y = np.array([bool(inst.label) for inst, _ in pairs])
    std = Standardizer.fit(X)
    model = forest_mod.train(
        X,
        y,
        config.forest,
        standardizer=std,
        projections=projections,
        schema=schema,
    )
    return TrainedArtifacts(model=model, instances=pairs)


def chronological_split(
    posts: Sequence[PostRecord], train_fraction: float = 0.7
) -> tuple[list[PostRecord], list[PostRecord]]:
    """Time-ordered split; the earliest fraction goes to training."""
    ordered = sorted(posts, key=lambda p: (p.created_at, p.post_id))
    cut = int(len(ordered) * train_fraction)
    return ordered[:cut], ordered[cut:]
