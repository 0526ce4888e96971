"""Mine, screen, and classify phishing-attack reports from social posts."""

from .corpus import (
    AuthorRecord,
    ImageText,
    PostRecord,
    SyntheticConfig,
    Window,
    build_query_set,
    generate_synthetic,
    load_posts,
    select_window,
)
from .cooccur import KeywordCandidate, compute_pmi, compute_soa, select_keywords
from .features import FeatureVector, Instance, Projection, Standardizer, assemble, fit_projection
from .forest import ForestModel, ForestParams, Metrics, evaluate, predict, train
from .ioc import Indicator, classify_defang_form, extract_indicators, refang, validate_domain, validate_url
from .screening import RankList, ScreeningVerdict, promote_domain_to_url, screen, screen_post
from .analysis import ClassifiedReport, categorize_user, emit_feed, share_distribution
from .pipeline import CycleState, PipelineConfig, run_cycle, train_model

__version__ = "0.1.0"

__all__ = [
    "AuthorRecord",
    "ClassifiedReport",
    "CycleState",
    "FeatureVector",
    "ForestModel",
    "ForestParams",
    "ImageText",
    "Indicator",
    "Instance",
    "KeywordCandidate",
    "Metrics",
    "PipelineConfig",
    "PostRecord",
    "Projection",
    "RankList",
    "ScreeningVerdict",
    "Standardizer",
    "SyntheticConfig",
    "Window",
    "assemble",
    "build_query_set",
    "categorize_user",
    "classify_defang_form",
    "compute_pmi",
    "compute_soa",
    "emit_feed",
    "evaluate",
    "extract_indicators",
    "fit_projection",
    "generate_synthetic",
    "load_posts",
    "predict",
    "promote_domain_to_url",
    "refang",
    "run_cycle",
    "screen",
    "screen_post",
    "select_keywords",
    "select_window",
    "share_distribution",
    "train",
    "train_model",
    "validate_domain",
    "validate_url",
]
