"""Per-instance feature vectors: content, URL, OCR, visual, and context blocks.

A classification instance is (post x image x indicator): posts with k >= 1
images yield k instances per indicator, posts without images one instance
per indicator. Instances without an image carry all-zero OCR and visual
blocks. Embedding providers are pluggable; the default is a deterministic
character-n-gram hashing embedder standing in for the neural models.
"""
from __future__ import annotations

import hashlib
import logging
import unicodedata
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from .corpus import PostRecord
from .ioc import DEFANG_FORMS, Indicator

logger = logging.getLogger(__name__)

#: TLD one-hot vocabulary, in feature-layout order.
TLD_VOCAB = ("com", "org", "top", "info", "xyz", "online", "net", "shop", "cn", "vip")

CONTENT_DIM = 4 + len(DEFANG_FORMS)  # 13
URL_DIM = 3 + len(TLD_VOCAB)  # 13
OCR_DIM = 4
BASE_DIM = CONTENT_DIM + URL_DIM + OCR_DIM  # 30

DEFAULT_VISUAL_RAW_DIM = 1280
DEFAULT_CONTEXT_RAW_DIM = 768
DEFAULT_VISUAL_DIM = 16
DEFAULT_CONTEXT_DIM = 55
DEFAULT_TARGET_RATIO = 0.99


@dataclass(frozen=True)
class Instance:
    """One classification unit; label is the post-level ground truth."""

    post_id: str
    indicator: Indicator
    image_id: str | None = None
    label: bool | None = None


@dataclass
class FeatureVector:
    content: np.ndarray
    url: np.ndarray
    ocr: np.ndarray
    visual: np.ndarray
    context: np.ndarray
    schema_version: int = 1

    def concat(self) -> np.ndarray:
        return np.concatenate([self.content, self.url, self.ocr, self.visual, self.context])

    @property
    def dim(self) -> int:
        return BASE_DIM + len(self.visual) + len(self.context)


# --- counting helpers ---------------------------------------------------------


def word_count(text: str, lang: str) -> int:
    """Whitespace tokens for en; maximal non-punctuation runs for ja."""
    if lang == "ja":
        runs = 0
        in_run = False
        for ch in text:
            boundary = ch.isspace() or unicodedata.category(ch).startswith("P")
            if boundary:
                in_run = False
            elif not in_run:
                runs += 1
                in_run = True
        return runs
    return len(text.split())


def symbol_count(text: str) -> int:
    """Characters that are neither letters, digits, nor whitespace."""
    return sum(1 for ch in text if not (ch.isalpha() or ch.isdigit() or ch.isspace()))


def digit_count(text: str) -> int:
    return sum(1 for ch in text if ch.isdigit())


# --- feature blocks -----------------------------------------------------------


def content_features(post: PostRecord, instance: Instance) -> np.ndarray:
    """[chars, words, hashtags, images] + defang one-hot (all zero when plain)."""
    vec = np.zeros(CONTENT_DIM)
    vec[0] = len(post.text)
    vec[1] = word_count(post.text, post.lang)
    vec[2] = len(post.hashtags)
    vec[3] = len(post.image_texts)
    form = instance.indicator.defang_form
    if form in DEFANG_FORMS:
        vec[4 + DEFANG_FORMS.index(form)] = 1.0
    return vec


def url_features(indicator: Indicator) -> np.ndarray:
    """[URL chars, FQDN chars, digits] + TLD one-hot (zeros outside the vocab).

    Counts are measured on the normalized URL; the defanged rendering is
    already captured by the defang one-hot.
    """
    vec = np.zeros(URL_DIM)
    vec[0] = len(indicator.normalized_url)
    vec[1] = len(indicator.host)
    vec[2] = digit_count(indicator.normalized_url)
    if indicator.tld in TLD_VOCAB:
        vec[3 + TLD_VOCAB.index(indicator.tld)] = 1.0
    return vec


def ocr_features(instance: Instance, post: PostRecord) -> np.ndarray:
    """[chars, words, symbols, digits] of the instance's image text; zeros
    when there is no image or no extracted text."""
    vec = np.zeros(OCR_DIM)
    if instance.image_id is None:
        return vec
    text = post.image_text_for(instance.image_id)
    if not text:
        return vec
    vec[0] = len(text)
    vec[1] = word_count(text, post.lang)
    vec[2] = symbol_count(text)
    vec[3] = digit_count(text)
    return vec


# --- embedding providers ------------------------------------------------------


class TextEmbedder(Protocol):
    dim: int

    def embed_text(self, text: str) -> np.ndarray: ...


class ImageEmbedder(Protocol):
    dim: int

    def embed_image(self, image_id: str) -> np.ndarray: ...


class HashingEmbedder:
    """Deterministic character-n-gram hashing into signed buckets.

    The same input always maps to the same L2-normalized vector, across
    processes and platforms (keyed blake2b, never the builtin hash()).
    """

    def __init__(self, dim: int, seed: int = 0, ngram_sizes: tuple[int, ...] = (1, 2, 3)):
        if dim < 1:
            raise ValueError("embedding dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self.ngram_sizes = ngram_sizes
        self._key = seed.to_bytes(8, "little", signed=True)

    def _vector(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        data = unicodedata.normalize("NFC", text)
        if not data:
            return vec
        for n in self.ngram_sizes:
            if len(data) < n:
                continue
            for i in range(len(data) - n + 1):
                digest = hashlib.blake2b(
                    data[i : i + n].encode("utf-8"), digest_size=8, key=self._key
                ).digest()
                value = int.from_bytes(digest, "little")
                bucket = value % self.dim
                sign = 1.0 if (value >> 32) & 1 else -1.0
                vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return vec

    def embed_text(self, text: str) -> np.ndarray:
        return self._vector(text)

    def embed_image(self, image_id: str) -> np.ndarray:
        return self._vector(f"img:{image_id}")


@dataclass(frozen=True)
class FeatureProviders:
    visual: ImageEmbedder
    context: TextEmbedder


def default_providers(
    visual_raw_dim: int = DEFAULT_VISUAL_RAW_DIM,
    context_raw_dim: int = DEFAULT_CONTEXT_RAW_DIM,
    seed: int = 0,
) -> FeatureProviders:
    return FeatureProviders(
        visual=HashingEmbedder(visual_raw_dim, seed=seed),
        context=HashingEmbedder(context_raw_dim, seed=seed + 1),
    )


def embed_visual(image_id: str | None, provider: ImageEmbedder) -> np.ndarray:
    """Raw visual vector; zeros (with a warning) for absent or unknown images."""
    if image_id is None:
        return np.zeros(provider.dim)
    try:
        return provider.embed_image(image_id)
    except KeyError:
        logger.warning("visual provider has no image %r; using zero vector", image_id)
        return np.zeros(provider.dim)


def embed_context(text: str, provider: TextEmbedder) -> np.ndarray:
    return provider.embed_text(text)


# --- projection and standardization -------------------------------------------


@dataclass
class Projection:
    """Centered truncated-SVD projection with orthonormal components."""

    mean: np.ndarray
    components: np.ndarray  # (raw_dim, out_dim)
    explained_variance_ratio: np.ndarray

    @property
    def out_dim(self) -> int:
        return self.components.shape[1]

    def transform(self, rows: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(rows) - self.mean) @ self.components

    def to_json(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Projection":
        return cls(
            mean=np.asarray(obj["mean"], dtype=float),
            components=np.asarray(obj["components"], dtype=float),
            explained_variance_ratio=np.asarray(obj["explained_variance_ratio"], dtype=float),
        )


def fit_projection(
    matrix: np.ndarray,
    target_ratio: float = DEFAULT_TARGET_RATIO,
    max_dim: int | None = None,
) -> Projection:
    """Choose the smallest dimension whose cumulative variance ratio reaches
    the target, capped at ``max_dim`` and at the matrix rank.

    A matrix with no variance at all degenerates to a single constant
    component (the first basis vector), which projects everything to zero.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise ValueError("projection needs a 2-D matrix with at least 2 rows")
    mean = matrix.mean(axis=0)
    centered = matrix - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    variance = singular**2
    total = float(variance.sum())
    if total <= 0.0:
        components = np.zeros((matrix.shape[1], 1))
        components[0, 0] = 1.0
        return Projection(mean=mean, components=components, explained_variance_ratio=np.zeros(1))
    ratios = variance / total
    cumulative = np.cumsum(ratios)
    k = int(np.searchsorted(cumulative, target_ratio - 1e-12) + 1)
    rank = int((singular > singular[0] * 1e-12).sum())
    k = min(k, rank)
    if max_dim is not None:
        k = min(k, max_dim)
    k = max(k, 1)
    return Projection(
        mean=mean,
        components=vt[:k].T.copy(),
        explained_variance_ratio=ratios[:k].copy(),
    )


@dataclass
class Standardizer:
    """Column-wise zero-mean unit-variance scaling; constant columns pass
    through (their fitted deviation is replaced by 1)."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, matrix: np.ndarray) -> "Standardizer":
        matrix = np.asarray(matrix, dtype=float)
        mean = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        std = np.where(std == 0.0, 1.0, std)
        return cls(mean=mean, std=std)

    def transform(self, rows: np.ndarray) -> np.ndarray:
        return (np.asarray(rows, dtype=float) - self.mean) / self.std

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Standardizer":
        return cls(mean=np.asarray(obj["mean"], dtype=float), std=np.asarray(obj["std"], dtype=float))


@dataclass
class ProjectionPair:
    visual: Projection
    context: Projection

    def to_json(self) -> dict:
        return {"visual": self.visual.to_json(), "context": self.context.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "ProjectionPair":
        return cls(
            visual=Projection.from_json(obj["visual"]),
            context=Projection.from_json(obj["context"]),
        )


@dataclass(frozen=True)
class FeatureSchema:
    """Fixed layout of the assembled vector for one trained model."""

    visual_raw_dim: int
    context_raw_dim: int
    visual_dim: int
    context_dim: int
    embed_seed: int = 0
    schema_version: int = 1

    @property
    def total_dim(self) -> int:
        return BASE_DIM + self.visual_dim + self.context_dim

    def feature_names(self) -> list[str]:
        names = ["content_chars", "content_words", "content_hashtags", "content_images"]
        names += [f"content_defang_{form}" for form in DEFANG_FORMS]
        names += ["url_chars", "url_fqdn_chars", "url_digits"]
        names += [f"url_tld_{tld}" for tld in TLD_VOCAB]
        names += ["ocr_chars", "ocr_words", "ocr_symbols", "ocr_digits"]
        names += [f"visual_{i}" for i in range(self.visual_dim)]
        names += [f"context_{i}" for i in range(self.context_dim)]
        return names

    def to_json(self) -> dict:
        return {
            "visual_raw_dim": self.visual_raw_dim,
            "context_raw_dim": self.context_raw_dim,
            "visual_dim": self.visual_dim,
            "context_dim": self.context_dim,
            "embed_seed": self.embed_seed,
            "schema_version": self.schema_version,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureSchema":
        return cls(
            visual_raw_dim=obj["visual_raw_dim"],
            context_raw_dim=obj["context_raw_dim"],
            visual_dim=obj["visual_dim"],
            context_dim=obj["context_dim"],
            embed_seed=obj.get("embed_seed", 0),
            schema_version=obj.get("schema_version", 1),
        )


# --- assembly -----------------------------------------------------------------


def make_instances(
    post: PostRecord, indicators: Sequence[Indicator], label: bool | None = None
) -> list[Instance]:
    """Split a post into (indicator x image) instances."""
    instances: list[Instance] = []
    image_ids: list[str | None] = [img.image_id for img in post.image_texts] or [None]
    for indicator in indicators:
        for image_id in image_ids:
            instances.append(
                Instance(post_id=post.post_id, indicator=indicator, image_id=image_id, label=label)
            )
    return instances


def assemble(
    post: PostRecord,
    indicators: Sequence[Indicator],
    providers: FeatureProviders,
    projections: ProjectionPair,
    standardizer: Standardizer | None = None,
    label: bool | None = None,
) -> list[tuple[Instance, FeatureVector]]:
    """One feature vector per instance of the post.

    Pure given fitted artifacts: repeated calls return identical vectors.
    When a standardizer is supplied it scales whole concatenated vectors, so
    block-level invariants (one-hot sums, zero blocks) apply to raw output.
    """
    context_raw = embed_context(post.text, providers.context)
    context_block = projections.context.transform(context_raw)[0]
    out: list[tuple[Instance, FeatureVector]] = []
    visual_cache: dict[str, np.ndarray] = {}
    for instance in make_instances(post, indicators, label=label):
        if instance.image_id is None:
            visual_block = np.zeros(projections.visual.out_dim)
        else:
            if instance.image_id not in visual_cache:
                raw = embed_visual(instance.image_id, providers.visual)
                visual_cache[instance.image_id] = projections.visual.transform(raw)[0]
            visual_block = visual_cache[instance.image_id]
        vector = FeatureVector(
            content=content_features(post, instance),
            url=url_features(instance.indicator),
            ocr=ocr_features(instance, post),
            visual=visual_block.copy(),
            context=context_block.copy(),
        )
        if standardizer is not None:
            flat = standardizer.transform(vector.concat()[None, :])[0]
            vector = _split_blocks(flat, projections)
        out.append((instance, vector))
    return out


def _split_blocks(flat: np.ndarray, projections: ProjectionPair) -> FeatureVector:
    v = projections.visual.out_dim
    c = projections.context.out_dim
    i0, i1, i2 = CONTENT_DIM, CONTENT_DIM + URL_DIM, BASE_DIM
    return FeatureVector(
        content=flat[:i0],
        url=flat[i0:i1],
        ocr=flat[i1:i2],
        visual=flat[i2 : i2 + v],
        context=flat[i2 + v : i2 + v + c],
    )


def feature_matrix(vectors: Iterable[FeatureVector]) -> np.ndarray:
    rows = [v.concat() for v in vectors]
    if not rows:
        return np.zeros((0, 0))
    return np.vstack(rows)
