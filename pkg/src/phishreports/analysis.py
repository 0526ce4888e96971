"""Post-classification analytics: contributor categories, share
distributions, sharing-method and keyword tables, and the indicator feed.

All aggregations are pure folds over immutable report records and equal a
naive recount on any input.
"""
from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, replace
from importlib import resources
from typing import IO, Iterable, Mapping, Sequence

from .corpus import AuthorRecord
from .ioc import SOURCE_IMAGE, SOURCE_TEXT, Indicator

EXPERT = "expert"
NON_EXPERT = "non_expert"
UNCATEGORIZED = "uncategorized"

REASON_PROFILE = "profile_keyword"
REASON_RECENT = "recent_security_majority"


def default_security_terms() -> frozenset[str]:
    """Profile/recent-text matcher terms; hashtag markers are stripped so
    plain prose matches."""
    text = resources.files("phishreports").joinpath("data/profile_security_terms.txt").read_text("utf-8")
    return frozenset(line.strip().lstrip("#").lower() for line in text.splitlines() if line.strip())


@dataclass(frozen=True)
class UserCategory:
    author_id: str
    category: str
    reasons: tuple[str, ...] = ()


def categorize_user(author: AuthorRecord, security_terms: Iterable[str]) -> UserCategory:
    """Expert iff the profile carries a security term or strictly more than
    half of the recent texts do; otherwise non-expert."""
    terms = [t.lstrip("#").lower() for t in security_terms]
    reasons = []
    profile = author.profile_text.lower()
    if any(term in profile for term in terms):
        reasons.append(REASON_PROFILE)
    recent = [t.lower() for t in author.recent_texts]
    if recent:
        hits = sum(1 for text in recent if any(term in text for term in terms))
        if hits * 2 > len(recent):
            reasons.append(REASON_RECENT)
    category = EXPERT if reasons else NON_EXPERT
    return UserCategory(author_id=author.author_id, category=category, reasons=tuple(reasons))


@dataclass(frozen=True)
class ClassifiedReport:
    """One classified-positive post with its surviving indicators."""

    post_id: str
    author_id: str
    created_at: int
    lang: str
    score: float
    indicators: tuple[Indicator, ...]
    matched_keywords: tuple[str, ...] = ()
    hashtag_count: int = 0
    mention_count: int = 0
    category: str | None = None

    def urls(self) -> list[str]:
        return [ind.normalized_url for ind in self.indicators]

    def to_json(self) -> dict:
        return {
            "post_id": self.post_id,
            "author_id": self.author_id,
            "created_at": self.created_at,
            "lang": self.lang,
            "score": self.score,
            "indicators": [ind.to_json() for ind in self.indicators],
            "matched_keywords": list(self.matched_keywords),
            "hashtag_count": self.hashtag_count,
            "mention_count": self.mention_count,
            "category": self.category,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ClassifiedReport":
        return cls(
            post_id=obj["post_id"],
            author_id=obj["author_id"],
            created_at=obj["created_at"],
            lang=obj.get("lang", "en"),
            score=obj["score"],
            indicators=tuple(Indicator.from_json(i) for i in obj.get("indicators", ())),
            matched_keywords=tuple(obj.get("matched_keywords", ())),
            hashtag_count=obj.get("hashtag_count", 0),
            mention_count=obj.get("mention_count", 0),
            category=obj.get("category"),
        )


def assign_categories(
    reports: Sequence[ClassifiedReport],
    authors: Mapping[str, AuthorRecord],
    security_terms: Iterable[str] | None = None,
) -> list[ClassifiedReport]:
    terms = list(security_terms) if security_terms is not None else sorted(default_security_terms())
    cache: dict[str, str] = {}
    out = []
    for report in reports:
        if report.author_id not in cache:
            author = authors.get(report.author_id)
            cache[report.author_id] = (
                categorize_user(author, terms).category if author else UNCATEGORIZED
            )
        out.append(replace(report, category=cache[report.author_id]))
    return out


# --- distributions ------------------------------------------------------------

BY_USER = "by_user"
BY_URL = "by_url"


@dataclass(frozen=True)
class ShareDistribution:
    """Histogram of per-key share counts plus its CDF over keys."""

    histogram: dict[int, int]
    cdf: tuple[tuple[int, float], ...]

    def cdf_at(self, count: int) -> float:
        value = 0.0
        for k, cumulative in self.cdf:
            if k > count:
                break
            value = cumulative
        return value


def share_distribution(reports: Sequence[ClassifiedReport], key: str = BY_USER) -> ShareDistribution:
    counts: dict[str, int] = {}
    for report in reports:
        if key == BY_USER:
            counts[report.author_id] = counts.get(report.author_id, 0) + 1
        elif key == BY_URL:
            for url in set(report.urls()):
                counts[url] = counts.get(url, 0) + 1
        else:
            raise ValueError(f"unknown distribution key {key!r}")
    histogram: dict[int, int] = {}
    for value in counts.values():
        histogram[value] = histogram.get(value, 0) + 1
    total = sum(histogram.values())
    cdf: list[tuple[int, float]] = []
    cumulative = 0
    for share in sorted(histogram):
        cumulative += histogram[share]
        cdf.append((share, cumulative / total))
    return ShareDistribution(histogram=histogram, cdf=tuple(cdf))


@dataclass(frozen=True)
class SharingMethodStats:
    n_reports: int
    urls_in_images: int
    urls_in_texts: int
    image_share: float
    text_share: float
    hashtags_median: float
    hashtags_mean: float
    mentions_median: float
    mentions_mean: float
    empty: bool = False

    def to_json(self) -> dict:
        return self.__dict__.copy()


def _empty_stats() -> SharingMethodStats:
    return SharingMethodStats(0, 0, 0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, empty=True)


def sharing_method_stats(reports: Sequence[ClassifiedReport]) -> dict[str, SharingMethodStats]:
    """Per category: where URLs were found (image vs text) and hashtag and
    mention medians/means over reports."""
    grouped: dict[str, list[ClassifiedReport]] = {}
    for report in reports:
        grouped.setdefault(report.category or UNCATEGORIZED, []).append(report)
    out: dict[str, SharingMethodStats] = {}
    for category in sorted(grouped):
        group = grouped[category]
        if not group:
            out[category] = _empty_stats()
            continue
        in_images = sum(1 for r in group for ind in r.indicators if ind.source == SOURCE_IMAGE)
        in_texts = sum(1 for r in group for ind in r.indicators if ind.source == SOURCE_TEXT)
        total_urls = in_images + in_texts
        hashtags = [r.hashtag_count for r in group]
        mentions = [r.mention_count for r in group]
        out[category] = SharingMethodStats(
            n_reports=len(group),
            urls_in_images=in_images,
            urls_in_texts=in_texts,
            image_share=in_images / total_urls if total_urls else 0.0,
            text_share=in_texts / total_urls if total_urls else 0.0,
            hashtags_median=float(statistics.median(hashtags)),
            hashtags_mean=float(statistics.fmean(hashtags)),
            mentions_median=float(statistics.median(mentions)),
            mentions_mean=float(statistics.fmean(mentions)),
        )
    return out


@dataclass(frozen=True)
class KeywordStat:
    keyword: str
    kind: str  # "security" or "cooccurrence"
    n_reports: int


def keyword_effectiveness(
    reports: Sequence[ClassifiedReport],
    security_keywords: Iterable[str],
    top_k: int | None = 10,
) -> dict[str, list[KeywordStat]]:
    """Per category, keywords ranked by distinct reports collected.

    Ties break lexicographically. Keywords matching the security set (case
    and hashtag insensitive) are typed security, the rest cooccurrence.
    """
    security = {k.lstrip("#").lower() for k in security_keywords}
    per_category: dict[str, dict[str, set[str]]] = {}
    for report in reports:
        category = report.category or UNCATEGORIZED
        bucket = per_category.setdefault(category, {})
        for keyword in set(report.matched_keywords):
            bucket.setdefault(keyword, set()).add(report.post_id)
    out: dict[str, list[KeywordStat]] = {}
    for category in sorted(per_category):
        stats = [
            KeywordStat(
                keyword=keyword,
                kind="security" if keyword.lstrip("#").lower() in security else "cooccurrence",
                n_reports=len(post_ids),
            )
            for keyword, post_ids in per_category[category].items()
        ]
        stats.sort(key=lambda s: (-s.n_reports, s.keyword))
        out[category] = stats[:top_k] if top_k else stats
    return out


# --- feed ----------------------------------------------------------------------


@dataclass(frozen=True)
class FeedRecord:
    url: str
    first_seen: int
    last_seen: int
    shares: int
    sources: tuple[str, ...]
    flags: tuple[str, ...]
    categories: tuple[str, ...]
    detections: int | None = None

    def to_json(self) -> dict:
        return {
            "url": self.url,
            "first_seen": self.first_seen,
            "last_seen": self.last_seen,
            "shares": self.shares,
            "sources": list(self.sources),
            "flags": list(self.flags),
            "categories": list(self.categories),
            "detections": self.detections,
        }


def emit_feed(
    reports: Sequence[ClassifiedReport],
    annotations: Mapping[str, Iterable[str]] | None = None,
) -> list[FeedRecord]:
    """One record per unique URL across all reports, share counts included.

    ``annotations`` maps a normalized URL to screening flags (shortener,
    dynamic_dns) gathered when the indicator was screened.
    """
    annotations = annotations or {}
    merged: dict[str, dict] = {}
    for report in reports:
        for indicator in report.indicators:
            url = indicator.normalized_url
            entry = merged.setdefault(
                url,
                {
                    "first": report.created_at,
                    "last": report.created_at,
                    "shares": 0,
                    "sources": set(),
                    "categories": set(),
                },
            )
            entry["first"] = min(entry["first"], report.created_at)
            entry["last"] = max(entry["last"], report.created_at)
            entry["shares"] += 1
            entry["sources"].add(indicator.source)
            if report.category:
                entry["categories"].add(report.category)
    feed = [
        FeedRecord(
            url=url,
            first_seen=entry["first"],
            last_seen=entry["last"],
            shares=entry["shares"],
            sources=tuple(sorted(entry["sources"])),
            flags=tuple(sorted(set(annotations.get(url, ())))),
            categories=tuple(sorted(entry["categories"])),
        )
        for url, entry in merged.items()
    ]
    feed.sort(key=lambda r: (r.first_seen, r.url))
    return feed


def join_verdicts(feed: Sequence[FeedRecord], detections: Mapping[str, int]) -> list[FeedRecord]:
    """Offline engine-verdict join: attach a detection count per URL."""
    return [replace(record, detections=detections.get(record.url)) for record in feed]


# --- summary tables -------------------------------------------------------------


@dataclass(frozen=True)
class UserTypeSummary:
    n_users: int
    n_reports: int
    shares_min: int
    shares_median: float
    shares_mean: float
    shares_max: int

    def to_json(self) -> dict:
        return self.__dict__.copy()


def user_type_summary(reports: Sequence[ClassifiedReport]) -> dict[str, UserTypeSummary]:
    per_category: dict[str, dict[str, int]] = {}
    for report in reports:
        category = report.category or UNCATEGORIZED
        bucket = per_category.setdefault(category, {})
        bucket[report.author_id] = bucket.get(report.author_id, 0) + 1
    out = {}
    for category in sorted(per_category):
        counts = sorted(per_category[category].values())
        out[category] = UserTypeSummary(
            n_users=len(counts),
            n_reports=sum(counts),
            shares_min=counts[0],
            shares_median=float(statistics.median(counts)),
            shares_mean=float(statistics.fmean(counts)),
            shares_max=counts[-1],
        )
    return out


@dataclass(frozen=True)
class UrlCharacteristics:
    n_urls: int
    n_shortened: int
    shortened_share: float
    n_fqdns: int
    n_dyndns: int
    dyndns_share: float

    def to_json(self) -> dict:
        return self.__dict__.copy()


def url_characteristics(
    reports: Sequence[ClassifiedReport],
    shorteners: frozenset[str],
    dyndns: frozenset[str],
) -> dict[str, UrlCharacteristics]:
    """Per category: unique URLs/FQDNs and how many sit on shortener or
    dynamic-DNS registrable domains."""
    per_category: dict[str, dict[str, set]] = {}
    for report in reports:
        category = report.category or UNCATEGORIZED
        bucket = per_category.setdefault(category, {"urls": set(), "hosts": set(), "domains": {}})
        for indicator in report.indicators:
            bucket["urls"].add(indicator.normalized_url)
            bucket["hosts"].add(indicator.host)
            bucket["domains"][indicator.normalized_url] = indicator.registrable_domain
            bucket["domains"][indicator.host] = indicator.registrable_domain
    out = {}
    for category in sorted(per_category):
        bucket = per_category[category]
        urls, hosts, domains = bucket["urls"], bucket["hosts"], bucket["domains"]
        n_short = sum(1 for url in urls if domains[url] in shorteners)
        n_dyn = sum(1 for host in hosts if domains[host] in dyndns)
        out[category] = UrlCharacteristics(
            n_urls=len(urls),
            n_shortened=n_short,
            shortened_share=n_short / len(urls) if urls else 0.0,
            n_fqdns=len(hosts),
            n_dyndns=n_dyn,
            dyndns_share=n_dyn / len(hosts) if hosts else 0.0,
        )
    return out


def save_reports(reports: Iterable[ClassifiedReport], path_or_file: str | IO[str]) -> None:
    if hasattr(path_or_file, "write"):
        for report in reports:
            path_or_file.write(json.dumps(report.to_json(), ensure_ascii=False) + "\n")  # type: ignore[union-attr]
        return
    with open(path_or_file, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(json.dumps(report.to_json(), ensure_ascii=False) + "\n")


def load_reports(path_or_file: str | IO[str]) -> list[ClassifiedReport]:
    if hasattr(path_or_file, "read"):
        lines: Iterable[str] = path_or_file  # type: ignore[assignment]
        return [ClassifiedReport.from_json(json.loads(line)) for line in lines if line.strip()]
    with open(path_or_file, encoding="utf-8") as fh:
        return [ClassifiedReport.from_json(json.loads(line)) for line in fh if line.strip()]
