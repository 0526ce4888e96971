"""Drop legitimate or stale indicators; annotate shortener/dynamic-DNS use.

Screening is deterministic given a fixed ``now`` and fixture data. WHOIS is
fail-open: a lookup failure or a missing creation date keeps the indicator
and only annotates it, so live threats are never lost to infrastructure
hiccups.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import IO, Iterable, Mapping, Protocol

from .corpus import PostRecord
from .ioc import Indicator

REASON_RANK = "rank_allowlisted"
REASON_OLD = "too_old"
REASON_WHOIS_UNAVAILABLE = "whois_unavailable"
REASON_SHORTENER = "shortener"
REASON_DYNDNS = "dynamic_dns"

SECONDS_PER_DAY = 86_400
DEFAULT_MAX_AGE_DAYS = 365
DEFAULT_RANK_CUTOFF = 10_000


@dataclass(frozen=True)
class RankList:
    """Popularity ranks; entries at or under ``cutoff`` count as legitimate."""

    ranks: Mapping[str, int]
    cutoff: int = DEFAULT_RANK_CUTOFF

    def __post_init__(self) -> None:
        for domain, rank in self.ranks.items():
            if rank < 1:
                raise ValueError(f"rank for {domain!r} must be >= 1, got {rank}")

    def is_allowlisted(self, domain: str) -> bool:
        rank = self.ranks.get(domain.lower())
        return rank is not None and rank <= self.cutoff

    @classmethod
    def from_csv(cls, path_or_file: str | IO[str], cutoff: int = DEFAULT_RANK_CUTOFF) -> "RankList":
        """Parse ``rank,domain`` rows (the usual top-sites CSV layout)."""
        if hasattr(path_or_file, "read"):
            return cls(_parse_rank_rows(path_or_file), cutoff)  # type: ignore[arg-type]
        with open(path_or_file, encoding="utf-8") as fh:
            return cls(_parse_rank_rows(fh), cutoff)


def _parse_rank_rows(fh: Iterable[str]) -> dict[str, int]:
    ranks: dict[str, int] = {}
    for row in csv.reader(fh):
        if not row:
            continue
        rank, domain = int(row[0]), row[1].strip().lower()
        if domain in ranks:
            raise ValueError(f"duplicate rank entry for {domain!r}")
        ranks[domain] = rank
    return ranks


def load_domain_set(path_or_file: str | IO[str]) -> frozenset[str]:
    """Newline-delimited domain list (shorteners, dynamic-DNS providers)."""
    if hasattr(path_or_file, "read"):
        lines: Iterable[str] = path_or_file  # type: ignore[assignment]
        return frozenset(l.strip().lower() for l in lines if l.strip() and not l.startswith("#"))
    with open(path_or_file, encoding="utf-8") as fh:
        return frozenset(l.strip().lower() for l in fh if l.strip() and not l.startswith("#"))


class WhoisClient(Protocol):
    def creation_date(self, domain: str) -> datetime | None:
        """Creation date, or None when the record has none. May raise on
        lookup failure; both outcomes screen as whois_unavailable."""
        ...


class FixtureWhoisClient:
    """WHOIS backed by a ``domain -> ISO-8601 creation date`` map."""

    def __init__(self, dates: Mapping[str, str | datetime]):
        self._dates: dict[str, datetime] = {}
        for domain, value in dates.items():
            if isinstance(value, str):
                value = datetime.fromisoformat(value)
            if value.tzinfo is None:
                value = value.replace(tzinfo=timezone.utc)
            self._dates[domain.lower()] = value

    @classmethod
    def from_json(cls, path: str) -> "FixtureWhoisClient":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def creation_date(self, domain: str) -> datetime | None:
        return self._dates.get(domain.lower())


class NullWhoisClient:
    """Always unavailable; screening keeps everything it is asked about."""

    def creation_date(self, domain: str) -> datetime | None:
        return None


@dataclass(frozen=True)
class ScreeningVerdict:
    indicator: Indicator
    kept: bool
    reasons: tuple[str, ...] = ()
    domain_age_days: int | None = None

    def to_json(self) -> dict:
        return {
            "indicator": self.indicator.to_json(),
            "kept": self.kept,
            "reasons": list(self.reasons),
            "domain_age_days": self.domain_age_days,
        }


def screen(
    indicator: Indicator,
    ranks: RankList,
    shorteners: frozenset[str],
    dyndns: frozenset[str],
    whois: WhoisClient,
    now: int,
    max_age_days: int = DEFAULT_MAX_AGE_DAYS,
) -> ScreeningVerdict:
    """Apply the rank-list and domain-age exclusions to one indicator.

    Drops iff the registrable domain is allowlisted by rank (unless it is a
    known shortener) or its WHOIS creation date is more than ``max_age_days``
    whole days before ``now``. Shortener/dynamic-DNS membership is annotated,
    never a drop reason.
    """
    domain = indicator.registrable_domain
    reasons: list[str] = []
    is_shortener = domain in shorteners
    if is_shortener:
        reasons.append(REASON_SHORTENER)
    if domain in dyndns:
        reasons.append(REASON_DYNDNS)

    if ranks.is_allowlisted(domain) and not is_shortener:
        reasons.append(REASON_RANK)
        return ScreeningVerdict(indicator, kept=False, reasons=tuple(reasons))

    age_days: int | None = None
    try:
        created = whois.creation_date(domain)
    except Exception:
        created = None
    if created is None:
        reasons.append(REASON_WHOIS_UNAVAILABLE)
    else:
        age_days = int((now - created.timestamp()) // SECONDS_PER_DAY)
        if age_days > max_age_days:
            reasons.append(REASON_OLD)
            return ScreeningVerdict(indicator, kept=False, reasons=tuple(reasons), domain_age_days=age_days)

    return ScreeningVerdict(indicator, kept=True, reasons=tuple(reasons), domain_age_days=age_days)


def promote_domain_to_url(indicator: Indicator) -> Indicator:
    """Give a bare-domain indicator an https URL form; provenance unchanged."""
    if indicator.is_url:
        raise ValueError(f"indicator {indicator.normalized_url!r} is already a URL")
    return replace(indicator, normalized_url=f"https://{indicator.host}/")


def screen_post(
    post: PostRecord,
    indicators: Iterable[Indicator],
    ranks: RankList,
    shorteners: frozenset[str],
    dyndns: frozenset[str],
    whois: WhoisClient,
    now: int,
    max_age_days: int = DEFAULT_MAX_AGE_DAYS,
) -> tuple[list[Indicator], bool]:
    """Screen a post's indicators from both sources.

    Returns the surviving indicators deduplicated by normalized URL and an
    exclusion flag that is True when nothing survived in either source.
    """
    survivors: list[Indicator] = []
    seen: set[str] = set()
    for indicator in indicators:
        verdict = screen(indicator, ranks, shorteners, dyndns, whois, now, max_age_days)
        if not verdict.kept:
            continue
        if indicator.normalized_url in seen:
            continue
        seen.add(indicator.normalized_url)
        survivors.append(indicator)
    return survivors, not survivors
