"""Per-window co-occurrence keyword mining via PMI and strength of association.

Probabilities are per-post document frequencies (a token counts once per
post) and logs are base 2. A token absent from a label class contributes a
PMI of exactly 0 for that class, so a token seen only in reports has
SoA equal to its report-side PMI.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import PostRecord

ProperNounProvider = Callable[[str, str], set[str]]

DEFAULT_SOA_THRESHOLD = 4.0
DEFAULT_TOP_K = 10

_EN_STOPWORDS = frozenset(
    {
        "the", "a", "an", "i", "we", "you", "he", "she", "it", "they", "my", "your",
        "our", "his", "her", "its", "their", "this", "that", "these", "those", "if",
        "in", "on", "at", "and", "but", "or", "so", "do", "did", "is", "are", "was",
        "were", "be", "been", "not", "no", "yes", "please", "also", "just", "got",
        "hi", "hello", "hey", "new", "today", "now", "here", "there", "what", "who",
        "when", "where", "why", "how", "dm", "rt",
    }
)

_EN_PROPER_RE = re.compile(r"[A-Z][A-Za-z0-9&'\-]*")
_KATAKANA_RE = re.compile(r"[ァ-ヺー]{2,}")


def default_proper_nouns(text: str, lang: str) -> set[str]:
    """Heuristic provider: capitalized runs (en), katakana and Latin brand
    runs (ja). Any callable with this signature can replace it."""
    if lang == "ja":
        tokens = set(_KATAKANA_RE.findall(text))
        # Latin brand tokens embedded in unspaced Japanese text.
        for m in _EN_PROPER_RE.finditer(text):
            if m.group(0).lower() not in _EN_STOPWORDS:
                tokens.add(m.group(0))
        return tokens
    return _latin_runs(text)


def _latin_runs(text: str) -> set[str]:
    # Maximal runs of capitalized words joined into one token ("American
    # Express"); leading/trailing stopwords are trimmed off the run.
    tokens: set[str] = set()
    words = [w.lstrip("#@").strip(".,!?:;()[]{}\"'") for w in text.split()]
    i = 0
    while i < len(words):
        if _EN_PROPER_RE.fullmatch(words[i]):
            j = i + 1
            while j < len(words) and _EN_PROPER_RE.fullmatch(words[j]):
                j += 1
            run = words[i:j]
            while run and run[0].lower() in _EN_STOPWORDS:
                run.pop(0)
            while run and run[-1].lower() in _EN_STOPWORDS:
                run.pop()
            if run:
                tokens.add(" ".join(run))
            i = j
        else:
            i += 1
    return tokens


@dataclass(frozen=True)
class KeywordCandidate:
    token: str
    lang: str
    pmi_pos: float
    pmi_neg: float
    soa: float
    support: int
    window_end: int

    def to_json(self) -> dict:
        return {
            "token": self.token,
            "lang": self.lang,
            "pmi_pos": self.pmi_pos,
            "pmi_neg": self.pmi_neg,
            "soa": self.soa,
            "support": self.support,
            "window_end": self.window_end,
        }


@dataclass
class WindowCounts:
    """Document-frequency counts for one window."""

    n_posts: int
    n_pos: int
    n_neg: int
    token_counts: dict[str, int]
    token_pos_counts: dict[str, int]
    token_langs: dict[str, str]

    def count(self, token: str) -> int:
        return self.token_counts[token]

    def count_label(self, token: str, label: bool) -> int:
        pos = self.token_pos_counts.get(token, 0)
        return pos if label else self.token_counts[token] - pos


def build_window_counts(
    posts: Sequence[PostRecord],
    labels: Sequence[bool],
    provider: ProperNounProvider = default_proper_nouns,
) -> WindowCounts:
    if len(posts) != len(labels):
        raise ValueError("labels must align with posts")
    token_counts: dict[str, int] = {}
    token_pos: dict[str, int] = {}
    token_langs: dict[str, str] = {}
    n_pos = 0
    for post, label in zip(posts, labels):
        if label:
            n_pos += 1
        for token in sorted(provider(post.text, post.lang)):
            token_counts[token] = token_counts.get(token, 0) + 1
            if label:
                token_pos[token] = token_pos.get(token, 0) + 1
            token_langs.setdefault(token, post.lang)
    return WindowCounts(
        n_posts=len(posts),
        n_pos=n_pos,
        n_neg=len(posts) - n_pos,
        token_counts=token_counts,
        token_pos_counts=token_pos,
        token_langs=token_langs,
    )


def compute_pmi(counts: WindowCounts, token: str, label: bool) -> float:
    """log2(P(token,label) / (P(token) P(label))); exactly 0 when the token
    never co-occurs with the label."""
    if counts.n_posts <= 0:
        raise ValueError("window contains no posts")
    if token not in counts.token_counts:
        raise KeyError(token)
    joint = counts.count_label(token, label)
    if joint == 0:
        return 0.0
    n = counts.n_posts
    n_label = counts.n_pos if label else counts.n_neg
    return math.log2((joint / n) / ((counts.count(token) / n) * (n_label / n)))


def compute_soa(counts: WindowCounts, token: str) -> float:
    return compute_pmi(counts, token, True) - compute_pmi(counts, token, False)


def select_keywords(
    posts: Sequence[PostRecord],
    labels: Sequence[bool],
    threshold: float = DEFAULT_SOA_THRESHOLD,
    top_k: int = DEFAULT_TOP_K,
    window_end: int = 0,
    provider: ProperNounProvider = default_proper_nouns,
) -> list[KeywordCandidate]:
    """Tokens with SoA above the threshold, strongest first, at most top_k.

    Ties sort by support descending then token; the result is invariant
    under post reordering.
    """
    if not posts:
        return []
    counts = build_window_counts(posts, labels, provider)
    candidates: list[KeywordCandidate] = []
    for token in counts.token_counts:
        pmi_pos = compute_pmi(counts, token, True)
        pmi_neg = compute_pmi(counts, token, False)
        soa = pmi_pos - pmi_neg
        if soa > threshold:
            candidates.append(
                KeywordCandidate(
                    token=token,
                    lang=counts.token_langs[token],
                    pmi_pos=pmi_pos,
                    pmi_neg=pmi_neg,
                    soa=soa,
                    support=counts.count(token),
                    window_end=window_end,
                )
            )
    candidates.sort(key=lambda c: (-c.soa, -c.support, c.token))
    return candidates[:top_k]
