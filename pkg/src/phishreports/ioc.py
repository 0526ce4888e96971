"""Defang normalization and URL/domain indicator extraction.

Everything here is a pure function over text; inputs are NFC-normalized
before matching so that raw spans index the normalized string. Japanese
full-width dots are treated as dots.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from typing import Callable

from .psl import PublicSuffixList

SOURCE_TEXT = "text"
SOURCE_IMAGE = "image"

#: One-hot layout order for the defang feature block.
DEFANG_FORMS = (
    "space_dot",
    "bracket_dot",
    "paren_dot",
    "brace_dot",
    "backslash_dot",
    "hxxp_lower",
    "hXXp_mixed",
    "bracket_colon",
    "bracket_slash",
)

DEFANG_NONE = "none"

# Classification precedence when several forms co-occur in one raw match.
_FORM_PRECEDENCE = (
    "hxxp_lower",
    "hXXp_mixed",
    "bracket_colon",
    "bracket_slash",
    "bracket_dot",
    "paren_dot",
    "brace_dot",
    "backslash_dot",
    "space_dot",
)

_FORM_SIGNATURES: dict[str, re.Pattern[str]] = {
    "hxxp_lower": re.compile(r"hxxp"),
    "hXXp_mixed": re.compile(r"[hH][xX][xX][pP]"),
    "bracket_colon": re.compile(r"\[:\]"),
    "bracket_slash": re.compile(r"\[/\]"),
    "bracket_dot": re.compile(r"\[ ?\. ?\]"),
    "paren_dot": re.compile(r"\( ?\. ?\)"),
    "brace_dot": re.compile(r"\{ ?\. ?\}"),
    "backslash_dot": re.compile(r"\\+\."),
    "space_dot": re.compile(r"[A-Za-z0-9] \."),
}


@dataclass(frozen=True)
class Indicator:
    """One extracted URL or bare-domain indicator."""

    raw: str
    normalized_url: str
    source: str
    host: str
    registrable_domain: str
    tld: str
    is_url: bool
    defang_form: str = DEFANG_NONE
    image_id: str | None = None

    def to_json(self) -> dict:
        return {
            "raw": self.raw,
            "normalized_url": self.normalized_url,
            "source": self.source,
            "image_id": self.image_id,
            "defang_form": self.defang_form,
            "host": self.host,
            "registrable_domain": self.registrable_domain,
            "tld": self.tld,
            "is_url": self.is_url,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Indicator":
        return cls(
            raw=obj["raw"],
            normalized_url=obj["normalized_url"],
            source=obj["source"],
            image_id=obj.get("image_id"),
            defang_form=obj.get("defang_form", DEFANG_NONE),
            host=obj["host"],
            registrable_domain=obj["registrable_domain"],
            tld=obj["tld"],
            is_url=obj["is_url"],
        )


# --- refang -----------------------------------------------------------------


def _valid_label(label: str) -> bool:
    if not 1 <= len(label) <= 63:
        return False
    if label[0] == "-" or label[-1] == "-":
        return False
    return all(ch.isascii() and (ch.isalnum() or ch == "-") for ch in label)


def _space_dot_repl(m: re.Match[str]) -> str:
    text = m.string
    left = re.search(r"[A-Za-z0-9-]+$", text[: m.start()])
    right = re.match(r"[A-Za-z0-9-]+", text[m.end() :])
    if left and right and _valid_label(left.group(0)) and _valid_label(right.group(0)):
        return "."
    return m.group(0)


_Repl = str | Callable[[re.Match[str]], str]

# Rewrite order matters: the colon defang must be restored before the scheme
# lookahead can see "://", and the trailing "[/]" removal must precede the
# generic "[/]" rewrite.
_REFANG_RULES: tuple[tuple[re.Pattern[str], _Repl], ...] = (
    (re.compile("\uFF0E"), "."),
    (re.compile(r"\[:\](?=//)"), ":"),
    (re.compile(r"\b[hH][xX][xX][pP]([sS]?)(?=://)"), lambda m: "http" + m.group(1).lower()),
    (re.compile(r" ?\[ ?\. ?\] ?"), "."),
    (re.compile(r" ?\( ?\. ?\) ?"), "."),
    (re.compile(r" ?\{ ?\. ?\} ?"), "."),
    (re.compile(r"\\+\."), "."),
    (re.compile(r"\[/\](?=\s|$)"), ""),
    (re.compile(r"\[/\]"), "/"),
    (re.compile(r"(?<=[A-Za-z0-9]) \. ?(?=[A-Za-z0-9])"), _space_dot_repl),
)


def refang(text: str) -> str:
    """Rewrite every defang pattern to its plain form; idempotent.

    The rule set runs to a fixed point so nested renderings ("[[.]]",
    a backslash inside brackets) fully unwrap. Termination is guaranteed:
    every effective rewrite shrinks the text or consumes a scheme pattern.
    """
    out = unicodedata.normalize("NFC", text)
    while True:
        new = out
        for pattern, repl in _REFANG_RULES:
            new = pattern.sub(repl, new)
        if new == out:
            return out
        out = new


def _refang_spans(norm: str) -> tuple[str, list[int], list[tuple[int, int]]]:
    """Refang with an offset map back into ``norm``.

    Returns (refanged, posmap, removed) where posmap[i] is the index in
    ``norm`` where refanged[i] begins (posmap[len] == len(norm)) and removed
    lists original spans deleted outright (trailing "[/]").
    """
    text = norm
    posmap = list(range(len(norm) + 1))
    removed: list[tuple[int, int]] = []
    while True:
        text, posmap, changed = _refang_pass(text, posmap, removed)
        if not changed:
            return text, posmap, removed


def _refang_pass(
    text: str, posmap: list[int], removed: list[tuple[int, int]]
) -> tuple[str, list[int], bool]:
    any_change = False
    for pattern, repl in _REFANG_RULES:
        out: list[str] = []
        outmap: list[int] = []
        last = 0
        changed = False
        for m in pattern.finditer(text):
            a, b = m.span()
            rep = repl(m) if callable(repl) else m.expand(repl)
            if rep == m.group(0):
                continue
            changed = True
            out.append(text[last:a])
            outmap.extend(posmap[last:a])
            out.append(rep)
            outmap.extend([posmap[a]] * len(rep))
            if not rep:
                removed.append((posmap[a], posmap[b]))
            last = b
        if not changed:
            continue
        any_change = True
        out.append(text[last : len(text)])
        outmap.extend(posmap[last : len(text)])
        outmap.append(posmap[len(text)])
        text = "".join(out)
        posmap = outmap
    return text, posmap, any_change


def classify_defang_form(raw: str) -> str:
    """First matching form by the fixed precedence order; ``none`` if plain."""
    for form in _FORM_PRECEDENCE:
        if form == "hXXp_mixed":
            m = _FORM_SIGNATURES[form].search(raw)
            if m and m.group(0) != "hxxp":
                return form
            continue
        if _FORM_SIGNATURES[form].search(raw):
            return form
    return DEFANG_NONE


# --- validation -------------------------------------------------------------

BAD_SCHEME = "bad_scheme"
BAD_HOST = "bad_host"
BAD_CHAR = "bad_char"


@dataclass(frozen=True)
class UrlValidation:
    ok: bool
    reason: str | None = None
    scheme: str = ""
    userinfo: str = ""
    host: str = ""
    port: int | None = None
    path: str = ""
    query: str | None = None

    @property
    def normalized(self) -> str:
        auth = f"{self.userinfo}@" if self.userinfo else ""
        port = f":{self.port}" if self.port is not None else ""
        path = self.path or "/"
        query = f"?{self.query}" if self.query is not None else ""
        return f"{self.scheme}://{auth}{self.host}{port}{path}{query}"


@dataclass(frozen=True)
class DomainValidation:
    ok: bool
    reason: str | None = None


_SCHEME_RE = re.compile(r"^([A-Za-z][A-Za-z0-9+.\-]*)://")
_HOST_CHARS_RE = re.compile(r"^[A-Za-z0-9.\-]+$")
_USERINFO_CHARS_RE = re.compile(r"^[A-Za-z0-9._~%!$&'()*+,;=:\-]*$")
_PATH_BAD_CHARS_RE = re.compile(r"[\s<>\"{}|\\^`\x00-\x1f]")


def validate_url(s: str) -> UrlValidation:
    """Structural acceptance of absolute http/https URLs.

    Rejections carry one of the reasons bad_scheme, bad_host, bad_char. Host
    label grammar is checked separately by :func:`validate_domain`.
    """
    m = _SCHEME_RE.match(s)
    if not m:
        return UrlValidation(ok=False, reason=BAD_SCHEME)
    scheme = m.group(1).lower()
    if scheme not in ("http", "https"):
        return UrlValidation(ok=False, reason=BAD_SCHEME)
    rest = s[m.end() :]
    frag_split = rest.split("#", 1)[0]
    authority, sep, tail = frag_split.partition("/")
    path = sep + tail if sep else ""
    if "?" in authority:
        authority, _, q = authority.partition("?")
        path, query = "", q
    elif "?" in path:
        path, _, query = path.partition("?")
    else:
        query = None
    if not authority:
        return UrlValidation(ok=False, reason=BAD_HOST)
    userinfo = ""
    hostport = authority
    if "@" in authority:
        userinfo, _, hostport = authority.rpartition("@")
        if not _USERINFO_CHARS_RE.match(userinfo):
            return UrlValidation(ok=False, reason=BAD_CHAR)
    port: int | None = None
    host = hostport
    if ":" in hostport:
        host, _, port_s = hostport.partition(":")
        if not port_s.isdigit():
            return UrlValidation(ok=False, reason=BAD_CHAR)
        port = int(port_s)
    if not host:
        return UrlValidation(ok=False, reason=BAD_HOST)
    if not _HOST_CHARS_RE.match(host):
        return UrlValidation(ok=False, reason=BAD_CHAR)
    if _PATH_BAD_CHARS_RE.search(path) or (query is not None and _PATH_BAD_CHARS_RE.search(query)):
        return UrlValidation(ok=False, reason=BAD_CHAR)
    return UrlValidation(
        ok=True,
        scheme=scheme,
        userinfo=userinfo,
        host=host.lower(),
        port=port,
        path=path,
        query=query,
    )


EMPTY_LABEL = "empty_label"
LABEL_TOO_LONG = "label_too_long"
NAME_TOO_LONG = "name_too_long"
BAD_HYPHEN = "bad_hyphen"
TOO_FEW_LABELS = "too_few_labels"
BAD_TLD = "bad_tld"

_LABEL_CHARS_RE = re.compile(r"^[A-Za-z0-9\-]+$")


def validate_domain(s: str) -> DomainValidation:
    """RFC 1035 name shape: label and total lengths, hyphen placement,
    at least two labels, alphabetic TLD."""
    if not s:
        return DomainValidation(ok=False, reason=EMPTY_LABEL)
    if len(s) > 253:
        return DomainValidation(ok=False, reason=NAME_TOO_LONG)
    labels = s.split(".")
    if len(labels) < 2:
        return DomainValidation(ok=False, reason=TOO_FEW_LABELS)
    for label in labels:
        if not label:
            return DomainValidation(ok=False, reason=EMPTY_LABEL)
        if len(label) > 63:
            return DomainValidation(ok=False, reason=LABEL_TOO_LONG)
        if not _LABEL_CHARS_RE.match(label):
            return DomainValidation(ok=False, reason=BAD_CHAR)
        if label[0] == "-" or label[-1] == "-":
            return DomainValidation(ok=False, reason=BAD_HYPHEN)
    tld = labels[-1]
    if not tld.isalpha() or not tld.isascii():
        return DomainValidation(ok=False, reason=BAD_TLD)
    return DomainValidation(ok=True)


# --- extraction -------------------------------------------------------------

_URL_RE = re.compile(r"(?i)\bhttps?://[^\s<>\"'\u3000]+")
_DOMAIN_RE = re.compile(
    r"(?<![A-Za-z0-9.\-])"
    r"(?:[A-Za-z0-9](?:[A-Za-z0-9\-]{0,61}[A-Za-z0-9])?\.)+"
    r"[A-Za-z]{2,63}"
    r"(?![A-Za-z0-9\-])"
)

_TRAILING_JUNK = ".,;:!?'\")]}>\u300d\u300f\u3002\u3001\uff01\uff1f\u2026"


def _trim_trailing(candidate: str) -> str:
    while candidate and candidate[-1] in _TRAILING_JUNK:
        if candidate[-1] == ")" and candidate.count("(") >= candidate.count(")"):
            break
        candidate = candidate[:-1]
    return candidate


def _raw_slice(
    norm: str, posmap: list[int], removed: list[tuple[int, int]], a: int, b: int
) -> str:
    start, end = posmap[a], posmap[b]
    for r_start, r_end in removed:
        if end == r_start:
            end = r_end
    return norm[start:end].strip()


def extract_indicators(
    text: str,
    source: str = SOURCE_TEXT,
    image_id: str | None = None,
    psl: PublicSuffixList | None = None,
) -> list[Indicator]:
    """Extract URL and bare-domain indicators after refanging.

    Returns one Indicator per distinct normalized URL and per bare-domain
    match not inside a URL; each carries the defang form observed in the raw
    text. Hosts always satisfy :func:`validate_domain`.
    """
    if not text:
        return []
    psl = psl or PublicSuffixList.bundled()
    norm = unicodedata.normalize("NFC", text)
    refanged, posmap, removed = _refang_spans(norm)

    indicators: list[Indicator] = []
    seen: set[str] = set()
    url_spans: list[tuple[int, int]] = []

    for m in _URL_RE.finditer(refanged):
        a, b = m.span()
        candidate = _trim_trailing(m.group(0))
        if not candidate:
            continue
        b = a + len(candidate)
        # Anything scheme-shaped blocks bare-domain matches inside its span,
        # valid or not.
        url_spans.append((a, m.end()))
        parts = validate_url(candidate)
        if not parts.ok or not validate_domain(parts.host).ok:
            continue
        normalized = parts.normalized
        if normalized in seen:
            continue
        seen.add(normalized)
        raw = _raw_slice(norm, posmap, removed, a, b)
        indicators.append(
            Indicator(
                raw=raw,
                normalized_url=normalized,
                source=source,
                image_id=image_id,
                defang_form=classify_defang_form(raw),
                host=parts.host,
                registrable_domain=psl.registrable_domain(parts.host),
                tld=parts.host.rsplit(".", 1)[-1],
                is_url=True,
            )
        )

    for m in _DOMAIN_RE.finditer(refanged):
        a, b = m.span()
        if any(ua <= a < ub or ua < b <= ub for ua, ub in url_spans):
            continue
        if a > 0 and refanged[a - 1] == "@":
            continue
        if b < len(refanged) and refanged[b] == "@":
            continue
        host = m.group(0).lower()
        if not validate_domain(host).ok:
            continue
        normalized = f"https://{host}/"
        if normalized in seen:
            continue
        seen.add(normalized)
        raw = _raw_slice(norm, posmap, removed, a, b)
        indicators.append(
            Indicator(
                raw=raw,
                normalized_url=normalized,
                source=source,
                image_id=image_id,
                defang_form=classify_defang_form(raw),
                host=host,
                registrable_domain=psl.registrable_domain(host),
                tld=host.rsplit(".", 1)[-1],
                is_url=False,
            )
        )

    return indicators


def extract_post_indicators(post, psl: PublicSuffixList | None = None) -> list[Indicator]:
    """All indicators of a post: its text, then each image's extracted text."""
    found = extract_indicators(post.text, SOURCE_TEXT, psl=psl)
    for image in post.image_texts:
        if image.text:
            found.extend(extract_indicators(image.text, SOURCE_IMAGE, image_id=image.image_id, psl=psl))
    return found
