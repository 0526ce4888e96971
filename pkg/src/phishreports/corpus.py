"""Post/author data model, JSONL ingestion, window selection, synthetic corpora.

Records are immutable after load and safe to share across workers. Timestamps
are integer UTC seconds throughout.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from typing import IO, Iterable

LANGS = ("en", "ja")

#: 21 hours, the common lifetime of a single phishing wave.
DEFAULT_WINDOW_SECONDS = 75_600


class PostFileError(ValueError):
    """A post file line that cannot be accepted, carrying its line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class ImageText:
    """Provider-extracted text for one attached image; ``text=None`` means
    the image is present but nothing was extracted."""

    image_id: str
    text: str | None = None


@dataclass(frozen=True)
class PostRecord:
    post_id: str
    author_id: str
    created_at: int
    lang: str
    text: str
    hashtags: tuple[str, ...] = ()
    mentions: tuple[str, ...] = ()
    image_texts: tuple[ImageText, ...] = ()
    matched_keywords: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.post_id:
            raise ValueError("post_id must be nonempty")
        if self.created_at <= 0:
            raise ValueError(f"created_at must be > 0, got {self.created_at}")
        if self.lang not in LANGS:
            raise ValueError(f"lang must be one of {LANGS}, got {self.lang!r}")
        for tag in self.hashtags:
            if any(ch.isspace() for ch in tag):
                raise ValueError(f"hashtag contains whitespace: {tag!r}")
        for mention in self.mentions:
            if any(ch.isspace() for ch in mention):
                raise ValueError(f"mention contains whitespace: {mention!r}")

    def image_text_for(self, image_id: str) -> str | None:
        for entry in self.image_texts:
            if entry.image_id == image_id:
                return entry.text
        return None

    def to_json(self) -> dict:
        images = []
        for entry in self.image_texts:
            obj: dict = {"image_id": entry.image_id}
            if entry.text is not None:
                obj["text"] = entry.text
            images.append(obj)
        return {
            "post_id": self.post_id,
            "author_id": self.author_id,
            "created_at": self.created_at,
            "lang": self.lang,
            "text": self.text,
            "hashtags": list(self.hashtags),
            "mentions": list(self.mentions),
            "image_texts": images,
            "matched_keywords": list(self.matched_keywords),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PostRecord":
        required = ("post_id", "author_id", "created_at", "lang", "text")
        for key in required:
            if key not in obj:
                raise ValueError(f"missing field {key!r}")
        images = tuple(
            ImageText(image_id=item["image_id"], text=item.get("text"))
            for item in obj.get("image_texts", ())
        )
        return cls(
            post_id=obj["post_id"],
            author_id=obj["author_id"],
            created_at=int(obj["created_at"]),
            lang=obj["lang"],
            text=obj["text"],
            hashtags=tuple(obj.get("hashtags", ())),
            mentions=tuple(obj.get("mentions", ())),
            image_texts=images,
            matched_keywords=tuple(obj.get("matched_keywords", ())),
        )


@dataclass(frozen=True)
class AuthorRecord:
    author_id: str
    profile_text: str = ""
    recent_texts: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.recent_texts) > 10:
            raise ValueError("recent_texts holds at most 10 entries")

    def to_json(self) -> dict:
        return {
            "author_id": self.author_id,
            "profile_text": self.profile_text,
            "recent_texts": list(self.recent_texts),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AuthorRecord":
        return cls(
            author_id=obj["author_id"],
            profile_text=obj.get("profile_text", ""),
            recent_texts=tuple(obj.get("recent_texts", ())),
        )


@dataclass(frozen=True)
class Window:
    """Half-open collection interval ``[end - duration, end)``."""

    end: int
    duration: int = DEFAULT_WINDOW_SECONDS

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError("window duration must be > 0")

    @property
    def start(self) -> int:
        return self.end - self.duration

    def contains(self, ts: int) -> bool:
        return self.start <= ts < self.end


def load_posts(path_or_file: str | IO[str]) -> list[PostRecord]:
    """Parse a JSON-lines post file, preserving record order.

    Raises PostFileError naming the offending line for malformed records and
    for duplicate post ids.
    """
    if hasattr(path_or_file, "read"):
        return _parse_posts(path_or_file)  # type: ignore[arg-type]
    with open(path_or_file, encoding="utf-8") as fh:
        return _parse_posts(fh)


def _parse_posts(fh: Iterable[str]) -> list[PostRecord]:
    records: list[PostRecord] = []
    seen: set[str] = set()
    for line_no, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            record = PostRecord.from_json(obj)
        except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
            raise PostFileError(line_no, f"malformed post record ({exc})") from exc
        if record.post_id in seen:
            raise PostFileError(line_no, f"duplicate post_id {record.post_id!r}")
        seen.add(record.post_id)
        records.append(record)
    return records


def save_posts(records: Iterable[PostRecord], path_or_file: str | IO[str]) -> None:
    if hasattr(path_or_file, "write"):
        for record in records:
            path_or_file.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")  # type: ignore[union-attr]
        return
    with open(path_or_file, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")


def load_authors(path_or_file: str | IO[str]) -> list[AuthorRecord]:
    if hasattr(path_or_file, "read"):
        lines: Iterable[str] = path_or_file  # type: ignore[assignment]
        return [AuthorRecord.from_json(json.loads(line)) for line in lines if line.strip()]
    with open(path_or_file, encoding="utf-8") as fh:
        return [AuthorRecord.from_json(json.loads(line)) for line in fh if line.strip()]


def save_authors(records: Iterable[AuthorRecord], path_or_file: str | IO[str]) -> None:
    if hasattr(path_or_file, "write"):
        for record in records:
            path_or_file.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")  # type: ignore[union-attr]
        return
    with open(path_or_file, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")


def select_window(records: Iterable[PostRecord], window: Window) -> list[PostRecord]:
    """Records with ``window.start <= created_at < window.end``, order preserved."""
    return [r for r in records if window.contains(r.created_at)]


def build_query_set(security: Iterable[str], cooccur: Iterable[str]) -> list[str]:
    """Union of query keywords, security first, duplicates removed."""
    security = list(security)
    if not security:
        raise ValueError("security keyword list must be nonempty")
    queries: list[str] = []
    seen: set[str] = set()
    for keyword in list(security) + list(cooccur):
        if keyword not in seen:
            seen.add(keyword)
            queries.append(keyword)
    return queries


# --- synthetic corpus -------------------------------------------------------

PHISHY_TLDS = ("top", "xyz", "shop", "cn", "vip", "online", "info")
BENIGN_TLDS = ("com", "net", "org", "io", "me")

#: Applied round-robin to planted report URLs; ``none`` leaves the URL plain.
DEFANG_MIX = (
    "bracket_dot",
    "hxxp_lower",
    "paren_dot",
    "none",
    "hXXp_mixed",
    "space_dot",
    "brace_dot",
    "bracket_colon",
    "backslash_dot",
    "bracket_slash",
)

_REPORT_TEXT_TEMPLATES = (
    "Warning! Fake {brand} login page spotted at {url} do not enter your details #phishing #scam",
    "Got a smishing text pretending to be {brand}. Link goes to {url} stay safe folks #smishing",
    "PSA: {brand} phishing mail with {url} landed in my inbox today, reported as spam #security",
    "This {brand} account locked scam links to {url} block and report #phishing",
)

_REPORT_IMAGE_TEMPLATES = (
    (
        "Check this {brand} scam SMS I just got, screenshot attached #phishing",
        "From: {brand} Security. Your {brand} account is suspended! Verify now: {url} within 24h or it will be closed.",
    ),
    (
        "Is this {brand} mail legit?? Looks like a total scam to me #scam",
        "Dear customer, your {brand} payment failed. Update billing at {url} immediately! Ref 5529.",
    ),
)

_REPORT_TEXT_TEMPLATES_JA = (
    "【注意】{brand}を騙るフィッシングメールが届きました {url} 絶対にアクセスしないでください #フィッシング",
    "{brand}の偽サイトに誘導するスミッシングです {url} ご注意を #詐欺",
)

_BENIGN_URL_TEMPLATES = (
    "new blog post is up {url} feedback welcome",
    "wrote about my weekend trip here {url} photos inside if anyone is curious",
    "our band demo finally went live at {url} have a listen and tell me what you think",
    "big sale at the shop this week {url} tell your friends",
    "the match today was a scam honestly, full report at {url}",
    "collected my favourite ramen spots at {url} what did i miss",
)

_BENIGN_PLAIN_TEMPLATES = (
    "coffee number three and it is not even noon yet",
    "anyone else think the new season is kind of a letdown so far",
    "finally fixed that squeaky door, felt like a proper handyman",
    "that spam call interrupted my nap again, blocking the number",
    "rainy saturday, perfect excuse to stay in and read",
    "my cat discovered the printer and now nothing gets printed",
    "training for the 10k continues, legs are filing a complaint",
    "honestly the queue at the bakery this morning was a scam",
)

_BENIGN_RANKED_URLS = (
    "https://youtube.com/watch?v=dQw4",
    "https://github.com/octo/demo",
    "https://medium.com/@someone/notes",
    "https://wikipedia.org/wiki/Canary",
)

_BENIGN_KEYWORD_TAILS = (
    "what a scam",
    "pure spam honestly",
    "feels like fraud to me",
)

_HASHTAG_POOL = ("weekend", "coffee", "music", "running", "books", "food")


@dataclass(frozen=True)
class SyntheticConfig:
    """Shape of a generated desk-scale corpus."""

    n_reports: int = 300
    n_benign: int = 1700
    brands: tuple[str, ...] = ("Amazon", "PayPal", "NetBank", "ParcelPost", "ATT")
    langs: tuple[str, ...] = ("en",)
    start: int = 1_735_689_600
    span: int = 7 * 86_400
    image_report_rate: float = 0.6
    benign_url_rate: float = 0.35
    benign_keyword_rate: float = 0.5
    benign_ranked_url_rate: float = 0.05
    benign_image_rate: float = 0.1
    n_expert_authors: int = 3
    expert_report_share: float = 0.3
    security_keywords: tuple[str, ...] = ("phishing", "scam", "smishing", "spam", "fraud")


@dataclass(frozen=True)
class SyntheticCorpus:
    posts: tuple[PostRecord, ...]
    authors: tuple[AuthorRecord, ...]
    labels: dict[str, bool]
    planted_report_indicators: int
    planted_benign_indicators: int


def generate_synthetic(seed: int, cfg: SyntheticConfig = SyntheticConfig()) -> SyntheticCorpus:
    """Deterministic synthetic corpus with planted reports and ground truth.

    Every planted report carries exactly one valid indicator, in either the
    text or one image; post ids embed the seed so corpora from different
    seeds never collide.
    """
    if cfg.n_reports + cfg.n_benign <= 0:
        raise ValueError("total post count must be positive")
    rng = random.Random(seed)
    posts: list[PostRecord] = []
    labels: dict[str, bool] = {}

    expert_ids = [f"a{seed}-expert{k}" for k in range(cfg.n_expert_authors)]
    nonexpert_pool = max(1, cfg.n_reports)
    nonexpert_ids = [f"a{seed}-user{k}" for k in range(nonexpert_pool)]
    benign_author_ids = [f"a{seed}-plain{k}" for k in range(max(1, cfg.n_benign // 3))]

    planted_reports = 0
    for i in range(cfg.n_reports):
        lang = cfg.langs[i % len(cfg.langs)]
        brand = cfg.brands[i % len(cfg.brands)] if lang == "en" else _ja_brand(cfg.brands[i % len(cfg.brands)])
        tld = PHISHY_TLDS[i % len(PHISHY_TLDS)]
        plain_url = f"http://login-{_slug(brand)}{i}.{tld}/verify"
        form = DEFANG_MIX[i % len(DEFANG_MIX)]
        if form == "bracket_slash":
            plain_url = f"http://login-{_slug(brand)}{i}.{tld}"
        shown_url = apply_defang(plain_url, form)

        use_image = rng.random() < cfg.image_report_rate
        if expert_ids and rng.random() < cfg.expert_report_share:
            author = rng.choice(expert_ids)
            use_image = False
        else:
            author = rng.choice(nonexpert_ids)
        post_id = f"p{seed}-r{i:05d}"
        created = cfg.start + rng.randrange(cfg.span)
        images: tuple[ImageText, ...] = ()
        if lang == "ja":
            text = rng.choice(_REPORT_TEXT_TEMPLATES_JA).format(brand=brand, url=shown_url)
        elif use_image:
            body, ocr = rng.choice(_REPORT_IMAGE_TEMPLATES)
            text = body.format(brand=brand)
            images = (ImageText(image_id=f"img-{seed}-sms{i}", text=ocr.format(brand=brand, url=shown_url)),)
        else:
            text = rng.choice(_REPORT_TEXT_TEMPLATES).format(brand=brand, url=shown_url)
        hashtags = tuple(w[1:] for w in text.split() if w.startswith("#"))
        matched = tuple(k for k in cfg.security_keywords if k in text.lower()) + (brand,)
        posts.append(
            PostRecord(
                post_id=post_id,
                author_id=author,
                created_at=created,
                lang=lang,
                text=text,
                hashtags=hashtags,
                mentions=(),
                image_texts=images,
                matched_keywords=matched,
            )
        )
        labels[post_id] = True
        planted_reports += 1

    planted_benign = 0
    for i in range(cfg.n_benign):
        post_id = f"p{seed}-b{i:05d}"
        created = cfg.start + rng.randrange(cfg.span)
        author = rng.choice(benign_author_ids)
        roll = rng.random()
        images = ()
        if roll < cfg.benign_url_rate:
            tld = BENIGN_TLDS[i % len(BENIGN_TLDS)]
            url = f"https://blog{i}-{seed}.{tld}/entry{i % 17}"
            text = rng.choice(_BENIGN_URL_TEMPLATES).format(url=url)
            planted_benign += 1
        elif roll < cfg.benign_url_rate + cfg.benign_ranked_url_rate:
            text = "worth a watch " + rng.choice(_BENIGN_RANKED_URLS)
        else:
            text = rng.choice(_BENIGN_PLAIN_TEMPLATES)
            if rng.random() < cfg.benign_image_rate:
                images = (ImageText(image_id=f"img-{seed}-photo{i}", text=None),)
        if rng.random() < cfg.benign_keyword_rate and not any(
            k in text.lower() for k in cfg.security_keywords
        ):
            text += " " + rng.choice(_BENIGN_KEYWORD_TAILS)
        hashtags = (rng.choice(_HASHTAG_POOL),) if rng.random() < 0.3 else ()
        matched = tuple(k for k in cfg.security_keywords if k in text.lower())
        posts.append(
            PostRecord(
                post_id=post_id,
                author_id=author,
                created_at=created,
                lang="en" if "en" in cfg.langs else cfg.langs[0],
                text=text,
                hashtags=hashtags,
                mentions=(),
                image_texts=images,
                matched_keywords=matched,
            )
        )
        labels[post_id] = False

    posts.sort(key=lambda p: (p.created_at, p.post_id))

    authors = [
        AuthorRecord(
            author_id=aid,
            profile_text="Threat hunter tracking phishing and malware campaigns | DM for IOCs",
            recent_texts=tuple(
                f"flagged another phishing kit variant #{k} today, IOCs in thread" for k in range(8)
            )
            + ("weekend hike photos", "coffee first"),
        )
        for aid in expert_ids
    ]
    used_nonexperts = {p.author_id for p in posts if labels[p.post_id]} - set(expert_ids)
    for aid in sorted(used_nonexperts):
        authors.append(
            AuthorRecord(
                author_id=aid,
                profile_text="dog person, amateur baker, occasional gamer",
                recent_texts=("made sourdough again", "new game night record", "park was lovely"),
            )
        )
    for aid in benign_author_ids:
        authors.append(
            AuthorRecord(
                author_id=aid,
                profile_text="posting about food and weather mostly",
                recent_texts=("lunch was great", "rain again"),
            )
        )

    return SyntheticCorpus(
        posts=tuple(posts),
        authors=tuple(authors),
        labels=labels,
        planted_report_indicators=planted_reports,
        planted_benign_indicators=planted_benign,
    )


def apply_defang(url: str, form: str) -> str:
    """Render a plain URL in one of the defang forms (``none`` passes through)."""
    if form == "none":
        return url
    scheme, rest = url.split("://", 1)
    host, slash, path = rest.partition("/")
    if form == "hxxp_lower":
        return url.replace("http", "hxxp", 1)
    if form == "hXXp_mixed":
        return url.replace("http", "hXXp", 1)
    if form == "bracket_colon":
        return f"{scheme}[:]//{rest}"
    if form == "bracket_slash":
        if slash:
            raise ValueError("bracket_slash applies to pathless URLs")
        return f"{scheme}://{host}[/]"
    dot = {
        "bracket_dot": "[.]",
        "paren_dot": "(.)",
        "brace_dot": "{.}",
        "backslash_dot": "\\.",
        "space_dot": " .",
    }[form]
    if form == "space_dot":
        # Only the final host dot; the form reads "example .com".
        head, _, tail = host.rpartition(".")
        defanged_host = f"{head} .{tail}"
    else:
        defanged_host = host.replace(".", dot)
    return f"{scheme}://{defanged_host}{slash}{path}"


def _slug(brand: str) -> str:
    ascii_only = "".join(ch for ch in brand.lower() if ch.isascii() and ch.isalnum())
    return ascii_only or "brand"


_JA_BRANDS = {
    "Amazon": "アマゾン",
    "PayPal": "ペイパル",
    "NetBank": "ネットバンク",
    "ParcelPost": "パーセルポスト",
    "ATT": "エーティーティー",
}


def _ja_brand(brand: str) -> str:
    return _JA_BRANDS.get(brand, brand)
