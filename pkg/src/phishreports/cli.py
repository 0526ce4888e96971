"""Command-line interface: every pipeline stage as a subcommand.

Paths given as "-" read stdin or write stdout, so stages can be piped
(``synth --stdout | extract -``). All randomness is seeded explicitly.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, cooccur, corpus, forest
from . import pipeline as pl
from .features import feature_matrix
from .ioc import extract_post_indicators
from .screening import screen as screen_indicator
from .screening import screen_post


def _read_posts(path: str) -> list[corpus.PostRecord]:
    if path == "-":
        return corpus.load_posts(sys.stdin)
    return corpus.load_posts(path)


def _out_handle(path: str):
    if path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8")


def _load_labels(path: str) -> dict[str, bool]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if "labels" in obj and isinstance(obj["labels"], dict):
        obj = obj["labels"]
    return {k: bool(v) for k, v in obj.items()}


def _load_config(path: str | None) -> pl.PipelineConfig:
    if path:
        return pl.PipelineConfig.from_json(path)
    return pl.PipelineConfig()


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# --- subcommands ----------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = corpus.SyntheticConfig(
        n_reports=args.reports,
        n_benign=args.benign,
        langs=tuple(args.langs.split(",")),
    )
    generated = corpus.generate_synthetic(args.seed, cfg)
    if args.stdout:
        corpus.save_posts(generated.posts, sys.stdout)
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus.save_posts(generated.posts, str(out / "posts.jsonl"))
    corpus.save_authors(generated.authors, str(out / "authors.jsonl"))
    with open(out / "labels.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "labels": generated.labels,
                "planted": {
                    "reports": generated.planted_report_indicators,
                    "benign_urls": generated.planted_benign_indicators,
                },
            },
            fh,
            indent=2,
            sort_keys=True,
        )
    print(f"wrote {len(generated.posts)} posts to {out}", file=sys.stderr)
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    posts = _read_posts(args.posts)
    handle = _out_handle(args.out)
    try:
        for post in posts:
            for indicator in extract_post_indicators(post):
                record = {"post_id": post.post_id, **indicator.to_json()}
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    finally:
        if handle is not sys.stdout:
            handle.close()
    return 0


def cmd_screen(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    ctx = pl.build_screening_context(config)
    posts = _read_posts(args.posts)
    now = args.now if args.now is not None else max((p.created_at for p in posts), default=1) + 1
    handle = _out_handle(args.out)
    try:
        for post in posts:
            indicators = extract_post_indicators(post, psl=ctx.psl)
            kept, excluded = screen_post(
                post, indicators, ctx.ranks, ctx.shorteners, ctx.dyndns, ctx.whois, now, ctx.max_age_days
            )
            for indicator in indicators:
                verdict = screen_indicator(
                    indicator, ctx.ranks, ctx.shorteners, ctx.dyndns, ctx.whois, now, ctx.max_age_days
                )
                record = {"post_id": post.post_id, "post_excluded": excluded, **verdict.to_json()}
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    finally:
        if handle is not sys.stdout:
            handle.close()
    return 0


def cmd_keywords(args: argparse.Namespace) -> int:
    posts = _read_posts(args.posts)
    labels_map = _load_labels(args.labels)
    posts = [p for p in posts if p.post_id in labels_map]
    labels = [labels_map[p.post_id] for p in posts]
    window_end = args.window_end or max((p.created_at for p in posts), default=0) + 1
    candidates = cooccur.select_keywords(
        posts, labels, threshold=args.threshold, top_k=args.top_k, window_end=window_end
    )
    handle = _out_handle(args.out)
    try:
        writer = csv.writer(handle)
        writer.writerow(["token", "lang", "soa", "pmi_pos", "pmi_neg", "support", "window_end"])
        for c in candidates:
            writer.writerow([c.token, c.lang, c.soa, c.pmi_pos, c.pmi_neg, c.support, c.window_end])
    finally:
        if handle is not sys.stdout:
            handle.close()
    return 0


def _assemble_corpus(posts, config, model=None, labels=None):
    """Screen and featurize posts; uses the model's fitted artifacts when
    given, otherwise fits fresh projections on this corpus."""
    ctx = pl.build_screening_context(config)
    providers = pl.build_providers(config)
    now = max((p.created_at for p in posts), default=1) + 1
    screened = list(pl.screen_corpus(posts, ctx, now))
    if model is not None:
        pl.check_provider_schema(model.schema, providers)
        projections = model.projections
        if projections is None:
            raise pl.SchemaMismatchError("model carries no fitted projections")
    else:
        projections, _ = pl.build_feature_artifacts(screened, providers, config)
    pairs = []
    for post, kept in screened:
        label = labels.get(post.post_id) if labels else None
        pairs.extend(
            (post, inst, vec)
            for inst, vec in pl.assemble(post, kept, providers, projections, label=label)
        )
    return pairs, projections


def cmd_featurize(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    posts = _read_posts(args.posts)
    model = forest.load(args.model) if args.model else None
    pairs, projections = _assemble_corpus(posts, config, model=model)
    names = (
        model.schema.feature_names()
        if model is not None and model.schema is not None
        else None
    )
    handle = _out_handle(args.out)
    try:
        writer = csv.writer(handle)
        if names is None:
            from .features import FeatureSchema

            schema = FeatureSchema(
                visual_raw_dim=config.visual_raw_dim,
                context_raw_dim=config.context_raw_dim,
                visual_dim=projections.visual.out_dim,
                context_dim=projections.context.out_dim,
                embed_seed=config.embed_seed,
            )
            names = schema.feature_names()
        writer.writerow(["post_id", "image_id", "url"] + names)
        for post, inst, vec in pairs:
            writer.writerow(
                [post.post_id, inst.image_id or "", inst.indicator.normalized_url]
                + [repr(x) for x in vec.concat().tolist()]
            )
    finally:
        if handle is not sys.stdout:
            handle.close()
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, forest=dataclasses.replace(config.forest, seed=args.seed))
    posts = _read_posts(args.posts)
    labels = _load_labels(args.labels)
    if args.split < 1.0:
        posts, _ = pl.chronological_split(posts, args.split)
    artifacts = pl.train_model(posts, labels, config)
    forest.save(artifacts.model, args.out)
    print(
        f"trained on {artifacts.model.meta['n_train']} instances "
        f"({artifacts.model.n_features} features) -> {args.out}",
        file=sys.stderr,
    )
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    posts = _read_posts(args.posts)
    model = forest.load(args.model)
    ctx = pl.build_screening_context(config)
    providers = pl.build_providers(config)
    pl.check_provider_schema(model.schema, providers)
    now = max((p.created_at for p in posts), default=1) + 1
    handle = _out_handle(args.out)
    try:
        for post in posts:
            _, report = pl.screen_and_classify(post, model, providers, ctx, now, config.score_threshold)
            if report is not None:
                handle.write(json.dumps(report.to_json(), ensure_ascii=False) + "\n")
    finally:
        if handle is not sys.stdout:
            handle.close()
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    posts = _read_posts(args.posts)
    labels = _load_labels(args.labels)
    model = forest.load(args.model)
    if args.split < 1.0:
        _, posts = pl.chronological_split(posts, args.split)
    pairs, _ = _assemble_corpus(posts, config, model=model, labels=labels)
    labeled = [(inst, vec) for _, inst, vec in pairs if inst.label is not None]
    if not labeled:
        print("error: no labeled instances to evaluate", file=sys.stderr)
        return 2
    X = feature_matrix([vec for _, vec in labeled])
    y = np.array([bool(inst.label) for inst, _ in labeled])
    metrics = forest.evaluate(model, X, y, threshold=config.score_threshold)
    payload = json.dumps(metrics.to_json(), indent=2, sort_keys=True)
    if args.out == "-":
        print(payload)
    else:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    reports = analysis.load_reports(args.reports)
    authors = {a.author_id: a for a in corpus.load_authors(args.authors)} if args.authors else {}
    reports = analysis.assign_categories(reports, authors)
    ctx = pl.build_screening_context(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    categories = {}
    for report in reports:
        if report.author_id not in categories and report.author_id in authors:
            categories[report.author_id] = analysis.categorize_user(
                authors[report.author_id], sorted(analysis.default_security_terms())
            )
    _write_csv(
        out / "user_categories.csv",
        ["author_id", "category", "reasons"],
        [[c.author_id, c.category, "|".join(c.reasons)] for c in categories.values()],
    )

    summary = analysis.user_type_summary(reports)
    _write_csv(
        out / "user_type_summary.csv",
        ["category", "n_users", "n_reports", "shares_min", "shares_median", "shares_mean", "shares_max"],
        [
            [cat, s.n_users, s.n_reports, s.shares_min, s.shares_median, s.shares_mean, s.shares_max]
            for cat, s in summary.items()
        ],
    )

    for key, name in ((analysis.BY_USER, "by_user"), (analysis.BY_URL, "by_url")):
        dist = analysis.share_distribution(reports, key)
        _write_csv(
            out / f"share_distribution_{name}.csv",
            ["share_count", "frequency", "cdf"],
            [[k, dist.histogram[k], c] for k, c in dist.cdf],
        )

    methods = analysis.sharing_method_stats(reports)
    _write_csv(
        out / "sharing_methods.csv",
        [
            "category", "n_reports", "urls_in_images", "urls_in_texts", "image_share",
            "text_share", "hashtags_median", "hashtags_mean", "mentions_median", "mentions_mean",
        ],
        [
            [
                cat, s.n_reports, s.urls_in_images, s.urls_in_texts, s.image_share,
                s.text_share, s.hashtags_median, s.hashtags_mean, s.mentions_median, s.mentions_mean,
            ]
            for cat, s in methods.items()
        ],
    )

    characteristics = analysis.url_characteristics(reports, ctx.shorteners, ctx.dyndns)
    _write_csv(
        out / "url_characteristics.csv",
        ["category", "n_urls", "n_shortened", "shortened_share", "n_fqdns", "n_dyndns", "dyndns_share"],
        [
            [cat, u.n_urls, u.n_shortened, u.shortened_share, u.n_fqdns, u.n_dyndns, u.dyndns_share]
            for cat, u in characteristics.items()
        ],
    )

    security_terms = [k for words in config.security_keywords.values() for k in words]
    effectiveness = analysis.keyword_effectiveness(reports, security_terms)
    rows = []
    for category, stats in effectiveness.items():
        for rank, stat in enumerate(stats, start=1):
            rows.append([category, rank, stat.keyword, stat.kind, stat.n_reports])
    _write_csv(out / "keyword_effectiveness.csv", ["category", "rank", "keyword", "type", "n_reports"], rows)

    annotations: dict[str, tuple[str, ...]] = {}
    for report in reports:
        for indicator in report.indicators:
            flags = []
            if indicator.registrable_domain in ctx.shorteners:
                flags.append("shortener")
            if indicator.registrable_domain in ctx.dyndns:
                flags.append("dynamic_dns")
            if flags:
                annotations[indicator.normalized_url] = tuple(flags)
    feed = analysis.emit_feed(reports, annotations)
    if args.detections:
        with open(args.detections, encoding="utf-8") as fh:
            feed = analysis.join_verdicts(feed, json.load(fh))
    with open(out / "feed.jsonl", "w", encoding="utf-8") as fh:
        for record in feed:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
    _write_csv(
        out / "feed.csv",
        ["url", "first_seen", "last_seen", "shares", "sources", "flags", "categories", "detections"],
        [
            [
                r.url, r.first_seen, r.last_seen, r.shares, "|".join(r.sources),
                "|".join(r.flags), "|".join(r.categories), "" if r.detections is None else r.detections,
            ]
            for r in feed
        ],
    )
    print(f"analysis tables written to {out}", file=sys.stderr)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    posts = _read_posts(args.posts)
    model = forest.load(args.model)
    ctx = pl.build_screening_context(config)
    providers = pl.build_providers(config)
    state_path = Path(args.state) if args.state else None
    if state_path and state_path.exists():
        state = pl.load_state(str(state_path))
    else:
        start = args.start if args.start is not None else min(p.created_at for p in posts)
        state = pl.CycleState(cursor=start, model_path=args.model)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    all_reports: list[analysis.ClassifiedReport] = []
    annotations: dict[str, tuple[str, ...]] = {}
    keyword_rows: list[list] = []
    cycles_run = 0
    for _ in range(args.cycles):
        try:
            state, outputs = pl.run_cycle(state, config, posts, model, ctx=ctx, providers=providers)
        except pl.SourceExhausted:
            print("source exhausted; stopping", file=sys.stderr)
            break
        cycles_run += 1
        all_reports.extend(outputs.reports)
        annotations.update(outputs.feed_annotations)
        for lang, candidates in outputs.keywords.items():
            for c in candidates:
                keyword_rows.append([state.cycle, lang, c.token, c.soa, c.support, c.window_end])
        if state_path:
            pl.save_state(state, str(state_path))
        print(
            f"cycle {state.cycle}: collected={outputs.n_collected} reports={len(outputs.reports)}",
            file=sys.stderr,
        )

    with open(out / "reports.jsonl", "w", encoding="utf-8") as fh:
        for report in all_reports:
            fh.write(json.dumps(report.to_json(), ensure_ascii=False) + "\n")
    _write_csv(out / "keywords.csv", ["cycle", "lang", "token", "soa", "support", "window_end"], keyword_rows)
    feed = analysis.emit_feed(all_reports, annotations)
    with open(out / "feed.jsonl", "w", encoding="utf-8") as fh:
        for record in feed:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
    print(f"{cycles_run} cycles, {len(all_reports)} reports, {len(feed)} feed urls", file=sys.stderr)
    return 0


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phishreports", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--reports", type=int, default=300)
    p.add_argument("--benign", type=int, default=1700)
    p.add_argument("--langs", default="en")
    p.add_argument("--out", default="synth_out")
    p.add_argument("--stdout", action="store_true", help="write posts JSONL to stdout only")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract indicators from a posts file")
    p.add_argument("posts")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("screen", help="screen extracted indicators")
    p.add_argument("posts")
    p.add_argument("--config")
    p.add_argument("--now", type=int)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("keywords", help="select co-occurrence keywords from a labeled window")
    p.add_argument("--posts", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--threshold", type=float, default=4.0)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--window-end", type=int)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_keywords)

    p = sub.add_parser("featurize", help="emit the feature matrix as CSV")
    p.add_argument("--posts", required=True)
    p.add_argument("--model")
    p.add_argument("--config")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train the report classifier")
    p.add_argument("--posts", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, help="forest seed override")
    p.add_argument("--split", type=float, default=1.0, help="train on the earliest fraction")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classify posts into reports")
    p.add_argument("--posts", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="evaluate a model on labeled posts")
    p.add_argument("--posts", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    p.add_argument("--split", type=float, default=1.0, help="evaluate on the latest 1-fraction")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="contributor and feed analysis tables")
    p.add_argument("--reports", required=True)
    p.add_argument("--authors")
    p.add_argument("--config")
    p.add_argument("--detections", help="JSON fixture mapping url -> engine detection count")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="run full pipeline cycles")
    p.add_argument("--posts", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    p.add_argument("--state")
    p.add_argument("--cycles", type=int, default=1)
    p.add_argument("--start", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, pl.SourceExhausted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
