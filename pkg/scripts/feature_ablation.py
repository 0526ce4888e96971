#!/usr/bin/env python3
"""Feature-family ablation on the synthetic corpus.

Trains the forest twice on a 7:3 chronological split: once on all five
feature families, once with the embedding blocks (visual+context) zeroed
out, leaving content+URL+OCR. Prints both metric rows.

Usage: python scripts/feature_ablation.py [--seed 7]
"""
import argparse
import sys

import numpy as np

from phishreports import forest
from phishreports import pipeline as pl
from phishreports.corpus import SyntheticConfig, generate_synthetic
from phishreports.features import BASE_DIM, feature_matrix
from phishreports.forest import ForestParams


def _matrices(posts, labels, config, model_projections=None):
    ctx = pl.build_screening_context(config)
    providers = pl.build_providers(config)
    now = max(p.created_at for p in posts) + 1
    screened = list(pl.screen_corpus(posts, ctx, now))
    projections = model_projections
    if projections is None:
        projections, _ = pl.build_feature_artifacts(screened, providers, config)
    pairs = []
    for post, kept in screened:
        pairs.extend(pl.assemble(post, kept, providers, projections, label=labels[post.post_id]))
    X = feature_matrix([vec for _, vec in pairs])
    y = np.array([bool(inst.label) for inst, _ in pairs])
    return X, y, projections


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--fast", action="store_true", help="use 64-dim embeddings")
    args = parser.parse_args(argv)

    config = pl.PipelineConfig(visual_raw_dim=64, context_raw_dim=64) if args.fast else pl.PipelineConfig()
    gen = generate_synthetic(args.seed, SyntheticConfig())
    train_posts, test_posts = pl.chronological_split(gen.posts, 0.7)

    X_train, y_train, projections = _matrices(train_posts, gen.labels, config)
    X_test, y_test, _ = _matrices(test_posts, gen.labels, config, model_projections=projections)

    rows = []
    for name, train_X, test_X in (
        ("content+url+ocr+visual+context", X_train, X_test),
        ("content+url+ocr", X_train[:, :BASE_DIM], X_test[:, :BASE_DIM]),
    ):
        model = forest.train(train_X, y_train, ForestParams(seed=args.seed))
        metrics = forest.evaluate(model, test_X, y_test)
        rows.append((name, metrics))

    header = f"{'features':<34} {'acc':>6} {'tpr':>6} {'tnr':>6} {'prec':>6} {'f1':>6}"
    print(header)
    print("-" * len(header))
    for name, m in rows:
        print(
            f"{name:<34} {m.accuracy:>6.3f} {m.tpr:>6.3f} {m.tnr:>6.3f} "
            f"{m.precision:>6.3f} {m.f_measure:>6.3f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
