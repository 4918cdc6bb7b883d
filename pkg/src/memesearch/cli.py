"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
All diagnostics go to stderr; results to stdout.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import classifiers as clf
from . import corpus, embedding, hog, metrics, rng
from .errors import AllTokensUnknownError, DataError, MemesearchError, NumericError

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config_file(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        _fail(EXIT_USAGE, f"cannot read config {path}: {exc}")


@click.group()
def main():
    """Meme classification and text-to-meme retrieval toolkit."""


@main.command("hog-extract")
@click.argument("images_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def cmd_hog_extract(images_dir, out, config_path):
    """Compute HOG descriptors for every raster image in IMAGES_DIR."""
    from PIL import Image, UnidentifiedImageError

    overrides = _load_config_file(config_path)
    try:
        cfg = hog.HogConfig(**{
            k: tuple(v) if k == "resize_to" else v
            for k, v in overrides.items()
            if k in ("resize_to", "cell_size", "block_size", "num_bins", "clip")
        })
    except DataError as exc:
        _fail(EXIT_USAGE, str(exc))
    features = []
    skipped = 0
    paths = sorted(p for p in Path(images_dir).iterdir() if p.is_file())
    for path in paths:
        try:
            with Image.open(path) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        except (UnidentifiedImageError, OSError) as exc:
            click.echo(f"warning: skipping unreadable image {path.name}: {exc}", err=True)
            skipped += 1
            continue
        gray = hog.to_grayscale(arr)
        features.append(hog.hog_feature(path.stem, gray, cfg))
    if not features:
        _fail(EXIT_DATA, f"no readable images in {images_dir}")
    corpus.save_feature_file(features, out)
    click.echo(f"wrote {len(features)} descriptors of dimension {features[0].dimension} to {out}")
    if skipped:
        click.echo(f"skipped {skipped} unreadable files", err=True)


@main.command("cross-validate")
@click.argument("manifest", type=click.Path(exists=True))
@click.argument("features", type=click.Path(exists=True))
@click.option("--classifier", "kinds", multiple=True,
              type=click.Choice(clf.KINDS), default=clf.KINDS,
              help="Classifier(s) to evaluate; repeatable.")
@click.option("--resamples", default=10, show_default=True)
@click.option("--folds", default=10, show_default=True)
@click.option("--seed", default=rng.DEFAULT_SEED, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Write full CvReport JSON here.")
@click.option("--format", "fmt", type=click.Choice(["table", "records"]), default="table")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def cmd_cross_validate(manifest, features, kinds, resamples, folds, seed, out, fmt, config_path):
    """Repeated-undersampling stratified cross-validation over classifiers."""
    overrides = _load_config_file(config_path)
    try:
        entries = corpus.load_manifest(manifest)
        feats = corpus.load_feature_file(features)
        if not any(e.label is not None for e in entries):
            _fail(EXIT_DATA, "manifest has no labeled entries ('label' field missing everywhere)")
        data = corpus.labeled_dataset(entries, feats)
        reports = {}
        for kind in kinds:
            spec = clf.ClassifierSpec(
                kind=kind, hyperparameters=overrides.get(kind, {}), seed=seed
            )
            reports[kind] = metrics.cross_validate(
                spec, data, resamples=resamples, folds=folds, seed=seed
            )
    except NumericError as exc:
        _fail(EXIT_NUMERIC, str(exc))
    except MemesearchError as exc:
        _fail(EXIT_DATA, str(exc))
    if fmt == "table":
        click.echo(f"{'Method':<16} {'Precision':>9} {'Recall':>9} {'F1-Score':>9}")
        for kind, report in reports.items():
            click.echo(
                f"{kind:<16} {report.mean['macro_precision']:>9.3f} "
                f"{report.mean['macro_recall']:>9.3f} {report.mean['macro_f1']:>9.3f}"
            )
    else:
        for kind, report in reports.items():
            click.echo(json.dumps({"method": kind, "mean": report.mean, "std": report.std},
                                  sort_keys=True))
    if out:
        doc = {kind: report.to_dict() for kind, report in reports.items()}
        Path(out).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")


@main.command("train-embedding")
@click.argument("manifest", type=click.Path(exists=True))
@click.argument("visual_features", type=click.Path(exists=True))
@click.argument("word_vectors", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Model file path.")
@click.option("--trace-out", type=click.Path(), default=None)
@click.option("--epochs", default=270, show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--learning-rate", default=0.0001, show_default=True)
@click.option("--margin", default=1.0, show_default=True)
@click.option("--shared-dim", default=256, show_default=True)
@click.option("--n-train", default=None, type=int,
              help="Train-pair count; default: all but max(1, 2%) of pairs.")
@click.option("--seed", default=rng.DEFAULT_SEED, show_default=True)
@click.option("--distance-mode", type=click.Choice(embedding.DISTANCE_MODES),
              default="squared_euclidean", show_default=True)
@click.option("--text-anchored-only", is_flag=True, default=False)
def cmd_train_embedding(manifest, visual_features, word_vectors, out, trace_out,
                        epochs, batch_size, learning_rate, margin, shared_dim,
                        n_train, seed, distance_mode, text_anchored_only):
    """Train the joint visual-semantic embedding on (caption, image) pairs."""
    try:
        entries = corpus.load_manifest(manifest)
        feats = corpus.load_feature_file(visual_features)
        table = embedding.WordVectorTable.from_feature_map(corpus.load_feature_file(word_vectors))
        usable = corpus.retrieval_pairs(entries, feats)
        if n_train is None:
            n_train = len(usable) - max(1, len(usable) // 50)
        train_entries, test_entries = corpus.split_pairs(usable, n_train=n_train, seed=seed)
        config = embedding.TrainConfig(
            shared_dim=shared_dim, margin=margin, learning_rate=learning_rate,
            batch_size=batch_size, epochs=epochs, seed=seed,
            distance_mode=distance_mode, bidirectional=not text_anchored_only,
        )
        click.echo(
            f"training: epochs={config.epochs} batch={config.batch_size} "
            f"lr={config.learning_rate} margin={config.margin} "
            f"pairs={len(train_entries)}/{len(test_entries)} seed={seed}",
            err=True,
        )
        to_pairs = lambda es: [(e.id, e.caption, feats[e.id]) for e in es]
        model, trace = embedding.train_embedding(
            to_pairs(train_entries), to_pairs(test_entries), table, config
        )
    except NumericError as exc:
        _fail(EXIT_NUMERIC, str(exc))
    except MemesearchError as exc:
        _fail(EXIT_DATA, str(exc))
    Path(out).write_text(model.to_json(), encoding="utf-8")
    trace_lines = ["epoch train_loss test_loss test_map"]
    for epoch, tr, te, m in trace.rows():
        trace_lines.append(f"{epoch} {tr!r} {te!r} {m!r}")
    trace_text = "\n".join(trace_lines) + "\n"
    if trace_out:
        Path(trace_out).write_text(trace_text, encoding="utf-8")
    click.echo(f"final train loss {trace.train_loss[-1]:.6f}, "
               f"test mAP {trace.test_map[-1]:.4f}")


@main.command("search")
@click.argument("model_path", type=click.Path(exists=True))
@click.argument("manifest", type=click.Path(exists=True))
@click.argument("visual_features", type=click.Path(exists=True))
@click.argument("word_vectors", type=click.Path(exists=True))
@click.argument("query")
@click.option("-k", default=10, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["table", "records"]), default="table")
def cmd_search(model_path, manifest, visual_features, word_vectors, query, k, fmt):
    """Rank meme images against a natural-language QUERY."""
    try:
        model = embedding.EmbeddingModel.from_json(Path(model_path).read_text(encoding="utf-8"))
        entries = corpus.load_manifest(manifest)
        feats = corpus.load_feature_file(visual_features)
        table = embedding.WordVectorTable.from_feature_map(corpus.load_feature_file(word_vectors))
        items = [(e.id, feats[e.id]) for e in entries if e.id in feats]
        result = embedding.rank_memes(model, query, items, table, k=k)
    except AllTokensUnknownError as exc:
        _fail(EXIT_DATA, str(exc))
    except MemesearchError as exc:
        _fail(EXIT_DATA, str(exc))
    if result.dropped_tokens:
        click.echo(f"dropped unknown tokens: {', '.join(result.dropped_tokens)}", err=True)
    if fmt == "table":
        click.echo(f"{'Rank':>4} {'Id':<24} {'Distance':>12}")
        for item_id, distance, rank in result.results:
            click.echo(f"{rank:>4} {item_id:<24} {distance:>12.6f}")
    else:
        for item_id, distance, rank in result.results:
            click.echo(json.dumps({"rank": rank, "id": item_id, "distance": distance}))


@main.command("serve")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--word-vectors", "word_vectors_path", required=True, type=click.Path(exists=True))
@click.option("--classifier", "classifier_path", type=click.Path(exists=True), default=None)
@click.option("--annotations", "annotations_path", type=click.Path(), default="annotations.jsonl")
@click.option("--static-dir", type=click.Path(), default=None,
              help="Directory of console static files to serve at /.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def cmd_serve(model_path, manifest_path, features_path, word_vectors_path,
              classifier_path, annotations_path, static_dir, host, port):
    """Serve search, classification and annotation over HTTP."""
    import uvicorn

    from .service import build_app

    try:
        app = build_app(
            model_path=model_path,
            manifest_path=manifest_path,
            features_path=features_path,
            word_vectors_path=word_vectors_path,
            classifier_path=classifier_path,
            annotations_path=annotations_path,
            static_dir=static_dir,
        )
    except MemesearchError as exc:
        _fail(EXIT_DATA, str(exc))
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
