"""Joint visual-semantic embedding for text-to-meme retrieval.

A text branch averages word vectors; a visual branch consumes precomputed
deep features.  Two affine heads project both branches into a shared
space, trained with a triplet hinge loss by plain stochastic gradient
descent.  Queries rank items by distance in the shared space.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass

import numpy as np

from . import rng
from .corpus import FeatureVector
from .errors import (
    AllTokensUnknownError,
    DataError,
    DimensionMismatchError,
    InsufficientPairsError,
    NumericError,
)
from .metrics import mean_average_precision

MODEL_FORMAT_VERSION = 1
DISTANCE_MODES = ("squared_euclidean", "euclidean")
_EPS = 1e-12


@dataclass(frozen=True)
class WordVectorTable:
    dimension: int
    vectors: dict  # token -> np.ndarray

    @staticmethod
    def from_feature_map(features) -> "WordVectorTable":
        if not features:
            raise DataError("empty word-vector table")
        dims = {fv.dimension for fv in features.values()}
        if len(dims) != 1:
            raise DimensionMismatchError(f"mixed word-vector dimensions: {sorted(dims)}")
        return WordVectorTable(
            dimension=dims.pop(),
            vectors={token: fv.values for token, fv in features.items()},
        )


@dataclass(frozen=True)
class TrainConfig:
    shared_dim: int = 256
    margin: float = 1.0
    learning_rate: float = 0.0001
    batch_size: int = 16
    epochs: int = 270
    seed: int = rng.DEFAULT_SEED
    distance_mode: str = "squared_euclidean"
    bidirectional: bool = True
    normalize: bool = False

    def __post_init__(self):
        if self.distance_mode not in DISTANCE_MODES:
            raise DataError(f"unknown distance mode {self.distance_mode!r}")
        if self.margin < 0 or self.epochs < 1 or self.batch_size < 1:
            raise DataError("margin must be >= 0, epochs and batch_size >= 1")

    def to_dict(self):
        return {
            "shared_dim": self.shared_dim,
            "margin": self.margin,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "distance_mode": self.distance_mode,
            "bidirectional": self.bidirectional,
            "normalize": self.normalize,
        }


@dataclass(frozen=True)
class EmbeddingModel:
    W_v: np.ndarray  # (d, D_v)
    b_v: np.ndarray
    W_t: np.ndarray  # (d, D_t)
    b_t: np.ndarray
    config: TrainConfig

    def __post_init__(self):
        for block in (self.W_v, self.b_v, self.W_t, self.b_t):
            if not np.all(np.isfinite(block)):
                raise NumericError("model parameters contain non-finite values")
        d = self.config.shared_dim
        if self.W_v.shape[0] != d or self.W_t.shape[0] != d:
            raise DimensionMismatchError("head output dimensions must equal shared_dim")

    @property
    def shared_dim(self) -> int:
        return self.config.shared_dim

    def project(self, branch: str, x) -> np.ndarray:
        v = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
        if branch == "visual":
            W, b = self.W_v, self.b_v
        elif branch == "text":
            W, b = self.W_t, self.b_t
        else:
            raise DataError(f"unknown branch {branch!r}")
        if v.shape != (W.shape[1],):
            raise DimensionMismatchError(
                f"{branch} branch expects dimension {W.shape[1]}, got {v.shape}"
            )
        out = W @ v + b
        if self.config.normalize:
            out = out / np.sqrt(np.sum(out * out) + _EPS)
        return out

    def to_dict(self):
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "config": self.config.to_dict(),
            "W_v": self.W_v.tolist(),
            "b_v": self.b_v.tolist(),
            "W_t": self.W_t.tolist(),
            "b_t": self.b_t.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_dict(doc) -> "EmbeddingModel":
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise DataError(f"unsupported model format version {doc.get('format_version')!r}")
        return EmbeddingModel(
            W_v=np.array(doc["W_v"], dtype=np.float64),
            b_v=np.array(doc["b_v"], dtype=np.float64),
            W_t=np.array(doc["W_t"], dtype=np.float64),
            b_t=np.array(doc["b_t"], dtype=np.float64),
            config=TrainConfig(**doc["config"]),
        )

    @staticmethod
    def from_json(text) -> "EmbeddingModel":
        return EmbeddingModel.from_dict(json.loads(text))


@dataclass(frozen=True)
class TrainingTrace:
    train_loss: tuple
    test_loss: tuple
    test_map: tuple

    def rows(self):
        return list(zip(range(1, len(self.train_loss) + 1), self.train_loss, self.test_loss, self.test_map))


@dataclass(frozen=True)
class RankedResult:
    results: tuple  # of (item_id, distance, rank)
    dropped_tokens: tuple = ()


def tokenize(caption: str) -> list[str]:
    """Case-fold, strip leading/trailing punctuation per token, split on
    whitespace.  No stemming."""
    tokens = []
    for raw in caption.casefold().split():
        start, end = 0, len(raw)
        while start < end and unicodedata.category(raw[start]).startswith("P"):
            start += 1
        while end > start and unicodedata.category(raw[end - 1]).startswith("P"):
            end -= 1
        if end > start:
            tokens.append(raw[start:end])
    return tokens


def embed_text(caption: str, table: WordVectorTable):
    """Mean of in-vocabulary token vectors; returns (vector, dropped)."""
    tokens = tokenize(caption)
    known = [t for t in tokens if t in table.vectors]
    dropped = [t for t in tokens if t not in table.vectors]
    if not known:
        raise AllTokensUnknownError(tokens if tokens else ["<empty>"])
    vec = np.mean([table.vectors[t] for t in known], axis=0)
    return vec, dropped


def _distance(a, b, mode):
    sq = np.sum((a - b) ** 2)
    if mode == "squared_euclidean":
        return sq
    return np.sqrt(sq + _EPS)


def triplet_loss(a, p, n, margin, mode="squared_euclidean"):
    """Hinge loss max(d(a,p) - d(a,n) + m, 0) plus exact subgradients
    w.r.t. a, p, n.  At the kink the zero branch is chosen."""
    a = np.asarray(a, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    d_ap = _distance(a, p, mode)
    d_an = _distance(a, n, mode)
    slack = d_ap - d_an + margin
    if slack <= 0.0:
        zero = np.zeros_like(a)
        return 0.0, zero, zero.copy(), zero.copy()
    if mode == "squared_euclidean":
        ga = 2.0 * (n - p)
        gp = 2.0 * (p - a)
        gn = 2.0 * (a - n)
    else:
        ga = (a - p) / d_ap - (a - n) / d_an
        gp = (p - a) / d_ap
        gn = (a - n) / d_an
    return float(slack), ga, gp, gn


def _xavier(gen, rows, cols):
    bound = np.sqrt(6.0 / (rows + cols))
    return gen.uniform(-bound, bound, size=(rows, cols))


def init_model(visual_dim: int, text_dim: int, config: TrainConfig) -> EmbeddingModel:
    gen = rng.stream(config.seed, "init")
    d = config.shared_dim
    return EmbeddingModel(
        W_v=_xavier(gen, d, visual_dim),
        b_v=np.zeros(d),
        W_t=_xavier(gen, d, text_dim),
        b_t=np.zeros(d),
        config=config,
    )


def _pair_arrays(pairs, table):
    """pairs: list of (id, caption, visual FeatureVector).  Returns
    (ids, text matrix, visual matrix); all-OOV captions are skipped."""
    ids, texts, visuals = [], [], []
    for item_id, caption, visual in pairs:
        try:
            t, _ = embed_text(caption, table)
        except AllTokensUnknownError:
            continue
        ids.append(item_id)
        texts.append(t)
        visuals.append(visual.values if isinstance(visual, FeatureVector) else np.asarray(visual))
    return ids, np.array(texts), np.array(visuals)


def _epoch_loss_and_grads(model_blocks, T, V, anchors_idx, neg_idx, margin, mode, bidirectional):
    """Accumulate triplet losses and parameter-block gradients over one
    batch; anchors_idx indexes pairs, neg_idx gives each one's negative."""
    W_v, b_v, W_t, b_t = model_blocks
    gW_v = np.zeros_like(W_v)
    gb_v = np.zeros_like(b_v)
    gW_t = np.zeros_like(W_t)
    gb_t = np.zeros_like(b_t)
    total = 0.0
    count = 0
    for i, j in zip(anchors_idx, neg_idx):
        t_i = W_t @ T[i] + b_t
        v_i = W_v @ V[i] + b_v
        v_j = W_v @ V[j] + b_v
        loss, ga, gp, gn = triplet_loss(t_i, v_i, v_j, margin, mode)
        total += loss
        count += 1
        gW_t += np.outer(ga, T[i])
        gb_t += ga
        gW_v += np.outer(gp, V[i]) + np.outer(gn, V[j])
        gb_v += gp + gn
        if bidirectional:
            t_j = W_t @ T[j] + b_t
            loss, ga, gp, gn = triplet_loss(v_i, t_i, t_j, margin, mode)
            total += loss
            count += 1
            gW_v += np.outer(ga, V[i])
            gb_v += ga
            gW_t += np.outer(gp, T[i]) + np.outer(gn, T[j])
            gb_t += gp + gn
    return total, count, (gW_v, gb_v, gW_t, gb_t)


def _evaluate_loss(blocks, T, V, negatives, margin, mode, bidirectional):
    n = len(T)
    total, count, _ = _epoch_loss_and_grads(
        blocks, T, V, np.arange(n), negatives, margin, mode, bidirectional
    )
    return total / count


def _draw_negatives(gen, n):
    neg = gen.integers(0, n - 1, size=n)
    neg[neg >= np.arange(n)] += 1
    return neg


def _evaluate_map(model, ids, T, V):
    mode = model.config.distance_mode
    projected_items = (model.W_v @ V.T).T + model.b_v
    queries = []
    for qi in range(len(T)):
        q = model.W_t @ T[qi] + model.b_t
        d = np.sum((projected_items - q) ** 2, axis=1)
        if mode == "euclidean":
            d = np.sqrt(d + _EPS)
        order = sorted(range(len(ids)), key=lambda i: (d[i], ids[i]))
        queries.append(([ids[i] for i in order], {ids[qi]}))
    return mean_average_precision(queries)


def train_embedding(train_pairs, test_pairs, table: WordVectorTable, config: TrainConfig):
    """Train both projection heads with SGD on triplet loss.

    Pairs are (id, caption, visual FeatureVector) triples.  Per epoch:
    seeded shuffle, batches of config.batch_size, one uniformly drawn
    negative per anchor (plus the image-anchored mirror triplet when
    bidirectional), averaged subgradient step on all four blocks."""
    train_ids, T, V = _pair_arrays(train_pairs, table)
    if len(train_ids) < 2:
        raise InsufficientPairsError("need at least 2 usable training pairs")
    test_ids, T_test, V_test = _pair_arrays(test_pairs, table)
    visual_dim = V.shape[1]
    model = init_model(visual_dim, T.shape[1], config)
    W_v, b_v = model.W_v.copy(), model.b_v.copy()
    W_t, b_t = model.W_t.copy(), model.b_t.copy()
    n = len(train_ids)
    margin, mode, lr = config.margin, config.distance_mode, config.learning_rate
    # fixed negative assignments for the reported per-epoch losses, so the
    # trace measures model progress rather than negative-sampling noise
    eval_neg_train = _draw_negatives(rng.stream(config.seed, "eval", 0), n)
    eval_neg_test = (
        _draw_negatives(rng.stream(config.seed, "eval", 1), len(test_ids))
        if len(test_ids) >= 2
        else None
    )
    train_losses, test_losses, test_maps = [], [], []
    for epoch in range(config.epochs):
        shuffle_gen = rng.stream(config.seed, "shuffle", epoch)
        neg_gen = rng.stream(config.seed, "negatives", epoch)
        order = shuffle_gen.permutation(n)
        negatives = _draw_negatives(neg_gen, n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            _, count, grads = _epoch_loss_and_grads(
                (W_v, b_v, W_t, b_t), T, V, batch, negatives[batch],
                margin, mode, config.bidirectional,
            )
            gW_v, gb_v, gW_t, gb_t = grads
            W_v -= lr * gW_v / count
            b_v -= lr * gb_v / count
            W_t -= lr * gW_t / count
            b_t -= lr * gb_t / count
        if not (np.all(np.isfinite(W_v)) and np.all(np.isfinite(W_t))):
            raise NumericError(f"non-finite parameters at epoch {epoch + 1}")
        blocks = (W_v, b_v, W_t, b_t)
        train_loss = _evaluate_loss(blocks, T, V, eval_neg_train, margin, mode, config.bidirectional)
        if not np.isfinite(train_loss):
            raise NumericError(f"non-finite training loss at epoch {epoch + 1}")
        if eval_neg_test is not None:
            snapshot = EmbeddingModel(
                W_v=W_v.copy(), b_v=b_v.copy(), W_t=W_t.copy(), b_t=b_t.copy(), config=config
            )
            test_losses.append(
                float(_evaluate_loss(blocks, T_test, V_test, eval_neg_test, margin, mode, config.bidirectional))
            )
            test_maps.append(float(_evaluate_map(snapshot, test_ids, T_test, V_test)))
        else:
            test_losses.append(float("nan"))
            test_maps.append(float("nan"))
        train_losses.append(float(train_loss))
    final = EmbeddingModel(W_v=W_v, b_v=b_v, W_t=W_t, b_t=b_t, config=config)
    trace = TrainingTrace(
        train_loss=tuple(train_losses),
        test_loss=tuple(test_losses),
        test_map=tuple(test_maps),
    )
    return final, trace


def rank_memes(model: EmbeddingModel, query: str, items, table: WordVectorTable, k: int | None = None) -> RankedResult:
    """Rank (id, visual FeatureVector) items by ascending shared-space
    distance to the projected query; ties broken by item id."""
    if not items:
        raise DataError("no items to rank")
    text_vec, dropped = embed_text(query, table)
    q = model.project("text", text_vec)
    scored = []
    for item_id, visual in items:
        v = model.project("visual", visual)
        scored.append((item_id, float(_distance(q, v, model.config.distance_mode))))
    scored.sort(key=lambda t: (t[1], t[0]))
    if k is not None:
        scored = scored[: max(0, k)]
    return RankedResult(
        results=tuple((item_id, d, rank) for rank, (item_id, d) in enumerate(scored, start=1)),
        dropped_tokens=tuple(dropped),
    )


def rank_texts(model: EmbeddingModel, query_visual, captions, table: WordVectorTable, k: int | None = None) -> RankedResult:
    """Mirror of rank_memes: rank (id, caption) entries against a visual
    query.  All-OOV captions are excluded from the ranking."""
    if not captions:
        raise DataError("no captions to rank")
    q = model.project("visual", query_visual)
    scored = []
    for item_id, caption in captions:
        try:
            t_vec, _ = embed_text(caption, table)
        except AllTokensUnknownError:
            continue
        t = model.project("text", t_vec)
        scored.append((item_id, float(_distance(q, t, model.config.distance_mode))))
    if not scored:
        raise AllTokensUnknownError(["<all captions out of vocabulary>"])
    scored.sort(key=lambda t: (t[1], t[0]))
    if k is not None:
        scored = scored[: max(0, k)]
    return RankedResult(
        results=tuple((item_id, d, rank) for rank, (item_id, d) in enumerate(scored, start=1)),
    )
