"""Dataset loading, resampling and fold construction.

Manifests are UTF-8 JSON Lines: one record per line with fields
``id`` (required), ``image_path``, ``label``, ``caption`` and ``split``.
Feature files are plain text: a ``"<count> <dimension>"`` header followed
by ``"<id> v1 v2 ... vn"`` rows, the common pretrained word-vector
convention, so one loader reads deep visual features and word vectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import (
    ClassTooSmallError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyClassError,
    InsufficientPairsError,
    NonFiniteValueError,
    ParseError,
)

CLASS_LABELS = ("meme", "sticker", "no_meme")
SPLITS = ("train", "test", "unsplit")


@dataclass(frozen=True)
class FeatureVector:
    id: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise DimensionMismatchError(f"feature vector {self.id!r} must be 1-D and non-empty")
        if not np.all(np.isfinite(v)):
            raise NonFiniteValueError(f"feature vector {self.id!r} contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def dimension(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image_path: str | None = None
    label: str | None = None
    caption: str | None = None
    split: str = "unsplit"

    def __post_init__(self):
        if self.label is not None and self.label not in CLASS_LABELS:
            raise ParseError("<manifest>", 0, f"unknown label {self.label!r}")
        if self.split not in SPLITS:
            raise ParseError("<manifest>", 0, f"unknown split {self.split!r}")


@dataclass(frozen=True)
class LabeledDataset:
    samples: tuple  # of (FeatureVector, label)
    class_counts: dict = field(default_factory=dict)

    @staticmethod
    def from_samples(samples) -> "LabeledDataset":
        samples = tuple(samples)
        counts = {}
        for _, label in samples:
            counts[label] = counts.get(label, 0) + 1
        return LabeledDataset(samples=samples, class_counts=counts)

    def matrix(self):
        """(X, y) view: float matrix and label list, in sample order."""
        X = np.stack([fv.values for fv, _ in self.samples])
        y = [label for _, label in self.samples]
        return X, y


def load_manifest(path) -> list[ManifestEntry]:
    entries = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid record: {exc}") from exc
            if not isinstance(record, dict) or "id" not in record:
                raise ParseError(path, line_no, "record must be an object with an 'id' field")
            entry_id = record["id"]
            if entry_id in seen:
                raise DuplicateIdError(f"{path}:{line_no}: duplicate id {entry_id!r}")
            seen.add(entry_id)
            label = record.get("label")
            if label is not None and label not in CLASS_LABELS:
                raise ParseError(path, line_no, f"unknown label {label!r}")
            split = record.get("split", "unsplit")
            if split not in SPLITS:
                raise ParseError(path, line_no, f"unknown split {split!r}")
            entries.append(
                ManifestEntry(
                    id=entry_id,
                    image_path=record.get("image_path"),
                    label=label,
                    caption=record.get("caption"),
                    split=split,
                )
            )
    return entries


def save_manifest(entries, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for e in entries:
            record = {"id": e.id}
            if e.image_path is not None:
                record["image_path"] = e.image_path
            if e.label is not None:
                record["label"] = e.label
            if e.caption is not None:
                record["caption"] = e.caption
            if e.split != "unsplit":
                record["split"] = e.split
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_feature_file(path) -> dict[str, FeatureVector]:
    vectors: dict[str, FeatureVector] = {}
    with open(path, encoding="utf-8") as f:
        header = f.readline()
        parts = header.split()
        if len(parts) != 2:
            raise ParseError(path, 1, "header must be '<count> <dimension>'")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ParseError(path, 1, f"bad header: {exc}") from exc
        if dim < 1:
            raise ParseError(path, 1, f"dimension must be >= 1, got {dim}")
        for row, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split(" ")
            token = fields[0]
            raw = fields[1:]
            if len(raw) != dim:
                raise DimensionMismatchError(
                    f"{path}: row {row} ({token!r}) has {len(raw)} values, expected {dim}"
                )
            values = np.array([float(x) for x in raw], dtype=np.float64)
            if not np.all(np.isfinite(values)):
                raise NonFiniteValueError(f"{path}: row {row} ({token!r}) has non-finite values")
            if token in vectors:
                raise DuplicateIdError(f"{path}: row {row}: duplicate id {token!r}")
            vectors[token] = FeatureVector(id=token, values=values)
    if len(vectors) != count:
        raise ParseError(path, 1, f"header declares {count} rows, file has {len(vectors)}")
    return vectors


def save_feature_file(vectors, path) -> None:
    items = list(vectors.values()) if isinstance(vectors, dict) else list(vectors)
    if not items:
        raise DimensionMismatchError("cannot save an empty feature file")
    dim = items[0].dimension
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{len(items)} {dim}\n")
        for fv in items:
            if fv.dimension != dim:
                raise DimensionMismatchError(
                    f"vector {fv.id!r} has dimension {fv.dimension}, expected {dim}"
                )
            f.write(fv.id + " " + " ".join(repr(float(v)) for v in fv.values) + "\n")


def labeled_dataset(entries, features) -> LabeledDataset:
    """Join manifest entries with their feature vectors, keeping only
    labeled entries (retrieval-only items are filtered out)."""
    samples = []
    for e in entries:
        if e.label is None:
            continue
        if e.id not in features:
            raise DataKeyError(e.id)
        samples.append((features[e.id], e.label))
    return LabeledDataset.from_samples(samples)


class DataKeyError(KeyError):
    def __init__(self, item_id):
        super().__init__(f"no feature vector for manifest id {item_id!r}")


def undersample(data: LabeledDataset, seed: int) -> LabeledDataset:
    """Randomly delete majority-class samples until every class matches
    the minority count.  Deterministic for a fixed seed."""
    if not data.class_counts:
        raise EmptyClassError("dataset has no labeled samples")
    for label, count in data.class_counts.items():
        if count < 1:
            raise EmptyClassError(f"class {label!r} has no samples")
    target = min(data.class_counts.values())
    gen = rng.stream(seed, "undersample")
    keep = set()
    by_class: dict[str, list[int]] = {}
    for i, (_, label) in enumerate(data.samples):
        by_class.setdefault(label, []).append(i)
    for label in sorted(by_class):
        idx = by_class[label]
        chosen = gen.choice(len(idx), size=target, replace=False)
        keep.update(idx[j] for j in chosen)
    samples = [data.samples[i] for i in sorted(keep)]
    return LabeledDataset.from_samples(samples)


def stratified_folds(data: LabeledDataset, k: int, seed: int) -> list[tuple[list, list]]:
    """k disjoint (train, validation) index partitions preserving class
    proportions; per-class validation counts differ by at most one."""
    if k < 2:
        raise ClassTooSmallError(f"k must be >= 2, got {k}")
    by_class: dict[str, list[int]] = {}
    for i, (_, label) in enumerate(data.samples):
        by_class.setdefault(label, []).append(i)
    for label, idx in by_class.items():
        if len(idx) < k:
            raise ClassTooSmallError(
                f"class {label!r} has {len(idx)} samples, fewer than k={k}"
            )
    gen = rng.stream(seed, "folds")
    fold_val: list[list[int]] = [[] for _ in range(k)]
    for label in sorted(by_class):
        idx = np.array(by_class[label])
        gen.shuffle(idx)
        for fold, chunk in enumerate(np.array_split(idx, k)):
            fold_val[fold].extend(int(i) for i in chunk)
    folds = []
    all_indices = set(range(len(data.samples)))
    for val in fold_val:
        val_sorted = sorted(val)
        train_sorted = sorted(all_indices.difference(val))
        folds.append((train_sorted, val_sorted))
    return folds


def retrieval_pairs(entries, features) -> list[ManifestEntry]:
    """Entries usable as (caption, visual) training pairs."""
    return [e for e in entries if e.caption is not None and e.id in features]


def split_pairs(entries, n_train: int, seed: int):
    """Split caption-bearing entries into train/test pairs.  Entries whose
    manifest already tags them train/test keep their tag; only unsplit
    entries are shuffled into the remaining slots."""
    tagged_train = [e for e in entries if e.split == "train"]
    tagged_test = [e for e in entries if e.split == "test"]
    free = [e for e in entries if e.split == "unsplit"]
    if len(entries) < n_train + 1:
        raise InsufficientPairsError(
            f"need at least {n_train + 1} pairs for n_train={n_train}, have {len(entries)}"
        )
    need = n_train - len(tagged_train)
    if need < 0:
        raise InsufficientPairsError(
            f"{len(tagged_train)} pairs already tagged train exceeds n_train={n_train}"
        )
    if need > len(free):
        raise InsufficientPairsError(
            f"need {need} more train pairs but only {len(free)} untagged remain"
        )
    gen = rng.stream(seed, "split")
    order = gen.permutation(len(free))
    train = tagged_train + [free[i] for i in order[:need]]
    test = tagged_test + [free[i] for i in order[need:]]
    if not test:
        raise InsufficientPairsError("split leaves no test pairs")
    return train, test
