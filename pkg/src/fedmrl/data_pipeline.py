"""Datasets, the shard-based non-IID partitioner, and client statistics.

The partitioner sorts samples by label, slices each class into a fixed
number of contiguous shards, and lets clients claim shards one at a time in
round-robin order.  For every claim the client draws the class from a fresh
weight vector: weight `eta` on its preferred class and clipped N(0.5, 1)
draws elsewhere, normalized to sum to one.  When the drawn class has no
shards left the client redraws among the nonempty classes with renormalized
weights, so the procedure always terminates with an exact partition.
Redrawing the Gaussian weights per claim (rather than fixing them per
client) keeps the preferred class's expected share strictly above every
other class whenever eta exceeds the clipped-Gaussian mean.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError, ParseError, ValidationError


@dataclass
class LabeledDataset:
    """Feature rows with integer class labels in [0, num_classes)."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.num_classes = int(self.num_classes)
        if self.features.ndim != 2:
            raise ConfigurationError("features must be a 2-D array")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ConfigurationError("features and labels disagree on sample count")
        if self.features.shape[0] == 0:
            raise InputError("dataset is empty")
        if self.num_classes < 1:
            raise ConfigurationError("num_classes must be >= 1")
        if np.any(self.labels < 0) or np.any(self.labels >= self.num_classes):
            raise ConfigurationError("labels outside [0, num_classes)")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[indices], self.labels[indices], self.num_classes)


@dataclass
class PartitionPlan:
    """Knobs for the shard partitioner.

    `eta` is the preferred-class weight in [0, 1]; `preferred_class` defaults
    to round-robin assignment (client h prefers class h mod M).
    """

    eta: float
    client_count: int
    shards_per_class: int = 200
    preferred_class: tuple[int, ...] | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.eta <= 1.0):
            raise ConfigurationError(f"eta must be in [0, 1], got {self.eta}")
        if self.client_count < 2:
            raise ConfigurationError("client_count must be >= 2")
        if self.shards_per_class < 1:
            raise ConfigurationError("shards_per_class must be >= 1")
        if self.preferred_class is not None:
            self.preferred_class = tuple(int(j) for j in self.preferred_class)
            if len(self.preferred_class) != self.client_count:
                raise ConfigurationError("preferred_class must list one class per client")


@dataclass
class ClientStats:
    """Static per-client features: label entropy (nats) and data share."""

    entropy: float
    proportion: float


def _client_weights(plan: PartitionPlan, preferred: int, num_classes: int, rng) -> np.ndarray:
    w = np.clip(rng.normal(0.5, 1.0, size=num_classes), 0.0, 1.0)
    w[preferred] = plan.eta
    total = w.sum()
    if total <= 0.0:
        return np.full(num_classes, 1.0 / num_classes)
    return w / total


def partition(dataset: LabeledDataset, plan: PartitionPlan, rng=None) -> list[LabeledDataset]:
    """Split a dataset into disjoint per-client datasets covering the input."""
    num_classes = dataset.num_classes
    clients = plan.client_count
    preferred = plan.preferred_class or tuple(h % num_classes for h in range(clients))
    if any(j < 0 or j >= num_classes for j in preferred):
        raise ConfigurationError("preferred classes must be valid class indices")
    if rng is None:
        rng = np.random.default_rng(plan.rng_seed)

    shards: list[list[np.ndarray]] = []
    for m in range(num_classes):
        idx = np.flatnonzero(dataset.labels == m)
        if idx.size == 0:
            shards.append([])
            continue
        k = plan.shards_per_class
        if idx.size < k:
            warnings.warn(
                f"class {m} has {idx.size} samples < shards_per_class={k}; "
                f"using {idx.size} shards"
            )
            k = idx.size
        shards.append(np.array_split(idx, k))

    remaining = np.array([len(s) for s in shards], dtype=np.int64)
    total_remaining = int(remaining.sum())
    if total_remaining < clients:
        raise ConfigurationError(
            f"only {total_remaining} shards for {clients} clients; reduce client count"
        )

    next_shard = np.zeros(num_classes, dtype=np.int64)
    claims: list[list[np.ndarray]] = [[] for _ in range(clients)]

    h = 0
    while total_remaining > 0:
        weights = _client_weights(plan, preferred[h], num_classes, rng)
        m = int(rng.choice(num_classes, p=weights))
        if remaining[m] == 0:
            masked = np.where(remaining > 0, weights, 0.0)
            total = masked.sum()
            if total <= 0.0:
                masked = (remaining > 0).astype(np.float64)
                total = masked.sum()
            m = int(rng.choice(num_classes, p=masked / total))
        claims[h].append(shards[m][next_shard[m]])
        next_shard[m] += 1
        remaining[m] -= 1
        total_remaining -= 1
        h = (h + 1) % clients

    return [dataset.subset(np.concatenate(claims[h])) for h in range(clients)]


def client_entropy(dataset: LabeledDataset) -> float:
    """Shannon entropy of the dataset's label distribution, in nats."""
    counts = dataset.class_counts()
    p = counts[counts > 0] / len(dataset)
    return float(-(p * np.log(p)).sum())


def client_proportion(dataset: LabeledDataset, total_n: int) -> float:
    """This client's share of the federation's samples."""
    if total_n <= 0:
        raise InputError("total sample count must be positive")
    if len(dataset) > total_n:
        raise InputError("client holds more samples than the stated total")
    return len(dataset) / total_n


def client_statistics(client_datasets: list[LabeledDataset]) -> list[ClientStats]:
    """Entropy/proportion pairs for a partition, against its own total size."""
    total = sum(len(d) for d in client_datasets)
    return [
        ClientStats(client_entropy(d), client_proportion(d, total)) for d in client_datasets
    ]


def synth_gaussian_mixture(
    num_classes: int, per_class: int, dim: int, separation: float, seed: int
) -> LabeledDataset:
    """Isotropic Gaussian blobs on a circle of radius `separation`.

    Class centers sit at evenly spaced angles in the first two feature
    coordinates (just the cosine when dim == 1), so any number of classes
    fits in any dimension.  Deterministic per seed.
    """
    if num_classes < 2 or per_class < 1 or dim < 1:
        raise ConfigurationError("num_classes >= 2, per_class >= 1, dim >= 1 required")
    if separation < 0:
        raise ConfigurationError("separation must be >= 0")
    rng = np.random.default_rng(seed)
    centers = np.zeros((num_classes, dim))
    angles = 2.0 * math.pi * np.arange(num_classes) / num_classes
    centers[:, 0] = separation * np.cos(angles)
    if dim >= 2:
        centers[:, 1] = separation * np.sin(angles)
    blocks = [centers[m] + rng.standard_normal((per_class, dim)) for m in range(num_classes)]
    features = np.vstack(blocks)
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    return LabeledDataset(features, labels, num_classes)


def load_csv_dataset(path, num_classes: int) -> LabeledDataset:
    """Load a headerless CSV of ``label,f1,f2,...`` rows."""
    features: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) < 2:
                raise ParseError("row needs a label and at least one feature", line=line_no)
            try:
                label = int(row[0])
            except ValueError:
                raise ParseError(f"bad label {row[0]!r}", line=line_no) from None
            try:
                values = [float(v) for v in row[1:]]
            except ValueError:
                raise ParseError("non-numeric feature value", line=line_no) from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ParseError(
                    f"expected {width} features, found {len(values)}", line=line_no
                )
            if label < 0 or label >= num_classes:
                raise ValidationError(
                    f"label {label} outside [0, {num_classes})", line=line_no
                )
            labels.append(label)
            features.append(values)
    if not labels:
        raise InputError(f"no data rows in {path}")
    return LabeledDataset(np.array(features), np.array(labels), num_classes)


def save_csv_dataset(dataset: LabeledDataset, path) -> None:
    """Write the `load_csv_dataset` format with round-trip-exact floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([int(label), *[repr(float(v)) for v in row]])
