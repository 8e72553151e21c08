"""UCI-HAR ingestion, synthetic dataset generation, and per-client shard assignment."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .validation import as_feature_matrix, as_label_vector, check_positive_int

HAR_FEATURES = 561
HAR_CLASSES = 6

# Knuth MMIX linear congruential generator, mod 2**64. Used only for the
# iid shard shuffle so the assignment is reproducible across implementations:
#   state' = (state * LCG_MULT + LCG_INC) mod 2**64
#   draw(bound) = (state' >> 33) mod bound
LCG_MULT = 6364136223846793005
LCG_INC = 1442695040888963407
_MASK64 = (1 << 64) - 1


@dataclass
class Dataset:
    """A labelled feature matrix belonging to one split.

    features: (n, d) float32, one instance per row.
    labels:   (n,) int64 class indices, 0-based.
    split_tag: "train" or "test".
    """

    features: np.ndarray
    labels: np.ndarray
    split_tag: str

    def __post_init__(self):
        self.features = as_feature_matrix(self.features, "features")
        self.labels = as_label_vector(self.labels, n_rows=self.features.shape[0], name="labels")
        if self.split_tag not in ("train", "test"):
            raise ValueError(f"split_tag must be 'train' or 'test', got {self.split_tag!r}")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ShardPlan:
    """How the training split is assigned to fog clients.

    replicate: every client receives the identical full training set.
    iid-partition: disjoint near-equal row subsets covering the training set.
    """

    mode: str = "replicate"
    client_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("replicate", "iid-partition"):
            raise ValueError(f"unknown shard mode {self.mode!r}")
        check_positive_int(self.client_count, "client_count")


def _read_matrix(path: str) -> np.ndarray:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"missing dataset file: {path}")
    try:
        arr = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise ValueError(f"non-numeric token in {path}: {exc}") from exc
    return arr


def _find_har_file(dir_path: str, split: str, name: str) -> str:
    # UCI ships train/X_train.txt; flat directories are accepted too.
    for candidate in (
        os.path.join(dir_path, name),
        os.path.join(dir_path, split, name),
    ):
        if os.path.isfile(candidate):
            return candidate
    return os.path.join(dir_path, name)  # let _read_matrix raise with this path


def _load_har_split(dir_path: str, split: str) -> Dataset:
    x_path = _find_har_file(dir_path, split, f"X_{split}.txt")
    y_path = _find_har_file(dir_path, split, f"y_{split}.txt")
    X = _read_matrix(x_path)
    y = _read_matrix(y_path).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError(
            f"row/label count mismatch for {split}: {X.shape[0]} feature rows vs {y.shape[0]} labels"
        )
    if np.any(y != np.floor(y)):
        raise ValueError(f"non-integer label in {y_path}")
    y = y.astype(np.int64)
    if y.size and (y.min() < 1 or y.max() > HAR_CLASSES):
        bad = y[(y < 1) | (y > HAR_CLASSES)][0]
        raise ValueError(f"label {bad} outside 1..{HAR_CLASSES} in {y_path}")
    return Dataset(features=X.astype(np.float32), labels=y - 1, split_tag=split)


def load_har(dir_path: str) -> tuple[Dataset, Dataset]:
    """Load the UCI-HAR 561-feature view from whitespace-separated text files.

    Expects X_train.txt / y_train.txt / X_test.txt / y_test.txt either directly
    in `dir_path` or under train/ and test/ subdirectories (the UCI layout).
    Labels are 1-based on disk and converted to 0-based here.
    """
    train = _load_har_split(dir_path, "train")
    test = _load_har_split(dir_path, "test")
    if train.n_features != test.n_features:
        raise ValueError(
            f"train/test feature count mismatch: {train.n_features} vs {test.n_features}"
        )
    return train, test


def synth_dataset(seed: int, n: int, d: int, c: int) -> tuple[Dataset, Dataset]:
    """Generate c well-separated Gaussian clusters and split 70/30.

    Cluster means are placed so every pair is at least 6 noise standard
    deviations apart, making a nearest-centroid classifier nearly perfect.
    Values are deliberately not normalized. Deterministic in `seed`.
    """
    check_positive_int(n, "n")
    check_positive_int(d, "d")
    check_positive_int(c, "c", minimum=2)
    if n < c:
        raise ValueError(f"need n >= c, got n={n}, c={c}")

    # noise sigma 0.5, axis offsets 3*(1 + j//d): any mean pair differs by
    # >= 3 in some coordinate, i.e. >= 6 sigma
    means = np.zeros((c, d), dtype=np.float64)
    for j in range(c):
        means[j, j % d] = 3.0 * (1 + j // d)

    rng = np.random.default_rng(seed)
    labels = np.arange(n, dtype=np.int64) % c
    rng.shuffle(labels)
    features = 0.5 * rng.standard_normal((n, d)) + means[labels]

    n_train = int(round(n * 0.7))
    train = Dataset(features[:n_train].astype(np.float32), labels[:n_train], "train")
    test = Dataset(features[n_train:].astype(np.float32), labels[n_train:], "test")
    return train, test


def _lcg_shuffle(n: int, seed: int) -> np.ndarray:
    """Fisher-Yates permutation of range(n) driven by the documented 64-bit LCG."""
    state = seed & _MASK64
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        state = (state * LCG_MULT + LCG_INC) & _MASK64
        j = (state >> 33) % (i + 1)
        order[i], order[j] = order[j], order[i]
    return np.asarray(order, dtype=np.int64)


def make_shards(train: Dataset, plan: ShardPlan) -> list[Dataset]:
    """Assign the training split to clients per the plan.

    replicate: each shard aliases the full training set (datasets are treated
    as immutable). iid-partition: LCG-shuffled disjoint chunks whose sizes
    differ by at most one row.
    """
    k = plan.client_count
    if plan.mode == "replicate":
        return [train for _ in range(k)]

    n = train.n_rows
    if k > n:
        raise ValueError(f"client_count {k} exceeds training rows {n} for iid-partition")
    order = _lcg_shuffle(n, plan.seed)
    base, extra = divmod(n, k)
    shards = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        rows = order[start : start + size]
        start += size
        shards.append(Dataset(train.features[rows], train.labels[rows], "train"))
    return shards
