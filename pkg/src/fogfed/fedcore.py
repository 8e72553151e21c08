"""Accuracy-boosted scaling factors and the weighted-average model fusion.

The best-accuracy client receives an unnormalized mass of `boost`, every other
client mass 1, and the masses are normalized by (K - 1 + boost). boost=1
degenerates to plain uniform federated averaging.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neuralnet.weights import WeightSet


@dataclass(frozen=True)
class ScalingPolicy:
    """boost >= 1 is the mass handed to the best-accuracy client before normalizing."""

    boost: float = 2.0

    def __post_init__(self):
        if not np.isfinite(self.boost) or self.boost < 1.0:
            raise ValueError(f"boost must be >= 1, got {self.boost}")


@dataclass(frozen=True)
class LocalUpdate:
    """One fog client's submission for a round."""

    client_id: int
    round: int
    weights: WeightSet
    reported_accuracy: float

    def __post_init__(self):
        if self.client_id < 0 or self.round < 0:
            raise ValueError("client_id and round must be non-negative")
        if not 0.0 <= self.reported_accuracy <= 1.0:
            raise ValueError(f"reported_accuracy {self.reported_accuracy} outside [0, 1]")


def scale_factors(accuracies, policy: ScalingPolicy) -> list[float]:
    """Convex-combination weights over clients, best accuracy boosted.

    Ties on the best accuracy break to the lowest index. Output order matches
    input order; factors are strictly positive and sum to 1.
    """
    accs = list(accuracies)
    if not accs:
        raise ValueError("need at least one accuracy")
    for a in accs:
        if not (np.isfinite(a) and 0.0 <= a <= 1.0):
            raise ValueError(f"accuracy {a} outside [0, 1]")
    k = len(accs)
    best = int(np.argmax(accs))  # argmax returns the first maximum
    total = k - 1 + policy.boost
    return [(policy.boost if i == best else 1.0) / total for i in range(k)]


def _check_shapes(updates: list[LocalUpdate]) -> None:
    ref = updates[0].weights.tensors
    for u in updates[1:]:
        if len(u.weights.tensors) != len(ref):
            raise ValueError(
                f"client {u.client_id} submitted {len(u.weights.tensors)} tensors, expected {len(ref)}"
            )
        for i, (a, b) in enumerate(zip(ref, u.weights.tensors)):
            if a.shape != b.shape:
                raise ValueError(
                    f"client {u.client_id} tensor {i} has shape {b.shape}, expected {a.shape}"
                )


def aggregate(updates: list[LocalUpdate], factors) -> WeightSet:
    """Elementwise convex combination of the local weights.

    Accumulates in float64 over the float32 inputs, summing in ascending
    client_id order, and casts the result back to float32.
    """
    factors = [float(f) for f in factors]
    if len(updates) != len(factors):
        raise ValueError(f"{len(updates)} updates but {len(factors)} factors")
    if not updates:
        raise ValueError("no updates to aggregate")
    if abs(sum(factors) - 1.0) > 1e-9:
        raise ValueError(f"factors sum to {sum(factors)!r}, expected 1 within 1e-9")
    _check_shapes(updates)
    for u in updates:
        for i, t in enumerate(u.weights.tensors):
            if not np.all(np.isfinite(t)):
                raise ValueError(f"client {u.client_id} tensor {i} contains NaN/Inf")

    ordered = sorted(zip(updates, factors), key=lambda pair: pair[0].client_id)
    n_tensors = len(updates[0].weights.tensors)
    fused = []
    for i in range(n_tensors):
        acc = np.zeros(updates[0].weights.tensors[i].shape, dtype=np.float64)
        for u, f in ordered:
            acc += f * u.weights.tensors[i].astype(np.float64)
        fused.append(acc.astype(np.float32))
    return WeightSet(fused, updates[0].weights.layer_of)


def federated_fuse(updates: list[LocalUpdate], policy: ScalingPolicy) -> tuple[WeightSet, list[float]]:
    """Score the round's submissions and average them into the global model.

    Returns the fused WeightSet and the factor assigned to each update, in the
    order the updates were passed in. Accuracy ties break to the lowest
    client_id regardless of submission order.
    """
    if not updates:
        raise ValueError("no updates to fuse")
    rounds = {u.round for u in updates}
    if len(rounds) != 1:
        raise ValueError(f"updates span rounds {sorted(rounds)}, expected one round")
    ids = [u.client_id for u in updates]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate client_id in updates")

    by_id = sorted(updates, key=lambda u: u.client_id)
    factors_sorted = scale_factors([u.reported_accuracy for u in by_id], policy)
    fused = aggregate(by_id, factors_sorted)
    factor_of = {u.client_id: f for u, f in zip(by_id, factors_sorted)}
    return fused, [factor_of[u.client_id] for u in updates]
