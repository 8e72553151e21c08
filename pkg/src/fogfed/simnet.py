"""Round-based orchestration of the fog topology: local training, the ledger gate,
the wait-for-all barrier, fusion, block append, and the heterogeneity index."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset, ShardPlan, make_shards
from .fedcore import LocalUpdate, ScalingPolicy, federated_fuse
from .ledger import (
    Chain,
    DeviceRegistry,
    UpdateRecord,
    append_block,
    authorize,
    new_chain,
    verify_chain,
    weight_digest,
)
from .neuralnet.network import (
    LayerSpec,
    TrainHistory,
    default_arch,
    evaluate,
    init_weights,
    train_local,
)
from .neuralnet.weights import WeightSet

# Seed-derivation tag for update-time sampling, mixed with (seed, round).
_TIMES_TAG = 0x54494D45  # "TIME"


@dataclass(frozen=True)
class UpdateTimeModel:
    """Per-round worker update times: a fixed list or a seeded log-normal draw."""

    mode: str = "lognormal"
    values: tuple[float, ...] | None = None
    mu: float = 0.0
    sigma: float = 0.25

    def __post_init__(self):
        if self.mode not in ("fixed", "lognormal"):
            raise ValueError(f"unknown update-time mode {self.mode!r}")
        if self.mode == "fixed":
            if not self.values:
                raise ValueError("fixed update-time model needs values")
            if any(v <= 0 for v in self.values):
                raise ValueError("update times must be positive")
        elif self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class UpdateTimes:
    """One round's worker update times (training + communication, seconds)."""

    phi: tuple[float, ...]

    def __post_init__(self):
        if any(t <= 0 for t in self.phi):
            raise ValueError("update times must be positive")


@dataclass(frozen=True)
class SimConfig:
    """Full experiment parameterization.

    All randomness derives from `seed`: the global model initializes from
    `seed`, client k trains with `seed + k` (or `seed` for every client when
    identical_client_seeds is set), shard shuffling uses `seed`, and round r's
    update times draw from (seed, r). trusted_ids defaults to the K client ids
    plus server_id; intruder_ids must stay disjoint from it.
    """

    client_count: int = 1
    rounds: int = 1
    epochs: int = 10
    batch: int = 8
    lr: float = 0.01
    momentum: float = 0.9
    boost: float = 2.0
    seed: int = 0
    shard_mode: str = "replicate"
    trusted_ids: frozenset[int] | None = None
    intruder_ids: tuple[int, ...] = ()
    update_times: UpdateTimeModel = field(default_factory=UpdateTimeModel)
    identical_client_seeds: bool = False
    sweep: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.client_count < 1 or self.rounds < 1:
            raise ValueError("client_count and rounds must be >= 1")
        trusted = self.resolved_trusted_ids()
        if set(self.intruder_ids) & trusted:
            raise ValueError("intruder_ids and trusted_ids must be disjoint")

    @property
    def server_id(self) -> int:
        return self.client_count  # one past the last client id

    def resolved_trusted_ids(self) -> frozenset[int]:
        if self.trusted_ids is not None:
            return frozenset(self.trusted_ids)
        return frozenset(range(self.client_count)) | {self.server_id}

    def client_seed(self, client_id: int) -> int:
        return self.seed if self.identical_client_seeds else self.seed + client_id


@dataclass(frozen=True)
class RoundReport:
    """Per-round metrics surfaced to the CSV export."""

    round: int
    client_count: int
    local_accuracies: tuple[float, ...]
    avg_local_accuracy: float
    global_accuracy: float
    factors: tuple[float, ...]
    chain_tip_index: int
    rejected_count: int
    heterogeneity: float  # NaN for single-worker rounds


@dataclass(frozen=True)
class SimState:
    """Everything the server role carries between rounds."""

    arch: tuple[LayerSpec, ...]
    global_weights: WeightSet
    shards: tuple[Dataset, ...]
    test: Dataset
    registry: DeviceRegistry
    chain: Chain
    round_index: int = 0
    last_histories: tuple[TrainHistory, ...] = ()
    last_confusion: np.ndarray | None = None


def heterogeneity(times) -> float:
    """Spread of worker update times: 0 when all equal, approaching 1 as they diverge.

    With phi_min the fastest worker's time, one minimal worker (lowest index
    among minima) is excluded and H = 1 - mean(phi_min / phi_w) over the
    remaining W-1 workers.
    """
    phi = list(times.phi) if isinstance(times, UpdateTimes) else [float(t) for t in times]
    w = len(phi)
    if w < 2:
        raise ValueError(f"heterogeneity needs at least 2 workers, got {w}")
    if any(t <= 0 for t in phi):
        raise ValueError("update times must be positive")
    phi_min = min(phi)
    skip = phi.index(phi_min)
    ratios = [phi_min / t for i, t in enumerate(phi) if i != skip]
    return 1.0 - sum(ratios) / (w - 1)


def sample_update_times(config: SimConfig, round_index: int) -> UpdateTimes:
    """Per-worker times for one round; deterministic in (config.seed, round_index)."""
    model = config.update_times
    k = config.client_count
    if model.mode == "fixed":
        if len(model.values) != k:
            raise ValueError(
                f"fixed update-time list has {len(model.values)} entries for {k} workers"
            )
        return UpdateTimes(phi=tuple(float(v) for v in model.values))
    rng = np.random.default_rng([config.seed, round_index, _TIMES_TAG])
    draws = rng.lognormal(mean=model.mu, sigma=model.sigma, size=k)
    return UpdateTimes(phi=tuple(float(v) for v in draws))


def init_state(
    config: SimConfig, train: Dataset, test: Dataset, arch: list[LayerSpec] | None = None
) -> SimState:
    """Shard the data, initialize the global model, the registry, and the chain."""
    trusted = config.resolved_trusted_ids()
    missing = [cid for cid in range(config.client_count) if cid not in trusted]
    if missing:
        raise ValueError(f"clients {missing} are not in trusted_ids; every fog client must be trusted")
    plan = ShardPlan(
        mode="replicate" if config.shard_mode == "replicate" else "iid-partition",
        client_count=config.client_count,
        seed=config.seed,
    )
    shards = make_shards(train, plan)
    if arch is None:
        arch = default_arch(train.n_features, int(max(train.labels.max(), test.labels.max())) + 1)
    return SimState(
        arch=tuple(arch),
        global_weights=init_weights(arch, config.seed),
        shards=tuple(shards),
        test=test,
        registry=DeviceRegistry(frozenset(trusted)),
        chain=new_chain(),
    )


def run_round(state: SimState, config: SimConfig) -> tuple[SimState, RoundReport]:
    """One synchronous federated round.

    Every trusted client trains from the current global model on its shard;
    intruder submissions are turned away at the authorization gate and
    counted; the server waits for all K trusted updates, fuses them, appends
    one block holding the round's records, and evaluates the new global model.
    """
    if verify_chain(state.chain) is not None:
        raise ValueError("chain is invalid; aborting round")
    arch = list(state.arch)
    k = config.client_count
    rnd = state.round_index

    times = sample_update_times(config, rnd)
    h = heterogeneity(times) if k >= 2 else math.nan

    submissions: list[LocalUpdate] = []
    histories: list[TrainHistory] = []
    for cid in range(k):
        try:
            trained, history = train_local(
                arch,
                state.global_weights,
                state.shards[cid],
                state.test,
                epochs=config.epochs,
                batch=config.batch,
                lr=config.lr,
                momentum=config.momentum,
                seed=config.client_seed(cid),
            )
        except Exception as exc:
            raise RuntimeError(f"client {cid} failed training in round {rnd}: {exc}") from exc
        histories.append(history)
        acc = history.records[-1].val_accuracy
        submissions.append(LocalUpdate(client_id=cid, round=rnd, weights=trained, reported_accuracy=acc))

    # Intruders attempt a submission of whatever they hold (the current global
    # model here); the gate rejects them before the barrier.
    rejected = 0
    for intruder in config.intruder_ids:
        forged = LocalUpdate(
            client_id=intruder, round=rnd, weights=state.global_weights, reported_accuracy=0.0
        )
        if authorize(state.registry, forged.client_id):
            submissions.append(forged)
        else:
            rejected += 1

    accepted = [u for u in submissions if authorize(state.registry, u.client_id)]
    if len(accepted) < k:
        raise RuntimeError(f"barrier broken: only {len(accepted)} of {k} trusted updates arrived")

    fused, factors = federated_fuse(accepted, ScalingPolicy(boost=config.boost))
    records = [
        UpdateRecord(
            client_id=u.client_id,
            round=u.round,
            weight_digest=weight_digest(u.weights),
            reported_accuracy=u.reported_accuracy,
            factor_assigned=f,
        )
        for u, f in zip(accepted, factors)
    ]
    chain = append_block(state.chain, records)

    report_eval = evaluate(arch, fused, state.test)
    local_accs = tuple(u.reported_accuracy for u in accepted)
    report = RoundReport(
        round=rnd,
        client_count=k,
        local_accuracies=local_accs,
        avg_local_accuracy=float(sum(local_accs) / len(local_accs)),
        global_accuracy=report_eval.accuracy,
        factors=tuple(factors),
        chain_tip_index=chain.tip.index,
        rejected_count=rejected,
        heterogeneity=h,
    )
    next_state = replace(
        state,
        global_weights=fused,
        chain=chain,
        round_index=rnd + 1,
        last_histories=tuple(histories),
        last_confusion=report_eval.confusion,
    )
    return next_state, report


@dataclass(frozen=True)
class SweepEntry:
    """Outcome of running the configured rounds at one client count."""

    client_count: int
    reports: tuple[RoundReport, ...]
    chain: Chain
    final_weights: WeightSet
    final_confusion: np.ndarray
    histories: tuple[tuple[TrainHistory, ...], ...]  # [round][client]


@dataclass(frozen=True)
class ExperimentResult:
    entries: tuple[SweepEntry, ...]

    @property
    def reports(self) -> tuple[RoundReport, ...]:
        return tuple(r for e in self.entries for r in e.reports)


def run_experiment(
    config: SimConfig,
    train: Dataset,
    test: Dataset,
    sweep=None,
    arch: list[LayerSpec] | None = None,
) -> ExperimentResult:
    """Run the configured rounds for each client count in the sweep.

    Each sweep entry retrains from scratch with the same base seed, mirroring
    a comparison of global versus average-local accuracy as the client count
    grows. Sweep resolution: explicit argument, then config.sweep, then 1..10.
    """
    if sweep is None:
        sweep = config.sweep if config.sweep is not None else tuple(range(1, 11))
    sweep = tuple(int(n) for n in sweep)
    if not sweep or any(n < 1 for n in sweep):
        raise ValueError(f"sweep must list positive client counts, got {sweep!r}")

    entries = []
    for n in sweep:
        cfg_n = replace(config, client_count=n, sweep=None)
        state = init_state(cfg_n, train, test, arch=arch)
        reports = []
        round_histories = []
        for _ in range(cfg_n.rounds):
            state, report = run_round(state, cfg_n)
            reports.append(report)
            round_histories.append(state.last_histories)
        entries.append(
            SweepEntry(
                client_count=n,
                reports=tuple(reports),
                chain=state.chain,
                final_weights=state.global_weights,
                final_confusion=state.last_confusion,
                histories=tuple(round_histories),
            )
        )
    return ExperimentResult(entries=tuple(entries))


def reports_to_csv(reports) -> str:
    """Round metrics as CSV: fixed columns then one accuracy column per client."""
    reports = list(reports)
    max_k = max((r.client_count for r in reports), default=0)
    header = ["round", "client_count", "avg_local_acc", "global_acc", "rejected", "chain_len", "H"]
    header += [f"acc_client_{i}" for i in range(max_k)]
    lines = [",".join(header)]
    for r in reports:
        row = [
            str(r.round),
            str(r.client_count),
            repr(r.avg_local_accuracy),
            repr(r.global_accuracy),
            str(r.rejected_count),
            str(r.chain_tip_index + 1),
            repr(r.heterogeneity),
        ]
        accs = [repr(a) for a in r.local_accuracies]
        accs += [""] * (max_k - len(accs))
        lines.append(",".join(row + accs))
    return "\n".join(lines) + "\n"


def confusion_to_csv(confusion: np.ndarray) -> str:
    return "\n".join(",".join(str(int(v)) for v in row) for row in confusion) + "\n"
