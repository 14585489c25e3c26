"""The synchronous training loop: cohort sampling, client fan-out,
aggregation, server step, and the adaptive clip-level update.

Rounds are strictly sequential. Within a round, client work items may run on
a thread pool; every client draws from a stream keyed by (seed, round,
client), and aggregation reduces in ascending client_id order, so metrics are
bit-identical for any worker count. A diverging client aborts its round: the
event is recorded as a failure and the model, optimizer slots, and clip level
carry over unchanged.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .client import (ClientUpdate, TrainingDivergedError, clip_update, compute_update,
                     examples_this_client, local_train)
from .data import ClientDataset, FederatedDataset, generate_synthetic, load_dataset
from .diagnostics import RoundMetrics, avg_cosine_similarity, detect_catastrophic, predicted_norm
from .models import ModelSpec, default_model_for, evaluate, init_params
from .params import LayeredParams, NonFiniteError, l2_norm
from .rng import PATH_CLIENT, PATH_COHORT, PATH_INIT, PATH_RUNTIME, client_tag, derive_stream
from .server import OptimizerSlots, aggregate, scaled_server_lr, server_step
from .straggler import client_runtime, round_runtime

if TYPE_CHECKING:
    from .config import ExperimentConfig


@dataclass(frozen=True)
class CohortSchedule:
    kind: str  # "fixed" | "doubling"
    size: int = 1  # fixed cohort size
    initial: int = 1  # doubling start size
    period: int = 300  # rounds between doublings
    cap: int | None = None  # schedule ceiling (population always caps)

    def __post_init__(self):
        if self.kind not in ("fixed", "doubling"):
            raise ValueError(f"unknown cohort schedule kind '{self.kind}'")
        if self.kind == "fixed" and self.size < 1:
            raise ValueError("fixed cohort size must be >= 1")
        if self.kind == "doubling":
            if self.initial < 1 or self.period < 1:
                raise ValueError("doubling schedule needs initial >= 1 and period >= 1")
            if self.cap is not None and self.cap < 1:
                raise ValueError("cohort cap must be >= 1")


@dataclass(frozen=True)
class ClipConfig:
    enabled: bool = True
    target_quantile: float = 0.8
    initial_level: float = 1.0
    adaptivity_lr: float = 0.2

    def __post_init__(self):
        if not 0 <= self.target_quantile <= 1:
            raise ValueError("target_quantile must be in [0, 1]")
        if not self.initial_level > 0:
            raise ValueError("initial clip level must be positive")
        if self.adaptivity_lr < 0:
            raise ValueError("clip adaptivity learning rate must be >= 0")


@dataclass(frozen=True)
class ServerState:
    round: int  # index of the next round to run (starts at 1)
    model: LayeredParams
    slots: OptimizerSlots
    clip_level: float


@dataclass(frozen=True)
class RoundEvents:
    diverged: bool = False
    catastrophic: bool = False
    zero_delta: bool = False
    train_acc_evaluated: float | None = None


@dataclass
class RunResult:
    metrics: list[RoundMetrics]
    halted: bool
    failure_rounds: list[int] = field(default_factory=list)
    zero_delta_rounds: list[int] = field(default_factory=list)
    final_state: ServerState | None = None
    final_train: tuple[float, float, list[float]] | None = None
    final_test: tuple[float, float, list[float]] | None = None


def cohort_size_at(schedule: CohortSchedule, t: int, population: int) -> int:
    """Cohort size for round t, never exceeding the population."""
    if t < 1:
        raise ValueError("round index must be >= 1")
    if schedule.kind == "fixed":
        return min(schedule.size, population)
    size = schedule.initial * 2 ** ((t - 1) // schedule.period)
    if schedule.cap is not None:
        size = min(size, schedule.cap)
    return min(size, population)


def sample_cohort(stream, client_ids: list[str], m: int) -> list[str]:
    """m distinct ids uniformly without replacement, sorted ascending."""
    if m > len(client_ids):
        raise ValueError(f"cohort size {m} exceeds population {len(client_ids)}")
    if m < 1:
        raise ValueError("cohort size must be >= 1")
    picked = stream.choice(len(client_ids), size=m, replace=False)
    return sorted(client_ids[i] for i in picked)


def update_clip_level(clip_level: float, clipped_share: float, adaptivity_lr: float,
                      target_quantile: float) -> float:
    """Geometric clip-level update toward the target norm quantile."""
    if not clip_level > 0:
        raise ValueError("clip level must be positive")
    if not 0 <= clipped_share <= 1:
        raise ValueError("unclipped share must be in [0, 1]")
    return clip_level * math.exp(-adaptivity_lr * (clipped_share - target_quantile))


def resolve_dataset(config: "ExperimentConfig") -> FederatedDataset:
    if config.data.source == "file":
        return load_dataset(config.data.path)
    return generate_synthetic(config.data.synthetic, config.seed)


def resolve_model_spec(config: "ExperimentConfig", fed: FederatedDataset) -> ModelSpec:
    if config.model is not None:
        return config.model
    return default_model_for(fed.task_kind, fed.input_dim, fed.num_classes)


def reference_cohort_size(config: "ExperimentConfig", population: int) -> int:
    if config.lr_scaling.reference_cohort is not None:
        return config.lr_scaling.reference_cohort
    return cohort_size_at(config.cohort, 1, population)


def _client_work(config: "ExperimentConfig", model_spec: ModelSpec, state: ServerState,
                 t: int, client: ClientDataset) -> ClientUpdate:
    tag = client_tag(client.client_id)
    train_stream = derive_stream(config.seed, (PATH_CLIENT, t, tag))
    local_model = local_train(model_spec, state.model, client, config.client_lr,
                              config.budget, train_stream)
    delta = compute_update(state.model, local_model)
    if config.clip.enabled:
        delta, indicator = clip_update(delta, state.clip_level)
    else:
        indicator = None
    runtime = client_runtime(client.num_examples, config.straggler,
                             derive_stream(config.seed, (PATH_RUNTIME, t, tag)))
    return ClientUpdate(
        client_id=client.client_id,
        delta=delta,
        weight=client.weight,
        clip_indicator=indicator,
        examples_processed=examples_this_client(config.budget, client.num_examples),
        runtime=runtime,
    )


def run_round(state: ServerState, fed: FederatedDataset, config: "ExperimentConfig", *,
              prev_train_acc: float | None = None, examples_before: int = 0,
              runtime_before: float = 0.0,
              executor: Executor | None = None) -> tuple[ServerState, RoundMetrics, RoundEvents]:
    """Run round t = state.round and return (state', metrics row, events).

    ``prev_train_acc`` is the train accuracy from the previous evaluation and
    feeds catastrophic-failure detection; ``examples_before``/``runtime_before``
    seed the cumulative counters of the emitted row.
    """
    t = state.round
    model_spec = resolve_model_spec(config, fed)
    ids_sorted = fed.train_ids()
    population = len(ids_sorted)
    m_t = cohort_size_at(config.cohort, t, population)
    if m_t == population:
        cohort = ids_sorted
    else:
        cohort = sample_cohort(derive_stream(config.seed, (PATH_COHORT, t)), ids_sorted, m_t)

    by_id = {c.client_id: c for c in fed.train_clients}
    clients = [by_id[cid] for cid in cohort]

    diverged = False
    updates: list[ClientUpdate] = []
    new_model, new_slots, new_clip = state.model, state.slots, state.clip_level
    pg_norm = pg_norm_pred = cosine = clipped_share = lr_eff = None
    zero_delta = False
    examples_round = 0
    runtime_this = None

    try:
        if executor is not None:
            updates = list(executor.map(
                lambda c: _client_work(config, model_spec, state, t, c), clients))
        else:
            updates = [_client_work(config, model_spec, state, t, c) for c in clients]

        delta, clipped_share = aggregate(updates)
        pg_norm = l2_norm(delta)
        m_ref = reference_cohort_size(config, population)
        pg_norm_pred = predicted_norm(pg_norm, m_t, m_ref) if pg_norm > 0 else None
        cosine = avg_cosine_similarity([u.delta for u in updates], cap=config.cosine_cap)
        lr_eff = scaled_server_lr(config.algorithm.lr, m_ref, m_t, config.lr_scaling.rule,
                                  config.lr_scaling.warmup_rounds, config.lr_scaling.warmup_start, t)
        if config.algorithm.kind == "normalized_sgd" and pg_norm == 0.0:
            zero_delta = True
        else:
            new_model, new_slots = server_step(config.algorithm, state.slots, state.model,
                                               lr_eff, delta)
        if config.clip.enabled:
            new_clip = update_clip_level(state.clip_level, clipped_share,
                                         config.clip.adaptivity_lr, config.clip.target_quantile)
        examples_round = sum(u.examples_processed for u in updates)
        runtime_this = round_runtime([u.runtime for u in updates])
    except (TrainingDivergedError, NonFiniteError):
        diverged = True
        new_model, new_slots, new_clip = state.model, state.slots, state.clip_level
        pg_norm = pg_norm_pred = cosine = clipped_share = lr_eff = None
        examples_round = 0
        runtime_this = None

    train_loss = train_acc = test_loss = test_acc = None
    catastrophic = False
    evaluated_acc = None
    if config.eval_period > 0 and t % config.eval_period == 0:
        train_loss, train_acc, _ = evaluate(model_spec, new_model, fed.train_clients)
        if fed.test_clients:
            test_loss, test_acc, _ = evaluate(model_spec, new_model, fed.test_clients)
        evaluated_acc = train_acc
        if prev_train_acc is not None:
            catastrophic = detect_catastrophic(prev_train_acc, train_acc)

    metrics = RoundMetrics(
        round=t,
        cohort_size=m_t,
        train_loss=train_loss,
        train_acc=train_acc,
        test_loss=test_loss,
        test_acc=test_acc,
        pg_norm=pg_norm,
        pg_norm_predicted=pg_norm_pred,
        cosine_avg=cosine,
        clip_fraction=clipped_share if config.clip.enabled else None,
        clip_level=state.clip_level if config.clip.enabled else None,
        lr_server=lr_eff,
        examples_round=examples_round,
        examples_cum=examples_before + examples_round,
        runtime_round=runtime_this,
        runtime_cum=runtime_before + (runtime_this or 0.0),
        failure=int(diverged or catastrophic),
    )
    next_state = ServerState(round=t + 1, model=new_model, slots=new_slots, clip_level=new_clip)
    events = RoundEvents(diverged=diverged, catastrophic=catastrophic, zero_delta=zero_delta,
                         train_acc_evaluated=evaluated_acc)
    return next_state, metrics, events


def initial_state(config: "ExperimentConfig", fed: FederatedDataset) -> ServerState:
    model_spec = resolve_model_spec(config, fed)
    model = init_params(model_spec, derive_stream(config.seed, (PATH_INIT,)))
    return ServerState(round=1, model=model, slots=OptimizerSlots.zeros(model),
                       clip_level=config.clip.initial_level)


def run_experiment(config: "ExperimentConfig", fed: FederatedDataset | None = None) -> RunResult:
    """Run the configured number of rounds and collect metrics.

    Evaluation runs every eval_period rounds on the full train and test
    client sets; a final evaluation for the summary always runs on the last
    model. ``halt_on_failure`` stops the loop right after a failed round.
    """
    if fed is None:
        fed = resolve_dataset(config)
    model_spec = resolve_model_spec(config, fed)
    state = initial_state(config, fed)
    result = RunResult(metrics=[], halted=False)

    executor = None
    if config.workers > 1:
        executor = ThreadPoolExecutor(max_workers=config.workers)
    try:
        prev_train_acc = None
        examples_cum = 0
        runtime_cum = 0.0
        for _ in range(config.rounds):
            state, row, events = run_round(
                state, fed, config,
                prev_train_acc=prev_train_acc,
                examples_before=examples_cum,
                runtime_before=runtime_cum,
                executor=executor,
            )
            result.metrics.append(row)
            examples_cum = row.examples_cum
            runtime_cum = row.runtime_cum
            if events.train_acc_evaluated is not None:
                prev_train_acc = events.train_acc_evaluated
            if events.zero_delta:
                result.zero_delta_rounds.append(row.round)
            if row.failure:
                result.failure_rounds.append(row.round)
                if config.halt_on_failure:
                    result.halted = True
                    break
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    result.final_state = state
    result.final_train = evaluate(model_spec, state.model, fed.train_clients)
    if fed.test_clients:
        result.final_test = evaluate(model_spec, state.model, fed.test_clients)
    return result
