"""Experiment configuration: strict JSON parsing with path-qualified errors.

A config file is a single JSON object. Unknown keys are rejected everywhere;
every invalid value reports its dotted path. Defaults follow the conventions
the engine is tuned around (clip quantile 0.8, initial level 1, clip rate
0.2; optimizer beta1 0.9, beta2 0.99, eps 0.001).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .client import LocalBudget
from .data import SyntheticDataSpec
from .loop import ClipConfig, CohortSchedule
from .models import ModelSpec
from .server import OPTIMIZER_KINDS, LrScalingConfig, ServerOptConfig
from .straggler import StragglerConfig


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


_REQUIRED = object()


class _Section:
    """Dict view that tracks consumed keys and qualifies errors with a path."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(path, f"expected an object, got {type(data).__name__}")
        self._data = dict(data)
        self._path = path

    def child(self, key: str) -> str:
        return f"{self._path}.{key}" if self._path else key

    def has(self, key: str) -> bool:
        return key in self._data

    def section(self, key: str, required: bool = False) -> "_Section | None":
        if key not in self._data:
            if required:
                raise ConfigError(self.child(key), "missing required section")
            return None
        return _Section(self._data.pop(key), self.child(key))

    def take(self, key, kind, default=_REQUIRED, choices=None, minimum=None, allow_none=False):
        if key not in self._data:
            if default is _REQUIRED:
                raise ConfigError(self.child(key), "missing required field")
            return default
        value = self._data.pop(key)
        path = self.child(key)
        if value is None and allow_none:
            return None
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is int and isinstance(value, bool):
            raise ConfigError(path, "expected an integer, got a boolean")
        if not isinstance(value, kind):
            raise ConfigError(path, f"expected {kind.__name__}, got {type(value).__name__}")
        if choices is not None and value not in choices:
            raise ConfigError(path, f"must be one of {sorted(choices)}, got {value!r}")
        if minimum is not None and value < minimum:
            raise ConfigError(path, f"must be >= {minimum}, got {value}")
        return value

    def finish(self):
        if self._data:
            key = sorted(self._data)[0]
            raise ConfigError(self.child(key), "unknown field")

    def build(self, factory, /, **kwargs):
        # Constructor invariant violations become path-qualified errors.
        try:
            return factory(**kwargs)
        except ValueError as exc:
            raise ConfigError(self._path, str(exc)) from None


@dataclass(frozen=True)
class DataConfig:
    source: str  # "synthetic" | "file"
    synthetic: SyntheticDataSpec | None = None
    path: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    rounds: int
    algorithm: ServerOptConfig
    client_lr: float
    budget: LocalBudget
    cohort: CohortSchedule
    data: DataConfig
    clip: ClipConfig = ClipConfig()
    lr_scaling: LrScalingConfig = LrScalingConfig()
    straggler: StragglerConfig = StragglerConfig()
    model: ModelSpec | None = None
    eval_period: int = 1
    workers: int = 1
    halt_on_failure: bool = False
    cosine_cap: int | None = None
    thresholds: tuple[float, ...] = (0.3, 0.5, 0.7)
    output: str | None = None


@dataclass(frozen=True)
class SweepSpec:
    base: ExperimentConfig
    cohort_sizes: tuple[int, ...] = ()
    local_steps: tuple[int, ...] = ()
    trials: int = 1


def _parse_algorithm(sec: _Section) -> ServerOptConfig:
    kind = sec.take("kind", str, choices=OPTIMIZER_KINDS)
    cfg = sec.build(
        ServerOptConfig,
        kind=kind,
        lr=sec.take("lr", float),
        beta1=sec.take("beta1", float, 0.9),
        beta2=sec.take("beta2", float, 0.99),
        eps=sec.take("eps", float, 0.001),
        weight_decay=sec.take("weight_decay", float, 0.0),
        bias_correction=sec.take("bias_correction", bool, False),
    )
    sec.finish()
    return cfg


def _parse_budget(sec: _Section) -> LocalBudget:
    has_epochs, has_steps = sec.has("epochs"), sec.has("steps")
    if has_epochs == has_steps:
        raise ConfigError(sec._path, "exactly one of 'epochs' or 'steps' is required")
    if has_epochs:
        mode, value = "epochs", sec.take("epochs", int, minimum=1)
    else:
        mode, value = "steps", sec.take("steps", int, minimum=1)
    budget = sec.build(LocalBudget, mode=mode, value=value,
                       batch_size=sec.take("batch_size", int, 32, minimum=1))
    sec.finish()
    return budget


def _parse_cohort(sec: _Section) -> CohortSchedule:
    kind = sec.take("kind", str, choices=("fixed", "doubling"))
    if kind == "fixed":
        schedule = sec.build(CohortSchedule, kind="fixed", size=sec.take("size", int, minimum=1))
    else:
        schedule = sec.build(
            CohortSchedule,
            kind="doubling",
            initial=sec.take("initial", int, minimum=1),
            period=sec.take("period", int, minimum=1),
            cap=sec.take("cap", int, None, minimum=1, allow_none=True),
        )
    sec.finish()
    return schedule


def _parse_clip(sec: _Section) -> ClipConfig:
    cfg = sec.build(
        ClipConfig,
        enabled=sec.take("enabled", bool, True),
        target_quantile=sec.take("target_quantile", float, 0.8),
        initial_level=sec.take("initial_level", float, 1.0),
        adaptivity_lr=sec.take("adaptivity_lr", float, 0.2),
    )
    sec.finish()
    return cfg


def _parse_lr_scaling(sec: _Section) -> LrScalingConfig:
    cfg = sec.build(
        LrScalingConfig,
        rule=sec.take("rule", str, "none", choices=("none", "sqrt", "linear")),
        reference_cohort=sec.take("reference_cohort", int, None, minimum=1, allow_none=True),
        warmup_rounds=sec.take("warmup_rounds", int, 0, minimum=0),
        warmup_start=sec.take("warmup_start", str, "reference", choices=("reference", "zero")),
    )
    sec.finish()
    return cfg


def _parse_straggler(sec: _Section) -> StragglerConfig:
    cfg = sec.build(
        StragglerConfig,
        seconds_per_example=sec.take("seconds_per_example", float, 1.0, minimum=0.0),
        straggler_scale=sec.take("straggler_scale", float, 0.0, minimum=0.0),
    )
    sec.finish()
    return cfg


def _parse_model(sec: _Section) -> ModelSpec:
    kind = sec.take("kind", str, choices=("linear", "softmax", "mlp"))
    spec = sec.build(
        ModelSpec,
        kind=kind,
        input_dim=sec.take("input_dim", int, minimum=1),
        num_classes=sec.take("num_classes", int, 1, minimum=1),
        hidden_dim=sec.take("hidden_dim", int, 16, minimum=1),
        init_scale=sec.take("init_scale", float, 0.1, minimum=0.0),
    )
    sec.finish()
    return spec


def parse_synthetic_spec(sec: _Section) -> SyntheticDataSpec:
    task = sec.take("task", str, "regression", choices=("regression", "classification"))
    spec = sec.build(
        SyntheticDataSpec,
        task_kind=task,
        num_train_clients=sec.take("train_clients", int, minimum=1),
        num_test_clients=sec.take("test_clients", int, 0, minimum=0),
        input_dim=sec.take("input_dim", int, 8, minimum=1),
        num_classes=sec.take("num_classes", int, 2 if task == "classification" else 1, minimum=1),
        heterogeneity=sec.take("heterogeneity", float, 0.5, minimum=0.0),
        label_noise=sec.take("label_noise", float, 0.1, minimum=0.0),
        size_law=sec.take("size_law", str, "fixed", choices=("fixed", "log_uniform")),
        examples_per_client=sec.take("examples_per_client", int, 20, minimum=1),
        min_examples=sec.take("min_examples", int, 4, minimum=1),
        max_examples=sec.take("max_examples", int, 64, minimum=1),
    )
    sec.finish()
    return spec


def _parse_data(sec: _Section) -> DataConfig:
    source = sec.take("source", str, "synthetic", choices=("synthetic", "file"))
    if source == "file":
        cfg = DataConfig(source="file", path=sec.take("path", str))
        sec.finish()
        return cfg
    return DataConfig(source="synthetic", synthetic=parse_synthetic_spec(sec))


def parse_config_dict(raw: dict, path: str = "") -> ExperimentConfig:
    root = _Section(raw, path)
    algorithm = _parse_algorithm(root.section("algorithm", required=True))

    client_sec = root.section("client", required=True)
    client_lr = client_sec.take("lr", float, minimum=0.0)
    budget_sec = client_sec.section("budget")
    budget = _parse_budget(budget_sec) if budget_sec is not None else LocalBudget("epochs", 1, 32)
    client_sec.finish()

    cohort = _parse_cohort(root.section("cohort", required=True))
    data = _parse_data(root.section("data", required=True))

    clip_sec = root.section("clip")
    clip = _parse_clip(clip_sec) if clip_sec is not None else ClipConfig()
    scaling_sec = root.section("lr_scaling")
    lr_scaling = _parse_lr_scaling(scaling_sec) if scaling_sec is not None else LrScalingConfig()
    straggler_sec = root.section("straggler")
    straggler = _parse_straggler(straggler_sec) if straggler_sec is not None else StragglerConfig()
    model_sec = root.section("model")
    model = _parse_model(model_sec) if model_sec is not None else None

    thresholds = root.take("thresholds", list, [0.3, 0.5, 0.7])
    for i, v in enumerate(thresholds):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigError(f"{root.child('thresholds')}[{i}]", "expected a number")

    cfg = ExperimentConfig(
        seed=root.take("seed", int, minimum=0),
        rounds=root.take("rounds", int, minimum=0),
        algorithm=algorithm,
        client_lr=client_lr,
        budget=budget,
        cohort=cohort,
        data=data,
        clip=clip,
        lr_scaling=lr_scaling,
        straggler=straggler,
        model=model,
        eval_period=root.take("eval_period", int, 1, minimum=1),
        workers=root.take("workers", int, 1, minimum=1),
        halt_on_failure=root.take("halt_on_failure", bool, False),
        cosine_cap=root.take("cosine_cap", int, None, minimum=2, allow_none=True),
        thresholds=tuple(float(v) for v in thresholds),
        output=root.take("output", str, None, allow_none=True),
    )
    root.finish()
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    return parse_config_dict(raw)


def parse_sweep(text: str) -> SweepSpec:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    root = _Section(raw, "")
    base_sec = root.section("base", required=True)
    base = parse_config_dict(base_sec._data, "base")
    cohort_sizes = root.take("cohort_sizes", list, [])
    local_steps = root.take("local_steps", list, [])
    trials = root.take("trials", int, 1, minimum=1)
    root.finish()
    for name, axis in (("cohort_sizes", cohort_sizes), ("local_steps", local_steps)):
        for i, v in enumerate(axis):
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name}[{i}]", "expected a positive integer")
    if not cohort_sizes and not local_steps:
        raise ConfigError("", "sweep needs at least one nonempty axis (cohort_sizes or local_steps)")
    return SweepSpec(base=base, cohort_sizes=tuple(cohort_sizes),
                     local_steps=tuple(local_steps), trials=trials)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Canonical dict form; parse_config_dict(config_to_dict(c)) == c."""
    out = {
        "seed": cfg.seed,
        "rounds": cfg.rounds,
        "eval_period": cfg.eval_period,
        "workers": cfg.workers,
        "halt_on_failure": cfg.halt_on_failure,
        "cosine_cap": cfg.cosine_cap,
        "thresholds": list(cfg.thresholds),
        "output": cfg.output,
        "algorithm": {
            "kind": cfg.algorithm.kind,
            "lr": cfg.algorithm.lr,
            "beta1": cfg.algorithm.beta1,
            "beta2": cfg.algorithm.beta2,
            "eps": cfg.algorithm.eps,
            "weight_decay": cfg.algorithm.weight_decay,
            "bias_correction": cfg.algorithm.bias_correction,
        },
        "client": {
            "lr": cfg.client_lr,
            "budget": {cfg.budget.mode: cfg.budget.value, "batch_size": cfg.budget.batch_size},
        },
        "clip": {
            "enabled": cfg.clip.enabled,
            "target_quantile": cfg.clip.target_quantile,
            "initial_level": cfg.clip.initial_level,
            "adaptivity_lr": cfg.clip.adaptivity_lr,
        },
        "lr_scaling": {
            "rule": cfg.lr_scaling.rule,
            "reference_cohort": cfg.lr_scaling.reference_cohort,
            "warmup_rounds": cfg.lr_scaling.warmup_rounds,
            "warmup_start": cfg.lr_scaling.warmup_start,
        },
        "straggler": {
            "seconds_per_example": cfg.straggler.seconds_per_example,
            "straggler_scale": cfg.straggler.straggler_scale,
        },
    }
    if cfg.cohort.kind == "fixed":
        out["cohort"] = {"kind": "fixed", "size": cfg.cohort.size}
    else:
        out["cohort"] = {"kind": "doubling", "initial": cfg.cohort.initial,
                         "period": cfg.cohort.period, "cap": cfg.cohort.cap}
    if cfg.data.source == "file":
        out["data"] = {"source": "file", "path": cfg.data.path}
    else:
        s = cfg.data.synthetic
        out["data"] = {
            "source": "synthetic",
            "task": s.task_kind,
            "train_clients": s.num_train_clients,
            "test_clients": s.num_test_clients,
            "input_dim": s.input_dim,
            "num_classes": s.num_classes,
            "heterogeneity": s.heterogeneity,
            "label_noise": s.label_noise,
            "size_law": s.size_law,
            "examples_per_client": s.examples_per_client,
            "min_examples": s.min_examples,
            "max_examples": s.max_examples,
        }
    if cfg.model is not None:
        out["model"] = {
            "kind": cfg.model.kind,
            "input_dim": cfg.model.input_dim,
            "num_classes": cfg.model.num_classes,
            "hidden_dim": cfg.model.hidden_dim,
            "init_scale": cfg.model.init_scale,
        }
    return out


def serialize_config(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"
