"""Experiment configuration: dataclasses, JSON parsing, cross-field checks.

Parsing is fail-closed: unknown keys are rejected and every violated
constraint is reported with its JSON path, so nothing out of range ever
reaches the training engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .aggregators import Aggregator, AggregatorSpec
from .attacks import AttackSpec
from .models import ModelSpec


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""


@dataclass
class DataConfig:
    """Synthetic dataset generation plus the client partition scheme."""

    n_classes: int = 10
    dim: int = 20
    per_class: int = 200
    separation: float = 4.0
    test_per_class: int = 50
    partition: str = "iid"
    alpha: float = 0.1
    min_shard: int | None = None  # resolved to 2 * batch_size when left unset

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be at least 2")
        if self.dim < self.n_classes:
            raise ValueError(f"dim={self.dim} too small for {self.n_classes} class anchors")
        if self.per_class < 1 or self.test_per_class < 1:
            raise ValueError("per_class and test_per_class must be positive")
        if self.partition not in ("iid", "dirichlet"):
            raise ValueError(f"unknown partition {self.partition!r}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


@dataclass
class TrainSchedule:
    """Round count, local iteration plan, momentum, and the two-step learning rate."""

    rounds: int = 300
    local_iters: int = 1
    batch_size: int = 16
    momentum: float = 0.0
    gamma_hi: float = 0.05
    gamma_lo: float = 0.005
    switch_frac: float = 2.0 / 3.0

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        if self.local_iters < 1:
            raise ValueError("local_iters must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not 0.0 <= self.momentum <= 1.0:
            raise ValueError("momentum must lie in [0, 1]")
        if self.gamma_hi <= 0 or self.gamma_lo <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 <= self.switch_frac <= 1.0:
            raise ValueError("switch_frac must lie in [0, 1]")


@dataclass
class ExperimentConfig:
    """Everything one training run needs, seed included."""

    n_clients: int = 10
    n_byzantine: int = 0
    model: ModelSpec | None = None
    data: DataConfig = field(default_factory=DataConfig)
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    attack: AttackSpec = field(default_factory=AttackSpec)
    defense: AggregatorSpec = field(default_factory=AggregatorSpec)
    seed: int = 0
    eval_every: int = 10
    output_path: str = ""


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Materialize remaining defaults and enforce cross-field invariants."""
    if cfg.n_clients < 1:
        raise ConfigError("n_clients: must be at least 1")
    if cfg.n_byzantine < 0:
        raise ConfigError("n_byzantine: must be nonnegative")
    if 2 * cfg.n_byzantine >= cfg.n_clients:
        raise ConfigError(
            f"n_byzantine: adversarial model requires f < N/2, "
            f"got N={cfg.n_clients}, f={cfg.n_byzantine}"
        )
    if cfg.attack.kind != "none" and cfg.n_byzantine < 1:
        raise ConfigError(f"attack.kind: {cfg.attack.kind!r} configured but n_byzantine=0")
    if cfg.eval_every < 1:
        raise ConfigError("eval_every: must be at least 1")

    if cfg.model is None:
        cfg.model = ModelSpec(
            kind="softmax_linear", input_dim=cfg.data.dim, n_classes=cfg.data.n_classes
        )
    if cfg.model.input_dim != cfg.data.dim:
        raise ConfigError(
            f"model.input_dim: {cfg.model.input_dim} does not match data.dim={cfg.data.dim}"
        )
    if cfg.model.n_classes != cfg.data.n_classes:
        raise ConfigError(
            f"model.n_classes: {cfg.model.n_classes} does not match "
            f"data.n_classes={cfg.data.n_classes}"
        )

    if cfg.data.min_shard is None:
        cfg.data.min_shard = 2 * cfg.schedule.batch_size
    if cfg.data.min_shard < cfg.schedule.batch_size:
        raise ConfigError(
            f"data.min_shard: {cfg.data.min_shard} cannot cover one batch of "
            f"{cfg.schedule.batch_size}"
        )
    total = cfg.data.n_classes * cfg.data.per_class
    if cfg.data.partition == "iid" and total // cfg.n_clients < cfg.data.min_shard:
        raise ConfigError(
            f"data.per_class: iid split of {total} samples over {cfg.n_clients} clients "
            f"cannot reach min_shard={cfg.data.min_shard}"
        )

    try:
        Aggregator(cfg.defense, cfg.n_clients, cfg.n_byzantine)
    except ValueError as err:
        raise ConfigError(f"defense: {err}") from None
    return cfg


_REQUIRED = object()


class _Section:
    """One JSON object plus its path; tracks key consumption for fail-closed parsing."""

    def __init__(self, mapping: dict, path: str):
        if not isinstance(mapping, dict):
            raise ConfigError(f"{path}: expected an object")
        self.mapping = mapping
        self.path = path
        self.seen: set[str] = set()

    def _at(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def take(self, key: str, default=_REQUIRED):
        self.seen.add(key)
        if key in self.mapping:
            return self.mapping[key]
        if default is _REQUIRED:
            raise ConfigError(f"{self._at(key)}: required key missing")
        return default

    def take_int(self, key: str, default=_REQUIRED) -> int:
        value = self.take(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{self._at(key)}: expected an integer, got {value!r}")
        return value

    def take_float(self, key: str, default=_REQUIRED) -> float:
        value = self.take(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{self._at(key)}: expected a number, got {value!r}")
        return float(value)

    def take_bool(self, key: str, default=_REQUIRED) -> bool:
        value = self.take(key, default)
        if not isinstance(value, bool):
            raise ConfigError(f"{self._at(key)}: expected a boolean, got {value!r}")
        return value

    def take_str(self, key: str, default=_REQUIRED) -> str:
        value = self.take(key, default)
        if not isinstance(value, str):
            raise ConfigError(f"{self._at(key)}: expected a string, got {value!r}")
        return value

    def child(self, key: str) -> "_Section | None":
        value = self.take(key, None)
        if value is None:
            return None
        return _Section(value, self._at(key))

    def finish(self) -> None:
        unknown = sorted(set(self.mapping) - self.seen)
        if unknown:
            where = self.path or "top level"
            raise ConfigError(f"{where}: unknown keys {unknown}")


def _build(path: str, ctor, **kwargs):
    try:
        return ctor(**kwargs)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from None


def _parse_model(section: _Section | None, data: DataConfig) -> ModelSpec | None:
    if section is None:
        return None
    spec = _build(
        section.path,
        ModelSpec,
        kind=section.take_str("kind", "softmax_linear"),
        input_dim=section.take_int("input_dim", data.dim),
        n_classes=section.take_int("n_classes", data.n_classes),
        l2_reg=section.take_float("l2_reg", 1e-2),
        hidden=section.take_int("hidden", 0),
    )
    section.finish()
    return spec


def _parse_data(section: _Section | None) -> DataConfig:
    if section is None:
        return DataConfig()
    min_shard = section.take("min_shard", None)
    if min_shard is not None and (isinstance(min_shard, bool) or not isinstance(min_shard, int)):
        raise ConfigError(f"{section.path}.min_shard: expected an integer or null")
    cfg = _build(
        section.path,
        DataConfig,
        n_classes=section.take_int("n_classes", 10),
        dim=section.take_int("dim", 20),
        per_class=section.take_int("per_class", 200),
        separation=section.take_float("separation", 4.0),
        test_per_class=section.take_int("test_per_class", 50),
        partition=section.take_str("partition", "iid"),
        alpha=section.take_float("alpha", 0.1),
        min_shard=min_shard,
    )
    section.finish()
    return cfg


def _parse_schedule(section: _Section | None) -> TrainSchedule:
    if section is None:
        return TrainSchedule()
    sched = _build(
        section.path,
        TrainSchedule,
        rounds=section.take_int("rounds", 300),
        local_iters=section.take_int("local_iters", 1),
        batch_size=section.take_int("batch_size", 16),
        momentum=section.take_float("momentum", 0.0),
        gamma_hi=section.take_float("gamma_hi", 0.05),
        gamma_lo=section.take_float("gamma_lo", 0.005),
        switch_frac=section.take_float("switch_frac", 2.0 / 3.0),
    )
    section.finish()
    return sched


def _parse_attack(section: _Section | None) -> AttackSpec:
    if section is None:
        return AttackSpec()
    spec = _build(
        section.path,
        AttackSpec,
        kind=section.take_str("kind", "none"),
        z=section.take_float("z", 1.0),
        eps=section.take_float("eps", 0.1),
        search=section.take_bool("search", True),
    )
    section.finish()
    return spec


def _parse_defense(section: _Section | None) -> AggregatorSpec:
    if section is None:
        return AggregatorSpec()
    trim_q = section.take("trim_q", None)
    if trim_q is not None and (isinstance(trim_q, bool) or not isinstance(trim_q, int)):
        raise ConfigError(f"{section.path}.trim_q: expected an integer or null")
    spec = _build(
        section.path,
        AggregatorSpec,
        kind=section.take_str("kind", "average"),
        trim_q=trim_q,
        weiszfeld_nu=section.take_float("weiszfeld_nu", 0.1),
        weiszfeld_rounds=section.take_int("weiszfeld_rounds", 3),
        clip_tau=section.take_float("clip_tau", 10.0),
        clip_iters=section.take_int("clip_iters", 3),
        nnm_enabled=section.take_bool("nnm", False),
    )
    section.finish()
    return spec


def config_from_dict(document: dict, path: str = "") -> ExperimentConfig:
    root = _Section(document, path)
    data = _parse_data(root.child("data"))
    cfg = ExperimentConfig(
        n_clients=root.take_int("n_clients"),
        n_byzantine=root.take_int("n_byzantine"),
        model=_parse_model(root.child("model"), data),
        data=data,
        schedule=_parse_schedule(root.child("schedule")),
        attack=_parse_attack(root.child("attack")),
        defense=_parse_defense(root.child("defense")),
        seed=root.take_int("seed", 0),
        eval_every=root.take_int("eval_every", 10),
        output_path=root.take_str("output_path", ""),
    )
    root.finish()
    return validate_config(cfg)


def parse_config(text: str) -> ExperimentConfig:
    """Parse a JSON document into a fully validated ExperimentConfig."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err}") from None
    if not isinstance(document, dict):
        raise ConfigError("top level: expected an object")
    return config_from_dict(document)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Round-trippable plain-dict form, used for echoing and sweep workers."""
    return {
        "n_clients": cfg.n_clients,
        "n_byzantine": cfg.n_byzantine,
        "seed": cfg.seed,
        "eval_every": cfg.eval_every,
        "output_path": cfg.output_path,
        "model": {
            "kind": cfg.model.kind,
            "input_dim": cfg.model.input_dim,
            "n_classes": cfg.model.n_classes,
            "l2_reg": cfg.model.l2_reg,
            "hidden": cfg.model.hidden,
        },
        "data": {
            "n_classes": cfg.data.n_classes,
            "dim": cfg.data.dim,
            "per_class": cfg.data.per_class,
            "separation": cfg.data.separation,
            "test_per_class": cfg.data.test_per_class,
            "partition": cfg.data.partition,
            "alpha": cfg.data.alpha,
            "min_shard": cfg.data.min_shard,
        },
        "schedule": {
            "rounds": cfg.schedule.rounds,
            "local_iters": cfg.schedule.local_iters,
            "batch_size": cfg.schedule.batch_size,
            "momentum": cfg.schedule.momentum,
            "gamma_hi": cfg.schedule.gamma_hi,
            "gamma_lo": cfg.schedule.gamma_lo,
            "switch_frac": cfg.schedule.switch_frac,
        },
        "attack": {
            "kind": cfg.attack.kind,
            "z": cfg.attack.z,
            "eps": cfg.attack.eps,
            "search": cfg.attack.search,
        },
        "defense": {
            "kind": cfg.defense.kind,
            "trim_q": cfg.defense.trim_q,
            "weiszfeld_nu": cfg.defense.weiszfeld_nu,
            "weiszfeld_rounds": cfg.defense.weiszfeld_rounds,
            "clip_tau": cfg.defense.clip_tau,
            "clip_iters": cfg.defense.clip_iters,
            "nnm": cfg.defense.nnm_enabled,
        },
    }
