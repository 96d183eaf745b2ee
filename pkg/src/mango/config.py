"""Flat key=value experiment configuration.

Example::

    method = mango
    seeds = 0,1,2,3,4
    buffer_capacity = 200
    batch_size = 32
    output_dir = runs/demo
    stream.kind = cil
    stream.num_tasks = 5
    stream.classes_per_task = 2
    stream.samples_per_task = 625
    stream.input_dim = 16
    stream.noise_scale = 0.1
    model.hidden_dims = 32,32
    mango.eta = 0.05
    mango.eta_lambda = 0.002
    mango.glances = 3
    mango.meta_every = 3

Unknown keys are rejected with the offending key and line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .optimizer import MangoConfig
from .streams import StreamSpec

# Ablation lattice: which parts of the update rule each method keeps.
METHOD_FLAGS = {
    "mango": dict(gate_enabled=True, reg_enabled=True,
                  meta_enabled=True, replay_in_train=True),
    "ft": dict(gate_enabled=False, reg_enabled=False,
               meta_enabled=False, replay_in_train=False),
    "er": dict(gate_enabled=False, reg_enabled=False,
               meta_enabled=False, replay_in_train=True),
    "mango_no_meta": dict(gate_enabled=True, reg_enabled=True,
                          meta_enabled=False, replay_in_train=True),
    "mango_no_reg": dict(gate_enabled=True, reg_enabled=False,
                         meta_enabled=False, replay_in_train=True),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    stream: StreamSpec
    method: str = "mango"
    mango: MangoConfig = field(default_factory=MangoConfig)
    hidden_dims: list = field(default_factory=lambda: [32, 32])
    buffer_capacity: int = 200
    batch_size: int = 32
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    output_dir: str = "runs/out"

    def __post_init__(self):
        if self.method not in METHOD_FLAGS:
            raise ConfigError(f"unknown method {self.method!r}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.buffer_capacity < 0:
            raise ConfigError("buffer_capacity must be >= 0")
        if self.buffer_capacity == 0 and self.method != "ft":
            raise ConfigError("buffer_capacity=0 is only valid for method=ft")
        # Bake the ablation flags into the optimizer config.
        self.mango = replace(self.mango, **METHOD_FLAGS[self.method])

    @property
    def num_classes(self) -> int:
        if self.stream.kind == "cil":
            return self.stream.num_tasks * self.stream.classes_per_task
        return self.stream.num_classes


def _parse_bool(v: str) -> bool:
    if v.lower() in ("true", "1", "yes"):
        return True
    if v.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _parse_int_list(v: str):
    return [int(p) for p in v.split(",") if p.strip()]


_SCHEMA = {
    "method": str,
    "seeds": _parse_int_list,
    "buffer_capacity": int,
    "batch_size": int,
    "output_dir": str,
    "model.hidden_dims": _parse_int_list,
    "stream.kind": str,
    "stream.num_tasks": int,
    "stream.classes_per_task": int,
    "stream.num_classes": int,
    "stream.samples_per_task": int,
    "stream.input_dim": int,
    "stream.noise_scale": float,
    "stream.domain_delta": float,
    "stream.domain_shift": float,
    "stream.seed": int,
    "mango.eta": float,
    "mango.eta_lambda": float,
    "mango.momentum": float,
    "mango.glances": int,
    "mango.meta_every": int,
    "mango.meta_batch": int,
    "mango.replay_batch": int,
    "mango.rho_init": float,
    "mango.lambda_optimizer": str,
}


def parse_config_text(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _SCHEMA[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc

    def section(prefix):
        return {k[len(prefix):]: v for k, v in values.items()
                if k.startswith(prefix)}

    try:
        stream = StreamSpec(**{"kind": "cil", **section("stream.")})
        mango = MangoConfig(**section("mango."))
        top = {k: v for k, v in values.items() if "." not in k}
        if "model.hidden_dims" in values:
            top["hidden_dims"] = values["model.hidden_dims"]
        return ExperimentConfig(stream=stream, mango=mango, **top)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())
