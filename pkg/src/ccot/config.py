"""Planner and run configuration."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError


class PredictionModel(str, Enum):
    CONSTANT_VELOCITY = "constant_velocity"


def _divides(step: float, span: float, tol: float = 1e-9) -> bool:
    n = round(span / step)
    return n >= 1 and abs(n * step - span) <= tol


def n_steps(span: float, step: float) -> int:
    """Number of ``step`` increments in ``span`` (assumes exact divisibility)."""
    return int(round(span / step))


@dataclass(frozen=True)
class PlannerConfig:
    """Horizons, thresholds and grid settings shared by every stage.

    All times are seconds, distances meters, accelerations m/s^2.
    """

    history_horizon: float = 1.5
    short_horizon: float = 1.0
    plan_horizon: float = 3.0
    rollout_dt: float = 0.1
    accel_step: float = 2.0
    ttc_threshold: float = 3.0
    neighbor_radius: float = 30.0  # what the model is shown
    risk_radius: float = 100.0  # what ground-truth risk and planning consider
    preimpact_window: float = 3.0
    stride: float = 0.5
    prediction_model: PredictionModel = PredictionModel.CONSTANT_VELOCITY
    max_gap: float = 0.3

    def __post_init__(self):
        if not isinstance(self.prediction_model, PredictionModel):
            try:
                object.__setattr__(self, "prediction_model", PredictionModel(self.prediction_model))
            except ValueError as exc:
                raise ConfigError(f"unknown prediction_model {self.prediction_model!r}") from exc
        for f in fields(self):
            if f.name == "prediction_model":
                continue
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{f.name} must be numeric, got {value!r}")
            if not math.isfinite(value) or value <= 0:
                raise ConfigError(f"{f.name} must be positive and finite, got {value!r}")
        if self.risk_radius < self.neighbor_radius:
            raise ConfigError("risk_radius must be at least neighbor_radius")
        if not self.short_horizon < self.plan_horizon:
            raise ConfigError("short_horizon must be strictly less than plan_horizon")
        if not _divides(self.rollout_dt, self.short_horizon):
            raise ConfigError("rollout_dt must divide short_horizon exactly")
        if not _divides(self.rollout_dt, self.plan_horizon - self.short_horizon):
            raise ConfigError("rollout_dt must divide plan_horizon - short_horizon exactly")
        # history windows and replay steps are taken on the same grid
        for name in ("history_horizon", "stride"):
            if not _divides(self.rollout_dt, getattr(self, name)):
                raise ConfigError(f"rollout_dt must divide {name} exactly")

    @property
    def n_rollout(self) -> int:
        return n_steps(self.plan_horizon, self.rollout_dt)

    @property
    def n_short(self) -> int:
        return n_steps(self.short_horizon, self.rollout_dt)

    def offsets(self) -> list[float]:
        """Rollout sample offsets 0, dt, ..., plan_horizon."""
        return [k * self.rollout_dt for k in range(self.n_rollout + 1)]

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["prediction_model"] = self.prediction_model.value
        return d


PLANNER_FIELDS = tuple(f.name for f in fields(PlannerConfig))


@dataclass(frozen=True)
class EvalConfig:
    l2_mode: str = "average"  # "average" over (0, h] or "final" at h
    l2_horizons: tuple[float, ...] = (1.0, 3.0)
    distance_tolerance: float = 1.0
    position_tolerance: float = 1.0
    request_timeout: float = 120.0
    retries: int = 1
    max_in_flight: int = 4

    def __post_init__(self):
        if self.l2_mode not in ("average", "final"):
            raise ConfigError(f"l2_mode must be 'average' or 'final', got {self.l2_mode!r}")
        if self.request_timeout <= 0 or self.retries < 0 or self.max_in_flight < 1:
            raise ConfigError("invalid remote-model settings")


EVAL_FIELDS = tuple(f.name for f in fields(EvalConfig))


@dataclass(frozen=True)
class RunConfig:
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    scenario_dir: str | None = None
    output_dir: str = "out"
    manifest_path: str | None = None
    responses_dir: str | None = None
    endpoint_url: str | None = None
    seed: int = 0
    strict_parsing: bool = False
    split_ratio: float = 0.8

    def __post_init__(self):
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not 0 < self.split_ratio < 1:
            raise ConfigError("split_ratio must lie in (0, 1)")

    @property
    def resolved_manifest(self) -> Path:
        if self.manifest_path:
            return Path(self.manifest_path)
        return Path(self.output_dir) / "manifest.json"

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "RunConfig":
        """Build from a flat mapping; planner and eval keys sit at top level."""
        planner_kw, eval_kw, run_kw = {}, {}, {}
        run_names = {f.name for f in fields(cls)} - {"planner", "evaluation"}
        for key, value in data.items():
            if key in PLANNER_FIELDS:
                planner_kw[key] = value
            elif key in EVAL_FIELDS:
                eval_kw[key] = tuple(value) if key == "l2_horizons" else value
            elif key in run_names:
                run_kw[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        try:
            return cls(planner=PlannerConfig(**planner_kw), evaluation=EvalConfig(**eval_kw), **run_kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_flat(self) -> dict[str, Any]:
        out = self.planner.to_dict()
        ev = dataclasses.asdict(self.evaluation)
        ev["l2_horizons"] = list(ev["l2_horizons"])
        out.update(ev)
        for f in fields(self):
            if f.name not in ("planner", "evaluation"):
                out[f.name] = getattr(self, f.name)
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_flat(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def coerce_value(raw: str) -> Any:
    """Interpret a ``--set`` value: JSON if it parses, else the bare string."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw
