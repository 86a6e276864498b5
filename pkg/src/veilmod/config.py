"""Experiment configuration: JSON file plus environment overrides.

Relative paths in a config file are resolved against the file's own
directory, so a config can travel with its corpus.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence, Tuple

from .errors import SchemaError, ValidationError
from .experiment import DEFAULT_SLIDER_LEVELS, make_stage_config

ALL_STAGES: Tuple[int, ...] = (1, 2, 3, 4, 5, 6)

_KNOWN_KEYS = {
    "experiment_id",
    "corpus_dir",
    "log_dir",
    "cache_dir",
    "stages",
    "tasks_per_session",
    "seed",
    "region_max_radius",
    "slider_levels",
    "listen_host",
    "listen_port",
    "session_ttl_minutes",
    "admin_token",
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    corpus_dir: Path
    log_dir: Path
    cache_dir: Optional[Path] = None
    stages: Tuple[int, ...] = ALL_STAGES
    tasks_per_session: int = 6
    seed: int = 0
    region_max_radius: int = 200
    slider_levels: Tuple[float, ...] = DEFAULT_SLIDER_LEVELS
    listen_host: str = "127.0.0.1"
    listen_port: int = 8000
    session_ttl_minutes: int = 240
    admin_token: Optional[str] = None

    def __post_init__(self):
        if not self.experiment_id:
            raise ValidationError("experiment_id must be non-empty")
        if not self.stages:
            raise ValidationError("stages must be a non-empty subset of 1..6")
        bad = [s for s in self.stages if s not in ALL_STAGES]
        if bad:
            raise ValidationError(f"unknown stage ids: {bad}")
        if len(set(self.stages)) != len(self.stages):
            raise ValidationError("stages must not repeat")
        if self.tasks_per_session < 1:
            raise ValidationError("tasks_per_session must be at least 1")
        if self.region_max_radius < 1:
            raise ValidationError("region_max_radius must be at least 1 pixel")
        if self.session_ttl_minutes < 1:
            raise ValidationError("session_ttl_minutes must be at least 1")
        # Reuse the stage validator for ladder sanity.
        make_stage_config(6, list(self.slider_levels))

    @property
    def log_path(self) -> Path:
        return Path(self.log_dir) / f"{self.experiment_id}.jsonl"

    @property
    def rendition_cache_dir(self) -> Path:
        if self.cache_dir is not None:
            return Path(self.cache_dir)
        return Path(self.corpus_dir) / "renditions"

    @property
    def session_ttl_ms(self) -> int:
        return self.session_ttl_minutes * 60_000


def _coerce_stages(value) -> Tuple[int, ...]:
    if not isinstance(value, Sequence) or isinstance(value, (str, bytes)):
        raise SchemaError("stages must be a list of stage ids")
    return tuple(int(v) for v in value)


def _coerce_levels(value) -> Tuple[float, ...]:
    if not isinstance(value, Sequence) or isinstance(value, (str, bytes)):
        raise SchemaError("slider_levels must be a list of sigma values")
    return tuple(float(v) for v in value)


def config_from_dict(body: Mapping, base_dir: Optional[Path] = None) -> ExperimentConfig:
    unknown = set(body) - _KNOWN_KEYS
    if unknown:
        raise SchemaError(f"unknown config keys: {sorted(unknown)}")
    for key in ("experiment_id", "corpus_dir", "log_dir"):
        if key not in body:
            raise SchemaError(f"config missing required key: {key}")

    def resolve(p) -> Path:
        path = Path(p)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return path

    kwargs = {
        "experiment_id": str(body["experiment_id"]),
        "corpus_dir": resolve(body["corpus_dir"]),
        "log_dir": resolve(body["log_dir"]),
    }
    if body.get("cache_dir") is not None:
        kwargs["cache_dir"] = resolve(body["cache_dir"])
    if "stages" in body:
        kwargs["stages"] = _coerce_stages(body["stages"])
    if "slider_levels" in body:
        kwargs["slider_levels"] = _coerce_levels(body["slider_levels"])
    for key, conv in (
        ("tasks_per_session", int),
        ("seed", int),
        ("region_max_radius", int),
        ("listen_port", int),
        ("session_ttl_minutes", int),
        ("listen_host", str),
    ):
        if key in body and body[key] is not None:
            kwargs[key] = conv(body[key])
    if body.get("admin_token") is not None:
        kwargs["admin_token"] = str(body["admin_token"])
    return ExperimentConfig(**kwargs)


def apply_env_overrides(config: ExperimentConfig, env: Mapping[str, str]) -> ExperimentConfig:
    updates = {}
    if env.get("VEILMOD_LISTEN"):
        host, _, port = env["VEILMOD_LISTEN"].rpartition(":")
        if not host or not port.isdigit():
            raise ValidationError("VEILMOD_LISTEN must look like host:port")
        updates["listen_host"] = host
        updates["listen_port"] = int(port)
    if env.get("VEILMOD_CORPUS_DIR"):
        updates["corpus_dir"] = Path(env["VEILMOD_CORPUS_DIR"])
    if env.get("VEILMOD_LOG_DIR"):
        updates["log_dir"] = Path(env["VEILMOD_LOG_DIR"])
    if env.get("VEILMOD_REGION_MAX_RADIUS"):
        updates["region_max_radius"] = int(env["VEILMOD_REGION_MAX_RADIUS"])
    if env.get("VEILMOD_SLIDER_LEVELS"):
        updates["slider_levels"] = tuple(
            float(v) for v in env["VEILMOD_SLIDER_LEVELS"].split(",") if v.strip()
        )
    if env.get("VEILMOD_ADMIN_TOKEN"):
        updates["admin_token"] = env["VEILMOD_ADMIN_TOKEN"]
    return replace(config, **updates) if updates else config


def load_config(path, env: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    path = Path(path)
    try:
        body = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise SchemaError("config file must hold a JSON object")
    config = config_from_dict(body, base_dir=path.parent)
    return apply_env_overrides(config, os.environ if env is None else env)
