"""Declarative platform configuration.

One YAML file, meant to live in version control. Every operational knob
(thresholds, cadences, bind address) is here rather than scattered through
code. `XMLOPS_CONFIG` names the file when the CLI flag is absent.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ValidationError

ENV_VAR = "XMLOPS_CONFIG"


@dataclass
class Config:
    store_path: str = "./store"
    http_bind: str = "127.0.0.1:8000"
    drift_psi_alert: float = 0.2
    drift_ks_alert: float = 0.3
    drift_window: int = 200
    drift_every: int = 50
    monitor_cadence_seconds: float = 30.0
    degradation_tolerance: float = 0.2
    degradation_min_resolved: int = 30
    explainer_floor: float = 0.5
    explainer_min_explanations: int = 20
    defer_explanations: bool = False

    def validate(self) -> "Config":
        positive = ("drift_psi_alert", "drift_ks_alert", "drift_window", "drift_every",
                    "monitor_cadence_seconds", "degradation_tolerance",
                    "degradation_min_resolved", "explainer_floor",
                    "explainer_min_explanations")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValidationError(f"config {name} must be positive, "
                                      f"got {getattr(self, name)}")
        if ":" not in self.http_bind:
            raise ValidationError(f"http_bind must be host:port, got {self.http_bind!r}")
        return self

    @property
    def http_host(self) -> str:
        return self.http_bind.rsplit(":", 1)[0]

    @property
    def http_port(self) -> int:
        return int(self.http_bind.rsplit(":", 1)[1])

    def ensure_store_writable(self) -> None:
        path = Path(self.store_path)
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-probe"
        try:
            probe.write_bytes(b"")
            probe.unlink()
        except OSError as exc:
            raise ValidationError(f"store_path {path} is not writable: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path | None = None) -> "Config":
        """Read config from a YAML file, the XMLOPS_CONFIG env var, or defaults."""
        if path is None:
            path = os.environ.get(ENV_VAR)
        if path is None:
            return cls().validate()
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text("utf-8")) or {}
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ValidationError(f"invalid YAML in {path}: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown config keys in {path}: {sorted(unknown)}")
        return cls(**raw).validate()
