"""Server configuration: one YAML file, unknown keys are fatal."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigError


@dataclass
class ServerConfig:
    data_dir: str = "data"
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080
    static_dir: Optional[str] = None
    anonymous_enabled: bool = True
    users_file: Optional[str] = None  # defaults to <data_dir>/users.caos
    rules_file: Optional[str] = None  # defaults to <data_dir>/rules.caos
    unit_file: Optional[str] = None   # optional unit-registry extension

    def resolved_users_file(self) -> Path:
        return Path(self.users_file or Path(self.data_dir) / "users.caos")

    def resolved_rules_file(self) -> Path:
        return Path(self.rules_file or Path(self.data_dir) / "rules.caos")


def load_config(path: str | Path) -> ServerConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text("utf-8")) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    known = {f.name for f in fields(ServerConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config key(s) {sorted(unknown)}")
    cfg = ServerConfig(**raw)
    if not isinstance(cfg.listen_port, int):
        raise ConfigError(f"{path}: listen_port must be an integer")
    return cfg
