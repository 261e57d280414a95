"""Adapter configuration: which model backs each endpoint kind.

Resolution order: built-in defaults, then a JSON config file, then
VLM_ADAPTER_* environment variables, then CLI flags. A model spec is
either "builtin", "none" (endpoint disabled), or "<family>:<checkpoint>"
for transformers-backed mounts (e.g. "clip:openai/clip-vit-base-patch32").
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

ENV_PREFIX = "VLM_ADAPTER_"

_KINDS = ("similarity", "chat", "detector")


@dataclass(frozen=True)
class AdapterConfig:
    similarity: str = "builtin"
    chat: str = "builtin"
    detector: str = "builtin"
    host: str = "127.0.0.1"
    port: int = 8100
    device: str = "cpu"
    max_image_bytes: int = 10 * 1024 * 1024

    def __post_init__(self) -> None:
        if all(getattr(self, kind) == "none" for kind in _KINDS):
            raise ValueError("at least one endpoint kind must be enabled")
        if self.port < 0 or self.port > 65535:
            raise ValueError(f"invalid port: {self.port}")
        if self.max_image_bytes <= 0:
            raise ValueError("max_image_bytes must be positive")

    def enabled(self, kind: str) -> bool:
        return getattr(self, kind) != "none"


def load_config(
    config_file: str | Path | None = None,
    env: dict[str, str] | None = None,
    **overrides,
) -> AdapterConfig:
    values: dict = {}
    if config_file is not None:
        raw = json.loads(Path(config_file).read_text("utf-8"))
        if not isinstance(raw, dict):
            raise ValueError(f"{config_file}: config must be a JSON object")
        unknown = set(raw) - set(AdapterConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"{config_file}: unknown keys {sorted(unknown)}")
        values.update(raw)

    env = os.environ if env is None else env
    for name in AdapterConfig.__dataclass_fields__:
        env_value = env.get(ENV_PREFIX + name.upper())
        if env_value is not None:
            field_type = AdapterConfig.__dataclass_fields__[name].type
            values[name] = int(env_value) if field_type == "int" else env_value

    values.update({k: v for k, v in overrides.items() if v is not None})
    return AdapterConfig(**values)
