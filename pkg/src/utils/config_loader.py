# SPDX-License-Identifier: GPL-3.0-only
"""
Загрузка конфигурации эксперимента: config/default.yaml, поверх него — пользовательский файл,
затем проверка по specs/experiment-config.schema.json.
"""

from __future__ import annotations

import copy
import json
import logging
from pathlib import Path
from typing import Any, Mapping

import jsonschema
import yaml

from src.core.errors import ConfigError

logger = logging.getLogger(__name__)

ROOT = Path(__file__).resolve().parent.parent.parent
DEFAULT_CONFIG = ROOT / "config" / "default.yaml"
CONFIG_SCHEMA = ROOT / "specs" / "experiment-config.schema.json"


def read_yaml(path: str | Path) -> dict[str, Any]:
    source = Path(path)
    if not source.is_file():
        raise ConfigError(f"configuration file not found: {source}")
    with open(source, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"configuration root must be a mapping: {source}")
    return data


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    """Словари сливаются рекурсивно; списки и скаляры из override заменяют базовые."""
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


class ConfigLoader:
    _schema: dict[str, Any] | None = None

    @classmethod
    def load_schema(cls) -> dict[str, Any]:
        if cls._schema is None:
            with open(CONFIG_SCHEMA, "r", encoding="utf-8") as f:
                cls._schema = json.load(f)
        return cls._schema

    @classmethod
    def validate(cls, config: Mapping[str, Any]) -> None:
        """Поднимает jsonschema.ValidationError при несоответствии схеме."""
        jsonschema.validate(instance=dict(config), schema=cls.load_schema())

    @classmethod
    def load(
        cls,
        path: str | Path | None = None,
        overrides: Mapping[str, Any] | None = None,
    ) -> dict[str, Any]:
        """
        Порядок приоритета: встроенные значения < overrides (флаги CLI) < файл path.
        """
        config = read_yaml(DEFAULT_CONFIG)
        if overrides:
            config = deep_merge(config, overrides)
        if path is not None:
            config = deep_merge(config, read_yaml(path))
            logger.info("configuration merged from %s", path)
        cls.validate(config)
        return config
