# SPDX-License-Identifier: GPL-3.0-only
"""
Проверка JSON-отчётов по версионированным схемам из specs/.
Отчёт без поля schema_version или с неизвестным именем схемы не пропускается.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import jsonschema

SPECS = Path(__file__).resolve().parent.parent.parent / "specs"

REPORT_SCHEMAS = {
    "check-report": "check-report.schema.json",
    "decomposition": "decomposition.schema.json",
    "manifest": "manifest.schema.json",
    "width-report": "width-report.schema.json",
}


class ReportValidator:
    _schemas: dict[str, dict[str, Any]] = {}

    @classmethod
    def load_schema(cls, name: str) -> dict[str, Any]:
        if name not in REPORT_SCHEMAS:
            raise KeyError(f"unknown report schema {name!r}")
        if name not in cls._schemas:
            with open(SPECS / REPORT_SCHEMAS[name], "r", encoding="utf-8") as f:
                cls._schemas[name] = json.load(f)
        return cls._schemas[name]

    @classmethod
    def validate(cls, name: str, report: Mapping[str, Any]) -> bool:
        """True при успехе; иначе jsonschema.ValidationError."""
        jsonschema.validate(instance=dict(report), schema=cls.load_schema(name))
        return True
