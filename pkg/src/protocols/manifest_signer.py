# SPDX-License-Identifier: GPL-3.0-only
"""
Манифест прогона: канонический хэш входной конфигурации, версии окружения,
время работы и SHA-256 каждого артефакта.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
from importlib import metadata
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import scipy
from cryptography.hazmat.primitives import hashes

from src.core.errors import ContractError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SCHEMA_VERSION = "1.0"
PACKAGE_NAME = "nharmonic-flow-lab"


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def inputs_hash(config: Mapping[str, Any]) -> str:
    """SHA3-256 канонического JSON конфигурации (не зависит от порядка ключей)."""
    return hashlib.sha3_256(canonical_json(config).encode('utf-8')).hexdigest()


def content_hash(path: str | Path) -> str:
    digest = hashes.Hash(hashes.SHA256())
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.finalize().hex()


def environment_versions() -> dict[str, str]:
    try:
        package = metadata.version(PACKAGE_NAME)
    except metadata.PackageNotFoundError:
        package = "unknown"
    return {
        "package": package,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


class ManifestSigner:
    """Собирает и проверяет manifest.json в каталоге артефактов."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def sign(
        self,
        experiment: str,
        config: Mapping[str, Any],
        artifacts: Iterable[str | Path],
        seed: int,
        wall_time: float,
    ) -> dict[str, Any]:
        entries = []
        for item in sorted({Path(a).name for a in artifacts}):
            path = self.directory / item
            if not path.is_file():
                raise ContractError(f"artifact {item} was not written")
            entries.append(
                {"path": item, "sha256": content_hash(path), "bytes": path.stat().st_size}
            )
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "experiment": experiment,
            "seed": int(seed),
            "inputs_hash": inputs_hash(config),
            "versions": environment_versions(),
            "wall_time": float(wall_time),
            "artifacts": entries,
        }
        with open(self.directory / MANIFEST_NAME, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
        logger.info("manifest written with %d artifact(s)", len(entries))
        return manifest

    def verify(self) -> bool:
        """Пересчитывает хэши; False, если артефакт пропал или изменился."""
        path = self.directory / MANIFEST_NAME
        if not path.is_file():
            return False
        with open(path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        for entry in manifest.get("artifacts", []):
            target = self.directory / entry["path"]
            if not target.is_file() or content_hash(target) != entry["sha256"]:
                logger.warning("artifact %s failed verification", entry["path"])
                return False
        return True


def verify_manifest(directory: str | Path) -> bool:
    return ManifestSigner(directory).verify()
