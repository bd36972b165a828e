# SPDX-License-Identifier: GPL-3.0-only
"""
Запись артефактов прогона: CSV-таблицы (форматы описаны в specs/csv-schemas.md)
и JSON-отчёты. Числа с плавающей точкой пишутся как %.17g, чтобы повторный прогон
с теми же входами давал побайтно те же файлы.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from src.core.equivariant_flow import FlowTrajectory
from src.core.errors import ConfigError
from src.core.fields import GridMap, profile_slope

logger = logging.getLogger(__name__)


def _cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (list, tuple)):
        return ";".join(str(_cell(v)) for v in value)
    return value


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


class ArtifactWriter:
    """Пишет файлы в каталог прогона и запоминает их для манифеста."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {self.directory} is not writable: {exc}") from exc
        self.written: list[str] = []

    def _register(self, name: str) -> Path:
        if name not in self.written:
            self.written.append(name)
        return self.directory / name

    def csv(
        self, name: str, header: Sequence[str], rows: Iterable[Mapping[str, Any] | Sequence[Any]]
    ) -> Path:
        path = self._register(name)
        count = 0
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                values = [row[h] for h in header] if isinstance(row, Mapping) else list(row)
                writer.writerow([_cell(v) for v in values])
                count += 1
        logger.debug("wrote %s (%d rows)", path, count)
        return path

    def json(self, name: str, payload: Mapping[str, Any]) -> Path:
        path = self._register(name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
            f.write("\n")
        logger.debug("wrote %s", path)
        return path


def write_trajectory(writer: ArtifactWriter, traj: FlowTrajectory) -> None:
    """snapshots.csv (step, t, ρ, h) и energy.csv со сводкой по снимкам."""
    writer.csv(
        "snapshots.csv",
        ["step", "t", "rho", "h"],
        (
            (snap.step, snap.time, float(rho), float(h))
            for snap in traj.snapshots
            for rho, h in zip(snap.profile.grid, snap.profile.values)
        ),
    )
    rows = []
    for snap in traj.snapshots:
        slope = float(np.max(np.abs(profile_slope(snap.profile))))
        rows.append(
            (
                snap.step,
                snap.time,
                snap.dt,
                snap.energy,
                snap.dissipation,
                slope,
                1.0 / slope if slope > 0.0 else float("inf"),
            )
        )
    writer.csv(
        "energy.csv", ["step", "t", "dt", "energy", "dissipation", "max_slope", "scale"], rows
    )


def write_grid_map(writer: ArtifactWriter, name: str, grid_map: GridMap) -> None:
    mesh = np.meshgrid(*grid_map.axes, indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=-1)
    m = grid_map.values.shape[-1]
    values = grid_map.values.reshape(-1, m)
    header = [f"x{i}" for i in range(grid_map.dim)] + [f"u{i}" for i in range(m)]
    columns = [coords, values]
    if grid_map.lift is not None:
        header += [f"v{i}" for i in range(m)]
        columns.append(np.asarray(grid_map.lift).reshape(-1, m))
    table = np.concatenate(columns, axis=-1)
    writer.csv(name, header, (tuple(float(x) for x in row) for row in table))
