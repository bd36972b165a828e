# SPDX-License-Identifier: GPL-3.0-only
"""Раздача точек перебора по пулу процессов с детерминированным слиянием."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Hashable, Iterable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


def available_workers() -> int:
    """Число доступных процессоров (с учётом affinity, если платформа её сообщает)."""
    if hasattr(os, "sched_getaffinity"):
        return max(len(os.sched_getaffinity(0)), 1)
    return max(os.cpu_count() or 1, 1)


def resolve_jobs(jobs: int | None, points: int) -> int:
    """jobs = 0 или None означает «по числу процессоров», но не больше числа точек."""
    wanted = available_workers() if not jobs else jobs
    return max(1, min(wanted, points))


def run_sweep(
    func: Callable[[Any], T],
    points: Iterable[tuple[Hashable, Any]],
    jobs: int | None = 1,
) -> list[tuple[Hashable, T]]:
    """
    Вычисляет func(payload) для каждой пары (key, payload); результат отсортирован по key.
    При jobs = 1 всё выполняется в текущем процессе.
    """
    items = sorted(points, key=lambda kv: repr(kv[0]))
    workers = resolve_jobs(jobs, len(items))
    logger.info("sweep: %d points on %d worker(s)", len(items), workers)
    if workers == 1:
        results = [(key, func(payload)) for key, payload in items]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(key, pool.submit(func, payload)) for key, payload in items]
            results = [(key, future.result()) for key, future in futures]
    return sorted(results, key=lambda kv: repr(kv[0]))
