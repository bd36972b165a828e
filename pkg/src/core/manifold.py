# SPDX-License-Identifier: GPL-3.0-only
"""
Геометрия целевых многообразий: единичная сфера S^m в R^{m+1} и плоский тор T^m
с универсальным накрытием R^m и группой сдвигов Z^m.
Все операции — чистые функции над неизменяемыми входами.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, shortest_path
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import cdist
from scipy.special import gamma

from src.core.errors import DomainError, LiftAmbiguityError

UNIT_TOL = 1e-12
# Порог продолжения: единственный кратчайший представитель шага по каждой координате.
CONTINUATION_THRESHOLD = 0.25

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class SphereTarget:
    """Единичная сфера S^m, вложенная в R^{m+1}."""

    dim_m: int

    def __post_init__(self) -> None:
        if self.dim_m < 1:
            raise DomainError(f"sphere dimension must be >= 1, got {self.dim_m}")

    @property
    def ambient_dim(self) -> int:
        return self.dim_m + 1

    def contains(self, points: ArrayLike, tol: float = UNIT_TOL) -> bool:
        pts = np.asarray(points, dtype=float)
        return bool(np.all(np.abs(np.linalg.norm(pts, axis=-1) - 1.0) <= tol))

    def distance(self, p: ArrayLike, q: ArrayLike) -> FloatArray:
        """Хордовое расстояние во вложении."""
        return np.asarray(
            np.linalg.norm(np.asarray(p, float) - np.asarray(q, float), axis=-1), dtype=float
        )


@dataclass(frozen=True)
class TorusTarget:
    """Плоский тор [0,1)^m с решёткой Z^m."""

    dim_m: int

    def __post_init__(self) -> None:
        if self.dim_m < 2:
            raise DomainError(f"torus dimension must be >= 2, got {self.dim_m}")

    @property
    def ambient_dim(self) -> int:
        return self.dim_m

    def reduce(self, points: ArrayLike) -> FloatArray:
        return torus_reduce(points)

    def contains(self, points: ArrayLike) -> bool:
        pts = np.asarray(points, dtype=float)
        return bool(np.all((pts >= 0.0) & (pts < 1.0)))

    def distance(self, p: ArrayLike, q: ArrayLike) -> FloatArray:
        """Плоское расстояние на торе (минимальный образ)."""
        delta = minimal_image(np.asarray(q, float) - np.asarray(p, float))
        return np.asarray(np.linalg.norm(delta, axis=-1), dtype=float)


def sphere_project(v: ArrayLike) -> FloatArray:
    """Ретракция v -> v/|v| на единичную сферу (векторизована по последней оси)."""
    arr = np.asarray(v, dtype=float)
    norm = np.linalg.norm(arr, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise DomainError("cannot project the zero vector onto the sphere")
    return np.asarray(arr / norm, dtype=float)


def sphere_second_fundamental_term(
    u: ArrayLike, grad_sq: ArrayLike, n: int | None = None
) -> FloatArray:
    """
    Член кривизны |∇u|^{n-2} A(u)(∇u,∇u) для единичной сферы: c·u.
    При заданном n коэффициент c = grad_sq^{n/2}, иначе grad_sq уже является плотностью.
    Знак выбран так, что правая часть потока касательна к сфере в u.
    """
    uu = np.asarray(u, dtype=float)
    norms = np.linalg.norm(uu, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-10):
        raise DomainError("second fundamental term requires unit vectors u")
    c = np.asarray(grad_sq, dtype=float)
    if np.any(c < 0.0):
        raise DomainError("grad_sq must be non-negative")
    if n is not None:
        c = c ** (0.5 * n)
    return np.asarray(c[..., None] * uu, dtype=float)


def torus_reduce(points: ArrayLike) -> FloatArray:
    """Приведение координат в фундаментальную область [0,1)^m."""
    pts = np.mod(np.asarray(points, dtype=float), 1.0)
    # mod может вернуть ровно 1.0 для отрицательных значений порядка -1e-17
    pts[pts >= 1.0] = 0.0
    return pts


def minimal_image(delta: ArrayLike) -> FloatArray:
    """Кратчайший представитель смещения по модулю решётки: [-1/2, 1/2)."""
    d = np.asarray(delta, dtype=float)
    return np.asarray(d - np.floor(d + 0.5), dtype=float)


def torus_lift(path: ArrayLike, threshold: float = CONTINUATION_THRESHOLD) -> FloatArray:
    """
    Поднятие пути на торе в накрытие R^m.
    Первая точка попадает в фундаментальную область, шаги — кратчайшие представители.
    """
    pts = np.atleast_2d(np.asarray(path, dtype=float))
    if pts.shape[0] == 0:
        raise DomainError("cannot lift an empty path")
    base = torus_reduce(pts)
    steps = minimal_image(np.diff(base, axis=0))
    if steps.size:
        bad = np.flatnonzero(np.any(np.abs(steps) >= threshold, axis=1))
        if bad.size:
            k = int(bad[0])
            raise LiftAmbiguityError("continuation condition violated", (k, k + 1))
    lift = np.empty_like(base)
    lift[0] = base[0]
    lift[1:] = base[0] + np.cumsum(steps, axis=0)
    return lift


def cover_distance(p: ArrayLike, q: ArrayLike) -> float:
    """Евклидово расстояние в накрытии (плоская модель метрики g̃)."""
    return float(np.linalg.norm(np.asarray(p, float) - np.asarray(q, float)))


def sphere_area(k: int) -> float:
    """|S^k| = 2π^{(k+1)/2} / Γ((k+1)/2)."""
    return float(2.0 * np.pi ** (0.5 * (k + 1)) / gamma(0.5 * (k + 1)))


def grid_edges(
    shape: tuple[int, ...], periodic: tuple[bool, ...]
) -> tuple[NDArray[np.int64], ...]:
    """Рёбра графа тензорной сетки (соседи по осям) в виде пар плоских индексов."""
    index = np.arange(int(np.prod(shape))).reshape(shape)
    heads: list[NDArray[np.int64]] = []
    tails: list[NDArray[np.int64]] = []
    for axis, wrap in enumerate(periodic):
        if shape[axis] < 2:
            continue
        if wrap:
            a = index
            b = np.roll(index, -1, axis=axis)
        else:
            a = np.take(index, np.arange(shape[axis] - 1), axis=axis)
            b = np.take(index, np.arange(1, shape[axis]), axis=axis)
        heads.append(a.ravel())
        tails.append(b.ravel())
    if not heads:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    return np.concatenate(heads), np.concatenate(tails)


def lift_grid(
    values: ArrayLike,
    periodic: tuple[bool, ...],
    anchor: tuple[int, ...] | None = None,
    threshold: float = CONTINUATION_THRESHOLD,
) -> FloatArray:
    """
    Поднятие отображения сетки в тор на накрытие R^m обходом в ширину от узла anchor.
    Значения anchor приводятся в фундаментальную область; каждое ребро дерева обхода
    проверяется условием продолжения, остальные рёбра — согласованностью поднятия.
    """
    vals = torus_reduce(values)
    shape = vals.shape[:-1]
    m = vals.shape[-1]
    flat = vals.reshape(-1, m)
    size = flat.shape[0]
    if size == 0:
        raise DomainError("cannot lift an empty grid")
    start = 0 if anchor is None else int(np.ravel_multi_index(anchor, shape, mode="wrap"))
    heads, tails = grid_edges(shape, periodic)
    lift = np.empty_like(flat)
    lift[start] = flat[start]
    if heads.size == 0:
        return lift.reshape(vals.shape)

    adjacency = coo_matrix(
        (np.ones(2 * heads.size), (np.r_[heads, tails], np.r_[tails, heads])), shape=(size, size)
    ).tocsr()
    _, predecessors = breadth_first_order(adjacency, start, directed=False)
    levels = shortest_path(adjacency, unweighted=True, directed=False, indices=start)
    if not np.all(np.isfinite(levels)):
        raise DomainError("grid graph is disconnected; lift undefined")
    level_index = levels.astype(np.int64)
    order = np.argsort(level_index, kind="stable")
    bounds = np.searchsorted(level_index[order], np.arange(1, level_index.max() + 2))
    lo = bounds[0]
    for hi in bounds[1:]:
        nodes = order[lo:hi]
        parents = predecessors[nodes]
        step = minimal_image(flat[nodes] - flat[parents])
        bad = np.flatnonzero(np.any(np.abs(step) >= threshold, axis=1))
        if bad.size:
            k = int(bad[0])
            edge = (
                tuple(int(i) for i in np.unravel_index(parents[k], shape)),
                tuple(int(i) for i in np.unravel_index(nodes[k], shape)),
            )
            raise LiftAmbiguityError("continuation condition violated", edge)
        lift[nodes] = lift[parents] + step
        lo = hi

    # согласованность на рёбрах вне дерева обхода
    step = minimal_image(flat[tails] - flat[heads])
    mismatch = np.max(np.abs(lift[tails] - lift[heads] - step), axis=1)
    bad = np.flatnonzero((mismatch > 1e-9) | np.any(np.abs(step) >= threshold, axis=1))
    if bad.size:
        k = int(bad[0])
        edge = (
            tuple(int(i) for i in np.unravel_index(heads[k], shape)),
            tuple(int(i) for i in np.unravel_index(tails[k], shape)),
        )
        raise LiftAmbiguityError("lift is inconsistent around a grid cycle", edge)
    return lift.reshape(vals.shape)


def point_cloud_diameter(points: ArrayLike) -> float:
    """Точный диаметр конечного множества точек (максимум попарных расстояний)."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, np.shape(points)[-1]), axis=0)
    if pts.shape[0] < 2:
        return 0.0
    if pts.shape[0] > 2000:
        centered = pts - pts.mean(axis=0)
        _, sing, vt = np.linalg.svd(centered, full_matrices=False)
        rank = int(np.sum(sing > 1e-9 * max(sing[0], 1e-300)))
        coords = centered @ vt[:rank].T
        if rank == 1:
            return float(coords.max() - coords.min())
        if 2 <= rank <= 6:
            try:
                hull = ConvexHull(coords, qhull_options="QJ")
            except QhullError:
                hull = None
            if hull is not None:
                pts = pts[np.unique(hull.vertices)]
    best = 0.0
    for lo in range(0, pts.shape[0], 1024):
        block = cdist(pts[lo : lo + 1024], pts)
        best = max(best, float(block.max()))
    return best
