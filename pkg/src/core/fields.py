# SPDX-License-Identifier: GPL-3.0-only
"""
Дискретные поля: радиальный профиль корротационного отображения и тензорная сетка (GridMap).

Редуцированная энергия считается по кусочно-линейному профилю квадратурой Гаусса–Лежандра
внутри каждой ячейки: веса w(ρ)^{n-1} никогда не вычисляются на полюсе, а тождественный
профиль h = ρ является точной дискретной критической точкой.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.typing import ArrayLike, NDArray

from src.core.errors import ContractError, DomainError
from src.core.manifold import (
    SphereTarget,
    TorusTarget,
    lift_grid,
    minimal_image,
    point_cloud_diameter,
    sphere_area,
    torus_reduce,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DOMAIN_KINDS = ("sphere_polar", "flat_ball")
AXIS_KINDS = ("periodic", "midpoint", "trapezoid")
GAUSS_POINTS = 5
BOUNDARY_TOL = 1e-9


@lru_cache(maxsize=8)
def gauss_cell_rule(points: int = GAUSS_POINTS) -> tuple[FloatArray, FloatArray]:
    """Узлы и веса Гаусса–Лежандра на [0, 1]."""
    nodes, weights = leggauss(points)
    xi = 0.5 * (nodes + 1.0)
    wq = 0.5 * weights
    xi.setflags(write=False)
    wq.setflags(write=False)
    return xi, wq


def domain_weight(rho: ArrayLike, domain_kind: str) -> FloatArray:
    """Радиус орбиты w(ρ): sin ρ на сфере, ρ в плоском шаре."""
    r = np.asarray(rho, dtype=float)
    if domain_kind == "sphere_polar":
        return np.asarray(np.sin(r), dtype=float)
    return r.copy()


def domain_weight_derivative(rho: ArrayLike, domain_kind: str) -> FloatArray:
    r = np.asarray(rho, dtype=float)
    if domain_kind == "sphere_polar":
        return np.asarray(np.cos(r), dtype=float)
    return np.ones_like(r)


@dataclass(frozen=True)
class RadialProfile:
    """
    Профиль полярного угла h(ρ) отображения u = (sin h·Θ, cos h).
    h(0) = 0 точно; h(R) = b фиксировано (на сфере b кратно π).
    """

    grid: FloatArray
    values: FloatArray
    domain_kind: str = "sphere_polar"

    def __post_init__(self) -> None:
        grid = np.array(self.grid, dtype=float)
        values = np.array(self.values, dtype=float)
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

        if self.domain_kind not in DOMAIN_KINDS:
            raise DomainError(f"unknown domain kind {self.domain_kind!r}")
        if grid.ndim != 1 or grid.size < 3:
            raise DomainError("profile grid needs at least 3 nodes")
        if values.shape != grid.shape:
            raise DomainError("profile values must match the grid shape")
        if grid[0] != 0.0:
            raise DomainError("profile grid must start at rho = 0")
        if np.any(np.diff(grid) <= 0.0):
            raise DomainError("profile grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DomainError("profile values must be finite")
        if values[0] != 0.0:
            raise DomainError("profile must satisfy h(0) = 0 exactly")
        if self.domain_kind == "sphere_polar":
            if abs(grid[-1] - np.pi) > 1e-12:
                raise DomainError("sphere_polar grid must end at rho = pi")
            if abs(np.sin(values[-1])) > BOUNDARY_TOL:
                raise DomainError("sphere_polar boundary value must be a multiple of pi")

    @classmethod
    def from_function(
        cls,
        func: Callable[[FloatArray], ArrayLike],
        K: int,
        domain_kind: str = "sphere_polar",
        radius: float | None = None,
    ) -> RadialProfile:
        """
        Равномерная сетка из K ячеек; значение на полюсе принудительно 0.
        На сфере h(π) округляется до ближайшего kπ, если отклонение в пределах BOUNDARY_TOL.
        """
        if K < 2:
            raise DomainError(f"grid size K must be >= 2, got {K}")
        R = np.pi if domain_kind == "sphere_polar" else float(radius if radius else 1.0)
        grid = np.linspace(0.0, R, K + 1)
        if domain_kind == "sphere_polar":
            grid[-1] = np.pi
        values = np.asarray(func(grid), dtype=float).copy()
        if abs(values[0]) > 1e-12:
            raise DomainError(f"initial profile must vanish at the pole, got {values[0]:.3e}")
        values[0] = 0.0
        if domain_kind == "sphere_polar" and abs(np.sin(values[-1])) <= BOUNDARY_TOL:
            values[-1] = np.pi * np.round(values[-1] / np.pi)
        return cls(grid, values, domain_kind)

    def refined(self, mask: ArrayLike) -> RadialProfile:
        """
        Деление отмеченных ячеек пополам. Значения в новых узлах — линейная интерполяция,
        так что кусочно-линейная функция не меняется.
        """
        split = np.asarray(mask, dtype=bool)
        if split.shape != (self.K,):
            raise DomainError(f"refinement mask needs {self.K} cells, got {split.shape}")
        cells = np.flatnonzero(split)
        if cells.size == 0:
            return self
        mid_rho = 0.5 * (self.grid[cells] + self.grid[cells + 1])
        mid_h = 0.5 * (self.values[cells] + self.values[cells + 1])
        grid = np.insert(self.grid, cells + 1, mid_rho)
        values = np.insert(self.values, cells + 1, mid_h)
        return RadialProfile(grid, values, self.domain_kind)

    @property
    def K(self) -> int:
        return int(self.grid.size - 1)

    @property
    def radius(self) -> float:
        return float(self.grid[-1])

    @property
    def boundary(self) -> float:
        return float(self.values[-1])

    @property
    def spacing(self) -> FloatArray:
        return np.diff(self.grid)

    def weight(self, rho: ArrayLike | None = None) -> FloatArray:
        return domain_weight(self.grid if rho is None else rho, self.domain_kind)

    def with_values(self, values: ArrayLike) -> RadialProfile:
        """Новый профиль на той же сетке; граничные значения сохраняются побитово."""
        new = np.array(values, dtype=float)
        new[0] = self.values[0]
        new[-1] = self.values[-1]
        return RadialProfile(self.grid, new, self.domain_kind)


class _CellSamples(NamedTuple):
    cells: NDArray[np.int64]
    xi: FloatArray  # (cells, G), локальная координата в ячейке
    wts: FloatArray  # (cells, G), веса в долях длины ячейки
    delta: FloatArray  # (cells,)
    slope: FloatArray  # (cells,)
    rho: FloatArray
    h: FloatArray
    w: FloatArray


def _cell_samples(
    profile: RadialProfile, rmin: float | None = None, rmax: float | None = None
) -> _CellSamples:
    grid = profile.grid
    lo = grid[0] if rmin is None else float(np.clip(rmin, grid[0], grid[-1]))
    hi = grid[-1] if rmax is None else float(np.clip(rmax, grid[0], grid[-1]))
    left, right = grid[:-1], grid[1:]
    a = np.maximum(left, lo)
    b = np.minimum(right, hi)
    cells = np.flatnonzero(b > a)
    delta = right[cells] - left[cells]
    xa = (a[cells] - left[cells]) / delta
    xb = (b[cells] - left[cells]) / delta
    xg, wg = gauss_cell_rule()
    span = (xb - xa)[:, None]
    xi = xa[:, None] + span * xg[None, :]
    wts = span * wg[None, :]
    h_left = profile.values[cells][:, None]
    h_right = profile.values[cells + 1][:, None]
    rho = left[cells][:, None] + xi * delta[:, None]
    return _CellSamples(
        cells=cells,
        xi=xi,
        wts=wts,
        delta=delta,
        slope=(profile.values[cells + 1] - profile.values[cells]) / delta,
        rho=rho,
        h=(1.0 - xi) * h_left + xi * h_right,
        w=domain_weight(rho, profile.domain_kind),
    )


def _reduced_q(s: _CellSamples, n: int) -> FloatArray:
    return np.asarray(s.slope[:, None] ** 2 + (n - 1) * (np.sin(s.h) / s.w) ** 2, dtype=float)


def _check_dimension(n: int) -> None:
    if n < 2:
        raise DomainError(f"domain dimension n must be >= 2, got {n}")


def reduced_cell_energies(
    profile: RadialProfile,
    n: int,
    eps_reg: float = 0.0,
    rmin: float | None = None,
    rmax: float | None = None,
) -> FloatArray:
    """Энергия по ячейкам (вклад всех ячеек окна [rmin, rmax], остальные нули)."""
    _check_dimension(n)
    s = _cell_samples(profile, rmin, rmax)
    q = _reduced_q(s, n)
    eps2 = eps_reg * eps_reg
    density = s.w ** (n - 1) * ((eps2 + q) ** (0.5 * n) - eps_reg**n)
    out = np.zeros(profile.K)
    out[s.cells] = sphere_area(n - 1) / n * s.delta * np.sum(s.wts * density, axis=1)
    return out


def restricted_energy(
    profile: RadialProfile, n: int, rmin: float, rmax: float, eps_reg: float = 0.0
) -> float:
    """E_n(u; B_rmax \\ B_rmin); окна, разбивающие отрезок, дают аддитивные значения."""
    return float(np.sum(reduced_cell_energies(profile, n, eps_reg, rmin, rmax)))


def radial_integral(
    profile: RadialProfile,
    nodal_values: ArrayLike,
    n: int,
    rmin: float | None = None,
    rmax: float | None = None,
) -> float:
    """|S^{n-1}| ∫ v(ρ) w^{n-1} dρ для кусочно-линейной v, заданной в узлах."""
    v = np.asarray(nodal_values, dtype=float)
    if v.shape != profile.grid.shape:
        raise DomainError("nodal values must match the profile grid")
    s = _cell_samples(profile, rmin, rmax)
    vg = (1.0 - s.xi) * v[s.cells][:, None] + s.xi * v[s.cells + 1][:, None]
    inner = np.sum(s.wts * vg * s.w ** (n - 1), axis=1)
    return float(sphere_area(n - 1) * np.sum(s.delta * inner))


def reduced_energy_gradient(profile: RadialProfile, n: int, eps_reg: float = 0.0) -> FloatArray:
    """Точный градиент дискретной редуцированной энергии по узловым значениям."""
    _check_dimension(n)
    s = _cell_samples(profile)
    q = _reduced_q(s, n)
    coef = (eps_reg * eps_reg + q) ** (0.5 * (n - 2))
    d_slope = n * s.slope[:, None] * coef * s.w ** (n - 1)
    d_value = n * (n - 1) * coef * np.sin(s.h) * np.cos(s.h) * s.w ** (n - 3)
    scale = sphere_area(n - 1) / n * s.delta[:, None] * s.wts
    inv = (1.0 / s.delta)[:, None]
    left = np.sum(scale * (-d_slope * inv + d_value * (1.0 - s.xi)), axis=1)
    right = np.sum(scale * (d_slope * inv + d_value * s.xi), axis=1)
    grad = np.zeros(profile.grid.size)
    np.add.at(grad, s.cells, left)
    np.add.at(grad, s.cells + 1, right)
    return grad


def lumped_mass(profile: RadialProfile, n: int) -> FloatArray:
    """M_k = |S^{n-1}| ∫ w^{n-1} φ_k: метрика взвешенного L²."""
    s = _cell_samples(profile)
    base = sphere_area(n - 1) * s.delta[:, None] * s.wts * s.w ** (n - 1)
    mass = np.zeros(profile.grid.size)
    np.add.at(mass, s.cells, np.sum(base * (1.0 - s.xi), axis=1))
    np.add.at(mass, s.cells + 1, np.sum(base * s.xi, axis=1))
    return mass


def profile_slope(profile: RadialProfile) -> FloatArray:
    """h′ в узлах: второй порядок внутри, нечётное отражение на полюсах."""
    grid, h = profile.grid, profile.values
    slope = np.gradient(h, grid, edge_order=2)
    slope[0] = h[1] / grid[1]
    if profile.domain_kind == "sphere_polar":
        slope[-1] = (h[-1] - h[-2]) / (grid[-1] - grid[-2])
    return np.asarray(slope, dtype=float)


def sine_ratio(profile: RadialProfile, slope: FloatArray | None = None) -> FloatArray:
    """sin h / w в узлах с пределами на полюсах."""
    d = profile_slope(profile) if slope is None else slope
    w = profile.weight()
    ratio = np.zeros_like(w)
    inner = w > 0.0
    inner[0] = False
    if profile.domain_kind == "sphere_polar":
        inner[-1] = False
    ratio[inner] = np.sin(profile.values[inner]) / w[inner]
    ratio[0] = d[0]
    if profile.domain_kind == "sphere_polar":
        k = int(round(profile.boundary / np.pi))
        ratio[-1] = (-1.0) ** (k + 1) * d[-1]
    return ratio


def tangential_radial_split(profile: RadialProfile, n: int) -> tuple[FloatArray, FloatArray]:
    """(|∂_r u|², |∇_T u|²) в узлах."""
    slope = profile_slope(profile)
    return slope**2, (n - 1) * sine_ratio(profile, slope) ** 2


def profile_gradient_sq(profile: RadialProfile, n: int) -> FloatArray:
    radial, tangential = tangential_radial_split(profile, n)
    return radial + tangential


def profile_oscillation(
    profile: RadialProfile, rmin: float | None = None, rmax: float | None = None
) -> float:
    """
    Точная хордовая осцилляция корротационного отображения по узлам кольца [rmin, rmax].
    Для α = arccos(cos h) расстояние максимально при антиподальных Θ: 2 sin((α_i + α_j)/2).
    """
    lo = profile.grid[0] if rmin is None else rmin
    hi = profile.grid[-1] if rmax is None else rmax
    mask = (profile.grid >= lo) & (profile.grid <= hi)
    if not np.any(mask):
        return 0.0
    alpha = np.sort(np.arccos(np.clip(np.cos(profile.values[mask]), -1.0, 1.0)))
    # для каждой α_i лучший партнёр ближе всего к π − α_i
    goal = np.pi - alpha
    pos = np.searchsorted(alpha, goal)
    best = 0.0
    for shift in (-1, 0):
        idx = np.clip(pos + shift, 0, alpha.size - 1)
        best = max(best, float(np.max(np.sin(0.5 * (alpha + alpha[idx])))))
    return 2.0 * best


def higher_order_integrals(profile: RadialProfile, n: int) -> dict[str, float]:
    """
    ∫|∇(|∇u|^{(n-2)/2}∇u)|² и ∫|∇u|^{2n} для корротационного отображения.
    Ковариантная производная на искривлённом произведении dρ² + w² g_{S^{n-1}}.
    """
    slope = profile_slope(profile)
    ratio = sine_ratio(profile, slope)
    f = slope**2 + (n - 1) * ratio**2
    phi = f ** (0.25 * (n - 2))
    a = phi * slope
    b = phi * ratio
    da = np.gradient(a, profile.grid, edge_order=2)
    db = np.gradient(b, profile.grid, edge_order=2)
    h = profile.values
    w = profile.weight()
    dw = domain_weight_derivative(profile.grid, profile.domain_kind)
    angular = np.zeros_like(w)
    inner = w > 1e-300
    inner[0] = False
    if profile.domain_kind == "sphere_polar":
        inner[-1] = False
    cos_h, sin_h = np.cos(h[inner]), np.sin(h[inner])
    ai, bi, wi, dwi = a[inner], b[inner], w[inner], dw[inner]
    angular[inner] = (
        (ai * cos_h - dwi * bi) ** 2 + (dwi * ai * cos_h - bi) ** 2 + (dwi * ai * sin_h) ** 2
    ) / wi**2
    density = da**2 + (a * slope) ** 2 + (n - 1) * (db**2 + angular)
    return {
        "grad_weighted_sq": _trapezoid_radial(profile, density, n),
        "grad_2n": _trapezoid_radial(profile, f**n, n),
    }


def _trapezoid_radial(profile: RadialProfile, values: FloatArray, n: int) -> float:
    integrand = values * profile.weight() ** (n - 1)
    return float(sphere_area(n - 1) * np.trapezoid(integrand, profile.grid))


@dataclass(frozen=True)
class EnergyReport:
    """
    Отчёт об n-энергии. Для профиля плотность задана по ячейкам (средняя по ячейке),
    для сетки по узлам; в обоих случаях total = Σ density·weights.
    """

    total_energy: float
    density: FloatArray
    weights: FloatArray
    support: str
    higher_order: dict[str, float] | None = None
    nodal_density: FloatArray | None = None

    def __post_init__(self) -> None:
        recomputed = float(np.sum(self.density * self.weights))
        scale = max(abs(self.total_energy), 1e-300)
        if abs(recomputed - self.total_energy) > 1e-10 * scale and abs(recomputed) > 1e-300:
            raise ContractError(
                f"energy report inconsistent: total {self.total_energy!r} vs {recomputed!r}"
            )
        if np.any(self.weights < 0.0):
            raise ContractError("energy report weights must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "total_energy": self.total_energy,
            "support": self.support,
            "points": int(self.density.size),
            "max_density": float(np.max(self.density)) if self.density.size else 0.0,
            "higher_order": dict(self.higher_order) if self.higher_order else None,
        }


def _profile_energy(profile: RadialProfile, n: int, eps_reg: float) -> EnergyReport:
    cells = reduced_cell_energies(profile, n, eps_reg)
    s = _cell_samples(profile)
    volume = sphere_area(n - 1) * s.delta * np.sum(s.wts * s.w ** (n - 1), axis=1)
    density = np.divide(cells, volume, out=np.zeros_like(cells), where=volume > 0.0)
    total = float(np.sum(density * volume))
    nodal = profile_gradient_sq(profile, n) ** (0.5 * n) / n
    return EnergyReport(
        total_energy=total,
        density=density,
        weights=volume,
        support="cells",
        higher_order=higher_order_integrals(profile, n),
        nodal_density=nodal,
    )


def _axis_weights(coords: FloatArray, kind: str) -> FloatArray:
    if kind == "trapezoid":
        gaps = np.diff(coords)
        out = np.zeros_like(coords)
        out[:-1] += 0.5 * gaps
        out[1:] += 0.5 * gaps
        return out
    return np.full(coords.shape, coords[1] - coords[0] if coords.size > 1 else 1.0)


def _midpoints(count: int, lo: float, hi: float) -> FloatArray:
    step = (hi - lo) / count
    return np.asarray(lo + step * (np.arange(count) + 0.5), dtype=float)


def _sphere_angles(dim: int, count: int) -> tuple[list[FloatArray], list[str]]:
    """Гиперсферические углы S^{dim}: θ_1..θ_{dim-1} ∈ (0, π), φ ∈ [0, 2π)."""
    axes = [_midpoints(count, 0.0, np.pi) for _ in range(dim - 1)]
    kinds = ["midpoint"] * (dim - 1)
    axes.append(np.linspace(0.0, 2.0 * np.pi, 2 * count, endpoint=False))
    kinds.append("periodic")
    return axes, kinds


def _sphere_embedding(
    angles: list[FloatArray],
) -> tuple[FloatArray, list[FloatArray], FloatArray]:
    """Θ ∈ S^{k}, множители обратной метрики по углам и элемент объёма на meshgrid-углах."""
    k = len(angles)
    comps: list[FloatArray] = []
    inv: list[FloatArray] = []
    volume = np.ones_like(angles[0])
    prod = np.ones_like(angles[0])
    for i, theta in enumerate(angles[:-1]):
        comps.append(prod * np.cos(theta))
        inv.append(1.0 / prod**2)
        volume = volume * np.sin(theta) ** (k - 1 - i)
        prod = prod * np.sin(theta)
    phi = angles[-1]
    comps.extend([prod * np.cos(phi), prod * np.sin(phi)])
    inv.append(1.0 / prod**2)
    return np.stack(comps, axis=-1), inv, volume


@dataclass(frozen=True)
class GridMap:
    """
    Отображение тензорной сетки в сферу или тор с диагональной метрикой.
    inv_metric[a] — g^{aa} в узлах, volume — √|g|.
    """

    axes: tuple[FloatArray, ...]
    values: FloatArray
    inv_metric: tuple[FloatArray, ...]
    volume: FloatArray
    axis_kinds: tuple[str, ...]
    target: SphereTarget | TorusTarget
    lift: FloatArray | None = None
    anchor: tuple[int, ...] | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        shape = tuple(a.size for a in self.axes)
        values = np.asarray(self.values, dtype=float)
        if values.shape != shape + (self.target.ambient_dim,):
            raise DomainError(
                f"grid values shape {values.shape} does not match {shape} x "
                f"{self.target.ambient_dim}"
            )
        if any(k not in AXIS_KINDS for k in self.axis_kinds) or len(self.axis_kinds) != len(
            shape
        ):
            raise DomainError("every grid axis needs a kind: periodic, midpoint or trapezoid")
        if isinstance(self.target, TorusTarget):
            values = torus_reduce(values)
        elif not self.target.contains(values, tol=1e-10):
            raise DomainError("sphere-valued grid map has non-unit values")
        if np.any(np.asarray(self.volume) <= 0.0):
            raise DomainError("metric volume weights must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "volume", np.broadcast_to(self.volume, shape))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def periodic(self) -> tuple[bool, ...]:
        return tuple(k == "periodic" for k in self.axis_kinds)

    def quadrature_weights(self) -> FloatArray:
        weights = np.asarray(self.volume, dtype=float).copy()
        for axis, (coords, kind) in enumerate(zip(self.axes, self.axis_kinds)):
            shape = [1] * self.dim
            shape[axis] = coords.size
            weights = weights * _axis_weights(coords, kind).reshape(shape)
        return weights

    def with_values(self, values: ArrayLike, lift: ArrayLike | None = None) -> GridMap:
        return GridMap(
            axes=self.axes,
            values=np.asarray(values, dtype=float),
            inv_metric=self.inv_metric,
            volume=self.volume,
            axis_kinds=self.axis_kinds,
            target=self.target,
            lift=None if lift is None else np.asarray(lift, dtype=float),
            anchor=self.anchor,
            meta=dict(self.meta),
        )

    def covered_values(self) -> FloatArray:
        """Поднятие в накрытие (для тора) или сами значения (для сферы)."""
        if isinstance(self.target, SphereTarget):
            return self.values
        if self.lift is not None:
            return self.lift
        return lift_grid(self.values, self.periodic, self.anchor)

    # --- конструкторы ---

    @classmethod
    def from_profile(
        cls, profile: RadialProfile, n: int, radial: int = 64, angular: int = 16
    ) -> GridMap:
        """Корротационное отображение S^n → S^n (или B_R → S^n) на гиперсферической сетке."""
        _check_dimension(n)
        if profile.domain_kind == "sphere_polar":
            rho = _midpoints(radial, 0.0, np.pi)
            rho_kind = "midpoint"
        else:
            rho = _midpoints(radial, 0.0, profile.radius)
            rho_kind = "midpoint"
        angle_axes, angle_kinds = _sphere_angles(n - 1, angular)
        mesh = np.meshgrid(rho, *angle_axes, indexing="ij")
        theta, inv_angles, vol_angles = _sphere_embedding(mesh[1:])
        w = domain_weight(mesh[0], profile.domain_kind)
        h = np.interp(mesh[0], profile.grid, profile.values)
        values = np.concatenate(
            [np.sin(h)[..., None] * theta, np.cos(h)[..., None]], axis=-1
        )
        inv_metric = (np.ones_like(w),) + tuple(f / w**2 for f in inv_angles)
        return cls(
            axes=(rho, *angle_axes),
            values=values,
            inv_metric=inv_metric,
            volume=w ** (n - 1) * vol_angles,
            axis_kinds=(rho_kind, *angle_kinds),
            target=SphereTarget(n),
            meta={"source": "profile", "domain_kind": profile.domain_kind},
        )

    @classmethod
    def on_cylinder(
        cls,
        t_axis: ArrayLike,
        n: int,
        angular: int,
        func: Callable[[FloatArray, FloatArray], FloatArray],
        target: TorusTarget,
        lift_func: Callable[[FloatArray, FloatArray], FloatArray] | None = None,
    ) -> GridMap:
        """
        Сетка на цилиндре R × S^{n-1} с метрикой dt² + g_{S^{n-1}} (конформна S^n без полюсов).
        func(t, Θ) возвращает точки накрытия; значения приводятся по модулю решётки.
        """
        _check_dimension(n)
        t = np.asarray(t_axis, dtype=float)
        angle_axes, angle_kinds = _sphere_angles(n - 1, angular)
        mesh = np.meshgrid(t, *angle_axes, indexing="ij")
        theta, inv_angles, vol_angles = _sphere_embedding(mesh[1:])
        cover = np.asarray(func(mesh[0], theta), dtype=float)
        return cls(
            axes=(t, *angle_axes),
            values=cover,
            inv_metric=(np.ones_like(mesh[0]), *inv_angles),
            volume=vol_angles,
            axis_kinds=("trapezoid", *angle_kinds),
            target=target,
            lift=cover if lift_func is None else np.asarray(lift_func(mesh[0], theta)),
            anchor=(t.size - 1,) + (0,) * (n - 1),
            meta={"source": "cylinder"},
        )

    @classmethod
    def on_flat_torus(
        cls, shape: tuple[int, ...], values: Callable[..., ArrayLike] | ArrayLike, target_dim: int
    ) -> GridMap:
        """Плоский тор [0,1)^k как область; values — массив или функция координат."""
        axes = tuple(np.arange(s) / s for s in shape)
        mesh = np.meshgrid(*axes, indexing="ij")
        vals = np.asarray(values(*mesh) if callable(values) else values, dtype=float)
        ones = np.ones(tuple(shape))
        return cls(
            axes=axes,
            values=vals,
            inv_metric=tuple(ones for _ in shape),
            volume=ones,
            axis_kinds=("periodic",) * len(shape),
            target=TorusTarget(target_dim),
            anchor=(0,) * len(shape),
            meta={"source": "flat_torus"},
        )


def axis_derivative(grid_map: GridMap, axis: int) -> FloatArray:
    vals = grid_map.values
    coords = grid_map.axes[axis]
    torus = isinstance(grid_map.target, TorusTarget)
    if grid_map.axis_kinds[axis] == "periodic":
        step = coords[1] - coords[0]
        diff = np.roll(vals, -1, axis=axis) - np.roll(vals, 1, axis=axis)
        if torus:
            diff = minimal_image(diff)
        return np.asarray(diff / (2.0 * step), dtype=float)
    if torus:
        vals = np.unwrap(vals, period=1.0, axis=axis)
    return np.asarray(np.gradient(vals, coords, axis=axis, edge_order=2), dtype=float)


def gradient_sq(grid_map: GridMap) -> FloatArray:
    """|∇u|² = Σ_a g^{aa} |∂_a u|² во всех узлах."""
    total = np.zeros(grid_map.shape)
    for axis in range(grid_map.dim):
        if grid_map.axes[axis].size < 3:
            continue
        d = axis_derivative(grid_map, axis)
        total += grid_map.inv_metric[axis] * np.sum(d * d, axis=-1)
    return total


def gradient_norm(grid_map: GridMap, node: tuple[int, ...] | None = None) -> FloatArray | float:
    """|∇u| в узле node или во всех узлах."""
    norm = np.sqrt(gradient_sq(grid_map))
    if node is None:
        return norm
    return float(norm[node])


def n_energy(
    mapping: RadialProfile | GridMap,
    n: int | None = None,
    eps_reg: float = 0.0,
    region: ArrayLike | None = None,
) -> EnergyReport:
    """E_n(u) = (1/n)∫|∇u|^n dv для профиля или сетки (region — маска узлов сетки)."""
    if isinstance(mapping, RadialProfile):
        if n is None:
            raise DomainError("profile energy needs the domain dimension n")
        return _profile_energy(mapping, n, eps_reg)
    dim = mapping.dim if n is None else n
    if mapping.values.size == 0:
        raise DomainError("cannot integrate over an empty grid")
    density = (eps_reg**2 + gradient_sq(mapping)) ** (0.5 * dim) / dim
    weights = mapping.quadrature_weights()
    if region is not None:
        weights = np.where(np.asarray(region, dtype=bool), weights, 0.0)
    return EnergyReport(
        total_energy=float(np.sum(density * weights)),
        density=density.ravel(),
        weights=weights.ravel(),
        support="nodes",
    )


def oscillation(grid_map: GridMap, region: ArrayLike | None = None) -> float:
    """Максимум попарных расстояний значений на узлах области (хордовое либо в накрытии)."""
    points = grid_map.covered_values()
    if region is not None:
        mask = np.asarray(region, dtype=bool)
        if not np.any(mask):
            raise DomainError("oscillation region is empty")
        points = points[mask]
    return point_cloud_diameter(points.reshape(-1, points.shape[-1]))
