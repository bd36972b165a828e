# SPDX-License-Identifier: GPL-3.0-only
"""
Вычислимые аналитические величины потока: поле натяжения, тождество диссипации,
баланс Похожаева, оценка осцилляции, энергии диадических колец и радиальные
сравнительные отображения.

Константы C, C(n), ε из неравенств не задаются численно: проверки возвращают
левую и правую части, а постоянные подбираются эмпирически.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Protocol

import numpy as np
from numpy.typing import ArrayLike
from scipy.stats import linregress

from src.core.equivariant_flow import FlowTrajectory, reduced_tension
from src.core.errors import ContractError, DomainError
from src.core.fields import (
    FloatArray,
    GridMap,
    RadialProfile,
    axis_derivative,
    gradient_sq,
    higher_order_integrals,
    lumped_mass,
    n_energy,
    oscillation,
    profile_gradient_sq,
    profile_oscillation,
    profile_slope,
    radial_integral,
    restricted_energy,
)
from src.core.manifold import SphereTarget, sphere_area

logger = logging.getLogger(__name__)


def neck_lambda(n: int) -> float:
    """λ_n = n·ln 2 / (2(n−1))."""
    return n * math.log(2.0) / (2.0 * (n - 1))


def check_record(
    name: str,
    inputs: dict[str, Any],
    lhs: float,
    rhs: float,
    residual: float,
    in_regime: bool = True,
) -> dict[str, Any]:
    """Запись проверки в формате check-report."""
    return {
        "name": name,
        "inputs": inputs,
        "lhs": float(lhs),
        "rhs": float(rhs),
        "residual": float(residual),
        "in_regime": bool(in_regime),
    }


# --- поле натяжения ---


@dataclass(frozen=True)
class TensionField:
    vectors: FloatArray
    points: FloatArray
    weights: FloatArray
    scalar: FloatArray | None = None
    normal_residual: FloatArray | None = None

    def norms(self) -> FloatArray:
        return np.asarray(np.linalg.norm(self.vectors, axis=-1), dtype=float)

    def sup_norm(self, region: ArrayLike | None = None) -> float:
        values = self.norms()
        if region is not None:
            values = values[np.asarray(region, dtype=bool)]
        return float(np.max(values)) if values.size else 0.0

    def l2_norm(self, region: ArrayLike | None = None) -> float:
        sq = self.weights * self.norms() ** 2
        if region is not None:
            sq = sq[np.asarray(region, dtype=bool)]
        return float(math.sqrt(np.sum(sq)))

    def tangency_defect(self) -> float:
        """max |⟨τ, u⟩| / max(|τ|) (для сферических целей)."""
        inner = np.abs(np.sum(self.vectors * self.points, axis=-1))
        scale = float(np.max(self.norms())) if self.vectors.size else 0.0
        if scale == 0.0:
            return float(np.max(inner)) if inner.size else 0.0
        return float(np.max(inner)) / scale


def _plain_derivative(values: FloatArray, coords: FloatArray, kind: str, axis: int) -> FloatArray:
    if kind == "periodic":
        step = coords[1] - coords[0]
        diff = np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)
        return np.asarray(diff / (2.0 * step), dtype=float)
    return np.asarray(np.gradient(values, coords, axis=axis, edge_order=2), dtype=float)


def _grid_tension(grid_map: GridMap, n: int, eps_reg: float) -> TensionField:
    f = gradient_sq(grid_map)
    coef = (eps_reg**2 + f) ** (0.5 * (n - 2))
    vol = np.asarray(grid_map.volume, dtype=float)
    divergence = np.zeros(grid_map.values.shape)
    for axis, (coords, kind) in enumerate(zip(grid_map.axes, grid_map.axis_kinds)):
        if coords.size < 3:
            continue
        flux = (vol * grid_map.inv_metric[axis] * coef)[..., None] * axis_derivative(
            grid_map, axis
        )
        divergence += _plain_derivative(flux, coords, kind, axis)
    divergence /= vol[..., None]
    weights = grid_map.quadrature_weights()
    if isinstance(grid_map.target, SphereTarget):
        u = grid_map.values
        normal = np.sum(divergence * u, axis=-1)
        tangent = divergence - normal[..., None] * u
        return TensionField(tangent, u, weights, None, normal + coef * f)
    return TensionField(divergence, grid_map.covered_values(), weights, None, None)


def tension(
    mapping: RadialProfile | GridMap, n: int | None = None, eps_reg: float = 0.0
) -> TensionField:
    """
    τ(u) = div(|∇u|^{n−2}∇u) + |∇u|^{n−2}A(u)(∇u,∇u).
    Для профиля — редуцированное натяжение T, поднятое на луч Θ = e_1: τ = T·∂_h u.
    Для сетки — касательная проекция дискретной дивергенции; normal_residual хранит
    нормальную компоненту div + |∇u|^n u (ошибка дискретизации).
    """
    if isinstance(mapping, GridMap):
        if not np.all(np.isfinite(mapping.values)):
            raise DomainError("tension requires finite field values")
        return _grid_tension(mapping, mapping.dim if n is None else n, eps_reg)
    if n is None:
        raise DomainError("profile tension needs the domain dimension n")
    if not np.all(np.isfinite(mapping.values)):
        raise DomainError("tension requires finite field values")
    scalar = reduced_tension(mapping, n, eps_reg)
    h = mapping.values
    u = np.zeros((h.size, n + 1))
    u[:, 0], u[:, -1] = np.sin(h), np.cos(h)
    nu = np.zeros_like(u)
    nu[:, 0], nu[:, -1] = np.cos(h), -np.sin(h)
    return TensionField(scalar[:, None] * nu, u, lumped_mass(mapping, n), scalar, None)


# --- диссипация ---


@dataclass(frozen=True)
class DissipationReport:
    times: FloatArray
    energies: FloatArray
    dissipation: FloatArray
    residual: FloatArray
    tolerance: float
    violations: tuple[int, ...]
    monotone: bool
    source: str

    @property
    def passed(self) -> bool:
        return not self.violations and self.monotone

    def to_report(self) -> dict[str, Any]:
        worst = int(np.argmax(np.abs(self.residual))) if self.residual.size else 0
        return check_record(
            "dissipation",
            {"snapshots": int(self.times.size), "source": self.source},
            float(self.energies[0] - self.energies[worst]),
            float(self.dissipation[worst]),
            float(self.residual[worst]),
            self.passed,
        )


def dissipation_check(
    traj: FlowTrajectory, tol: float | None = None, source: str = "bookkeeping"
) -> DissipationReport:
    """
    r(s) = E(0) − E(s) − ∫₀^s∫|∂_t u|². source="bookkeeping" берёт накопленную
    при шагах диссипацию, source="velocity" интегрирует сохранённые поля ∂_t h по времени.
    """
    snaps = traj.snapshots
    if len(snaps) < 2:
        raise ContractError("dissipation check needs at least two snapshots")
    n = traj.config.n
    times = np.array([s.time for s in snaps])
    energies = np.array([s.energy for s in snaps])
    if source == "bookkeeping":
        dissipation = np.array([s.dissipation for s in snaps])
    elif source == "velocity":
        rates = []
        for snap in snaps:
            if snap.velocity is None or np.shape(snap.velocity) != snap.profile.grid.shape:
                raise ContractError("snapshot is missing its time-derivative field")
            rates.append(float(np.sum(lumped_mass(snap.profile, n) * snap.velocity**2)))
        # правые концы: поле ∂_t, записанное в снимке, относится к шагу, закончившемуся в нём
        increments = np.diff(times) * np.asarray(rates[1:])
        dissipation = np.concatenate([[0.0], np.cumsum(increments)])
    else:
        raise DomainError(f"unknown dissipation source {source!r}")
    if not np.all(np.isfinite(dissipation)):
        raise ContractError("dissipation bookkeeping is missing or non-finite")
    residual = energies[0] - energies - dissipation
    tolerance = traj.config.tol_dissipation * energies[0] if tol is None else tol
    violations = tuple(int(i) for i in np.flatnonzero(residual < -tolerance))
    step_tol = 1e-8 * (1.0 + energies[0])
    monotone = bool(np.all(np.diff(energies) <= step_tol))
    return DissipationReport(
        times, energies, dissipation, residual, float(tolerance), violations, monotone, source
    )


# --- Похожаев ---


@dataclass(frozen=True)
class PohozaevBalance:
    radius: float
    lhs: float
    rhs_tangential: float
    rhs_tension: float
    boundary_term: float
    bulk_term: float

    @property
    def identity_residual(self) -> float:
        return self.boundary_term + self.bulk_term

    @property
    def ratio(self) -> float:
        denom = self.rhs_tangential + self.rhs_tension
        return self.lhs / denom if denom > 0.0 else math.inf

    def to_report(self) -> dict[str, Any]:
        return check_record(
            "pohozaev",
            {"radius": self.radius},
            self.lhs,
            self.rhs_tangential + self.rhs_tension,
            self.identity_residual,
        )


def _boundary_state(profile: RadialProfile, r: float) -> tuple[float, float]:
    slope = profile_slope(profile)
    h = float(np.interp(r, profile.grid, profile.values))
    return h, float(np.interp(r, profile.grid, slope))


def pohozaev_balance(profile: RadialProfile, n: int, r: float) -> PohozaevBalance:
    """
    Неравенство ∫_{∂B_r}|∇u|^n ≤ C(∫_{∂B_r}|∇_T u|^n + ∫_{B_r}|τ||∇u|) и тождество
    (r/n)∫_{∂B_r}|∇u|^n − r∫_{∂B_r}|∇u|^{n−2}|∂_r u|² + ∫_{B_r}⟨τ, x·∇u⟩ = 0.
    """
    if profile.domain_kind != "flat_ball":
        raise DomainError("Pohozaev balance is defined on flat_ball profiles")
    if not 0.0 < r <= profile.radius:
        raise DomainError(f"radius {r} outside the profile grid (0, {profile.radius}]")
    area = sphere_area(n - 1)
    h, dh = _boundary_state(profile, r)
    angular = (n - 1) * (math.sin(h) / r) ** 2
    f = dh * dh + angular
    shell = area * r ** (n - 1)
    lhs = shell * f ** (0.5 * n)
    rhs_tangential = shell * angular ** (0.5 * n)
    boundary_term = shell * (r / n * f ** (0.5 * n) - r * f ** (0.5 * (n - 2)) * dh * dh)

    t_scalar = reduced_tension(profile, n)
    slope = profile_slope(profile)
    grad = np.sqrt(profile_gradient_sq(profile, n))
    rhs_tension = radial_integral(profile, np.abs(t_scalar) * grad, n, 0.0, r)
    bulk_term = radial_integral(profile, t_scalar * profile.grid * slope, n, 0.0, r)
    return PohozaevBalance(r, lhs, rhs_tangential, rhs_tension, boundary_term, bulk_term)


# --- осцилляция ---


@dataclass(frozen=True)
class OscillationCheck:
    radius: float
    lhs: float
    rhs: float
    energy: float
    in_regime: bool

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0.0 else math.inf

    def to_report(self) -> dict[str, Any]:
        return check_record(
            "oscillation",
            {"radius": self.radius, "energy": self.energy},
            self.lhs,
            self.rhs,
            self.lhs - self.rhs,
            self.in_regime,
        )


def _chart_distance(grid_map: GridMap, center: ArrayLike | None) -> FloatArray:
    """Расстояние от center в координатах осей (на периодических осях — по минимальному образу)."""
    mesh = np.meshgrid(*grid_map.axes, indexing="ij")
    if center is None:
        middle = [0.5 * (float(a[0]) + float(a[-1])) for a in grid_map.axes]
    else:
        middle = [float(c) for c in np.asarray(center, dtype=float)]
    if len(middle) != grid_map.dim:
        raise DomainError(f"ball center needs {grid_map.dim} coordinates, got {len(middle)}")
    dist_sq = np.zeros(grid_map.shape)
    for coords, kind, x, c in zip(grid_map.axes, grid_map.axis_kinds, mesh, middle):
        gap = x - c
        if kind == "periodic":
            period = float(coords[1] - coords[0]) * coords.size
            gap = gap - period * np.round(gap / period)
        dist_sq += gap**2
    return np.asarray(np.sqrt(dist_sq), dtype=float)


def oscillation_bound_check(
    mapping: RadialProfile | GridMap,
    n: int,
    r: float,
    eps_osc: float = 0.1,
    center: ArrayLike | None = None,
) -> OscillationCheck:
    """
    lhs = osc(B_{r/2}),
    rhs = (∫_{B_r}|∇u|^n)^{1/(2(n−1))} + r^{n/(2(n−1))}(∫_{B_r}|τ|²)^{1/(2(n−1))}.
    Для профиля шар центрирован в полюсе. Для сетки шар берётся в координатах карты
    с центром center (по умолчанию середина осей); это шар метрики только на плоском торе.
    Вне режима малой энергии проверка помечается, но всё равно вычисляется.
    """
    power = 1.0 / (2.0 * (n - 1))
    if isinstance(mapping, GridMap):
        dist = _chart_distance(mapping, center)
        ball = dist <= r
        if not np.any(dist <= 0.5 * r):
            raise DomainError(f"radius {r} leaves no grid nodes in the half ball")
        energy = n_energy(mapping, n, region=ball).total_energy
        field_ = _grid_tension(mapping, n, 0.0)
        tau_sq = float(np.sum((field_.weights * field_.norms() ** 2)[ball]))
        lhs = oscillation(mapping, dist <= 0.5 * r)
    else:
        if not 0.0 < r <= mapping.radius:
            raise DomainError(f"radius {r} outside the profile grid (0, {mapping.radius}]")
        energy = restricted_energy(mapping, n, 0.0, r)
        tau = reduced_tension(mapping, n)
        tau_sq = radial_integral(mapping, tau**2, n, 0.0, r)
        lhs = profile_oscillation(mapping, 0.0, 0.5 * r)
    rhs = (n * energy) ** power + r ** (n * power) * tau_sq**power
    in_regime = energy <= eps_osc
    if not in_regime:
        logger.warning("oscillation check out of regime: E=%.4g > eps=%.4g", energy, eps_osc)
    return OscillationCheck(r, lhs, rhs, energy, in_regime)


# --- кольца и шейка ---


@dataclass(frozen=True)
class NeckStatistics:
    t: float
    j_values: tuple[int, ...]
    energies: FloatArray
    oscillations: FloatArray
    derivative_fd: FloatArray
    derivative_boundary: FloatArray
    skipped: tuple[int, ...]
    lambda_n: float

    def rows(self) -> list[dict[str, float]]:
        return [
            {
                "j": j,
                "energy": float(e),
                "oscillation": float(o),
                "derivative_fd": float(d1),
                "derivative_boundary": float(d2),
            }
            for j, e, o, d1, d2 in zip(
                self.j_values,
                self.energies,
                self.oscillations,
                self.derivative_fd,
                self.derivative_boundary,
            )
        ]


def _shell_flux(profile: RadialProfile, n: int, s: float) -> float:
    """∫_{∂B_s}|∇u|^n."""
    h, dh = _boundary_state(profile, s)
    w = float(profile.weight(s))
    f = dh * dh + (n - 1) * (math.sin(h) / w) ** 2
    return float(sphere_area(n - 1) * w ** (n - 1) * f ** (0.5 * n))


def annulus_energies(
    profile: RadialProfile,
    n: int,
    j_range: tuple[int, int],
    t: float = 0.5,
    dt_fd: float = 1e-3,
) -> NeckStatistics:
    """
    f_j(t) = ∫_{P_{j,t}}|∇u|^n, P_{j,t} = B_{2^{t−j}} \\ B_{2^{−t−j}}, и f_j′(t)
    разностью по t и формулой через граничные интегралы.
    """
    if t <= 0.0:
        raise DomainError("annulus parameter t must be positive")
    kept, skipped = [], []
    energies, oscs, d_fd, d_bd = [], [], [], []
    ln2 = math.log(2.0)
    for j in range(j_range[0], j_range[1] + 1):
        outer, inner = 2.0 ** (t - j), 2.0 ** (-t - j)
        if 2.0 ** (t + dt_fd - j) > profile.radius:
            skipped.append(j)
            continue

        def f_j(tt: float, j: int = j) -> float:
            return n * restricted_energy(profile, n, 2.0 ** (-tt - j), 2.0 ** (tt - j))

        kept.append(j)
        energies.append(f_j(t))
        oscs.append(profile_oscillation(profile, inner, outer))
        d_fd.append((f_j(t + dt_fd) - f_j(t - dt_fd)) / (2.0 * dt_fd))
        d_bd.append(
            ln2 * (outer * _shell_flux(profile, n, outer) + inner * _shell_flux(profile, n, inner))
        )
    if skipped:
        logger.warning("annuli outside the grid skipped: j=%s", skipped)
    return NeckStatistics(
        t=t,
        j_values=tuple(kept),
        energies=np.asarray(energies),
        oscillations=np.asarray(oscs),
        derivative_fd=np.asarray(d_fd),
        derivative_boundary=np.asarray(d_bd),
        skipped=tuple(skipped),
        lambda_n=neck_lambda(n),
    )


def neck_decay_fit(stats: NeckStatistics) -> dict[str, Any]:
    """Скорость убывания ln f_j по j и эмпирические константы C_j = f_j / f_j′."""
    e = stats.energies
    positive = e > 0.0
    flux = stats.derivative_boundary
    constants = np.divide(e, flux, out=np.full_like(e, np.nan), where=flux > 0.0)
    result: dict[str, Any] = {
        "lambda_n": stats.lambda_n,
        "constants": [float(c) for c in constants],
        "rate": math.nan,
        "rvalue": math.nan,
    }
    if int(np.sum(positive)) >= 3:
        j = np.asarray(stats.j_values, dtype=float)[positive]
        fit = linregress(j, np.log(e[positive]))
        result["rate"] = float(-fit.slope)
        result["rvalue"] = float(fit.rvalue)
    return result


# --- сравнительные отображения ---


@dataclass(frozen=True)
class ComparisonProfile:
    """Радиальная функция на кольце [r_in, r_out] (без условия на полюсе)."""

    grid: FloatArray
    values: FloatArray
    inner_value: float
    outer_value: float
    meta: dict[str, Any] = field(default_factory=dict)


class _RadialSamples(Protocol):
    grid: FloatArray
    values: FloatArray


def radial_comparison_map(
    profile: RadialProfile, j: int, t: float, nodes: int = 257
) -> ComparisonProfile:
    """
    h(r) = h(2^{t−j}) + (h(2^{−t−j}) − h(2^{t−j}))·ln(2^{j−t} r)/(−2t ln 2).
    Для эквивариантных данных сферическое среднее угла по орбите равно самому профилю.
    """
    if t <= 0.0:
        raise DomainError("comparison map needs t > 0")
    if nodes < 8:
        raise DomainError("edge spheres need at least 8 samples")
    r_out, r_in = 2.0 ** (t - j), 2.0 ** (-t - j)
    if r_out > profile.radius:
        raise DomainError(f"annulus radius {r_out} exceeds the profile grid")
    h_out = float(np.interp(r_out, profile.grid, profile.values))
    h_in = float(np.interp(r_in, profile.grid, profile.values))
    radii = np.linspace(r_in, r_out, nodes)
    ln2 = math.log(2.0)
    values = h_out + (h_in - h_out) * np.log(2.0 ** (j - t) * radii) / (-2.0 * t * ln2)
    values[0], values[-1] = h_in, h_out
    return ComparisonProfile(radii, values, h_in, h_out, {"j": j, "t": t})


def radial_n_laplacian(mapping: _RadialSamples, n: int) -> FloatArray:
    """
    Дискретный радиальный n-лапласиан во внутренних узлах:
    [r^{n−1}|D⁺h|^{n−2}D⁺h]_{k+1/2} − [..]_{k−1/2}, делённое на шаг и r_k^{n−1}.
    """
    r = np.asarray(mapping.grid, dtype=float)
    h = np.asarray(mapping.values, dtype=float)
    gaps = np.diff(r)
    slope = np.diff(h) / gaps
    mid = 0.5 * (r[:-1] + r[1:])
    flux = mid ** (n - 1) * np.abs(slope) ** (n - 2) * slope
    width = 0.5 * (gaps[:-1] + gaps[1:])
    out = np.zeros_like(r)
    out[1:-1] = np.diff(flux) / (width * r[1:-1] ** (n - 1))
    return out


# --- величины регулярности ---


@dataclass(frozen=True)
class RegularitySeries:
    times: FloatArray
    grad_weighted_sq: FloatArray
    grad_2n: FloatArray

    def time_integrals(self) -> dict[str, float]:
        if self.times.size < 2:
            return {"grad_weighted_sq": 0.0, "grad_2n": 0.0}
        return {
            "grad_weighted_sq": float(np.trapezoid(self.grad_weighted_sq, self.times)),
            "grad_2n": float(np.trapezoid(self.grad_2n, self.times)),
        }

    def growing_tail(self, count: int = 10) -> bool:
        """Монотонный рост обеих величин на последних count снимках."""
        a, b = self.grad_weighted_sq[-count:], self.grad_2n[-count:]
        return bool(a.size > 1 and np.all(np.diff(a) > 0.0) and np.all(np.diff(b) > 0.0))


def regularity_quantities(traj: FlowTrajectory) -> RegularitySeries:
    """∫|∇(|∇u|^{(n−2)/2}∇u)|² и ∫|∇u|^{2n} по снимкам траектории."""
    n = traj.config.n
    values = [higher_order_integrals(s.profile, n) for s in traj.snapshots]
    return RegularitySeries(
        times=traj.times,
        grad_weighted_sq=np.array([v["grad_weighted_sq"] for v in values]),
        grad_2n=np.array([v["grad_2n"] for v in values]),
    )


# --- порядки сходимости и разброс на семействах ---


@dataclass(frozen=True)
class RefinementSeries:
    """Ошибки на последовательности сгущений и наблюдаемые порядки log₂(e_k/e_{k+1})."""

    sizes: tuple[int, ...]
    errors: FloatArray

    @property
    def orders(self) -> FloatArray:
        e = self.errors
        ok = (e[:-1] > 0.0) & (e[1:] > 0.0)
        return np.asarray(np.log2(e[:-1][ok] / e[1:][ok]), dtype=float)

    @property
    def order(self) -> float:
        orders = self.orders
        return float(np.min(orders)) if orders.size else math.inf


def bubble_tension_series(
    lam: float, n: int, sizes: tuple[int, ...] | list[int], rho_min: float = 0.125
) -> RefinementSeries:
    """sup|T| точного пузыря 2 arctan(ρ/λ) в плоском шаре на окне ρ ≥ rho_min."""
    errors = []
    for K in sizes:
        profile = RadialProfile.from_function(
            lambda r: 2.0 * np.arctan(r / lam), int(K), "flat_ball", 1.0
        )
        window = (profile.grid >= rho_min) & (np.arange(profile.grid.size) < profile.K)
        errors.append(tension(profile, n).sup_norm(window))
    return RefinementSeries(tuple(int(k) for k in sizes), np.asarray(errors))


def comparison_laplacian_series(
    profile: RadialProfile,
    n: int,
    j: int,
    t: float = 0.5,
    nodes: tuple[int, ...] | list[int] = (65, 129, 257, 513),
) -> RefinementSeries:
    """sup дискретного радиального n-лапласиана сравнительного отображения по сгущениям."""
    errors = []
    for count in nodes:
        comp = radial_comparison_map(profile, j, t, int(count))
        errors.append(float(np.max(np.abs(radial_n_laplacian(comp, n)[1:-1]))))
    return RefinementSeries(tuple(int(c) for c in nodes), np.asarray(errors))


@dataclass(frozen=True)
class FamilySpread:
    """Отношения lhs/rhs на семействе профилей и их разброс max/min."""

    labels: tuple[str, ...]
    ratios: FloatArray
    in_regime: tuple[bool, ...] = ()

    @property
    def spread(self) -> float:
        r = self.ratios[np.isfinite(self.ratios) & (self.ratios > 0.0)]
        if r.size < self.ratios.size or not r.size:
            return math.inf
        return float(np.max(r) / np.min(r))


def pohozaev_family_spread(
    n: int,
    K: int,
    r: float = 0.5,
    lams: tuple[float, ...] = (0.1, 0.178, 0.316, 0.562, 1.0),
    bends: tuple[float, ...] = (0.0, 0.02),
) -> FamilySpread:
    """
    Отношение lhs/rhs неравенства Похожаева на семействе h = 2 arctan(ρ/λ) + β ρ².
    При β = 0 натяжение нулевое и отношение равно (n/(n−1))^{n/2}.
    """
    labels, ratios = [], []
    for lam in lams:
        for bend in bends:
            profile = RadialProfile.from_function(
                lambda x, lam=lam, bend=bend: 2.0 * np.arctan(x / lam) + bend * x**2,
                K,
                "flat_ball",
                1.0,
            )
            labels.append(f"lam={lam:g},beta={bend:g}")
            ratios.append(pohozaev_balance(profile, n, r).ratio)
    return FamilySpread(tuple(labels), np.asarray(ratios))


def oscillation_family_spread(
    n: int,
    K: int,
    lams: tuple[float, ...] = (0.5, 1.0),
    fractions: tuple[float, ...] = (0.02, 0.03, 0.045, 0.067, 0.1),
    eps_osc: float = 0.1,
) -> FamilySpread:
    """Отношение lhs/rhs оценки осцилляции для пузырей масштаба λ на шарах радиуса r = s·λ."""
    labels, ratios, regime = [], [], []
    for lam in lams:
        profile = RadialProfile.from_function(
            lambda x, lam=lam: 2.0 * np.arctan(x / lam), K, "flat_ball", 1.0
        )
        for frac in fractions:
            check = oscillation_bound_check(profile, n, frac * lam, eps_osc)
            labels.append(f"lam={lam:g},s={frac:g}")
            ratios.append(check.ratio)
            regime.append(check.in_regime)
    return FamilySpread(tuple(labels), np.asarray(ratios), tuple(regime))
