# SPDX-License-Identifier: GPL-3.0-only
"""
Корротационная редукция потока n-гармонических отображений S^n → S^n (или B^n → S^n).

Профиль h(ρ) эволюционирует по ∂_t h = T(h), где T = −∇E / M — отрицательный градиент
дискретной редуцированной энергии в метрике взвешенного L² (сосредоточенные массы M).
Схемы: явный Эйлер с параболическим условием CFL и линейно-неявная схема с замороженным
коэффициентом диффузии.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Iterator, Mapping

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import solve_banded
from scipy.optimize import minimize_scalar
from scipy.stats import linregress
from typing_extensions import Self

from src.core.errors import ConfigError, DomainError, StepRejected
from src.core.fields import (
    DOMAIN_KINDS,
    FloatArray,
    RadialProfile,
    _cell_samples,
    _reduced_q,
    lumped_mass,
    profile_gradient_sq,
    profile_slope,
    reduced_cell_energies,
    reduced_energy_gradient,
)
from src.core.manifold import sphere_area, sphere_second_fundamental_term

logger = logging.getLogger(__name__)

SCHEMES = ("explicit", "frozen")
FAMILIES = ("identity", "over_the_pole", "small", "bubble", "boundary_wrap")
STATUSES = ("running", "converged", "blowup", "max_time", "aborted")
DETECTION_WINDOW = 5
REFINE_WINDOW = 4.0


@dataclass(frozen=True)
class FlowConfig:
    n: int = 3
    domain_kind: str = "sphere_polar"
    K: int = 1024
    radius: float = 1.0
    dt_init: float = 1e-5
    dt_min: float = 1e-14
    eps_reg: float = 1e-8
    cfl_safety: float = 0.1
    blowup_grad_threshold: float = 1e4
    blowup_scale_min: float = 1e-2
    snapshot_stride: int = 200
    snapshot_growth: float = 1.25
    max_time: float = 1.0
    max_steps: int = 1_000_000
    tol_stationary: float = 1e-6
    tol_dissipation: float = 1e-2
    energy_floor: float = 1e-6
    grow_every: int = 50
    grow_factor: float = 1.1
    scheme: str = "explicit"
    refine_cells: int = 8
    max_refinements: int = 40

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.domain_kind not in DOMAIN_KINDS:
            raise ConfigError(f"unknown domain kind {self.domain_kind!r}")
        if self.K < 8:
            raise ConfigError(f"grid size K must be >= 8, got {self.K}")
        if not 0.0 < self.dt_min < self.dt_init:
            raise ConfigError("time steps must satisfy 0 < dt_min < dt_init")
        if self.eps_reg < 0.0:
            raise ConfigError("eps_reg must be non-negative")
        if not 0.0 < self.cfl_safety < 1.0:
            raise ConfigError("cfl_safety must lie in (0, 1)")
        positive = (
            "radius",
            "blowup_grad_threshold",
            "blowup_scale_min",
            "max_time",
            "tol_stationary",
            "tol_dissipation",
        )
        for name in positive:
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        if self.snapshot_stride < 1 or self.max_steps < 1 or self.grow_every < 1:
            raise ConfigError("stride, step budget and growth period must be >= 1")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.refine_cells < 0 or self.max_refinements < 0:
            raise ConfigError("refinement settings must be non-negative")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> Self:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f"unknown flow settings: {', '.join(unknown)}")
        return cls(**dict(mapping))

    def with_overrides(self, **changes: Any) -> Self:
        return replace(self, **changes)

    @property
    def domain_radius(self) -> float:
        return math.pi if self.domain_kind == "sphere_polar" else self.radius


@dataclass(frozen=True)
class Snapshot:
    time: float
    profile: RadialProfile
    velocity: FloatArray
    energy: float
    dissipation: float
    step: int
    dt: float


@dataclass(frozen=True)
class BlowupEvent:
    """Событие раздувания; масштаб концентрации r_i = 1/max|h′|."""

    time: float
    location: float
    scale: float
    profile: RadialProfile
    pole: str
    exponent: float
    times: tuple[float, ...]
    scales: tuple[float, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "t_max": self.time,
            "location": self.location,
            "scale": self.scale,
            "pole": self.pole,
            "exponent": self.exponent,
            "times": list(self.times),
            "scales": list(self.scales),
        }


@dataclass
class FlowTrajectory:
    config: FlowConfig
    snapshots: list[Snapshot] = field(default_factory=list)
    status: str = "running"
    reason: str = ""
    steps: int = 0
    rejected: int = 0
    refinements: int = 0
    event: BlowupEvent | None = None

    def record(self, snap: Snapshot) -> None:
        if self.snapshots and snap.time <= self.snapshots[-1].time:
            raise DomainError("snapshot times must be strictly increasing")
        self.snapshots.append(snap)

    @property
    def times(self) -> FloatArray:
        return np.array([s.time for s in self.snapshots])

    @property
    def energies(self) -> FloatArray:
        return np.array([s.energy for s in self.snapshots])

    @property
    def dissipation(self) -> FloatArray:
        return np.array([s.dissipation for s in self.snapshots])

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]

    def snapshot_rows(self) -> Iterator[tuple[float, float, float]]:
        """Строки (t, ρ, h) для потоковой записи в CSV."""
        for snap in self.snapshots:
            for rho, h in zip(snap.profile.grid, snap.profile.values):
                yield snap.time, float(rho), float(h)

    def summary(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "reason": self.reason,
            "steps": self.steps,
            "rejected": self.rejected,
            "refinements": self.refinements,
            "snapshots": len(self.snapshots),
            "final_time": self.final.time if self.snapshots else 0.0,
            "initial_energy": self.snapshots[0].energy if self.snapshots else None,
            "final_energy": self.final.energy if self.snapshots else None,
            "event": self.event.to_dict() if self.event else None,
        }


@dataclass(frozen=True)
class StepResult:
    profile: RadialProfile
    velocity: FloatArray
    dt: float
    energy: float
    dissipation: float


def reduced_energy(profile: RadialProfile, n: int, eps_reg: float = 0.0) -> float:
    """(|S^{n-1}|/n) ∫ (h′² + (n−1) sin²h / w²)^{n/2} w^{n−1} dρ."""
    return float(np.sum(reduced_cell_energies(profile, n, eps_reg)))


def reduced_tension(profile: RadialProfile, n: int, eps_reg: float = 0.0) -> FloatArray:
    """T = −∇E_ε / M; нули в граничных узлах (условия Дирихле)."""
    grad = reduced_energy_gradient(profile, n, eps_reg)
    mass = lumped_mass(profile, n)
    out = np.zeros_like(grad)
    out[1:-1] = -grad[1:-1] / mass[1:-1]
    return out


def finite_difference_gradient(
    profile: RadialProfile, n: int, step: float | None = None, eps_reg: float = 0.0
) -> FloatArray:
    """
    Центральные разности энергии по узловым значениям.
    Узлы с шагом 3 возмущаются одновременно: их пары ячеек не пересекаются.
    Шаг по умолчанию 1e−4·Δρ_min^{3/2}: ошибка усечения растёт как step²/Δρ³.
    """
    if step is None:
        step = 1e-4 * float(np.min(profile.spacing)) ** 1.5
    grad = np.zeros(profile.grid.size)
    interior = np.arange(1, profile.K)
    for offset in range(3):
        nodes = interior[(interior - 1) % 3 == offset]
        if nodes.size == 0:
            continue
        cells = []
        for sign in (1.0, -1.0):
            values = profile.values.copy()
            values[nodes] += sign * step
            cells.append(reduced_cell_energies(profile.with_values(values), n, eps_reg))
        diff = cells[0] - cells[1]
        grad[nodes] = (diff[nodes - 1] + diff[nodes]) / (2.0 * step)
    return grad


def cfl_bound(profile: RadialProfile, config: FlowConfig) -> float:
    """dt ≤ cfl·Δρ² / max((n−1) f_ε^{(n−2)/2})."""
    n = config.n
    s = _cell_samples(profile)
    coef = (config.eps_reg**2 + _reduced_q(s, n)) ** (0.5 * (n - 2))
    peak = float((n - 1) * np.max(coef))
    if peak <= 0.0:
        return math.inf
    return float(config.cfl_safety * np.min(s.delta) ** 2 / peak)


def _frozen_increment(profile: RadialProfile, dt: float, config: FlowConfig) -> FloatArray:
    """(M/dt + K_frozen) δ = −∇E, K_frozen — жёсткость при коэффициенте со старого слоя."""
    n = config.n
    s = _cell_samples(profile)
    coef = (config.eps_reg**2 + _reduced_q(s, n)) ** (0.5 * (n - 2))
    stiff = (
        sphere_area(n - 1)
        * np.sum(s.wts * coef * s.w ** (n - 1), axis=1)
        / s.delta
    )
    mass = lumped_mass(profile, n)
    grad = reduced_energy_gradient(profile, n, config.eps_reg)
    diag = mass / dt
    diag[:-1] += stiff
    diag[1:] += stiff
    inner = slice(1, profile.K)
    size = profile.K - 1
    banded = np.zeros((3, size))
    banded[1] = diag[inner]
    banded[0, 1:] = -stiff[1:-1]
    banded[2, :-1] = -stiff[1:-1]
    delta = np.zeros(profile.grid.size)
    delta[inner] = solve_banded((1, 1), banded, -grad[inner])
    return delta


def step(
    profile: RadialProfile,
    dt: float,
    config: FlowConfig,
    energy: float | None = None,
    reference_energy: float | None = None,
) -> StepResult:
    """
    Один шаг по времени. Отклоняется при нарушении CFL (явная схема) и при росте энергии
    больше 1e−8·(1 + E(0)). Граничные значения сохраняются побитово.
    """
    n = config.n
    if config.scheme == "explicit":
        bound = cfl_bound(profile, config)
        if dt > bound:
            raise StepRejected("CFL condition violated", bound)
        increment = dt * reduced_tension(profile, n, config.eps_reg)
    else:
        increment = _frozen_increment(profile, dt, config)
    new_values = profile.values + increment
    if not np.all(np.isfinite(new_values)):
        raise DomainError("non-finite values produced by the time step")
    new = profile.with_values(new_values)
    velocity = (new.values - profile.values) / dt
    e_old = reduced_energy(profile, n) if energy is None else energy
    e_ref = e_old if reference_energy is None else reference_energy
    e_new = reduced_energy(new, n)
    if e_new > e_old + 1e-8 * (1.0 + e_ref):
        raise StepRejected("energy increased across the step", 0.5 * dt)
    dissipation = dt * float(np.sum(lumped_mass(profile, n) * velocity**2))
    return StepResult(new, velocity, dt, e_new, dissipation)


def effective_threshold(profile: RadialProfile, config: FlowConfig) -> float:
    """
    Порог наклона для кандидата в раздувание: min(blowup_grad_threshold, 0.5·π/Δρ_min).
    Сетка с шагом Δρ не представляет наклонов больше 0.5·π/Δρ. При включённом сгущении
    (refine_cells > 0) Δρ_min уменьшается вместе с масштабом концентрации, и действует
    blowup_grad_threshold; без сгущения порог ограничен разрешением исходной сетки.
    """
    return min(config.blowup_grad_threshold, 0.5 * math.pi / float(np.min(profile.spacing)))


def refine_near_peak(
    profile: RadialProfile, velocity: FloatArray, config: FlowConfig, passes: int = 8
) -> tuple[RadialProfile, FloatArray, int]:
    """
    Сгущение сетки у максимума |h′|: ячейки в окне ρ* ± 4·r, r = 1/max|h′|, делятся пополам,
    пока не станут короче r/refine_cells. Возвращает профиль, скорость и число проходов.
    """
    done = 0
    if config.refine_cells == 0:
        return profile, velocity, done
    for _ in range(passes):
        slope = np.abs(profile_slope(profile))
        k = int(np.argmax(slope))
        if slope[k] <= 0.0:
            break
        scale = 1.0 / float(slope[k])
        center = float(profile.grid[k])
        left, right = profile.grid[:-1], profile.grid[1:]
        near = (right > center - REFINE_WINDOW * scale) & (left < center + REFINE_WINDOW * scale)
        coarse = near & (profile.spacing > scale / config.refine_cells)
        if not np.any(coarse):
            break
        cells = np.flatnonzero(coarse)
        velocity = np.insert(velocity, cells + 1, 0.5 * (velocity[cells] + velocity[cells + 1]))
        profile = profile.refined(coarse)
        done += 1
    return profile, velocity, done


def run(initial: RadialProfile, config: FlowConfig) -> FlowTrajectory:
    """
    Адаптивный шаг: деление пополам при отказе, рост ×1.1 после каждых 50 принятых шагов.
    После каждого принятого шага сетка сгущается у точки концентрации (refine_near_peak).
    """
    n = config.n
    traj = FlowTrajectory(config=config)
    profile = initial
    energy = reduced_energy(profile, n)
    e0 = energy
    traj.record(Snapshot(0.0, profile, np.zeros(profile.grid.size), energy, 0.0, 0, 0.0))
    threshold = effective_threshold(profile, config)
    t, dt, dissipated = 0.0, config.dt_init, 0.0
    since_growth = 0
    last_recorded_slope = float(np.max(np.abs(profile_slope(profile))))
    velocity = np.zeros(profile.grid.size)
    candidate = ""
    logger.info(
        "flow start: n=%d K=%d domain=%s scheme=%s E0=%.6g",
        n, profile.K, profile.domain_kind, config.scheme, e0,
    )

    while True:
        if t >= config.max_time:
            traj.status = "max_time"
            break
        if traj.steps >= config.max_steps:
            traj.status, traj.reason = "max_time", "step budget exhausted"
            break
        trial = min(dt, config.max_time - t)
        try:
            result = step(profile, trial, config, energy=energy, reference_energy=e0)
        except StepRejected as exc:
            traj.rejected += 1
            dt = 0.5 * trial
            logger.debug("step rejected at t=%.6g (%s); dt -> %.3e", t, exc, dt)
            if dt < config.dt_min:
                candidate = "time step collapsed below dt_min"
                break
            continue
        except DomainError as exc:
            traj.status, traj.reason = "aborted", str(exc)
            logger.warning("flow aborted at t=%.6g: %s", t, exc)
            break

        t += trial
        profile, energy, velocity = result.profile, result.energy, result.velocity
        dissipated += result.dissipation
        traj.steps += 1
        since_growth += 1
        if since_growth >= config.grow_every:
            dt *= config.grow_factor
            since_growth = 0

        budget = min(8, config.max_refinements - traj.refinements)
        finer, velocity, passes = refine_near_peak(profile, velocity, config, passes=budget)
        if passes:
            traj.refinements += passes
            profile = finer
            energy = reduced_energy(profile, n)
            threshold = effective_threshold(profile, config)
            logger.debug(
                "grid refined at t=%.6g: %d passes, K=%d, threshold %.3e",
                t, passes, profile.K, threshold,
            )

        slope = float(np.max(np.abs(profile_slope(profile))))
        steep = slope > config.snapshot_growth * last_recorded_slope
        if traj.steps % config.snapshot_stride == 0 or steep:
            traj.record(Snapshot(t, profile, velocity, energy, dissipated, traj.steps, trial))
            last_recorded_slope = slope
        if slope > threshold:
            candidate = f"max |h'| = {slope:.3e} exceeded {threshold:.3e}"
            break
        if float(np.max(np.abs(velocity))) < config.tol_stationary:
            traj.status = "converged"
            break

    if traj.final.step != traj.steps:
        traj.record(Snapshot(t, profile, velocity, energy, dissipated, traj.steps, dt))
    if candidate:
        event = detect_blowup(traj, config)
        if event is not None and energy > config.energy_floor:
            traj.status, traj.event, traj.reason = "blowup", event, candidate
        else:
            traj.status = "aborted"
            traj.reason = f"blowup not confirmed: {candidate}"
    logger.info(
        "flow end: status=%s steps=%d rejected=%d refinements=%d K=%d t=%.6g E=%.6g %s",
        traj.status, traj.steps, traj.rejected, traj.refinements, profile.K, t, energy,
        traj.reason,
    )
    return traj


def detect_blowup(traj: FlowTrajectory, config: FlowConfig | None = None) -> BlowupEvent | None:
    """Событие, если r_i = 1/max|h′| строго убывал на последних 5 снимках и стал меньше r_min."""
    cfg = traj.config if config is None else config
    snaps = traj.snapshots
    if len(snaps) < DETECTION_WINDOW:
        return None
    times, scales, where = [], [], []
    for snap in snaps:
        slope = np.abs(profile_slope(snap.profile))
        k = int(np.argmax(slope))
        times.append(snap.time)
        scales.append(1.0 / slope[k] if slope[k] > 0.0 else math.inf)
        where.append(k)
    tail = np.asarray(scales[-DETECTION_WINDOW:])
    if not np.all(np.diff(tail) < 0.0) or tail[-1] >= cfg.blowup_scale_min:
        return None
    last = snaps[-1].profile
    k = where[-1]
    t_est, alpha = estimate_blowup_time(times, scales)
    south = last.domain_kind == "sphere_polar" and last.grid[k] > 0.5 * math.pi
    pole = "south" if south else "north"
    return BlowupEvent(
        time=t_est,
        location=float(last.grid[k]),
        scale=float(tail[-1]),
        profile=last,
        pole=pole,
        exponent=alpha,
        times=tuple(times),
        scales=tuple(float(s) for s in scales),
    )


def estimate_blowup_time(
    times: ArrayLike, scales: ArrayLike, points: int = 8
) -> tuple[float, float]:
    """
    Подгонка r ≈ C (T − t)^α по последним точкам: сканирование по T
    (minimize_scalar) с линейной регрессией в логарифмах. Возвращает (T, α).
    """
    t = np.asarray(times, dtype=float)
    r = np.asarray(scales, dtype=float)
    ok = np.isfinite(r) & (r > 0.0)
    t, r = t[ok][-points:], r[ok][-points:]
    if t.size < 3 or np.ptp(t) <= 0.0:
        return float(t[-1]) if t.size else 0.0, math.nan
    span = float(t[-1] - t[0])
    log_r = np.log(r)

    def misfit(gap: float) -> float:
        fit = linregress(np.log(t[-1] + gap - t), log_r)
        resid = log_r - (fit.intercept + fit.slope * np.log(t[-1] + gap - t))
        return float(np.sum(resid**2))

    best = minimize_scalar(
        lambda lg: misfit(math.exp(lg)),
        bounds=(math.log(span * 1e-6), math.log(span * 10.0)),
        method="bounded",
    )
    gap = math.exp(float(best.x))
    fit = linregress(np.log(t[-1] + gap - t), log_r)
    return float(t[-1] + gap), float(fit.slope)


def initial_profile(family: str, config: FlowConfig, **params: float) -> RadialProfile:
    """
    Семейства начальных данных:
    identity h = ρ; small h = A sin ρ;
    over_the_pole: на сфере h = kρ + A sin ρ, в плоском шаре h = 2 arctan(ρ/λ) + A·ρ/R
    (граничное значение больше π при A = 1.5, λ = 1/4: данные Чанга–Дина–Е, раздуваются);
    bubble 2 arctan(ρ/λ) (на сфере — конформное растяжение 2 arctan(tan(ρ/2)/λ));
    boundary_wrap h = b·ρ/R в плоском шаре.
    """
    kind, R = config.domain_kind, config.domain_radius
    if family == "identity":
        if kind != "sphere_polar":
            raise DomainError("identity family lives on sphere_polar")
        func = lambda r: r  # noqa: E731
    elif family == "over_the_pole":
        amp = params.get("A", 1.5)
        if kind == "sphere_polar":
            k = int(params.get("k", 1))
            func = lambda r: k * r + amp * np.sin(r)  # noqa: E731
        else:
            lam = params.get("lam", 0.25)
            if lam <= 0.0:
                raise DomainError("over-the-pole core scale must be positive")
            func = lambda r: 2.0 * np.arctan(r / lam) + amp * r / R  # noqa: E731
    elif family == "small":
        amp = params.get("A", 0.1)
        func = lambda r: amp * np.sin(r * (math.pi / R))  # noqa: E731
    elif family == "bubble":
        lam = params.get("lam", 1.0)
        if lam <= 0.0:
            raise DomainError("bubble scale must be positive")
        if kind == "sphere_polar":
            func = lambda r: 2.0 * np.arctan(_half_tan(r) / lam)  # noqa: E731
        else:
            func = lambda r: 2.0 * np.arctan(r / lam)  # noqa: E731
    elif family == "boundary_wrap":
        if kind != "flat_ball":
            raise DomainError("boundary_wrap family lives on flat_ball")
        b = params.get("b", 1.5 * math.pi)
        func = lambda r: b * r / R  # noqa: E731
    else:
        raise DomainError(f"unknown initial family {family!r}; expected one of {FAMILIES}")
    return RadialProfile.from_function(func, config.K, kind, R)


def _half_tan(r: FloatArray) -> FloatArray:
    out = np.full_like(r, np.inf)
    inner = r < math.pi
    out[inner] = np.tan(0.5 * r[inner])
    return out


def eps_reg_sensitivity(initial: RadialProfile, config: FlowConfig) -> dict[str, Any]:
    """Повтор с eps_reg/10: относительное изменение финальной энергии и масштаба r_i (< 1%)."""
    base = run(initial, config)
    fine = run(initial, config.with_overrides(eps_reg=config.eps_reg / 10.0))

    def terminal(traj: FlowTrajectory) -> tuple[float, float]:
        slope = float(np.max(np.abs(profile_slope(traj.final.profile))))
        return traj.final.energy, (1.0 / slope if slope > 0.0 else math.inf)

    (e1, r1), (e2, r2) = terminal(base), terminal(fine)
    energy_change = abs(e1 - e2) / max(abs(e1), 1e-300)
    if math.isinf(r1) and math.isinf(r2):
        scale_change = 0.0
    else:
        scale_change = abs(r1 - r2) / max(abs(r1), 1e-300)
    return {
        "eps_reg": config.eps_reg,
        "status": [base.status, fine.status],
        "energy_change": energy_change,
        "scale_change": scale_change,
        "passed": energy_change < 0.01 and scale_change < 0.01,
    }


def ambient_flow_rhs(
    profile: RadialProfile, n: int, eps_reg: float = 0.0
) -> tuple[FloatArray, FloatArray]:
    """
    Правая часть потока во вложении R^{n+1} на луче Θ = e_1:
    div(|∇u|^{n−2}∇u) = T·∂_h u − |∇u|^n u плюс член второй фундаментальной формы.
    """
    h = profile.values
    u = np.zeros((h.size, n + 1))
    u[:, 0] = np.sin(h)
    u[:, -1] = np.cos(h)
    nu = np.zeros_like(u)
    nu[:, 0] = np.cos(h)
    nu[:, -1] = -np.sin(h)
    f = profile_gradient_sq(profile, n)
    divergence = reduced_tension(profile, n, eps_reg)[:, None] * nu - (f ** (0.5 * n))[:, None] * u
    return u, divergence + sphere_second_fundamental_term(u, f, n)
