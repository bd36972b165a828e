# SPDX-License-Identifier: GPL-3.0-only
"""
Явное начальное отображение u₀: S^n → T^m, склеенное из двух «пузырьковых» карт h₀, h_l
и геодезического отрезка γ в накрытии, растянутого срезкой φ по кольцу B_σ \\ B_{σ²}.

Сфера параметризуется цилиндром t = log|Φ(x)|, x_{n+1} = tanh t, (x_1..x_n) = sech t·Θ.
n-энергия конформно инвариантна, поэтому сетка несёт метрику dt² + g_{S^{n−1}}.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields
from typing import Any, Mapping

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import beta
from typing_extensions import Self

from src.core.errors import DomainError, SpecError
from src.core.fields import FloatArray, GridMap, gradient_sq
from src.core.manifold import TorusTarget, sphere_area

logger = logging.getLogger(__name__)

CUTOFF_LOW = 1.0 / 8.0
CUTOFF_HIGH = 7.0 / 8.0
POLES = ("north", "south")


@dataclass(frozen=True)
class CoverModel:
    """Плоский тор T^m, накрытие R^m, шары U_l радиуса r_U вокруг p_l = p₀ + l·e₁."""

    m: int = 3
    r_U: float = 0.1

    def __post_init__(self) -> None:
        if self.m < 3:
            raise SpecError(f"cover dimension m must be >= 3, got {self.m}")
        if not 0.0 < self.r_U <= 0.25:
            raise SpecError("marked ball radius must lie in (0, 1/4] to keep balls disjoint")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> Self:
        return cls(**_pick(cls, mapping))

    @property
    def target(self) -> TorusTarget:
        return TorusTarget(self.m)

    @property
    def p0(self) -> FloatArray:
        return np.full(self.m, 0.5)

    def center(self, l: int) -> FloatArray:
        out = self.p0.copy()
        out[0] += l
        return out


@dataclass(frozen=True)
class InitialMapSpec:
    n: int = 2
    sigma: float = 1e-2
    l: int = 1
    amplitude: float = 1.0
    angular: int = 16
    annulus_nodes: int = 256
    bump_nodes: int = 96
    t_max: float = 7.0
    far_depth: float = 1e-3
    max_step: float = 0.1

    def __post_init__(self) -> None:
        if self.n < 2:
            raise SpecError(f"domain dimension n must be >= 2, got {self.n}")
        if not 0.0 < self.sigma < 0.25:
            raise SpecError(f"gluing scale sigma must lie in (0, 1/4), got {self.sigma}")
        if self.l < 0:
            raise SpecError("lattice separation l must be non-negative")
        if not 0.0 <= self.amplitude <= 1.0:
            raise SpecError("bump amplitude must lie in [0, 1]")
        if not 0.0 < self.far_depth < 1.0:
            raise SpecError("far_depth must lie in (0, 1)")
        if self.angular < 4 or self.annulus_nodes < 16 or self.bump_nodes < 16:
            raise SpecError("grid resolution too coarse")
        if self.t_max <= 1.0 or self.max_step <= 0.0:
            raise SpecError("t_max must exceed 1 and max_step must be positive")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> Self:
        return cls(**_pick(cls, mapping))

    @property
    def log_sigma(self) -> float:
        return math.log(self.sigma)

    @property
    def t_min(self) -> float:
        return math.log(0.5 * self.far_depth) + 2.0 * self.log_sigma


def _pick(cls: type, mapping: Mapping[str, Any]) -> dict[str, Any]:
    known = {f.name for f in fields(cls)}
    return {k: v for k, v in mapping.items() if k in known}


# --- проекции и срезка ---


def stereographic(points: ArrayLike, pole: str = "north") -> FloatArray:
    """
    Φ(x) = x'/(1 − x_{n+1}) (проекция из северного полюса) или Ψ(x) = x'/(1 + x_{n+1})
    (из южного).
    """
    x = np.asarray(points, dtype=float)
    if pole not in POLES:
        raise DomainError(f"unknown pole {pole!r}")
    last = x[..., -1]
    denom = 1.0 - last if pole == "north" else 1.0 + last
    if np.any(np.abs(denom) < 1e-14):
        raise DomainError("cannot project the projecting pole")
    return np.asarray(x[..., :-1] / denom[..., None], dtype=float)


def inverse_stereographic(points: ArrayLike, pole: str = "north") -> FloatArray:
    y = np.asarray(points, dtype=float)
    if pole not in POLES:
        raise DomainError(f"unknown pole {pole!r}")
    sq = np.sum(y * y, axis=-1, keepdims=True)
    last = (sq - 1.0) if pole == "north" else (1.0 - sq)
    return np.asarray(np.concatenate([2.0 * y, last], axis=-1) / (sq + 1.0), dtype=float)


def _phi(x: FloatArray) -> FloatArray:
    y = np.clip((x - CUTOFF_LOW) / (CUTOFF_HIGH - CUTOFF_LOW), 0.0, 1.0)
    return np.asarray(y * y * (3.0 - 2.0 * y), dtype=float)


def cutoff_phi(x: ArrayLike) -> tuple[FloatArray, bool]:
    """
    Кубический smoothstep на [1/8, 7/8]: φ = 0 до 1/8, φ = 1 после 7/8, φ′ ≥ 0, max φ′ = 2.
    Значения вне [0, 1] приводятся к отрезку; второй элемент — флаг такого приведения.
    """
    arr = np.asarray(x, dtype=float)
    clamped = bool(np.any((arr < 0.0) | (arr > 1.0)))
    if clamped:
        logger.warning("cutoff argument outside [0, 1] clamped")
    return _phi(np.clip(arr, 0.0, 1.0)), clamped


def cutoff_phi_derivative(x: ArrayLike) -> FloatArray:
    width = CUTOFF_HIGH - CUTOFF_LOW
    y = np.clip((np.asarray(x, dtype=float) - CUTOFF_LOW) / width, 0.0, 1.0)
    return np.asarray(6.0 * y * (1.0 - y) / width, dtype=float)


def annulus_constant(n: int) -> float:
    """C_φ = (|S^{n−1}|/n)∫₀¹ φ′ⁿ: энергия кольца равна C_φ·Lⁿ/(−log σ)^{n−1}."""
    width = CUTOFF_HIGH - CUTOFF_LOW
    integral = width ** (1 - n) * 6.0**n * beta(n + 1, n + 1)
    return float(sphere_area(n - 1) / n * integral)


# --- построение ---


def bump_values(
    t: FloatArray, theta: FloatArray, q: FloatArray, radius: float, m: int
) -> FloatArray:
    """h(t, Θ) = q + r·χ(tanh t)·sech t·ι(Θ); южная полусфера (t < 0) переходит в q."""
    t = np.clip(t, -50.0, 50.0)
    x_last = np.tanh(t)
    chi = np.where(x_last > 0.0, _phi(np.maximum(x_last, 0.0)), 0.0)
    amp = radius * chi / np.cosh(t)
    out = np.broadcast_to(q, t.shape + (m,)).copy()
    k = min(theta.shape[-1], m)
    out[..., :k] += amp[..., None] * theta[..., :k]
    return out


def _segment(lo: float, hi: float, step: float) -> FloatArray:
    count = max(int(math.ceil((hi - lo) / step)), 1)
    return np.linspace(lo, hi, count + 1)


def cylinder_axis(spec: InitialMapSpec) -> FloatArray:
    """
    Кусочно-равномерная ось t с узлами ровно в 2 log σ и log σ:
    дальняя копия, кольцо, постоянный участок [log σ, 0] и ближняя копия [0, t_max].
    """
    ls = spec.log_sigma
    bump_step = spec.t_max / spec.bump_nodes
    annulus_len = -ls
    continuation = spec.max_step * annulus_len / (2.0 * max(spec.l, 1))
    annulus_step = min(annulus_len / spec.annulus_nodes, continuation)
    inner = _segment(spec.t_min, 2.0 * ls, bump_step)
    if inner.size < 17:
        inner = np.linspace(spec.t_min, 2.0 * ls, 17)
    annulus = _segment(2.0 * ls, ls, annulus_step)
    flat = _segment(ls, 0.0, max(annulus_step, bump_step))
    near = _segment(0.0, spec.t_max, bump_step)
    axis = np.concatenate([inner, annulus[1:], flat[1:], near[1:]])
    if np.any(np.diff(axis) <= 0.0):
        raise SpecError("cylinder regions do not nest; sigma too close to 1")
    return axis


def initial_cover_values(
    t: FloatArray, theta: FloatArray, spec: InitialMapSpec, cover: CoverModel
) -> FloatArray:
    """Значения ũ₀ в накрытии R^m."""
    if spec.n >= cover.m:
        raise SpecError(f"construction needs m > n, got n={spec.n}, m={cover.m}")
    ls = spec.log_sigma
    q0, ql = cover.center(0), cover.center(spec.l)
    radius = cover.r_U * spec.amplitude
    near = bump_values(t, theta, q0, radius, cover.m)
    far = bump_values(math.log(0.5) + 2.0 * ls - t, theta, ql, radius, cover.m)
    s = (ls - t) / (-ls)
    link = q0 + _phi(np.clip(s, 0.0, 1.0))[..., None] * (ql - q0)
    out = np.where((t >= ls)[..., None], near, link)
    return np.asarray(np.where((t <= 2.0 * ls)[..., None], far, out), dtype=float)


def build_initial_map(spec: InitialMapSpec, cover: CoverModel) -> GridMap:
    """
    u₀ = h₀ на S^n \\ B_σ(S_p), γ∘φ на B_σ \\ B_{σ²}, h_l∘Φ⁻¹((σ²/2)Ψ(x)) на B_{σ²}.
    Возвращает GridMap в T^m с сохранённым поднятием в R^m.
    """
    t = cylinder_axis(spec)
    grid_map = GridMap.on_cylinder(
        t,
        spec.n,
        spec.angular,
        lambda tt, theta: initial_cover_values(tt, theta, spec, cover),
        cover.target,
    )
    grid_map.meta.update({"log_sigma": spec.log_sigma, "l": spec.l, "n": spec.n})
    logger.info(
        "initial map built: n=%d m=%d sigma=%.3e l=%d nodes=%d",
        spec.n, cover.m, spec.sigma, spec.l, int(np.prod(grid_map.shape)),
    )
    return grid_map


# --- энергии ---


def _window_weights(axis: FloatArray, lo: float, hi: float) -> FloatArray:
    """Трапециевидные веса по оси t, ограниченные отрезком [lo, hi] (аддитивны по окнам)."""
    gaps = np.diff(axis)
    inside = (axis[:-1] >= lo - 1e-12) & (axis[1:] <= hi + 1e-12)
    out = np.zeros_like(axis)
    out[:-1] += np.where(inside, 0.5 * gaps, 0.0)
    out[1:] += np.where(inside, 0.5 * gaps, 0.0)
    return out


def window_energy(grid_map: GridMap, n: int, lo: float, hi: float) -> float:
    """E_n(u₀) на области lo ≤ t ≤ hi цилиндрической сетки."""
    density = gradient_sq(grid_map) ** (0.5 * n) / n
    t = grid_map.axes[0]
    ratio = _window_weights(t, lo, hi) / _window_weights(t, t[0], t[-1])
    weights = grid_map.quadrature_weights() * ratio.reshape((-1,) + (1,) * (grid_map.dim - 1))
    return float(np.sum(density * weights))


def region_energies(grid_map: GridMap, spec: InitialMapSpec) -> dict[str, float]:
    ls = spec.log_sigma
    t = grid_map.axes[0]
    parts = {
        "far": window_energy(grid_map, spec.n, t[0], 2.0 * ls),
        "annulus": window_energy(grid_map, spec.n, 2.0 * ls, ls),
        "near": window_energy(grid_map, spec.n, ls, t[-1]),
    }
    parts["total"] = parts["far"] + parts["annulus"] + parts["near"]
    return parts


def annulus_energy_estimate(
    spec: InitialMapSpec, cover: CoverModel, grid_map: GridMap | None = None
) -> dict[str, float]:
    """Квадратура ∫_{B_σ \\ B_{σ²}}|∇u₀|ⁿ/n и безконстантная формула Lⁿ/(−log σ)^{n−1}."""
    built = build_initial_map(spec, cover) if grid_map is None else grid_map
    ls = spec.log_sigma
    computed = window_energy(built, spec.n, 2.0 * ls, ls)
    formula = float(spec.l) ** spec.n / (-ls) ** (spec.n - 1)
    return {
        "sigma": spec.sigma,
        "L": float(spec.l),
        "computed": computed,
        "formula": formula,
        "predicted": annulus_constant(spec.n) * formula,
        "ratio": computed / formula if formula > 0.0 else 0.0,
    }


def bump_energy(spec: InitialMapSpec, cover: CoverModel) -> float:
    """Энергия модельной карты h на собственной сетке (эталон конформной инвариантности)."""
    t = _segment(-1.0, spec.t_max, spec.t_max / spec.bump_nodes)
    bump = GridMap.on_cylinder(
        t,
        spec.n,
        spec.angular,
        lambda tt, theta: bump_values(tt, theta, cover.p0, cover.r_U * spec.amplitude, cover.m),
        cover.target,
    )
    return window_energy(bump, spec.n, t[0], t[-1])


def sigma_threshold(spec: InitialMapSpec) -> float:
    """σ*, при котором C_φ Lⁿ/(−log σ)^{n−1} = 1."""
    if spec.l == 0:
        return 0.25
    log_star = -((annulus_constant(spec.n) * float(spec.l) ** spec.n) ** (1.0 / (spec.n - 1)))
    return float(min(math.exp(log_star), 0.25))


def discover_sigma_threshold(
    spec: InitialMapSpec, cover: CoverModel, margin: float = 1.1
) -> dict[str, float]:
    """
    Наибольшее σ с энергией кольца < 1 по формуле; проверка на построенной карте
    при log σ_v = margin·log σ*.
    """
    star = sigma_threshold(spec)
    verify = math.exp(margin * math.log(star)) if star < 0.25 else 0.5 * star
    probe = InitialMapSpec(**{**_as_dict(spec), "sigma": verify})
    estimate = annulus_energy_estimate(probe, cover)
    return {
        "sigma_threshold": star,
        "verified_sigma": verify,
        "annulus_energy": estimate["computed"],
        "predicted": estimate["predicted"],
        "verified": bool(estimate["computed"] < 1.0),
    }


def _as_dict(spec: InitialMapSpec) -> dict[str, Any]:
    return {f.name: getattr(spec, f.name) for f in fields(spec)}


def total_energy_check(
    spec: InitialMapSpec, cover: CoverModel, grid_map: GridMap | None = None
) -> dict[str, Any]:
    """
    E_n(u₀) < E_n(h_l) + E_n(h₀) + 1, энергии обеих копий и их совпадение
    (конформная инвариантность при растяжении σ²/2).
    """
    built = build_initial_map(spec, cover) if grid_map is None else grid_map
    parts = region_energies(built, spec)
    reference = bump_energy(spec, cover)
    bound = 2.0 * reference + 1.0
    near = parts["near"]
    defect = abs(parts["far"] - near) / near if near > 0.0 else abs(parts["far"])
    threshold = sigma_threshold(spec)
    return {
        "sigma": spec.sigma,
        "l": spec.l,
        "energy": parts["total"],
        "near": near,
        "far": parts["far"],
        "annulus": parts["annulus"],
        "bump_reference": reference,
        "bound": bound,
        "slack": bound - parts["total"],
        "holds": bool(parts["total"] < bound),
        "conformal_defect": defect,
        "sigma_threshold": threshold,
        "below_threshold": bool(spec.sigma <= threshold),
    }
