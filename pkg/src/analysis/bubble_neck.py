# SPDX-License-Identifier: GPL-3.0-only
"""
Постобработка траекторий с раздуванием: перемасштабирование, выделение пузырей,
баланс энергии (база + пузыри + шейка) и диагностика осцилляции в шейке.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping

import numpy as np
from numpy.typing import ArrayLike
from scipy.interpolate import PchipInterpolator
from scipy.optimize import least_squares
from typing_extensions import Self

from src.core.equivariant_flow import BlowupEvent, FlowTrajectory, Snapshot, reduced_tension
from src.core.errors import ConfigError, DomainError
from src.core.fields import (
    FloatArray,
    RadialProfile,
    profile_oscillation,
    profile_slope,
    restricted_energy,
)
from src.core.manifold import sphere_area

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BubbleConfig:
    delta: float = 2.0**-3
    R: float = 2.0**5
    fit_tol: float = 0.05
    fit_samples: int = 64
    max_bubbles: int = 3
    eps_neck: float = 0.5
    window_nodes: int = 2049

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("bubble delta must lie in (0, 1)")
        if self.R <= 1.0:
            raise ConfigError("bubble window factor R must exceed 1")
        if self.fit_tol <= 0.0 or self.eps_neck <= 0.0:
            raise ConfigError("fit_tol and eps_neck must be positive")
        if self.fit_samples < 8 or self.window_nodes < 16 or self.max_bubbles < 1:
            raise ConfigError("bubble sampling settings are too small")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> Self:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f"unknown bubble settings: {', '.join(unknown)}")
        return cls(**dict(mapping))


def canonical_bubble(rho: ArrayLike, lam: float, sign: float = 1.0) -> FloatArray:
    return np.asarray(sign * 2.0 * np.arctan(np.asarray(rho, dtype=float) / lam), dtype=float)


def canonical_bubble_energy(n: int) -> float:
    """n^{n/2−1}·Vol(S^n): энергия конформного пузыря степени 1."""
    return float(n ** (0.5 * n - 1.0) * sphere_area(n))


def reflect_to_north(profile: RadialProfile) -> RadialProfile:
    """Отражение относительно экватора: h̃(ρ) = b − h(π − ρ), южный полюс переходит в северный."""
    if profile.domain_kind != "sphere_polar":
        raise DomainError("only sphere_polar profiles have a south pole")
    grid = np.pi - profile.grid[::-1]
    grid[0], grid[-1] = 0.0, np.pi
    values = profile.boundary - profile.values[::-1]
    values[0] = 0.0
    return RadialProfile(grid, values, "sphere_polar")


def oriented(profile: RadialProfile, center: str) -> RadialProfile:
    if center == "north":
        return profile
    if center == "south":
        return reflect_to_north(profile)
    raise DomainError(f"unknown centre {center!r}; expected north or south")


@dataclass(frozen=True)
class Rescaled:
    profile: RadialProfile
    center: str
    scale: float
    truncated: bool


def rescale(
    profile: RadialProfile,
    center: str,
    scale: float,
    window: float | None = None,
    nodes: int | None = None,
) -> Rescaled:
    """ĥ(ξ) = h(center + scale·ξ) на новой равномерной сетке (интерполяция PCHIP)."""
    if scale <= 0.0:
        raise DomainError("rescaling factor must be positive")
    source = oriented(profile, center)
    reach = source.radius / scale
    width = reach if window is None else float(window)
    truncated = width > reach * (1.0 + 1e-12)
    if truncated:
        logger.warning("rescale window %.4g exceeds the domain; truncated to %.4g", width, reach)
        width = reach
    count = source.K + 1 if nodes is None else int(nodes)
    xi = np.linspace(0.0, width, count)
    values = PchipInterpolator(source.grid, source.values)(np.minimum(xi * scale, source.radius))
    values[0] = 0.0
    return Rescaled(RadialProfile(xi, values, "flat_ball"), center, scale, truncated)


@dataclass(frozen=True)
class Bubble:
    scale: float
    center: str
    lam: float
    sign: float
    fit_error: float
    identified: bool
    profile: RadialProfile

    def to_dict(self) -> dict[str, Any]:
        return {
            "scale": self.scale,
            "center": self.center,
            "lambda": self.lam,
            "sign": self.sign,
            "fit_error": self.fit_error,
            "identified": self.identified,
        }


@dataclass(frozen=True)
class BubbleDecomposition:
    base: RadialProfile
    bubbles: tuple[Bubble, ...]
    delta: float
    R: float
    neck_inner: float
    neck_outer: float
    ledger: dict[str, float]
    flags: tuple[str, ...] = ()
    n: int = 3
    center: str = "north"
    meta: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": "1.0",
            "n": self.n,
            "center": self.center,
            "delta": self.delta,
            "R": self.R,
            "neck": [self.neck_inner, self.neck_outer],
            "bubbles": [b.to_dict() for b in self.bubbles],
            "ledger": dict(self.ledger),
            "flags": list(self.flags),
        }


def fit_canonical_bubble(
    profile: RadialProfile, scale: float, R: float, samples: int = 64
) -> tuple[float, float, float]:
    """
    МНК по точкам, равномерным по log ρ в [scale/8, R·scale]: h ≈ s·2 arctan(ρ/λ), s = ±1.
    Возвращает (λ, s, sup-ошибка на окне).
    """
    top = min(R * scale, profile.radius)
    low = min(scale / 8.0, 0.5 * top)
    rho = np.geomspace(low, top, samples)
    target = PchipInterpolator(profile.grid, profile.values)(rho)
    best: tuple[float, float, float] | None = None
    for sign in (1.0, -1.0):
        fit = least_squares(
            lambda x: canonical_bubble(rho, math.exp(x[0]), sign) - target,
            x0=[math.log(2.0 * scale)],
        )
        lam = math.exp(float(fit.x[0]))
        error = float(np.max(np.abs(canonical_bubble(rho, lam, sign) - target)))
        if best is None or error < best[2]:
            best = (lam, sign, error)
    assert best is not None
    return best


def _energy_ledger(
    profile: RadialProfile, n: int, inner: float, outer: float, bubbles: list[Bubble]
) -> dict[str, float]:
    total = restricted_energy(profile, n, 0.0, profile.radius)
    bubble = restricted_energy(profile, n, 0.0, inner)
    neck = restricted_energy(profile, n, inner, outer)
    base = restricted_energy(profile, n, outer, profile.radius)
    canonical = canonical_bubble_energy(n) * sum(1 for b in bubbles if b.identified)
    return {
        "total": total,
        "base": base,
        "bubble_window": bubble,
        "neck": neck,
        "additivity_residual": total - (base + bubble + neck),
        "bubbles_canonical": canonical,
        "identity_defect": total - base - canonical,
        "neck_share": neck / total if total > 0.0 else 0.0,
    }


def extract_bubbles(
    traj: FlowTrajectory, event: BlowupEvent | None, config: BubbleConfig | None = None
) -> BubbleDecomposition:
    """
    Рескейлинг последнего снимка в точке концентрации, подгонка канонического пузыря,
    разбиение области на окно пузыря B_{R r}, шейку B_δ \\ B_{R r} и базу вне B_δ.
    """
    cfg = BubbleConfig() if config is None else config
    n = traj.config.n
    if event is None:
        final = traj.final.profile
        ledger = _energy_ledger(final, n, 0.0, 0.0, [])
        return BubbleDecomposition(final, (), cfg.delta, cfg.R, 0.0, 0.0, ledger, (), n)

    working = oriented(event.profile, event.pole)
    flags: list[str] = []
    bubbles: list[Bubble] = []
    residual = working
    scale = event.scale
    for _ in range(cfg.max_bubbles):
        lam, sign, error = fit_canonical_bubble(residual, scale, cfg.R, cfg.fit_samples)
        identified = error <= cfg.fit_tol
        if not identified:
            flags.append("unidentified bubble")
            logger.warning("bubble fit error %.3g exceeds tolerance %.3g", error, cfg.fit_tol)
        window = rescale(residual, "north", lam, cfg.R, cfg.window_nodes)
        bubbles.append(Bubble(scale, event.pole, lam, sign, error, identified, window.profile))
        removed = canonical_bubble(residual.grid, lam, sign) - _tail(residual, lam, sign)
        residual = residual.with_values(residual.values - removed)
        slope = np.abs(profile_slope(residual))
        peak = float(np.max(slope))
        if peak <= 0.0:
            break
        next_scale = 1.0 / peak
        if not (2.0 * next_scale < lam / cfg.R and next_scale < scale):
            break
        scale = next_scale

    inner = cfg.R * bubbles[0].scale
    outer = cfg.delta
    if inner >= outer:
        flags.append("scales not separated")
        inner = outer
    ledger = _energy_ledger(working, n, inner, outer, bubbles)
    return BubbleDecomposition(
        base=working,
        bubbles=tuple(bubbles),
        delta=cfg.delta,
        R=cfg.R,
        neck_inner=inner,
        neck_outer=outer,
        ledger=ledger,
        flags=tuple(flags),
        n=n,
        center=event.pole,
        meta={"event_time": event.time},
    )


def _tail(profile: RadialProfile, lam: float, sign: float) -> FloatArray:
    """Поправка, сохраняющая граничное значение после вычитания пузыря."""
    end = canonical_bubble(profile.radius, lam, sign)
    return np.asarray(end * profile.grid / profile.radius, dtype=float)


@dataclass(frozen=True)
class NeckProfile:
    j_values: tuple[int, ...]
    oscillations: FloatArray
    energies: FloatArray
    small_energy: tuple[bool, ...]
    skipped: tuple[int, ...]

    @property
    def total(self) -> float:
        return float(np.sum(self.oscillations))

    def rows(self) -> list[dict[str, float]]:
        return [
            {"j": j, "energy": float(e), "oscillation": float(o)}
            for j, e, o in zip(self.j_values, self.energies, self.oscillations)
        ]


def neck_oscillation_profile(
    decomp: BubbleDecomposition,
    snapshot: Snapshot | RadialProfile | None = None,
    config: BubbleConfig | None = None,
) -> NeckProfile:
    """Осцилляция и энергия по слоям P_j = B_{2^{1−j}} \\ B_{2^{−j}} между 2Rr_i и 2δ."""
    cfg = BubbleConfig() if config is None else config
    n = decomp.n
    if snapshot is None:
        profile = decomp.base
    else:
        raw = snapshot.profile if isinstance(snapshot, Snapshot) else snapshot
        profile = oriented(raw, decomp.center) if raw.domain_kind == "sphere_polar" else raw
    if not decomp.bubbles:
        return NeckProfile((), np.zeros(0), np.zeros(0), (), ())
    lower = 2.0 * decomp.R * decomp.bubbles[0].scale
    upper = 2.0 * decomp.delta
    threshold = cfg.eps_neck ** (2 * (n - 1))
    j_first = int(math.ceil(-math.log2(upper) + 1.0 - 1e-12))
    j_last = int(math.floor(-math.log2(lower) + 1e-12))
    kept, skipped, oscs, energies = [], [], [], []
    for j in range(j_first, j_last + 1):
        lo, hi = 2.0**-j, 2.0 ** (1 - j)
        if not np.any((profile.grid >= lo) & (profile.grid <= hi)):
            skipped.append(j)
            continue
        kept.append(j)
        oscs.append(profile_oscillation(profile, lo, hi))
        energies.append(restricted_energy(profile, n, lo, hi))
    energy_arr = np.asarray(energies)
    return NeckProfile(
        tuple(kept),
        np.asarray(oscs),
        energy_arr,
        tuple(bool(e <= threshold) for e in energy_arr),
        tuple(skipped),
    )


def rescaled_residual(
    snapshot: Snapshot, n: int, scale: float, center: str = "north", window: float | None = None
) -> dict[str, float]:
    """
    Обе части перемасштабированного уравнения: натяжение τ(û) и scale^n·∂_t ĥ
    (для û(ξ) = u(scale·ξ) верно τ(û) = scale^n (∂_t u)(scale·ξ)).
    """
    profile = snapshot.profile
    resc = rescale(profile, center, scale, window)
    tension_hat = reduced_tension(resc.profile, n)
    velocity = snapshot.velocity
    source_grid = oriented(profile, center).grid
    if center == "south":
        velocity = -velocity[::-1]
    forcing = scale**n * np.interp(resc.profile.grid * scale, source_grid, velocity)
    interior = slice(1, -1)
    diff = tension_hat[interior] - forcing[interior]
    return {
        "scale": scale,
        "tension_sup": float(np.max(np.abs(tension_hat[interior]))),
        "forcing_sup": float(np.max(np.abs(forcing[interior]))),
        "residual_sup": float(np.max(np.abs(diff))),
        "truncated": float(resc.truncated),
    }



def delta_series(
    traj: FlowTrajectory,
    event: BlowupEvent,
    deltas: tuple[float, ...] | list[float],
    config: BubbleConfig | None = None,
) -> list[dict[str, float]]:
    """Доля шейки в балансе энергии и суммарная осцилляция шейки для каждого δ."""
    base = BubbleConfig() if config is None else config
    rows = []
    for delta in deltas:
        cfg = replace(base, delta=float(delta))
        decomp = extract_bubbles(traj, event, cfg)
        neck = neck_oscillation_profile(decomp, config=cfg)
        rows.append(
            {
                "delta": float(delta),
                "neck_share": decomp.ledger["neck_share"],
                "identity_defect": decomp.ledger["identity_defect"],
                "neck_oscillation": neck.total,
            }
        )
    return rows
