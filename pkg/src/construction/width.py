# SPDX-License-Identifier: GPL-3.0-only
"""
Ширина отображения в тор: диаметр образа поднятия в накрытии R^m,
и явный поток по вариационной рёберной энергии для отслеживания ширины во времени.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np
from numpy.typing import ArrayLike

from src.construction.initial_map import (
    CoverModel,
    InitialMapSpec,
    build_initial_map,
    discover_sigma_threshold,
    total_energy_check,
)
from src.core.errors import DomainError, LiftAmbiguityError, StepRejected
from src.core.fields import FloatArray, GridMap
from src.core.manifold import TorusTarget, lift_grid, minimal_image, point_cloud_diameter

logger = logging.getLogger(__name__)


def width(grid_map: GridMap, region: ArrayLike | None = None) -> float:
    """
    Диаметр поднятия по области. Поднятие строится заново из приведённых значений;
    при нарушении условия продолжения поднимается LiftAmbiguityError.
    """
    if not isinstance(grid_map.target, TorusTarget):
        raise DomainError("width is defined for torus-valued maps only")
    lifted = lift_grid(grid_map.values, grid_map.periodic, grid_map.anchor)
    if region is not None:
        mask = np.asarray(region, dtype=bool)
        if not np.any(mask):
            raise DomainError("width region is empty")
        lifted = lifted[mask]
    return point_cloud_diameter(lifted.reshape(-1, lifted.shape[-1]))


def width_report(grid_map: GridMap, spec: InitialMapSpec, cover: CoverModel) -> dict[str, Any]:
    """Ширина u₀ против оценок l − 2r_U ≤ w ≤ l + 2r_U и смещение между копиями."""
    lifted = lift_grid(grid_map.values, grid_map.periodic, grid_map.anchor)
    t = grid_map.axes[0]
    ls = float(grid_map.meta.get("log_sigma", spec.log_sigma))
    near = lifted[t >= ls].reshape(-1, cover.m).mean(axis=0)
    far = lifted[t <= 2.0 * ls].reshape(-1, cover.m).mean(axis=0)
    shift = far - near
    expected = np.zeros(cover.m)
    expected[0] = spec.l
    w = point_cloud_diameter(lifted.reshape(-1, cover.m))
    radius = cover.r_U * spec.amplitude
    steps = [
        np.abs(np.diff(lifted, axis=axis)).max()
        for axis in range(grid_map.dim)
        if not grid_map.periodic[axis] and grid_map.shape[axis] > 1
    ]
    return {
        "l": spec.l,
        "sigma": spec.sigma,
        "width": w,
        "lower_bound": spec.l - 2.0 * radius,
        "upper_bound": spec.l + 2.0 * radius,
        "displacement": shift.tolist(),
        "displacement_defect": float(np.linalg.norm(shift - expected)),
        "lift_stats": {
            "nodes": int(np.prod(grid_map.shape)),
            "max_step": float(max(steps, default=0.0)),
            "anchor": list(grid_map.anchor or ()),
        },
    }


# --- поток в накрытии ---


def _edge_spacing(coords: FloatArray, periodic: bool) -> FloatArray:
    if periodic:
        step = coords[1] - coords[0]
        return np.full(coords.size, step)
    return np.asarray(np.diff(coords), dtype=float)


def _edge_differences(grid_map: GridMap, cover: FloatArray, axis: int) -> FloatArray:
    if grid_map.periodic[axis]:
        return minimal_image(np.roll(cover, -1, axis=axis) - cover)
    return minimal_image(np.diff(cover, axis=axis))


def _side_factors(size: int, periodic: bool) -> tuple[FloatArray, FloatArray]:
    """Доли рёбер «вперёд» и «назад» в узле: 1/2 внутри, 1 на краю непериодической оси."""
    forward = np.full(size, 0.5)
    backward = np.full(size, 0.5)
    if not periodic:
        forward[0], backward[-1] = 1.0, 1.0
        forward[-1], backward[0] = 0.0, 0.0
    return forward, backward


def _broadcast(vec: FloatArray, axis: int, dim: int) -> FloatArray:
    shape = [1] * dim
    shape[axis] = vec.size
    return vec.reshape(shape)


def _node_density(grid_map: GridMap, cover: FloatArray, eps_reg: float) -> FloatArray:
    """G = ε² + Σ_a g^{aa}·(κ⁺|D⁺_a u|² + κ⁻|D⁻_a u|²) в узлах."""
    total = np.full(grid_map.shape, eps_reg**2)
    for axis in range(grid_map.dim):
        periodic = grid_map.periodic[axis]
        h = _edge_spacing(grid_map.axes[axis], periodic)
        sq = np.sum(_edge_differences(grid_map, cover, axis) ** 2, axis=-1)
        sq = sq / _broadcast(h, axis, grid_map.dim) ** 2
        fwd, bwd = _side_factors(grid_map.shape[axis], periodic)
        if periodic:
            back = np.roll(sq, 1, axis=axis)
        else:
            pad = [(0, 0)] * grid_map.dim
            forward_pad, backward_pad = list(pad), list(pad)
            forward_pad[axis], backward_pad[axis] = (0, 1), (1, 0)
            back = np.pad(sq, backward_pad)
            sq = np.pad(sq, forward_pad)
        combined = _broadcast(fwd, axis, grid_map.dim) * sq
        combined = combined + _broadcast(bwd, axis, grid_map.dim) * back
        total += grid_map.inv_metric[axis] * combined
    return total


def edge_energy(grid_map: GridMap, cover: FloatArray, n: int, eps_reg: float = 0.0) -> float:
    """Вариационная рёберная энергия (1/n)Σ W·G^{n/2}."""
    weights = grid_map.quadrature_weights()
    return float(np.sum(weights * _node_density(grid_map, cover, eps_reg) ** (0.5 * n)) / n)


def edge_energy_gradient(
    grid_map: GridMap, cover: FloatArray, n: int, eps_reg: float = 0.0
) -> FloatArray:
    """Точная производная edge_energy по значениям в накрытии."""
    weights = grid_map.quadrature_weights()
    dens = _node_density(grid_map, cover, eps_reg)
    coef = 0.5 * weights * dens ** (0.5 * (n - 2))
    grad = np.zeros_like(cover)
    for axis in range(grid_map.dim):
        periodic = grid_map.periodic[axis]
        h = _broadcast(_edge_spacing(grid_map.axes[axis], periodic), axis, grid_map.dim)
        delta = _edge_differences(grid_map, cover, axis)
        fwd, bwd = _side_factors(grid_map.shape[axis], periodic)
        own = grid_map.inv_metric[axis] * coef
        fwd_w = own * _broadcast(fwd, axis, grid_map.dim)
        bwd_w = own * _broadcast(bwd, axis, grid_map.dim)
        if periodic:
            edge_w = fwd_w + np.roll(bwd_w, -1, axis=axis)
            flux = (2.0 * edge_w / h**2)[..., None] * delta
            grad += np.roll(flux, 1, axis=axis) - flux
        else:
            count = grid_map.shape[axis]
            lo = np.take(fwd_w, np.arange(count - 1), axis=axis)
            hi = np.take(bwd_w, np.arange(1, count), axis=axis)
            flux = (2.0 * (lo + hi) / h**2)[..., None] * delta
            pad = [(0, 0)] * (grid_map.dim + 1)
            into, out_of = list(pad), list(pad)
            into[axis], out_of[axis] = (1, 0), (0, 1)
            grad += np.pad(flux, into) - np.pad(flux, out_of)
    return grad


def edge_cfl_bound(grid_map: GridMap, cover: FloatArray, n: int, eps_reg: float) -> float:
    dens = _node_density(grid_map, cover, eps_reg)
    stiff = np.zeros(grid_map.shape)
    for axis in range(grid_map.dim):
        h = _edge_spacing(grid_map.axes[axis], grid_map.periodic[axis]).min()
        stiff += grid_map.inv_metric[axis] / h**2
    scale = np.max(max(n - 1, 1) * dens ** (0.5 * (n - 2)) * stiff)
    return float(0.5 / scale) if scale > 0.0 else float("inf")


@dataclass
class CoverTrajectory:
    times: list[float] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    widths: list[float] = field(default_factory=list)
    status: str = "running"
    rejected: int = 0
    final: GridMap | None = None

    def rows(self) -> list[dict[str, float]]:
        return [
            {"time": t, "energy": e, "width": w}
            for t, e, w in zip(self.times, self.energies, self.widths)
        ]


def cover_flow(
    grid_map: GridMap,
    steps: int,
    n: int | None = None,
    dt: float | None = None,
    eps_reg: float = 1e-8,
    cfl_safety: float = 0.5,
    record_every: int = 10,
    energy_tol: float = 1e-10,
) -> CoverTrajectory:
    """
    Явный градиентный поток рёберной энергии на поднятии; шаг с ростом энергии
    отклоняется и повторяется с половинным dt. Ширина пишется каждые record_every шагов.
    """
    if not isinstance(grid_map.target, TorusTarget):
        raise DomainError("cover flow needs a torus-valued map")
    dim = grid_map.dim if n is None else n
    try:
        cover = lift_grid(grid_map.values, grid_map.periodic, grid_map.anchor)
        lifted = True
    except LiftAmbiguityError as exc:
        # область с нетривиальной намоткой: поток идёт на приведённых значениях
        logger.warning("no global lift (%s at %s); width not tracked", exc, exc.edge)
        cover, lifted = grid_map.values.copy(), False
    mass = grid_map.quadrature_weights()[..., None]
    traj = CoverTrajectory()
    energy = edge_energy(grid_map, cover, dim, eps_reg)
    time = 0.0
    tau = cfl_safety * edge_cfl_bound(grid_map, cover, dim, eps_reg) if dt is None else dt

    def record() -> None:
        traj.times.append(time)
        traj.energies.append(energy)
        flat = cover.reshape(-1, cover.shape[-1])
        traj.widths.append(point_cloud_diameter(flat) if lifted else float("nan"))

    record()
    for k in range(steps):
        bound = edge_cfl_bound(grid_map, cover, dim, eps_reg)
        while True:
            try:
                if tau > bound:
                    raise StepRejected("cover step violates the stability bound", bound)
                trial = cover - tau * edge_energy_gradient(grid_map, cover, dim, eps_reg) / mass
                if not np.all(np.isfinite(trial)):
                    raise DomainError("non-finite values in cover flow")
                trial_energy = edge_energy(grid_map, trial, dim, eps_reg)
                if trial_energy > energy + energy_tol * (1.0 + energy):
                    raise StepRejected("cover step increased the energy", 0.5 * tau)
                break
            except StepRejected as exc:
                traj.rejected += 1
                tau = min(0.5 * tau, exc.required_dt)
                if tau < 1e-16:
                    traj.status = "aborted"
                    traj.final = grid_map.with_values(cover, lift=cover if lifted else None)
                    logger.warning("cover flow aborted at step %d: %s", k, exc)
                    return traj
        cover, energy, time = trial, trial_energy, time + tau
        if (k + 1) % record_every == 0 or k + 1 == steps:
            record()
    traj.status = "completed"
    traj.final = grid_map.with_values(cover, lift=cover if lifted else None)
    logger.info(
        "cover flow: %d steps, width %.4f -> %.4f, energy %.4e -> %.4e",
        steps, traj.widths[0], traj.widths[-1], traj.energies[0], traj.energies[-1],
    )
    return traj


def width_energy_sweep(
    ls: Iterable[int],
    spec: InitialMapSpec | None = None,
    cover: CoverModel | None = None,
    margin: float = 1.1,
) -> list[dict[str, Any]]:
    """
    Для каждого l: σ ниже найденного порога, ширина u₀ и E_n(u₀) против E(h_l) + E(h₀) + 1.
    """
    base = InitialMapSpec() if spec is None else spec
    model = CoverModel() if cover is None else cover
    rows: list[dict[str, Any]] = []
    for l in ls:
        probe = InitialMapSpec(**{**_spec_dict(base), "l": int(l)})
        threshold = discover_sigma_threshold(probe, model, margin)
        current = InitialMapSpec(**{**_spec_dict(probe), "sigma": threshold["verified_sigma"]})
        built = build_initial_map(current, model)
        energy = total_energy_check(current, model, built)
        report = width_report(built, current, model)
        rows.append(
            {
                "l": int(l),
                "sigma": current.sigma,
                "sigma_threshold": threshold["sigma_threshold"],
                "width": report["width"],
                "lower_bound": report["lower_bound"],
                "upper_bound": report["upper_bound"],
                "energy": energy["energy"],
                "bound": energy["bound"],
                "holds": bool(energy["holds"] and report["width"] >= report["lower_bound"]),
                "lift_stats": report["lift_stats"],
            }
        )
        logger.info(
            "width sweep l=%d: width=%.4f energy=%.4f", l, report["width"], energy["energy"]
        )
    return rows


def _spec_dict(spec: InitialMapSpec) -> dict[str, Any]:
    return {name: getattr(spec, name) for name in spec.__dataclass_fields__}
