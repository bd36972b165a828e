from typing import Callable

import numpy as np
import pytest

from src.construction.initial_map import CoverModel, InitialMapSpec, build_initial_map
from src.construction.width import (
    cover_flow,
    edge_energy,
    edge_energy_gradient,
    width,
    width_energy_sweep,
    width_report,
)
from src.core.errors import DomainError, LiftAmbiguityError
from src.core.fields import GridMap, RadialProfile
from src.core.manifold import TorusTarget


def smooth_torus_map(shift: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> GridMap:
    def values(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.stack(
            [
                shift[0] + 0.5 + 0.15 * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
                shift[1] + 0.5 + 0.1 * np.cos(2 * np.pi * x),
                shift[2] + 0.5 + 0.05 * np.sin(2 * np.pi * y),
            ],
            axis=-1,
        )

    return GridMap.on_flat_torus((16, 16), values, 3)


def winding_map() -> GridMap:
    return GridMap.on_flat_torus(
        (16, 16), lambda x, y: np.stack([x, 0.5 + 0 * y, 0.5 + 0 * y], axis=-1), 3
    )


def small_cylinder_map() -> GridMap:
    rng = np.random.default_rng(5)
    noise = rng.uniform(-0.05, 0.05, size=(6, 8, 3))

    def func(t: np.ndarray, theta: np.ndarray) -> np.ndarray:
        base = np.stack([0.2 * t, 0.3 * theta[..., 0], 0.1 * theta[..., 1]], axis=-1)
        return 0.5 + base + noise

    return GridMap.on_cylinder(np.linspace(0.0, 1.0, 6), 2, 4, func, TorusTarget(3))


def test_constant_map_has_zero_width() -> None:
    grid_map = GridMap.on_flat_torus((8, 8), np.full((8, 8, 3), 0.7), 3)
    assert width(grid_map) == 0.0


def test_width_needs_a_torus_target() -> None:
    profile = RadialProfile.from_function(lambda r: r, 16, "sphere_polar")
    with pytest.raises(DomainError):
        width(GridMap.from_profile(profile, 2, radial=8, angular=4))


def test_width_is_invariant_under_translations() -> None:
    base = width(smooth_torus_map())
    assert base > 0.0
    assert width(smooth_torus_map((1.0, -2.0, 3.0))) == pytest.approx(base, abs=1e-12)
    assert width(smooth_torus_map((0.45, 0.3, 0.9))) == pytest.approx(base, abs=1e-12)


def test_width_of_region_and_winding_maps() -> None:
    grid_map = smooth_torus_map()
    mask = np.zeros(grid_map.shape, dtype=bool)
    mask[0, 0] = True
    assert width(grid_map, mask) == 0.0
    with pytest.raises(DomainError):
        width(grid_map, np.zeros(grid_map.shape, dtype=bool))
    with pytest.raises(LiftAmbiguityError):
        width(winding_map())


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("builder", [smooth_torus_map, small_cylinder_map])
def test_edge_gradient_matches_finite_differences(
    n: int, builder: Callable[[], GridMap]
) -> None:
    grid_map = builder()
    cover = grid_map.covered_values().copy()
    eps = 1e-3
    grad = edge_energy_gradient(grid_map, cover, n, eps)
    rng = np.random.default_rng(7)
    flat = cover.reshape(-1, 3)
    for index in rng.choice(flat.shape[0], size=6, replace=False):
        for comp in range(3):
            plus, minus = cover.copy(), cover.copy()
            plus.reshape(-1, 3)[index, comp] += 1e-6
            minus.reshape(-1, 3)[index, comp] -= 1e-6
            diff = edge_energy(grid_map, plus, n, eps) - edge_energy(grid_map, minus, n, eps)
            fd = diff / 2e-6
            exact = grad.reshape(-1, 3)[index, comp]
            assert exact == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_cover_flow_keeps_constant_map() -> None:
    grid_map = GridMap.on_flat_torus((8, 8), np.full((8, 8, 3), 0.7), 3)
    traj = cover_flow(grid_map, steps=5, record_every=1)
    assert traj.status == "completed"
    assert len(traj.energies) == 6
    assert max(traj.energies) < 1e-15
    assert traj.widths == [0.0] * 6


def test_cover_flow_decreases_energy_and_width() -> None:
    traj = cover_flow(smooth_torus_map(), steps=60, record_every=5)
    assert traj.status == "completed"
    energies = np.asarray(traj.energies)
    widths = np.asarray(traj.widths)
    assert np.all(np.diff(energies) <= 1e-10 * (1.0 + energies[0]))
    assert np.all(np.diff(widths) <= 1e-12)
    assert energies[-1] < energies[0]
    assert traj.final is not None
    assert traj.final.lift is not None
    assert len(traj.rows()) == len(traj.times)


def test_cover_flow_on_winding_map_skips_width() -> None:
    traj = cover_flow(winding_map(), steps=10, record_every=5)
    assert traj.status == "completed"
    assert np.all(np.isnan(traj.widths))
    assert traj.energies[-1] == pytest.approx(traj.energies[0], rel=1e-9)
    assert traj.final is not None and traj.final.lift is None


def test_width_report_for_separated_copies() -> None:
    spec = InitialMapSpec(n=2, sigma=1e-2, l=1, angular=8, annulus_nodes=128, bump_nodes=64)
    cover = CoverModel()
    report = width_report(build_initial_map(spec, cover), spec, cover)
    assert report["lower_bound"] <= report["width"] <= report["upper_bound"]
    assert report["displacement_defect"] < 1e-6
    assert report["lift_stats"]["max_step"] < 0.25
    assert report["lift_stats"]["nodes"] > 0


def test_width_report_without_separation() -> None:
    spec = InitialMapSpec(n=2, sigma=1e-2, l=0, angular=8, annulus_nodes=128, bump_nodes=64)
    cover = CoverModel()
    report = width_report(build_initial_map(spec, cover), spec, cover)
    assert report["width"] <= 2.0 * cover.r_U + 1e-12


def test_width_energy_sweep_grows_with_separation() -> None:
    spec = InitialMapSpec(n=2, angular=8, annulus_nodes=64, bump_nodes=32)
    rows = width_energy_sweep([1, 2], spec, CoverModel())
    assert [row["l"] for row in rows] == [1, 2]
    assert all(row["holds"] for row in rows)
    assert rows[1]["width"] > rows[0]["width"]
    assert rows[1]["sigma"] < rows[0]["sigma"] < rows[0]["sigma_threshold"]
    assert all(row["energy"] < row["bound"] for row in rows)
