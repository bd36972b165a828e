import math

import numpy as np
import pytest

from src.core.errors import DomainError, LiftAmbiguityError
from src.core.fields import GridMap
from src.core.manifold import (
    SphereTarget,
    TorusTarget,
    lift_grid,
    minimal_image,
    point_cloud_diameter,
    sphere_area,
    sphere_project,
    sphere_second_fundamental_term,
    torus_lift,
    torus_reduce,
)


def test_target_dimensions_are_checked() -> None:
    with pytest.raises(DomainError):
        SphereTarget(0)
    with pytest.raises(DomainError):
        TorusTarget(1)
    assert SphereTarget(3).ambient_dim == 4
    assert TorusTarget(3).ambient_dim == 3


def test_minimal_image_and_reduce() -> None:
    assert np.allclose(minimal_image([0.7, -0.6, 0.5, 0.2]), [-0.3, 0.4, -0.5, 0.2])
    reduced = torus_reduce([[-0.25, 1.5], [-1e-18, 3.0]])
    assert np.allclose(reduced, [[0.75, 0.5], [0.0, 0.0]])
    assert np.all((reduced >= 0.0) & (reduced < 1.0))


def test_torus_distance_uses_shortest_representative() -> None:
    torus = TorusTarget(2)
    assert float(torus.distance([0.05, 0.0], [0.95, 0.0])) == pytest.approx(0.1)


def test_sphere_project_rejects_zero_vector() -> None:
    assert np.allclose(sphere_project([3.0, 0.0, 4.0]), [0.6, 0.0, 0.8])
    with pytest.raises(DomainError):
        sphere_project([[1.0, 0.0], [0.0, 0.0]])


def test_second_fundamental_term_is_normal() -> None:
    u = sphere_project(np.random.default_rng(3).normal(size=(10, 4)))
    term = sphere_second_fundamental_term(u, np.full(10, 2.0), n=3)
    assert np.allclose(term, 2.0**1.5 * u)
    with pytest.raises(DomainError):
        sphere_second_fundamental_term(2.0 * u, np.ones(10))


def test_sphere_area_closed_forms() -> None:
    assert sphere_area(1) == pytest.approx(2.0 * math.pi)
    assert sphere_area(2) == pytest.approx(4.0 * math.pi)
    assert sphere_area(3) == pytest.approx(2.0 * math.pi**2)


def test_torus_lift_crosses_the_seam() -> None:
    path = [[0.9, 0.5], [0.95, 0.5], [0.02, 0.5], [0.1, 0.5]]
    lifted = torus_lift(path)
    assert np.allclose(lifted[:, 0], [0.9, 0.95, 1.02, 1.1])
    assert np.allclose(lifted[:, 1], 0.5)


def test_torus_lift_reports_the_offending_step() -> None:
    with pytest.raises(LiftAmbiguityError) as info:
        torus_lift([[0.1, 0.1], [0.15, 0.1], [0.45, 0.1]])
    assert info.value.edge == (1, 2)


def test_lift_grid_on_open_axis() -> None:
    values = np.array([[0.8, 0.5, 0.5], [0.9, 0.5, 0.5], [0.05, 0.5, 0.5], [0.2, 0.5, 0.5]])
    lifted = lift_grid(values, (False,))
    assert np.allclose(lifted[:, 0], [0.8, 0.9, 1.05, 1.2])


def test_lift_grid_anchor_lands_in_fundamental_domain() -> None:
    values = np.array([[1.8, 0.5, 0.5], [1.9, 0.5, 0.5], [2.05, 0.5, 0.5]])
    lifted = lift_grid(values, (False,), anchor=(2,))
    assert np.allclose(lifted[2], [0.05, 0.5, 0.5])
    assert np.allclose(lifted[0], [-0.2, 0.5, 0.5])


def test_lift_grid_detects_winding_cycle() -> None:
    grid_map = GridMap.on_flat_torus(
        (8, 8), lambda x, y: np.stack([x, 0.5 + 0 * y, 0.5 + 0 * y], axis=-1), 3
    )
    with pytest.raises(LiftAmbiguityError):
        lift_grid(grid_map.values, grid_map.periodic, grid_map.anchor)


def test_lift_grid_of_contractible_map_is_consistent() -> None:
    def values(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.stack(
            [0.95 + 0.1 * np.sin(2 * np.pi * x), 0.5 + 0.05 * np.cos(2 * np.pi * y), 0.0 * x],
            axis=-1,
        )

    grid_map = GridMap.on_flat_torus((12, 10), values, 3)
    lifted = lift_grid(grid_map.values, grid_map.periodic, grid_map.anchor)
    expected = values(*np.meshgrid(*grid_map.axes, indexing="ij"))
    assert np.allclose(lifted, expected, atol=1e-12)


def test_point_cloud_diameter_small_and_degenerate() -> None:
    square = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
    assert point_cloud_diameter(square) == pytest.approx(math.sqrt(2.0))
    assert point_cloud_diameter([[0.3, 0.3, 0.3]] * 5) == 0.0


def test_point_cloud_diameter_large_clouds() -> None:
    t = np.linspace(0.0, 3.0, 3000)
    line = np.outer(t, [1.0, 2.0, 2.0]) / 3.0
    assert point_cloud_diameter(line) == pytest.approx(3.0)
    angles = np.linspace(0.0, 2.0 * np.pi, 2500, endpoint=False)
    circle = np.stack([np.cos(angles), np.sin(angles), np.zeros_like(angles)], axis=-1)
    assert point_cloud_diameter(circle) == pytest.approx(2.0, rel=1e-5)
