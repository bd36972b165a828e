import math
from typing import Any

import numpy as np
import pytest
from scipy.integrate import quad

from src.construction.initial_map import (
    CoverModel,
    InitialMapSpec,
    annulus_constant,
    annulus_energy_estimate,
    build_initial_map,
    cutoff_phi,
    cutoff_phi_derivative,
    cylinder_axis,
    discover_sigma_threshold,
    initial_cover_values,
    inverse_stereographic,
    region_energies,
    sigma_threshold,
    stereographic,
    total_energy_check,
)
from src.core.errors import DomainError, SpecError
from src.core.manifold import sphere_area


def coarse(**changes: Any) -> InitialMapSpec:
    params: dict[str, Any] = {
        "n": 2, "sigma": 1e-2, "l": 1, "angular": 8, "annulus_nodes": 128, "bump_nodes": 64
    }
    params.update(changes)
    return InitialMapSpec.from_mapping(params)


def test_stereographic_known_points() -> None:
    assert np.allclose(stereographic([0.0, 0.0, -1.0]), [0.0, 0.0])
    assert np.allclose(stereographic([1.0, 0.0, 0.0]), [1.0, 0.0])
    assert np.allclose(stereographic([0.0, 0.0, 1.0], pole="south"), [0.0, 0.0])
    with pytest.raises(DomainError):
        stereographic([0.0, 0.0, 1.0])
    with pytest.raises(DomainError):
        stereographic([0.0, 0.0, -1.0], pole="south")
    with pytest.raises(DomainError):
        stereographic([1.0, 0.0, 0.0], pole="east")


def test_stereographic_round_trip_and_inversion() -> None:
    rng = np.random.default_rng(11)
    points = rng.normal(size=(50, 4))
    points /= np.linalg.norm(points, axis=-1, keepdims=True)
    for pole in ("north", "south"):
        back = inverse_stereographic(stereographic(points, pole), pole)
        assert np.allclose(back, points)
    phi = stereographic(points, "north")
    psi = stereographic(points, "south")
    assert np.allclose(psi, phi / np.sum(phi * phi, axis=-1, keepdims=True))


def test_cutoff_profile() -> None:
    values, clamped = cutoff_phi([0.0, 0.125, 0.5, 0.875, 1.0])
    assert not clamped
    assert np.allclose(values, [0.0, 0.0, 0.5, 1.0, 1.0])
    values, clamped = cutoff_phi([1.5, -0.2])
    assert clamped
    assert np.allclose(values, [1.0, 0.0])
    slope = cutoff_phi_derivative(np.linspace(0.0, 1.0, 801))
    assert np.all(slope >= 0.0)
    assert np.max(slope) == pytest.approx(2.0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_annulus_constant_matches_quadrature(n: int) -> None:
    integral, _ = quad(
        lambda x: float(cutoff_phi_derivative(x)) ** n, 0.0, 1.0, points=[0.125, 0.875]
    )
    assert annulus_constant(n) == pytest.approx(sphere_area(n - 1) / n * integral, rel=1e-8)


def test_model_validation() -> None:
    with pytest.raises(SpecError):
        CoverModel(m=2)
    with pytest.raises(SpecError):
        CoverModel(r_U=0.3)
    assert np.allclose(CoverModel().center(2), [2.5, 0.5, 0.5])
    with pytest.raises(SpecError):
        InitialMapSpec(sigma=0.3)
    with pytest.raises(SpecError):
        InitialMapSpec(l=-1)
    with pytest.raises(SpecError):
        InitialMapSpec(amplitude=1.5)
    assert InitialMapSpec.from_mapping({"n": 3, "sigmas": [1e-2]}).n == 3


def test_dimension_gap_is_required() -> None:
    t = np.zeros(3)
    theta = np.zeros((3, 3))
    with pytest.raises(SpecError):
        initial_cover_values(t, theta, InitialMapSpec(n=3), CoverModel(m=3))


def test_cylinder_axis_has_gluing_nodes() -> None:
    spec = coarse()
    axis = cylinder_axis(spec)
    assert np.all(np.diff(axis) > 0.0)
    assert np.any(axis == 2.0 * spec.log_sigma)
    assert np.any(axis == spec.log_sigma)
    assert axis[0] == pytest.approx(spec.t_min)
    assert axis[-1] == pytest.approx(spec.t_max)


def test_gluing_boundaries_hit_lattice_points() -> None:
    spec = coarse(l=2)
    cover = CoverModel()
    grid_map = build_initial_map(spec, cover)
    assert grid_map.lift is not None
    t = grid_map.axes[0]
    outer = int(np.flatnonzero(t == spec.log_sigma)[0])
    inner = int(np.flatnonzero(t == 2.0 * spec.log_sigma)[0])
    assert np.max(np.abs(grid_map.lift[outer] - cover.center(0))) < 1e-10
    assert np.max(np.abs(grid_map.lift[inner] - cover.center(2))) < 1e-10
    assert grid_map.meta["l"] == 2
    assert np.all((grid_map.values >= 0.0) & (grid_map.values < 1.0))


def test_annulus_energy_vanishes_without_separation() -> None:
    estimate = annulus_energy_estimate(coarse(l=0), CoverModel())
    assert estimate["computed"] == 0.0
    assert estimate["ratio"] == 0.0
    assert sigma_threshold(coarse(l=0)) == 0.25


@pytest.mark.parametrize("n", [2, 3])
def test_annulus_energy_scales_with_separation(n: int) -> None:
    cover = CoverModel(m=4)
    one = annulus_energy_estimate(coarse(n=n, angular=16), cover)
    two = annulus_energy_estimate(coarse(n=n, angular=16, l=2), cover)
    assert two["computed"] / one["computed"] == pytest.approx(2.0**n, rel=1e-6)
    assert one["computed"] == pytest.approx(one["predicted"], rel=0.01)


def test_annulus_energy_log_slope() -> None:
    cover = CoverModel()
    rows = [annulus_energy_estimate(coarse(sigma=s), cover) for s in (1e-2, 1e-3, 1e-4)]
    x = np.log([-math.log(r["sigma"]) for r in rows])
    y = np.log([r["computed"] for r in rows])
    slope = np.polyfit(x, y, 1)[0]
    assert slope == pytest.approx(-1.0, abs=1e-4)


def test_far_and_near_copies_carry_equal_energy() -> None:
    spec = coarse(bump_nodes=96)
    cover = CoverModel()
    report = total_energy_check(spec, cover)
    assert report["conformal_defect"] < 0.02
    assert report["near"] == pytest.approx(report["bump_reference"], rel=0.02)
    parts = region_energies(build_initial_map(spec, cover), spec)
    assert parts["total"] == pytest.approx(parts["far"] + parts["annulus"] + parts["near"])


def test_threshold_discovery_keeps_annulus_below_one() -> None:
    spec = coarse()
    cover = CoverModel()
    found = discover_sigma_threshold(spec, cover)
    assert found["verified"]
    assert found["verified_sigma"] < found["sigma_threshold"] < 0.25
    assert found["annulus_energy"] == pytest.approx(1.0 / 1.1, rel=0.02)
    below = coarse(sigma=found["verified_sigma"])
    check = total_energy_check(below, cover)
    assert check["holds"]
    assert check["below_threshold"]
    assert check["slack"] > 0.0
