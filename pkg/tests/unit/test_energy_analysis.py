import math

import numpy as np
import pytest

from src.analysis.energy_analysis import (
    ComparisonProfile,
    FamilySpread,
    RefinementSeries,
    annulus_energies,
    bubble_tension_series,
    check_record,
    comparison_laplacian_series,
    dissipation_check,
    neck_decay_fit,
    neck_lambda,
    oscillation_bound_check,
    oscillation_family_spread,
    pohozaev_balance,
    pohozaev_family_spread,
    radial_comparison_map,
    radial_n_laplacian,
    regularity_quantities,
    tension,
)
from src.core.equivariant_flow import FlowConfig, FlowTrajectory, initial_profile, run
from src.core.errors import ContractError, DomainError
from src.core.fields import GridMap, RadialProfile, n_energy, oscillation


def bubble(lam: float, K: int) -> RadialProfile:
    return RadialProfile.from_function(lambda r: 2.0 * np.arctan(r / lam), K, "flat_ball", 1.0)


def test_neck_lambda_values() -> None:
    assert neck_lambda(2) == pytest.approx(math.log(2.0))
    assert neck_lambda(3) == pytest.approx(0.75 * math.log(2.0))


def test_check_record_layout() -> None:
    record = check_record("demo", {"K": 8}, 1, 2.5, -1.5, in_regime=False)
    assert record == {
        "name": "demo",
        "inputs": {"K": 8},
        "lhs": 1.0,
        "rhs": 2.5,
        "residual": -1.5,
        "in_regime": False,
    }


def test_profile_tension_vanishes_for_identity() -> None:
    profile = RadialProfile.from_function(lambda r: r, 256, "sphere_polar")
    field = tension(profile, 3)
    assert field.sup_norm() < 1e-8
    assert field.scalar is not None
    assert field.tangency_defect() < 1e-12
    with pytest.raises(DomainError):
        tension(profile)


def test_grid_tension_is_tangent() -> None:
    profile = RadialProfile.from_function(lambda r: r + 0.3 * np.sin(r), 128, "sphere_polar")
    field = tension(GridMap.from_profile(profile, 2, radial=32, angular=8))
    assert field.tangency_defect() < 1e-10
    assert field.normal_residual is not None
    assert field.l2_norm() > 0.0


@pytest.mark.parametrize("radius", [0.25, 0.5, 1.0])
def test_pohozaev_identity_for_bubble(radius: float) -> None:
    balance = pohozaev_balance(bubble(0.25, 2048), 3, radius)
    assert balance.lhs > 0.0
    assert abs(balance.identity_residual) < 1e-2 * radius * balance.lhs
    assert balance.to_report()["name"] == "pohozaev"


def test_pohozaev_domain_errors() -> None:
    with pytest.raises(DomainError):
        pohozaev_balance(RadialProfile.from_function(lambda r: r, 32, "sphere_polar"), 3, 1.0)
    with pytest.raises(DomainError):
        pohozaev_balance(bubble(0.25, 64), 3, 1.5)


def test_oscillation_bound_small_energy_regime() -> None:
    small = RadialProfile.from_function(lambda r: 0.01 * r, 256, "flat_ball", 1.0)
    check = oscillation_bound_check(small, 3, 1.0)
    assert check.in_regime
    assert check.lhs <= check.rhs
    large = bubble(0.05, 256)
    assert not oscillation_bound_check(large, 3, 1.0).in_regime


def wavy_torus_map(amp: float) -> GridMap:
    return GridMap.on_flat_torus(
        (32, 32),
        lambda x, y: np.stack(
            [0.5 + amp * np.sin(2.0 * np.pi * x), 0.5 + amp * np.cos(2.0 * np.pi * y)], axis=-1
        ),
        2,
    )


def test_oscillation_bound_on_torus_grid() -> None:
    grid_map = wavy_torus_map(0.05)
    check = oscillation_bound_check(grid_map, 2, 0.25)
    x, y = np.meshgrid(*grid_map.axes, indexing="ij")
    middle = 0.5 * (31.0 / 32.0)
    dist = np.hypot(x - middle, y - middle)
    assert check.lhs == pytest.approx(oscillation(grid_map, dist <= 0.125))
    energy = n_energy(grid_map, 2, region=dist <= 0.25).total_energy
    assert check.energy == pytest.approx(energy)
    assert check.lhs > 0.0 and check.rhs > 0.0
    assert check.in_regime

    flat = GridMap.on_flat_torus((32, 32), np.full((32, 32, 2), 0.3), 2)
    still = oscillation_bound_check(flat, 2, 0.25)
    assert still.lhs == 0.0 and still.energy == 0.0
    with pytest.raises(DomainError):
        oscillation_bound_check(grid_map, 2, 0.01)
    with pytest.raises(DomainError):
        oscillation_bound_check(grid_map, 2, 0.25, center=(0.5,))


def test_oscillation_ball_wraps_around_torus() -> None:
    grid_map = wavy_torus_map(0.05)
    corner = oscillation_bound_check(grid_map, 2, 0.25, center=(0.0, 0.0))
    x, y = np.meshgrid(*grid_map.axes, indexing="ij")
    gx, gy = np.minimum(x, 1.0 - x), np.minimum(y, 1.0 - y)
    assert corner.lhs == pytest.approx(oscillation(grid_map, np.hypot(gx, gy) <= 0.125))


@pytest.mark.parametrize("lam", [0.25, 1.0, 4.0])
def test_bubble_tension_converges_at_second_order(lam: float) -> None:
    series = bubble_tension_series(lam, 3, (128, 256, 512))
    assert np.all(np.diff(series.errors) < 0.0)
    assert series.order >= 1.8


@pytest.mark.parametrize("n", [2, 3, 5])
def test_comparison_map_laplacian_converges_at_second_order(n: int) -> None:
    series = comparison_laplacian_series(bubble(0.05, 2048), n, 2)
    assert series.sizes == (65, 129, 257, 513)
    assert series.order >= 1.8


def test_refinement_series_orders() -> None:
    series = RefinementSeries((8, 16, 32), np.array([1.0, 0.25, 0.0625]))
    assert np.allclose(series.orders, 2.0)
    assert series.order == pytest.approx(2.0)
    assert RefinementSeries((8,), np.array([1.0])).order == math.inf


def test_pohozaev_ratio_is_stable_across_profiles() -> None:
    family = pohozaev_family_spread(3, 2048)
    assert len(family.labels) == family.ratios.size == 10
    assert family.spread < 5.0
    exact = family.ratios[0::2]
    assert np.allclose(exact, 1.5**1.5, rtol=5e-2)


def test_oscillation_ratio_stays_in_factor_three_band() -> None:
    family = oscillation_family_spread(3, 4096)
    assert family.ratios.size == 10
    assert all(family.in_regime)
    assert family.spread < 3.0
    assert np.all(family.ratios <= 1.0)


def test_family_spread_flags_degenerate_ratios() -> None:
    assert FamilySpread(("a", "b"), np.array([1.0, 2.0])).spread == pytest.approx(2.0)
    assert FamilySpread(("a", "b"), np.array([1.0, 0.0])).spread == math.inf
    assert FamilySpread(("a", "b"), np.array([1.0, math.inf])).spread == math.inf


def test_annulus_derivative_matches_boundary_flux() -> None:
    stats = annulus_energies(bubble(0.05, 4096), 3, (0, 5))
    assert stats.skipped == (0,)
    assert stats.j_values == (1, 2, 3, 4, 5)
    assert np.all(stats.energies > 0.0)
    assert np.allclose(stats.derivative_fd, stats.derivative_boundary, rtol=1e-2)
    assert len(stats.rows()) == 5
    fit = neck_decay_fit(stats)
    assert fit["lambda_n"] == pytest.approx(neck_lambda(3))
    assert len(fit["constants"]) == 5
    with pytest.raises(DomainError):
        annulus_energies(bubble(0.05, 64), 3, (1, 2), t=0.0)


def test_comparison_map_matches_endpoints() -> None:
    profile = bubble(0.05, 1024)
    comp = radial_comparison_map(profile, 2, 0.5)
    assert comp.values[0] == comp.inner_value
    assert comp.values[-1] == comp.outer_value
    assert comp.outer_value == pytest.approx(np.interp(2.0**-1.5, profile.grid, profile.values))
    assert np.all(np.diff(comp.values) > 0.0)
    with pytest.raises(DomainError):
        radial_comparison_map(profile, 2, 0.0)
    with pytest.raises(DomainError):
        radial_comparison_map(profile, -1, 0.5)


def test_logarithmic_profile_is_radially_n_harmonic() -> None:
    radii = np.linspace(2.0**-2.5, 2.0**-1.5, 257)
    log_map = ComparisonProfile(radii, np.log(radii), 0.0, 0.0)
    linear = ComparisonProfile(radii, radii.copy(), 0.0, 0.0)
    harmonic = np.max(np.abs(radial_n_laplacian(log_map, 3)))
    generic = np.max(np.abs(radial_n_laplacian(linear, 3)))
    assert harmonic < 1e-3 * generic


def test_dissipation_needs_two_snapshots() -> None:
    with pytest.raises(ContractError):
        dissipation_check(FlowTrajectory(config=FlowConfig()))


def test_regularity_series_follows_snapshots() -> None:
    cfg = FlowConfig(n=3, K=64, max_time=2e-3, snapshot_stride=20)
    traj = run(initial_profile("small", cfg, A=0.5), cfg)
    series = regularity_quantities(traj)
    assert series.times.shape == series.grad_2n.shape == (len(traj.snapshots),)
    assert np.all(np.isfinite(series.grad_weighted_sq))
    assert set(series.time_integrals()) == {"grad_weighted_sq", "grad_2n"}
