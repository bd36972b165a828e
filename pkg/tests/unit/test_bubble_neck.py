import math

import numpy as np
import pytest

from src.analysis.bubble_neck import (
    BubbleConfig,
    canonical_bubble,
    canonical_bubble_energy,
    delta_series,
    extract_bubbles,
    fit_canonical_bubble,
    neck_oscillation_profile,
    reflect_to_north,
    rescale,
    rescaled_residual,
)
from src.core.equivariant_flow import BlowupEvent, FlowConfig, FlowTrajectory, Snapshot
from src.core.errors import ConfigError, DomainError
from src.core.fields import RadialProfile
from src.protocols.report_validator import ReportValidator


def ball_bubble(lam: float, K: int, sign: float = 1.0) -> RadialProfile:
    return RadialProfile.from_function(
        lambda r: canonical_bubble(r, lam, sign), K, "flat_ball", 1.0
    )


def single_snapshot(profile: RadialProfile) -> FlowTrajectory:
    traj = FlowTrajectory(config=FlowConfig(n=3, domain_kind="flat_ball", K=profile.K))
    traj.record(Snapshot(0.5, profile, np.zeros(profile.grid.size), 1.0, 0.0, 10, 1e-4))
    return traj


def test_bubble_config_validation() -> None:
    with pytest.raises(ConfigError):
        BubbleConfig(delta=1.5)
    with pytest.raises(ConfigError):
        BubbleConfig.from_mapping({"radius": 3.0})
    assert BubbleConfig.from_mapping({"R": 16.0}).R == 16.0


def test_canonical_bubble_energy() -> None:
    assert canonical_bubble_energy(2) == pytest.approx(4.0 * math.pi)
    assert canonical_bubble_energy(3) == pytest.approx(math.sqrt(3.0) * 2.0 * math.pi**2)


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_fit_recovers_bubble_scale(sign: float) -> None:
    profile = ball_bubble(0.01, 4096, sign)
    lam, fitted_sign, error = fit_canonical_bubble(profile, 0.005, 32.0)
    assert lam == pytest.approx(0.01, rel=0.02)
    assert fitted_sign == sign
    assert error < 0.01


def test_reflection_is_an_involution() -> None:
    profile = RadialProfile.from_function(lambda r: r + 1.2 * np.sin(r), 64, "sphere_polar")
    twice = reflect_to_north(reflect_to_north(profile))
    assert np.allclose(twice.values, profile.values, atol=1e-12)
    identity = RadialProfile.from_function(lambda r: r, 64, "sphere_polar")
    assert np.allclose(reflect_to_north(identity).values, identity.values, atol=1e-12)
    with pytest.raises(DomainError):
        reflect_to_north(ball_bubble(0.1, 16))


def test_rescale_normalizes_bubble() -> None:
    lam = 0.02
    resc = rescale(ball_bubble(lam, 2048), "north", lam, window=10.0, nodes=201)
    assert not resc.truncated
    assert resc.profile.radius == pytest.approx(10.0)
    expected = 2.0 * np.arctan(resc.profile.grid)
    assert np.max(np.abs(resc.profile.values - expected)) < 1e-3
    assert rescale(ball_bubble(lam, 256), "north", lam, window=100.0).truncated
    with pytest.raises(DomainError):
        rescale(ball_bubble(lam, 256), "north", 0.0)
    with pytest.raises(DomainError):
        rescale(ball_bubble(lam, 256), "east", lam)


def test_rescaling_composes() -> None:
    profile = ball_bubble(0.02, 4096)
    coarse = rescale(profile, "north", 0.5).profile
    twice = rescale(coarse, "north", 0.1, window=10.0, nodes=501)
    once = rescale(profile, "north", 0.05, window=10.0, nodes=501)
    assert np.allclose(twice.profile.grid, once.profile.grid)
    assert np.max(np.abs(twice.profile.values - once.profile.values)) < 1e-4


def test_extract_without_event_keeps_everything_in_base() -> None:
    traj = single_snapshot(ball_bubble(0.1, 128))
    decomp = extract_bubbles(traj, None)
    assert decomp.bubbles == ()
    assert decomp.ledger["neck"] == 0.0
    assert decomp.ledger["base"] == pytest.approx(decomp.ledger["total"])


def test_extract_bubble_from_concentrated_profile() -> None:
    lam = 0.002
    profile = ball_bubble(lam, 8192)
    traj = single_snapshot(profile)
    event = BlowupEvent(0.5, 0.0, 0.5 * lam, profile, "north", math.nan, (0.5,), (0.5 * lam,))
    decomp = extract_bubbles(traj, event)
    assert len(decomp.bubbles) == 1
    first = decomp.bubbles[0]
    assert first.identified
    assert first.lam == pytest.approx(lam, rel=0.02)
    assert first.sign == 1.0
    ledger = decomp.ledger
    assert abs(ledger["additivity_residual"]) < 1e-9 * ledger["total"]
    assert abs(ledger["identity_defect"]) < 0.05 * ledger["bubbles_canonical"]
    assert decomp.neck_inner < decomp.neck_outer
    assert ReportValidator.validate("decomposition", decomp.to_dict())

    neck = neck_oscillation_profile(decomp)
    assert len(neck.j_values) >= 1
    assert np.all(neck.oscillations >= 0.0)
    assert neck.total == pytest.approx(float(np.sum(neck.oscillations)))


def test_rescaled_residual_reports_both_sides() -> None:
    lam = 0.05
    profile = ball_bubble(lam, 1024)
    snap = Snapshot(0.1, profile, np.zeros(profile.grid.size), 1.0, 0.0, 1, 1e-4)
    report = rescaled_residual(snap, 3, lam, window=4.0)
    assert report["forcing_sup"] == 0.0
    assert report["residual_sup"] == pytest.approx(report["tension_sup"])
    assert report["truncated"] == 0.0


def test_neck_shrinks_as_delta_halves() -> None:
    lam = 0.002
    profile = ball_bubble(lam, 8192)
    traj = single_snapshot(profile)
    event = BlowupEvent(0.5, 0.0, 0.5 * lam, profile, "north", math.nan, (0.5,), (0.5 * lam,))
    rows = delta_series(traj, event, (2.0**-2, 2.0**-3, 2.0**-4), BubbleConfig(R=8.0))
    assert [row["delta"] for row in rows] == [0.25, 0.125, 0.0625]
    totals = [row["neck_oscillation"] for row in rows]
    assert totals[0] > 0.0
    assert all(b <= 1.1 * a for a, b in zip(totals[:-1], totals[1:]))
    shares = [row["neck_share"] for row in rows]
    assert all(b <= a + 1e-12 for a, b in zip(shares[:-1], shares[1:]))
    assert shares[-1] < 0.05
