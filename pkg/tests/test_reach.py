import math

import pytest

from pfaffian.errors import AnalysisError
from pfaffian.forms import Box, make_form
from pfaffian.reach import (
    KIND_CODIM_ONE,
    KIND_FULL,
    KIND_INCONCLUSIVE,
    ReachSample,
    constrained_velocity,
    estimate_dimension,
    explore,
    steer_step,
    surrounding_line_scan,
)
from pfaffian.reports import json_text

CONTACT = make_form(["x", "y", "z"], ["-y", "0", "1"], Box((-1,) * 3, (1,) * 3))
EXACT3 = make_form(["x", "y", "z"], ["1", "1", "1"], Box((-1,) * 3, (1,) * 3))
ROLLING = make_form(["x", "theta"], ["1", "-1"], Box((-1, -1), (1, 1)))


def test_constrained_velocity_examples():
    assert constrained_velocity(CONTACT, (0, 0, 0), (1, 0), 2) == (1, 0, 0.0)
    assert constrained_velocity(CONTACT, (0, 1, 0), (1, 0), 2) == (1, 0, 1.0)


def test_steer_step_stationary():
    nxt, resid = steer_step(CONTACT, (0.1, 0.2, 0.3), (0.0, 0.0), 2, 0.01)
    assert nxt == (0.1, 0.2, 0.3)
    assert resid == 0.0


def test_steer_step_annihilates_form():
    nxt, resid = steer_step(CONTACT, (0.0, 0.5, 0.0), (1.0, 0.0), 2, 0.01)
    assert resid <= 1e-10
    assert nxt[2] == pytest.approx(0.005, rel=1e-6)  # dz = y dx with y ~ 0.5


def test_explore_contact_spreads_in_z():
    sample = explore(CONTACT, (0, 0, 0), 0.3, 50000, 7)
    zs = [abs(e[2]) for e in sample.endpoints]
    assert max(zs) > 1e-3
    assert sample.budget_used == 50000
    assert sample.max_residual <= 1e-6


def test_explore_exact_stays_on_level():
    sample = explore(EXACT3, (0, 0, 0), 0.3, 20000, 7)
    worst = max(abs(sum(e)) for e in sample.endpoints)
    assert worst <= 1e-6


def test_explore_zero_budget():
    sample = explore(EXACT3, (0, 0, 0), 0.3, 0, 7)
    assert sample.endpoints == [(0.0, 0.0, 0.0)]
    assert sample.budget_used == 0


def test_explore_endpoints_stay_in_ball_and_box():
    sample = explore(CONTACT, (0.9, 0.0, 0.9), 0.3, 20000, 11)
    for e in sample.endpoints:
        assert math.dist(e, (0.9, 0.0, 0.9)) <= 0.3 * (1 + 1e-9)
        assert CONTACT.domain.contains(e, tol=1e-9)


def test_explore_rejects_singular_base():
    f = make_form(["x", "y"], ["y", "x"], Box((-1, -1), (1, 1)))
    with pytest.raises(AnalysisError):
        explore(f, (0.0, 0.0), 0.3, 100, 1)


def test_null_curve_fidelity():
    sample = explore(CONTACT, (0, 0, 0), 0.3, 5000, 3, keep_curves=True)
    assert sample.curves
    for curve in sample.curves:
        assert curve.max_residual <= 1e-6
        assert len(curve.points) == len(curve.params)


def test_estimate_dimension_kinds():
    full = explore(CONTACT, (0, 0, 0), 0.3, 100000, 42)
    assert estimate_dimension(full, 0.05).kind == KIND_FULL
    flat = explore(EXACT3, (0, 0, 0), 0.3, 50000, 42)
    verdict = estimate_dimension(flat, 0.05)
    assert verdict.kind == KIND_CODIM_ONE
    assert verdict.transverse_ratio <= 1e-9


def test_estimate_dimension_single_point():
    sample = ReachSample((0.0, 0.0, 0.0), 0.3, [(0.0, 0.0, 0.0)], [0], 0, 0, 0)
    assert estimate_dimension(sample).kind == KIND_INCONCLUSIVE


def test_estimate_dimension_conservation_thickness():
    sample = explore(EXACT3, (0, 0, 0), 0.3, 30000, 5)
    verdict = estimate_dimension(sample, psi_reference=lambda p: sum(p))
    assert verdict.thickness <= 1e-5


def test_explore_determinism_byte_identical():
    a = explore(CONTACT, (0, 0, 0), 0.3, 20000, 42)
    b = explore(CONTACT, (0, 0, 0), 0.3, 20000, 42)
    assert json_text(a.as_report()) == json_text(b.as_report())
    c = explore(CONTACT, (0, 0, 0), 0.3, 20000, 43)
    assert json_text(c.as_report()) != json_text(a.as_report())


# --- surrounding-line scan ------------------------------------------------------


def test_scan_contact_reaches_free_axis():
    report = surrounding_line_scan(CONTACT, (0, 0, 0), 2, 0.3, 100000)
    assert report.fraction_reached >= 31 / 32


def test_scan_rolling_blocked():
    report = surrounding_line_scan(ROLLING, (0, 0), 0, 0.3, 100000)
    assert report.fraction_reached <= 1 / 32
    # the reachable set is the line x = theta; gaps match the distance to it
    for off, gap in zip(report.offsets, report.gaps):
        assert gap <= abs(off) + 1e-9
        assert gap >= abs(off) / math.sqrt(2) - 1e-9


def test_scan_exact_blocked_along_level_normal():
    report = surrounding_line_scan(EXACT3, (0, 0, 0), 2, 0.3, 60000)
    assert report.fraction_reached <= 1 / 32


def test_scan_gap_trend_reported():
    report = surrounding_line_scan(CONTACT, (0, 0, 0), 2, 0.3, 50000)
    assert len(report.gaps_at_half_budget) == len(report.gaps) == 32
    for g, h in zip(report.gaps, report.gaps_at_half_budget):
        assert g <= h + 1e-12  # gaps can only shrink with more budget
