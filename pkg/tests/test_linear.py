import math

import numpy as np
import pytest

from cabee.numeric import adaptive_simpson, bisect_root
from cabee.applications import HypothesesUnmet
from cabee.applications.linear import (
    COMPLEMENTS,
    SUBSTITUTES,
    LinearFamilySpec,
    conditional_mean,
    equal_split_endpoints,
    equidistant_partition,
    equidistant_residuals,
    figure_curves,
    figure_spec,
    linear_abee,
    linear_cabee_window,
    linear_local_check,
    nash_action,
)

FIG1A = figure_spec("fig1a")


def test_adaptive_simpson_on_known_integrals():
    assert adaptive_simpson(lambda x: x**2, 0, 1) == pytest.approx(1 / 3, abs=1e-12)
    assert adaptive_simpson(math.sin, 0, math.pi) == pytest.approx(2.0, abs=1e-10)


def test_bisect_root_simple():
    assert bisect_root(lambda x: x**2 - 2, 0, 2, tol=1e-12) == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError):
        bisect_root(lambda x: x + 5, 0, 1)


def test_spec_validation():
    with pytest.raises(ValueError):
        LinearFamilySpec(1.0, 1.0, 1.2)
    with pytest.raises(ValueError):
        LinearFamilySpec(1.0, 1.0, 0.5, regime="sideways")


def test_conditional_mean_uniform_and_triangular():
    spec = LinearFamilySpec(1.0, 1.0, 0.8)
    assert conditional_mean(spec, 0.2, 0.6) == pytest.approx(0.4, abs=1e-10)
    tri = LinearFamilySpec(1.0, 1.0, 0.8, density=lambda m: 2 * m)
    assert conditional_mean(tri, 0.0, 1.0) == pytest.approx(2 / 3, abs=1e-10)
    with pytest.raises(ValueError):
        conditional_mean(spec, 0.5, 0.5)


def test_class_line_closed_form_values():
    lines = linear_abee(FIG1A, [0, 0.25, 0.5, 0.75, 1])
    assert lines[0].mean == pytest.approx(1 / 8, abs=1e-10)
    assert lines[0].beta == pytest.approx(1.25, abs=1e-10)
    assert lines[0].slope == pytest.approx(2.0, abs=1e-10)
    # action line: 1 + 2*mu on the first class
    assert lines[0].action(0.2) == pytest.approx(1.4, abs=1e-10)


def test_constant_strategy_boundary_case():
    spec = LinearFamilySpec(2.0, -1.0, 0.5)  # B = -A*C
    lines = linear_abee(spec, [0, 0.5, 1])
    for line in lines:
        assert line.slope == pytest.approx(0.0, abs=1e-10)
        assert line.beta == pytest.approx(spec.A, abs=1e-10)


def test_singleton_limit_approaches_per_game_equilibrium():
    mu = 0.6
    for width in (1e-3, 1e-5):
        endpoints = [0, mu - width, mu + width, 1]
        lines = linear_abee(FIG1A, endpoints)
        assert lines[1].beta == pytest.approx(nash_action(FIG1A, mu), abs=2 * width * 10)


def test_self_consistency_random_partitions(rng):
    """The class mean of the returned action line equals the class
    expectation, for both regimes."""
    for regime in (COMPLEMENTS, SUBSTITUTES):
        spec = LinearFamilySpec(1.2, 0.7, 0.6, regime=regime)
        lo, hi = spec.domain
        for _ in range(100):
            cuts = np.sort(rng.uniform(lo, hi, size=int(rng.integers(1, 4))))
            endpoints = [lo, *cuts, hi]
            if min(np.diff(endpoints)) < 1e-3:
                continue
            for line in linear_abee(spec, endpoints):
                mean_action = spec.A + line.mean * line.slope
                assert mean_action == pytest.approx(line.beta, abs=1e-9)


def test_equidistant_uniform_is_equal_split():
    for K in (2, 3, 4, 5):
        spec = LinearFamilySpec(1.0, 1.0, 0.8, K=K)
        pts = equidistant_partition(spec)
        np.testing.assert_allclose(pts, [k / K for k in range(K + 1)], atol=1e-10)
        assert max(abs(r) for r in equidistant_residuals(spec, pts)) <= 1e-9


def test_equidistant_triangular_density_golden_ratio():
    spec = LinearFamilySpec(1.0, 1.0, 0.8, density=lambda m: 2 * m, K=2)
    pts = equidistant_partition(spec)
    assert pts[1] == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-8)


def test_equidistant_single_class():
    spec = LinearFamilySpec(1.0, 1.0, 0.8, K=1)
    assert equidistant_partition(spec) == [0.0, 1.0]


def test_local_check_passes_at_figure1_parameters():
    for name in ("fig1a", "fig1b"):
        spec = figure_spec(name)
        chk = linear_local_check(spec, equidistant_partition(spec))
        assert chk.ok and chk.min_slack() > 0


def test_local_check_fails_everywhere_in_substitutes():
    for name in ("fig2a", "fig2b"):
        spec = figure_spec(name)
        chk = linear_local_check(spec, equal_split_endpoints(spec))
        assert not chk.ok
        assert all(min(s) < 0 for s in chk.boundary_slacks)


def test_substitutes_fail_for_random_interval_partitions(rng):
    spec = LinearFamilySpec(1.5, 1.0, 0.9, regime=SUBSTITUTES, K=3)
    failures = 0
    trials = 0
    while trials < 50:
        cuts = np.sort(rng.uniform(-1, 0, size=2))
        endpoints = [-1.0, *cuts, 0.0]
        if min(np.diff(endpoints)) < 0.02:
            continue
        trials += 1
        chk = linear_local_check(spec, endpoints)
        assert not chk.ok
        if all(min(s) < 0 for s in chk.boundary_slacks):
            failures += 1
    assert failures == 50  # every interior boundary is violated, every time


def test_single_interval_vacuously_clustered():
    spec = LinearFamilySpec(1.5, 1.0, 0.9, regime=SUBSTITUTES, K=1)
    chk = linear_local_check(spec, [-1.0, 0.0])
    assert chk.ok and chk.boundary_slacks == []


def test_windows_strictly_contain_equidistant_points():
    spec = figure_spec("fig1a")
    pts = equidistant_partition(spec)
    wins = linear_cabee_window(spec, pts)
    assert len(wins) == 3
    for (lo, hi), mu in zip(wins, pts[1:-1]):
        assert lo < mu < hi


def test_windows_shrink_as_interaction_vanishes():
    """With a weaker coupling the admissible windows approach the slack of
    clustering the no-interaction action data."""
    widths = []
    for C in (0.8, 0.3, 0.05):
        spec = LinearFamilySpec(1.0, 1.0, C, K=2)
        wins = linear_cabee_window(spec, equidistant_partition(spec))
        widths.append(wins[0][1] - wins[0][0])
    assert widths[0] > widths[1] > widths[2]
    # at C -> 0 the window collapses toward the pure equidistant slack of
    # the dominant-choice data a(mu) = A + mu*B, which still has width > 0
    assert widths[-1] > 1e-3


def test_windows_reject_substitutes():
    with pytest.raises(HypothesesUnmet):
        linear_cabee_window(figure_spec("fig2a"))


def test_figure_curves_have_one_sided_jump_rows():
    spec = figure_spec("fig1a")
    rows = figure_curves(spec, [0, 0.25, 0.5, 0.75, 1], points_per_class=5)
    mus = [r[0] for r in rows]
    assert mus.count(0.25) == 2  # boundary appears from both sides
    left = [r for r in rows if r[0] == 0.25 and r[3] == 0][0]
    right = [r for r in rows if r[0] == 0.25 and r[3] == 1][0]
    assert right[2] > left[2]  # upward jump for the increasing complements case


@pytest.mark.parametrize(
    "name,direction",
    [("fig1a", +1), ("fig1b", -1)],
)
def test_complement_jump_directions(name, direction):
    spec = figure_spec(name)
    lines = linear_abee(spec, equal_split_endpoints(spec))
    for k in range(3):
        mu = lines[k].hi
        jump = (spec.A + mu * lines[k + 1].slope) - (spec.A + mu * lines[k].slope)
        assert jump * direction > 0


@pytest.mark.parametrize("name", ["fig2a", "fig2b"])
def test_substitute_jumps_oppose_slope(name):
    spec = figure_spec(name)
    lines = linear_abee(spec, equal_split_endpoints(spec))
    for k in range(3):
        mu = lines[k].hi
        jump = (spec.A + mu * lines[k + 1].slope) - (spec.A + mu * lines[k].slope)
        assert jump * lines[k].slope < 0
