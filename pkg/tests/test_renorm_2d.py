# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from src.dynamics import QuadraticMap, henon
from src.errors import ContinuationError
from src.renorm_1d import renorm_1d
from src.renorm_2d import (_roots_on_diagonal, boundary_map, boundary_of_chaos_param, boundary_scan,
                           continue_cycle, critical_point, determinant_law, fixed_point, renorm_sequence,
                           renormalize, shape_residual, thinness, valuable_chart_fit, valuable_chart_residual)


def test_critical_point_of_plain_henon():
    assert critical_point(henon(-1.3, 0.1)) == pytest.approx(0.0, abs=1e-12)


def test_root_on_grid_node_survives_rounding():
    def wobbly(xs):
        return xs + (1e-15 if len(xs) > 1 else -1e-15)

    roots = _roots_on_diagonal(henon(-1.3, 0.1), wobbly)
    assert len(roots) == 1
    assert roots[0] == pytest.approx(0.0, abs=1e-12)


def test_fixed_point_on_diagonal():
    F = henon(-1.3, 0.1)
    p = fixed_point(F)
    assert p[0] == p[1]
    assert np.allclose(F.eval(p), p, atol=1e-12)


def test_boundary_at_zero_matches_1d(a_star_1d):
    point = boundary_of_chaos_param(0.0, max_level=10)
    assert point.a_star == pytest.approx(a_star_1d, abs=1e-8)


def test_boundary_continuation_moves_parameter(boundary_point):
    zero = boundary_of_chaos_param(0.0, max_level=6)
    assert boundary_point.a_star != zero.a_star
    assert boundary_point.residual < 1e-10
    assert len(boundary_point.level_params) == 7


def test_boundary_rejects_large_b():
    with pytest.raises(ContinuationError):
        boundary_of_chaos_param(0.3)


def _cycle_trace(x, b):
    M = np.eye(2)
    for xk in x:
        M = np.array([[2.0 * xk, -b], [1.0, 0.0]]) @ M
    return np.trace(M)


def test_continued_cycle_has_zero_trace():
    z, residual = continue_cycle(2, 0.05)
    assert residual < 1e-10
    x, a = z[:-1], z[-1]
    F = henon(a, 0.05)
    p = np.array([x[0], x[-1]])
    for _ in range(4):
        p = F.eval(p)
    assert p[0] == pytest.approx(x[0], abs=1e-9)
    assert _cycle_trace(x, 0.05) == pytest.approx(0.0, abs=1e-9)


def test_continued_cycle_keeps_its_period():
    z, residual = continue_cycle(4, 0.0885)
    x = z[:-1]
    assert residual < 1e-10
    assert np.max(np.abs(x[:8] - x[8:])) > 1e-3
    z8, _ = continue_cycle(3, 0.0885)
    assert z[-1] < z8[-1] - 1e-4


def test_boundary_levels_decrease(boundary_point):
    params = boundary_point.level_params
    assert all(later < earlier for earlier, later in zip(params, params[1:]))


def test_boundary_scan_lists_points():
    points = boundary_scan([0.0, 0.02], max_level=4)
    assert [p.b for p in points] == [0.0, 0.02]


def test_degenerate_tower_matches_1d_renormalization():
    a = boundary_of_chaos_param(0.0, max_level=8).a_star
    tower = renorm_sequence(henon(a, 0.0), 3)
    xs = np.linspace(-1.0, 1.0, 33)
    for level in tower.levels:
        g = level.map.eval_many(np.column_stack((xs, np.zeros_like(xs))))[:, 0]
        assert np.max(np.abs(g - renorm_1d(QuadraticMap(a), level.n)(xs))) < 1e-8
        assert level.log_delta == -math.inf


def test_renormalization_is_henon_like(boundary_henon):
    G, length = renormalize(boundary_henon)
    assert 0 < length < 1
    assert shape_residual(G) < 1e-9
    assert G.eval((0.0, 0.0))[0] == pytest.approx(-1.0, abs=1e-9)


def test_determinant_law_at_fixed_point(boundary_henon):
    G, _ = renormalize(boundary_henon)
    law = determinant_law(G)
    assert law.expected == pytest.approx(2 * math.log(0.1))
    assert law.relative_error < 1e-6


def test_thinness_grows_super_exponentially():
    F = henon(boundary_of_chaos_param(0.2, max_level=6).a_star, 0.2)
    tower = renorm_sequence(F, 3, precision="compensated")
    deltas = tower.log_deltas
    for n in range(1, len(deltas)):
        assert 1.7 < deltas[n] / deltas[n - 1] < 2.3
    assert thinness(tower[1].map, precision="compensated") == pytest.approx(deltas[0], abs=0.5)


def test_valuable_chart_residual_small_for_degenerate_level():
    a = boundary_of_chaos_param(0.0, max_level=6).a_star
    G, _ = renormalize(henon(a, 0.0))
    fit = valuable_chart_fit(G)
    assert fit.residual < 1e-12


def test_valuable_chart_residual_from_tower():
    a = boundary_of_chaos_param(0.0, max_level=6).a_star
    F = henon(a, 0.0)
    tower = renorm_sequence(F, 2)
    assert valuable_chart_residual(F, 2, tower=tower) < 1e-12


def test_valuable_chart_residual_is_relative_to_the_profile():
    F = henon(-1.3, 0.1)
    spread = 0.1 * 0.98 * F.domain.half_widths[1]
    exact = valuable_chart_fit(F, degree=4)
    rough = valuable_chart_fit(F, degree=1)
    assert exact.profile_error < 1e-9
    assert rough.profile_error > 1e-3
    assert exact.residual == pytest.approx(spread, rel=1e-9)
    assert rough.residual == pytest.approx(spread, rel=1e-9)


def test_boundary_map_uses_the_continued_parameter():
    F = boundary_map(0.0, max_level=6)
    assert F.henon_parameters == (boundary_of_chaos_param(0.0, max_level=6).a_star, 0.0)
