# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from src.dynamics import (AffineRescale, Box, Polyline, QuadraticMap, backward_orbit, embed_1d, henon,
                          iterate_orbit, jacobian, linear_map)
from src.errors import DomainError, EscapeError, SingularError


def test_henon_eval_and_jacobian():
    F = henon(-1.4, 0.3)
    p = np.array([0.5, -0.2])
    assert np.allclose(F.eval(p), [0.25 - 1.4 + 0.06, 0.5])
    J = jacobian(F, p)
    assert np.allclose(J, [[1.0, -0.3], [1.0, 0.0]])
    _, _, logdet = F.apply(p[None, :])
    assert logdet[0] == pytest.approx(math.log(0.3))


def test_degenerate_map_has_minus_inf_log_det():
    G = embed_1d(QuadraticMap(-1.0))
    _, jac, logdet = G.apply(np.array([[0.3, 0.7]]))
    assert logdet[0] == -math.inf
    assert jac[0, 0, 1] == 0.0


def test_apply_outside_domain_raises():
    F = henon(-1.4, 0.3)
    with pytest.raises(DomainError):
        F.eval((10.0, 0.0))


def test_inverse_round_trip_single_point():
    F = henon(-1.3, 0.2)
    p = np.array([0.1, 0.4])
    back, _, logdet = F.apply_inverse(F.eval(p)[None, :])
    assert np.allclose(back[0], p, atol=1e-14)
    assert logdet[0] == pytest.approx(-math.log(0.2))


def test_degenerate_inverse_is_singular():
    with pytest.raises(SingularError):
        henon(-1.3, 0.0).apply_inverse(np.array([[0.0, 0.0]]))


def test_iterate_orbit_escape_reports_index():
    F = henon(-3.0, 0.3, half_width=3.0)
    with pytest.raises(EscapeError) as info:
        iterate_orbit(F, (2.5, 0.0), 50)
    assert info.value.index is not None and info.value.index >= 1


def test_iterate_orbit_log_det_sum_is_n_log_b():
    F = henon(-1.3, 0.2)
    orbit = iterate_orbit(F, (0.0, 0.0), 500)
    assert orbit.log_det_sum(0, 500) == pytest.approx(500 * math.log(0.2), rel=1e-14)


def test_chain_matches_fast_path():
    F = henon(-1.3, 0.2)
    composed = F.power(1)
    fast = iterate_orbit(F, (0.1, 0.0), 30)
    slow = iterate_orbit(composed, (0.1, 0.0), 30)
    assert np.allclose(fast.points, slow.points)
    assert np.allclose(fast.jacs, slow.jacs)


def test_power_jacobian_is_chain_rule_product():
    F = henon(-1.3, 0.2)
    p = np.array([0.2, 0.1])
    J2 = F.power(2).jacobian(p)
    assert np.allclose(J2, F.jacobian(F.eval(p)) @ F.jacobian(p))


def test_conjugation_by_rescale():
    F = henon(-1.3, 0.2)
    S = AffineRescale((0.1, 0.1), -2.0)
    G = F.conjugate(S)
    p = np.array([0.3, -0.2])
    expected = S.apply(F.eval_many(S.apply_inverse(p[None, :])[0]))[0][0]
    assert np.allclose(G.eval(p), expected)


def test_backward_orbit_returns_to_start():
    F = henon(-1.3, 0.2)
    orbit = iterate_orbit(F, (0.05, 0.0), 10)
    back = backward_orbit(F, orbit.points[-1], 10)
    assert np.allclose(back[0], orbit.points[0], atol=1e-6)


def test_linear_map_log_det():
    L = linear_map([[2.0, 0.0], [0.0, 0.25]])
    _, _, logdet = L.apply(np.array([[1.0, 1.0]]))
    assert logdet[0] == pytest.approx(math.log(0.5))


def test_box_grid_and_containment():
    box = Box((0.0, 1.0), (1.0, 0.5))
    grid = box.grid(5)
    assert grid.shape == (25, 2)
    assert box.contains(grid).all()
    assert not box.contains((0.0, 2.0))[0]
    with pytest.raises(DomainError):
        Box((0.0, 0.0), (0.0, 1.0))


def test_polyline_basics():
    line = Polyline([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)])
    assert line.length == pytest.approx(2.0)
    assert np.allclose(line.point_at(1.5), [[1.0, 0.5]])
    s, d = line.nearest((0.5, 0.2))
    assert s == pytest.approx(0.5) and d == pytest.approx(0.2)
    assert np.allclose(line.distance([(2.0, 1.0)]), [1.0])


def test_polyline_rejects_repeated_vertices():
    with pytest.raises(DomainError):
        Polyline([(0.0, 0.0), (0.0, 0.0)])
