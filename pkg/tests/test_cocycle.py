# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from src.cocycle import OrbitCocycle


@pytest.fixture
def diagonal():
    return OrbitCocycle.constant([[2.0, 0.0], [0.0, 0.5]], 200)


def test_singular_values_of_diagonal_product(diagonal):
    log_s1, log_s2 = diagonal.log_singular_values()
    assert log_s1 == pytest.approx(200 * math.log(2.0), rel=1e-12)
    assert log_s2 == pytest.approx(-200 * math.log(2.0), rel=1e-12)


def test_singular_values_match_svd_on_short_random_product(rng):
    jacs = rng.normal(size=(20, 2, 2))
    orbit = OrbitCocycle(np.zeros((21, 2)), jacs)
    expected = np.log(np.linalg.svd(orbit.product(0, 20), compute_uv=False))
    log_s1, log_s2 = orbit.log_singular_values()
    assert log_s1 == pytest.approx(expected[0], rel=1e-9)
    assert log_s2 == pytest.approx(expected[1], rel=1e-9)


def test_splitting_of_diagonal_cocycle(diagonal):
    center = diagonal.center_direction(100)
    ess = diagonal.strong_stable_direction(100)
    assert abs(center[1]) < 1e-12
    assert abs(ess[0]) < 1e-12
    assert diagonal.splitting_angles()[100] == pytest.approx(math.pi / 2)


def test_forward_and_backward_log_norms(diagonal):
    fwd = diagonal.log_norms_forward(100, (1.0, 0.0), 10)
    assert np.allclose(fwd, np.arange(1, 11) * math.log(2.0))
    back = diagonal.log_norms_backward(100, (0.0, 1.0), 10)
    assert np.allclose(back, np.arange(1, 11) * math.log(2.0))


def test_center_log_stretch(diagonal):
    assert diagonal.center_log_stretch(100, 50) == pytest.approx(50 * math.log(2.0))


def test_inverse_product_undoes_product(diagonal):
    prod = diagonal.product(90, 10)
    inv = diagonal.inverse_product(100, 10)
    assert np.allclose(inv @ prod, np.eye(2))


def test_log_det_sum_degenerate_step():
    jacs = np.array([[[1.0, 0.0], [1.0, 0.0]]] * 3)
    orbit = OrbitCocycle(np.zeros((4, 2)), jacs)
    assert orbit.log_det_sum(0, 3) == -math.inf


def test_range_is_checked(diagonal):
    with pytest.raises(IndexError):
        diagonal.product(150, 100)
