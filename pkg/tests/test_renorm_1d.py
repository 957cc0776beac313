# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from src.dynamics import QuadraticMap
from src.errors import DivisionError, NotRenormalizableError, SampleError
from src.renorm_1d import (accumulation_param, admissible_horizons, aitken, apriori_expansion_1d,
                           backward_critical_orbit, critical_orbit, feigenbaum_ratio, renorm_1d, renormalization_distances,
                           superstable_ladder, superstable_param, verify_1d_unicriticality)

FEIGENBAUM_A_STAR = -1.401155189092


def test_ladder_first_levels():
    ladder = superstable_ladder(2)
    assert ladder[0] == 0.0
    assert ladder[1] == -1.0
    assert ladder[2] == pytest.approx(-1.3107026413368, abs=1e-11)


def test_ladder_residuals_and_monotonicity():
    ladder = superstable_ladder(8)
    assert all(abs(e.residual) < 1e-12 for e in ladder.entries)
    assert all(x > y for x, y in zip(ladder.params, ladder.params[1:]))


def test_feigenbaum_ratios():
    ladder = superstable_ladder(8)
    r5, r6 = feigenbaum_ratio(ladder, 5), feigenbaum_ratio(ladder, 6)
    assert abs(r5 - r6) < 0.05
    assert 4.6 < r5 < 4.75 and 4.6 < r6 < 4.75
    with pytest.raises(DivisionError):
        feigenbaum_ratio(ladder, 1)


def test_compensated_ladder_agrees():
    assert superstable_param(6, precision="compensated") == pytest.approx(superstable_param(6), abs=1e-11)


def test_accumulation_param(a_star_1d):
    assert a_star_1d == pytest.approx(FEIGENBAUM_A_STAR, abs=1e-9)


def test_aitken_on_geometric_sequence():
    assert aitken(1.0, 1.5, 1.75) == pytest.approx(2.0)
    with pytest.raises(DivisionError):
        aitken(1.0, 2.0, 3.0)


def test_renorm_normalization(a_star_1d):
    g = renorm_1d(QuadraticMap(a_star_1d), 3)
    assert float(g(0.0)) == pytest.approx(-1.0)
    assert float(g.derivative(0.0)) == pytest.approx(0.0, abs=1e-12)


def test_renorm_level_zero_is_normalized_map():
    g = renorm_1d(QuadraticMap(-1.2), 0)
    assert float(g(0.0)) == pytest.approx(-1.0)


def test_renormalization_converges(a_star_1d):
    dists = renormalization_distances(a_star_1d, 5)
    assert dists[-1] < dists[0]


def test_not_renormalizable_in_chaotic_regime():
    with pytest.raises(NotRenormalizableError):
        renorm_1d(QuadraticMap(-1.9), 1)


def test_critical_orbit_is_read_only():
    orbit = critical_orbit(-1.0, 4)
    assert list(orbit) == [0.0, -1.0, 0.0, -1.0, 0.0]
    with pytest.raises(ValueError):
        orbit[0] = 1.0


def test_backward_critical_orbit_maps_forward(a_star_1d):
    back = backward_critical_orbit(a_star_1d, 8)
    f = QuadraticMap(a_star_1d)
    assert np.allclose(f(back[1:]), back[:-1], atol=1e-12)


def test_unicriticality_scan(a_star_1d):
    report = verify_1d_unicriticality(a_star_1d, 0.05, 0.1, 200, sample_size=2048)
    assert math.isfinite(report.L_min)
    assert report.admissible >= 100
    wider = verify_1d_unicriticality(a_star_1d, 0.1, 0.1, 200, sample_size=2048)
    assert wider.log_L_min <= report.log_L_min


def test_unicriticality_at_default_horizon(a_star_1d):
    report = verify_1d_unicriticality(a_star_1d, 0.05, 0.1, 1000, sample_size=4096)
    assert math.isfinite(report.L_min)
    assert report.admissible >= 100
    assert 0 <= report.full_horizon <= report.admissible


def test_admissible_horizons_stop_at_first_disk(a_star_1d):
    back = backward_critical_orbit(a_star_1d, 10)
    horizons = admissible_horizons(a_star_1d, np.array([0.0, back[3], 5.0]), 0.05, 0.01, 10)
    assert horizons[0] == 0
    assert 1 <= horizons[1] <= 3
    assert horizons[2] == 10


def test_unicriticality_needs_admissible_points(a_star_1d):
    with pytest.raises(SampleError):
        verify_1d_unicriticality(a_star_1d, 10.0, 0.1, 50, sample=[0.1, 0.2])


def test_apriori_expansion_is_at_most_one(a_star_1d):
    nu = apriori_expansion_1d(a_star_1d, 2, sample_size=200)
    assert 0.0 < nu <= 1.0
