# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from src.cocycle import OrbitCocycle
from src.critical import (CENTER, STRONG_STABLE, Chart, TunnelSpec, center_direction, closest_return_check,
                          component_triviality_check, distortion, find_critical_orbit, fit_normal_form,
                          local_manifold, pinching_check, retry_with_radius_halving, stable_manifold_properness,
                          strong_stable_direction, tangency_exponent, tunnel_membership, tunnel_membership_many,
                          uniformize_critical)
from src.dynamics import Box, Polyline, attractor_orbit, henon, linear_map
from src.errors import ChartRangeError, FitError, NoTangencyError, SampleError, ShrinkHint, SingularError


def test_saddle_has_no_tangency():
    L = linear_map([[2.0, 0.0], [0.0, 0.5]])
    sample = OrbitCocycle.constant([[2.0, 0.0], [0.0, 0.5]], 400)
    with pytest.raises(NoTangencyError):
        find_critical_orbit(L, sample)


def test_strong_stable_direction_of_saddle_is_vertical():
    L = linear_map([[2.0, 0.0], [0.0, 0.5]])
    e = strong_stable_direction(L, (0.1, 0.2), 10)
    assert abs(e[0]) < 1e-12
    assert e[1] == pytest.approx(1.0)


def test_center_direction_of_saddle_is_horizontal():
    L = linear_map([[2.0, 0.0], [0.0, 0.5]])
    assert np.allclose(center_direction(L, (0.1, 0.2), 10), [1.0, 0.0])
    with pytest.raises(SingularError):
        center_direction(henon(-1.3, 0.0), (0.1, 0.2), 5)


def test_center_direction_from_history():
    L = linear_map([[2.0, 0.0], [0.0, 0.5]])
    history = [(2.0 ** -k, 0.0) for k in range(30, -1, -1)]
    assert np.allclose(center_direction(L, (1.0, 0.0), 20, history=history), [1.0, 0.0], atol=1e-10)


def test_local_manifolds_of_saddle_are_straight():
    L = linear_map([[2.0, 0.0], [0.0, 0.5]])
    ss = local_manifold(L, (0.0, 0.1), STRONG_STABLE, 0.2, steps=16)
    assert np.allclose(ss.vertices[:, 0], 0.0)
    assert ss.length == pytest.approx(0.2)
    wc = local_manifold(L, (0.1, 0.0), CENTER, 0.2, steps=16)
    assert np.allclose(wc.vertices[:, 1], 0.0)
    with pytest.raises(ValueError):
        local_manifold(L, (0.1, 0.0), "unstable", 0.2)


def test_stable_manifold_of_saddle_is_proper():
    L = linear_map([[2.0, 0.0], [0.0, 0.5]])
    result = stable_manifold_properness(L, (0.3, 0.0), Box((0.0, 0.0), (1.0, 1.0)))
    assert result["proper"]
    assert sorted(result["exits"]) == ["bottom", "top"]


class TestChart:
    def test_identity_chart_translates(self):
        chart = Chart.identity(center=(1.0, 2.0), valid_radius=1.0)
        assert np.allclose(chart((1.5, 2.5)), [[0.5, 0.5]])
        assert np.allclose(chart.jacobian((1.5, 2.5))[0], np.eye(2))
        assert np.allclose(chart.inverse((0.5, 0.5)), [[1.5, 2.5]])

    def test_identity_chart_range(self):
        chart = Chart.identity(center=(1.0, 2.0), valid_radius=1.0)
        with pytest.raises(ChartRangeError):
            chart((3.0, 2.0))
        assert np.allclose(chart((3.0, 2.0), check=False), [[2.0, 0.0]])


class TestTunnel:
    def test_membership(self):
        spec = TunnelSpec(1.5, 0.5, Chart.identity())
        assert tunnel_membership(spec, (0.25, 0.1))
        assert not tunnel_membership(spec, (0.25, 0.2))
        assert not tunnel_membership(spec, (0.6, 0.0))
        assert tunnel_membership_many(spec, [(0.25, 0.1), (-0.25, -0.1), (0.0, 0.0)]).tolist() == [True, True, False]

    def test_invalid_tunnels(self):
        with pytest.raises(ValueError):
            TunnelSpec(1.0, 0.5, Chart.identity())
        with pytest.raises(ValueError):
            TunnelSpec(1.5, 0.5, Chart.identity(), side="bogus")


class TestRadiusHalving:
    def test_retries_then_fails(self):
        calls = []

        @retry_with_radius_halving(max_retries=2)
        def fit(*, rho):
            calls.append(rho)
            raise ShrinkHint("too rough", suggested_radius=rho / 2, residual=1.0)

        with pytest.raises(FitError) as info:
            fit(rho=0.4)
        assert calls == [0.4, 0.2, 0.1]
        assert info.value.details["radius"] == pytest.approx(0.1)
        assert info.value.details["residual"] == pytest.approx(1.0)
        assert isinstance(info.value.__cause__, ShrinkHint)

    def test_succeeds_after_shrinking(self):
        @retry_with_radius_halving(max_retries=3)
        def fit(*, rho):
            if rho > 0.1:
                raise ShrinkHint("too rough", suggested_radius=rho / 2, residual=1.0)
            return rho

        assert fit(rho=0.4) == pytest.approx(0.1)


def test_linear_map_has_no_distortion():
    L = linear_map([[2.0, 0.0], [0.0, 0.5]])
    report = distortion(L, Polyline([(0.0, 0.0), (0.5, 0.0), (1.0, 0.0)]), 3)
    assert report.log_distortion == pytest.approx(0.0, abs=1e-12)
    assert report.lengths == pytest.approx((2.0, 4.0, 8.0))
    assert report.total_length == pytest.approx(14.0)
    assert report.distortion == pytest.approx(1.0)


def test_components_along_a_curve_are_trivial():
    s = np.linspace(0.0, 1.0, 200)
    pts = np.column_stack((s, 0.1 * s))
    fits = component_triviality_check(pts, 0.05)
    assert len(fits) == 1
    assert fits[0].size == 200
    assert fits[0].diameter == pytest.approx(math.hypot(1.0, 0.1))
    assert fits[0].deviation < 1e-10


def test_isolated_points_form_no_wide_cluster():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 2.0]])
    assert component_triviality_check(pts, 0.1) == []


@pytest.mark.slow
class TestCriticalOrbit:
    def test_orbit_steps_from_c0_to_c1(self, boundary_henon, critical):
        assert np.allclose(boundary_henon.eval(critical.c0), critical.c1, atol=1e-9)
        assert np.allclose(critical.point(0), critical.c0)
        lo, hi = critical.index_range
        assert lo < 0 < hi

    def test_splitting_degenerates_at_c0(self, critical):
        assert critical.splitting_angle < 0.1
        assert 0 < critical.lambda_est < 1

    def test_returns_are_not_periodic(self, critical):
        report = closest_return_check(critical, 1024)
        assert not report.periodic
        assert report.kappa > 0
        assert len(report.dyadic_distances) == 11
        assert report.dyadic_monotone


class TestDegenerateCriticalStructure:
    def test_critical_point_sits_on_the_fold(self, degenerate_critical):
        assert abs(degenerate_critical.c0[0]) < 1e-6
        assert 1.8 <= degenerate_critical.tangency_exponent <= 2.2
        assert degenerate_critical.tangency_r2 > 0.99

    def test_tangency_is_quadratic(self, degenerate_henon, degenerate_critical):
        exponent, r2 = tangency_exponent(degenerate_henon, degenerate_critical)
        assert exponent == pytest.approx(2.0, abs=0.1)
        assert r2 > 0.99

    def test_unfitted_tangency_is_rejected(self, degenerate_henon, monkeypatch):
        sample = attractor_orbit(degenerate_henon, 4096)
        monkeypatch.setattr("src.critical.tangency_exponent", lambda *args, **kwargs: (1.0, 0.5))
        with pytest.raises(NoTangencyError):
            find_critical_orbit(degenerate_henon, sample, forward=256)

        def no_offsets(*args, **kwargs):
            raise ValueError("too few usable offsets for the tangency fit")

        monkeypatch.setattr("src.critical.tangency_exponent", no_offsets)
        with pytest.raises(NoTangencyError):
            find_critical_orbit(degenerate_henon, sample, forward=256)

    def test_normal_form_is_exact(self, degenerate_henon, degenerate_critical):
        nf = fit_normal_form(degenerate_henon, degenerate_critical, 4)
        assert nf.lam == 0.0
        assert nf.residual < 1e-8
        assert nf.chart0.valid_radius == pytest.approx(0.05)
        assert nf.chart0.center[0] == pytest.approx(0.0, abs=1e-14)
        assert list(nf.chart1.center) == pytest.approx(degenerate_henon.eval(nf.chart0.center).tolist(), abs=1e-14)

    def test_uniformize_keeps_the_radius(self, degenerate_henon, degenerate_critical):
        nf = uniformize_critical(degenerate_henon, degenerate_critical, 4, rho=0.05)
        assert nf.residual < 1e-8
        assert nf.chart0.valid_radius == pytest.approx(0.05)
        with pytest.raises(ChartRangeError):
            nf.chart0(degenerate_critical.c0 + np.array([1.0, 0.0]))

    def test_limit_set_lies_in_the_tunnel(self, degenerate_henon, degenerate_critical):
        co = degenerate_critical
        nf = fit_normal_form(degenerate_henon, co, 4)
        pts = co.orbit.points[co.orbit.offset:]
        report = pinching_check(degenerate_henon, co, nf, pts, omega=1.5)
        assert report.n_points >= 200
        assert report.fraction >= 0.99
        assert report.omega_hat > 1

    def test_pinching_needs_points_near_c0(self, degenerate_henon, degenerate_critical):
        co = degenerate_critical
        nf = fit_normal_form(degenerate_henon, co, 4)
        with pytest.raises(SampleError):
            pinching_check(degenerate_henon, co, nf, co.orbit.points[co.orbit.offset:][:50])

    def test_dyadic_returns_shrink(self, degenerate_critical):
        report = closest_return_check(degenerate_critical, 64)
        assert report.dyadic_monotone
        assert report.dyadic_distances[0] > report.dyadic_distances[1]
