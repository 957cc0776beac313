# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from src.dynamics import linear_map
from src.errors import MembershipError, OrderOracleError
from src.odometer import (BLOWUP, PLAIN, BlowupOrder, Element, OdometerState, OrderedSample, OrderNode,
                          PieceIndex, PieceTracker, StrongStableOrder, blowup_compare, check_order_axioms,
                          combinatorial_components, connectedness_table, extremal_points, fiber_diameters,
                          odometer_add, order_preservation_check, project_pi, random_blowup_order,
                          semiconjugacy_check, symbolic_order_key)


class TestOdometer:
    def test_carry(self):
        assert odometer_add(OdometerState((1, 1, 0))).digits == (0, 0, 1)
        assert odometer_add(OdometerState((0, 1, 1))).digits == (1, 1, 1)

    def test_all_maximal_wraps_to_zero(self):
        assert odometer_add(OdometerState((1, 1, 1))) == OdometerState.zero(3)

    def test_mixed_radix_matches_integer_addition(self):
        radices = (2, 3, 4)
        modulus = OdometerState.zero(3, radices).modulus
        assert modulus == 24
        for value in range(modulus):
            state = OdometerState.from_integer(value, radices)
            assert state.to_integer() == value
            assert odometer_add(state).to_integer() == (value + 1) % modulus

    def test_invalid_digits(self):
        with pytest.raises(ValueError):
            OdometerState((2, 0))
        with pytest.raises(ValueError):
            OdometerState((0, 1), (2,))

    def test_dict_form(self):
        state = OdometerState.from_integer(5, (2, 2, 2))
        assert state.to_dict() == {"radices": [2, 2, 2], "digits": "101"}
        assert OdometerState.from_dict(state.to_dict()) == state
        assert state.truncate(2).digits == (1, 0)


class TestPieceIndex:
    def test_of_orbit_index(self):
        assert PieceIndex.of_orbit_index(5, 2) == PieceIndex(2, 2)
        assert PieceIndex.of_orbit_index(0, 0) == PieceIndex(0, 1)

    def test_nesting(self):
        piece = PieceIndex(2, 4)
        assert piece.parent() == PieceIndex(1, 2)
        assert PieceIndex(1, 2).contains(piece)
        assert not PieceIndex(1, 1).contains(piece)
        assert PieceIndex(0, 1).contains(piece)

    def test_range(self):
        with pytest.raises(ValueError):
            PieceIndex(1, 3)
        with pytest.raises(ValueError):
            PieceIndex(0, 1).parent()


def test_symbolic_order_key():
    assert symbolic_order_key(OdometerState((0, 0, 0))) == 0
    assert symbolic_order_key(OdometerState((1, 0, 0))) == 7
    assert symbolic_order_key(OdometerState((0, 0, 1))) == 1
    assert symbolic_order_key(OdometerState((1, 1, 0))) == 4
    keys = sorted(symbolic_order_key(OdometerState.from_integer(v, (2,) * 4)) for v in range(16))
    assert keys == list(range(16))


class TestSymbolicOrder:
    def test_pieces_are_connected(self):
        rows = connectedness_table(OrderedSample.symbolic(6), 5)
        assert rows
        assert all(r["components"] == 1 for r in rows)

    def test_components_validation(self):
        sample = OrderedSample.symbolic(4)
        with pytest.raises(ValueError):
            combinatorial_components(sample, 2, 2, 1, 0)
        with pytest.raises(ValueError):
            combinatorial_components(sample, 1, 2, 1, 2)

    def test_extremal_points(self):
        sample = OrderedSample.symbolic(6)
        for n in range(1, 5):
            ext = extremal_points(sample, n)
            assert ext.low_index == 0
            assert ext.high_index == 2 ** n
            assert ext.low is None

    def test_extremal_points_need_piece(self):
        sample = OrderedSample(np.array([1, 3]), np.array([0.0, 1.0]))
        with pytest.raises(OrderOracleError):
            extremal_points(sample, 1)

    def test_order_preserved_off_the_critical_piece(self):
        report = order_preservation_check(OrderedSample.symbolic(6), 3)
        assert report.passed
        assert set(report.orientations) >= set(range(1, 8))
        assert report.to_dict()["passed"] is True

    def test_fiber_diameters_follow_the_dyadic_pieces(self):
        m = np.arange(8)
        xs = sum(((m >> k) & 1) * 2.0 ** -k for k in range(3))
        sample = OrderedSample(m, xs.astype(float), np.column_stack((xs, np.zeros(8))))
        result = fiber_diameters(sample, [1, 2, 3])
        assert [r["max_diameter"] for r in result["rows"]] == pytest.approx([0.75, 0.25, 0.0])
        assert result["log_decay_rate"] == pytest.approx(-math.log(3.0))

    def test_fiber_diameters_need_points(self):
        with pytest.raises(ValueError):
            fiber_diameters(OrderedSample.symbolic(3), [1, 2])


class TestBlowupOrder:
    @pytest.fixture
    def small(self):
        inner = OrderNode([Element(PLAIN, 1), Element(PLAIN, 2)])
        return BlowupOrder(OrderNode([Element(PLAIN, 0), Element(BLOWUP, child=inner), Element(PLAIN, 3),
                                      Element(BLOWUP)]))

    def test_leaves_and_limits(self, small):
        assert small.leaves() == [(0,), (1, 0), (1, 1), (2,), (3,)]
        assert len(small) == 5
        assert small.is_limit((3,))
        assert not small.is_limit((2,))
        with pytest.raises(KeyError):
            small.element((1,))

    def test_compare(self, small):
        assert blowup_compare(small, (1, 0), (2,)) == "lt"
        assert blowup_compare(small, (0,), (1, 1)) == "lt"
        assert blowup_compare(small, (1, 1), (1, 0)) == "gt"
        assert blowup_compare(small, (3,), (3,)) == "eq"

    def test_invalid_trees(self):
        with pytest.raises(ValueError):
            BlowupOrder(OrderNode([]))
        with pytest.raises(ValueError):
            BlowupOrder(OrderNode([Element(PLAIN, child=OrderNode([Element(PLAIN)]))]))

    def test_random_orders_satisfy_axioms(self, rng):
        for _ in range(20):
            order = random_blowup_order(rng, max_leaves=60)
            report = check_order_axioms(order, rng, triples=200)
            assert report.violations == 0
            assert report.to_dict()["leaves"] == len(order)


@pytest.fixture
def rotation():
    """Period-8 rotation with its orbit as the tracked points."""
    theta = 2 * math.pi / 8
    R = [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    angles = theta * np.arange(8)
    points = np.column_stack((np.cos(angles), np.sin(angles)))
    return linear_map(R), points


class TestPieceTracker:
    def test_projection(self, rotation):
        R, points = rotation
        tracker = PieceTracker(R, points)
        assert len(tracker) == 8
        assert project_pi(tracker, points[5], 3).digits == (1, 0, 1)
        with pytest.raises(MembershipError):
            tracker.project(0.5 * (points[0] + points[1]), 3)

    def test_rotation_is_semiconjugate_to_adding_machine(self, rotation):
        R, points = rotation
        report = semiconjugacy_check(PieceTracker(R, points), points, 3)
        assert report.violations == 0
        assert report.checked == 8
        assert report.escaped == 0

    def test_mostly_ambiguous_sample_is_rejected(self, rotation):
        R, points = rotation
        midpoints = 0.5 * (points + np.roll(points, -1, axis=0))
        with pytest.raises(MembershipError):
            semiconjugacy_check(PieceTracker(R, points), np.vstack((midpoints, points[:1])), 3)

    def test_ambiguity_budget_is_configurable(self, rotation):
        R, points = rotation
        sample = np.vstack((points, 0.5 * (points[0] + points[1])))
        report = semiconjugacy_check(PieceTracker(R, points), sample, 3, max_ambiguous=0.2)
        assert report.checked == 8
        assert report.ambiguous == 1
        with pytest.raises(MembershipError):
            semiconjugacy_check(PieceTracker(R, points), sample, 3)

    def test_wrong_rotation_violates(self, rotation):
        R, points = rotation
        report = semiconjugacy_check(PieceTracker(R.power(2), points), points, 3)
        assert report.violations == 8


class TestStrongStableOrder:
    def test_saddle_orders_by_abscissa(self):
        L = linear_map([[2.0, 0.0], [0.0, 0.5]])
        oracle = StrongStableOrder(L, 0.0)
        keys = oracle.keys([(0.3, 0.2), (-0.1, -0.4), (0.05, 0.0)])
        assert np.allclose(keys, [0.3, -0.1, 0.05])

    def test_shared_leaf_is_refused(self):
        L = linear_map([[2.0, 0.0], [0.0, 0.5]])
        with pytest.raises(OrderOracleError):
            StrongStableOrder(L, 0.0).keys([(0.3, 0.2), (0.3, -0.2)])

    def test_flat_leaves_are_refused(self):
        L = linear_map([[0.5, 0.0], [0.0, 2.0]])
        with pytest.raises(OrderOracleError):
            StrongStableOrder(L, 0.0).keys([(0.3, 0.2)])
