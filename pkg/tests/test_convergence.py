import math

import numpy as np
import pytest

from convergence import (TestFunction, cesaro_mean, distribution_function, distribution_ladder, interval_mass,
                         moment_integral, outside_mass, rank_one_gap, scan_infinite_volume, weighted_integral)
from errors import DomainError, ExclusionZoneError, SignSplitError, TailError
from solutions import Geometry
from ssf import SpectralShiftGrid, xi_halfline_phase


def plateau(a, b, height=-1.0, lo=-3.0, hi=10.0):
    """Counting grid equal to `height` on [a, b) and 0 elsewhere, with fine cells so the quadrature is exact enough."""
    lambdas = np.concatenate([[lo], np.linspace(a, b, 41), np.linspace(b, hi, 41)[1:]])
    values = np.concatenate([[0.0], np.full(40, height), np.zeros(41)])
    return SpectralShiftGrid(lambdas, values, "counting", Geometry.interval(5.0), (0.0, 0.0), None, lo)


def test_zero_grid_integrates_to_zero():
    xi = SpectralShiftGrid(np.linspace(-1.0, 10.0, 12), np.zeros(12), "counting", Geometry.interval(5.0), (0.0, 0.0),
                           None, -1.0)
    for kind in ("constant", "gaussian", "sigmoid"):
        assert weighted_integral(xi, TestFunction(kind)) == 0.0
    assert interval_mass(xi, 0.0, 2.0) == 0.0


def test_constant_weight_closed_form():
    xi = plateau(-0.5, 2.0)
    expected = -(math.atan(2.0) - math.atan(-0.5))
    assert weighted_integral(xi, TestFunction("constant")) == pytest.approx(expected, rel=1e-10)


def test_indicator_closed_form():
    xi = plateau(-0.5, 2.0)
    f = TestFunction("indicator", {"E1": 0.0, "E2": 1.0})
    assert weighted_integral(xi, f) == pytest.approx(-(math.atan(1.0) - math.atan(0.0)), rel=1e-10)


def test_folded_tent_is_unweighted():
    xi = plateau(-0.5, 2.0)
    f = TestFunction("tent", {"E1": 0.0, "E2": 2.0}, fold_weight=True)
    # ∫ tent over [0, 2] with ξ = -1
    assert weighted_integral(xi, f) == pytest.approx(-1.0, rel=1e-10)


def test_moment_matches_weighted_integral():
    xi = plateau(-0.5, 2.0)
    moment = moment_integral(xi, 1j, -1j, 1)
    assert moment.real == pytest.approx(weighted_integral(xi, TestFunction("constant")), rel=1e-10)
    assert abs(moment.imag) < 1e-14


def test_moment_rejects_real_point_in_grid():
    with pytest.raises(DomainError):
        moment_integral(plateau(-0.5, 2.0), -10.0, 1.0, 1)


def test_moment_accepts_real_points_below_the_anchor():
    xi = plateau(-0.5, 2.0)
    expected = -(math.log(6.0 / 7.0) - math.log(3.5 / 4.5))
    assert moment_integral(xi, -4.0, -5.0, 1) == pytest.approx(expected, rel=1e-10)
    with pytest.raises(DomainError):
        moment_integral(xi, -3.0, -5.0, 1)


def test_interval_mass():
    xi = plateau(-0.4, 0.0)
    assert interval_mass(xi, -1.0, 0.0) == pytest.approx(-0.4, rel=1e-10)
    assert interval_mass(xi, -1.0, -0.2) + interval_mass(xi, -0.2, 0.0) == pytest.approx(-0.4, rel=1e-10)
    with pytest.raises(DomainError):
        interval_mass(xi, -5.0, 0.0)


def test_distribution_function():
    xi = plateau(0.0, 1.0, height=1.0)
    assert distribution_function(xi, -3.0) == 0.0
    ladder = distribution_ladder(xi, [-1.0, 0.5, 1.0, 5.0])
    assert np.all(np.diff(ladder) >= 0)
    assert ladder[-1] == pytest.approx(math.atan(1.0), rel=1e-10)
    assert ladder[-1] == pytest.approx(weighted_integral(xi, TestFunction("constant")), rel=1e-10)


def test_negative_part_is_rejected():
    with pytest.raises(SignSplitError):
        distribution_function(plateau(0.0, 1.0, height=-1.0), 2.0)


def test_sign_split_tools_need_a_normalized_grid():
    xi = SpectralShiftGrid(np.array([0.0, 1.0, 2.0]), np.array([1.0, 1.0, 0.0]), "counting", Geometry.interval(5.0),
                           (0.0, 0.0), None, -1.0)
    with pytest.raises(TailError):
        distribution_function(xi, 1.5)
    with pytest.raises(TailError):
        outside_mass(xi, 0.5, 1.5)


def test_outside_mass():
    xi = plateau(0.0, 1.0, height=1.0)
    assert outside_mass(xi, -1.0, 2.0) == 0.0
    assert outside_mass(xi, 0.5, 2.0) == pytest.approx(math.atan(0.5), rel=1e-10)


def test_tail_bound_is_enforced():
    xi = SpectralShiftGrid(np.array([-1.0, 0.0, 1.0]), np.array([0.0, 1.0, 1.0]), "counting", Geometry.interval(5.0),
                           (0.0, 0.0), None, -1.0)
    with pytest.raises(TailError):
        weighted_integral(xi, TestFunction("constant"))
    with pytest.raises(TailError):
        weighted_integral(xi, TestFunction("indicator", {"E1": 0.0, "E2": 3.0}))


def test_test_function_validation():
    with pytest.raises(DomainError):
        TestFunction("cubic")
    with pytest.raises(DomainError):
        TestFunction("gaussian", fold_weight=True)
    with pytest.raises(DomainError):
        TestFunction("indicator", {"E1": 1.0, "E2": 0.0})
    assert TestFunction("gaussian", {"width": 2.0}).label == "gaussian(width=2)"


def test_rank_one_gap():
    assert rank_one_gap(50, 1000, seed=3) <= 1e-12
    assert rank_one_gap(50, 200, seed=3) == rank_one_gap(50, 200, seed=3)
    with pytest.raises(DomainError):
        rank_one_gap(1, 10)


def test_cesaro_mean(zero, well):
    assert cesaro_mean(zero, 0.0, 0.0, 2.0, 10.0, 20) == 0.0
    with pytest.raises(ExclusionZoneError):
        cesaro_mean(well, 0.0, 0.0, 1e-4, 10.0, 20)
    with pytest.raises(DomainError):
        cesaro_mean(well, 0.0, 0.0, 2.0, 10.0, 0)


def test_scan_zero_potential(zero):
    report = scan_infinite_volume(zero, 0.0, 0.0, [TestFunction("constant")], [2.0, 4.0], ladder=[0.0, 1.0])
    assert report.errors == []
    assert report.R_values == [2.0, 4.0]
    assert all(row["error"] == 0.0 for row in report.rows)
    frame = report.to_frame()
    assert list(frame.columns) == ["R", "quantity", "value", "reference", "error"]
    assert "det_gap" in report.quantities()
    assert all(value == 0.0 for value in report.reference_spread.values())
    assert all(report.monotone.values())


def test_scan_rejects_unsorted_lengths(zero):
    with pytest.raises(DomainError):
        scan_infinite_volume(zero, 0.0, 0.0, [TestFunction("constant")], [4.0, 2.0])


@pytest.mark.slow
def test_square_well_scan(well):
    fs = [TestFunction("constant"), TestFunction("gaussian", {"center": 1.0, "width": 2.0}),
          TestFunction("sigmoid", {"center": 1.0}),
          TestFunction("mollified-indicator", {"E1": 0.0, "E2": 1.0, "width": 0.5})]
    report = scan_infinite_volume(well, 0.0, 0.0, fs, [5.0, 10.0, 20.0, 40.0], threads=2)
    assert report.errors == []
    for f in fs:
        quantity = f"weighted:{f.label}"
        errors = report.error_sequence(quantity)
        spread = report.reference_spread[quantity]
        assert spread < 1e-4
        # every step decreases, up to the reference's spread
        for coarse, fine in zip(errors[:-1], errors[1:]):
            assert fine <= coarse + spread
        assert report.monotone[quantity]
        assert errors[-1] < 5e-2
    for quantity in ("mass:[-1,0]", "mass:[0,2]"):
        assert report.final_error(quantity) < 5e-2
    assert min(report.value_sequence("sup_gap")) >= 0.3
    gaps = report.value_sequence("det_gap")
    assert gaps[-1] < gaps[0]


@pytest.mark.slow
def test_square_well_cesaro(well):
    reference = xi_halfline_phase(well, 0.0, lambdas=[2.0]).values[-1]
    assert abs(cesaro_mean(well, 0.0, 0.0, 2.0, 40.0, 80) - reference) <= 0.1
