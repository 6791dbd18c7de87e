import numpy as np
import pytest

from convergence import TestFunction, weighted_integral
from decomposition import (SplitGeometry, decoupled_free_green, krein_split_residual, split_correction_phase,
                           xi_direct_sum, xi_split_correction)
from errors import DomainError
from potential import Potential
from solutions import DIRICHLET
from ssf import xi_finite


@pytest.mark.parametrize("R1, R2", [(2.0, 1.0), (0.0, 1.0), (1.0, 1.0)])
def test_invalid_split(R1, R2):
    with pytest.raises(DomainError):
        SplitGeometry(R1, R2)


def test_pieces(bump):
    inner, outer = SplitGeometry(1.0, 3.0).pieces(bump)
    assert inner(0.5) == pytest.approx(bump(0.5))
    assert inner(1.5) == 0.0
    assert outer(0.5) == pytest.approx(bump(1.5))
    assert outer(2.5) == 0.0


def test_zero_potential(zero):
    split = SplitGeometry(1.0, 3.0)
    lambdas = np.linspace(-1.0, 10.0, 23)
    for grid in (xi_direct_sum(zero, split, lambdas), xi_split_correction(zero, split, lambdas),
                 split_correction_phase(zero, split, lambdas)):
        assert np.all(grid.values == 0.0)
    assert split_correction_phase(zero, split, lambdas).method == "phase"


def test_direct_sum_of_inner_potential(well):
    # the well sits inside (0, R1), so the outer piece carries no potential
    split = SplitGeometry(2.0, 4.0)
    direct = xi_direct_sum(well, split, lambda_max=30.0)
    alone = xi_finite(well, DIRICHLET, DIRICHLET, 2.0, direct.lambdas)
    np.testing.assert_array_equal(direct.values, alone.values)
    assert direct.label == "xi_direct_sum"


def test_correction_is_rank_one(bump):
    correction = xi_split_correction(bump, SplitGeometry(1.0, 3.0), lambda_max=60.0)
    values = correction.values
    assert np.all(values == np.round(values))
    assert set(np.unique(values)) <= {-1.0, 0.0, 1.0}


def test_correction_of_negative_bump():
    pot = Potential.gaussian_bump(-3.0, 2.0, 0.5)
    correction = xi_split_correction(pot, SplitGeometry(2.0, 4.0), lambda_max=60.0)
    assert np.max(np.abs(correction.values)) <= 1.0


@pytest.mark.parametrize("x, xp, z", [(0.3, 0.6, -1.0), (0.5, 2.5, -2.0), (1.4, 2.7, 1.0 + 1.0j),
                                      (0.9, 0.2, 2.0 + 0.5j), (0.4, 2.9, -0.5 + 0.2j)])
def test_krein_split_residual(x, xp, z):
    assert krein_split_residual(SplitGeometry(1.0, 3.0), z, x, xp) <= 1e-10


def test_decoupled_kernel():
    split = SplitGeometry(1.0, 3.0)
    assert decoupled_free_green(split, -1.0, 0.5, 2.0) == 0j
    assert decoupled_free_green(split, -1.0, 2.0, 0.5) == 0j
    inner = decoupled_free_green(split, -1.0, 0.3, 0.6)
    # free Dirichlet kernel on (0, 1) at z = -1: sinh(x)·sinh(1 - x')/sinh(1)
    assert inner.real == pytest.approx(np.sinh(0.3) * np.sinh(0.4) / np.sinh(1.0), rel=1e-10)
    with pytest.raises(DomainError):
        krein_split_residual(split, -1.0, 0.5, 3.5)


@pytest.mark.slow
def test_phase_route_matches_subtraction():
    pot = Potential.gaussian_bump(-3.0, 2.0, 0.5)
    split = SplitGeometry(2.0, 4.0)
    f = TestFunction("tent", {"E1": -5.0, "E2": 15.0})
    counted = xi_split_correction(pot, split, lambda_max=20.0)
    phase = split_correction_phase(pot, split, n=200, lambda_max=20.0)
    assert weighted_integral(phase, f) == pytest.approx(weighted_integral(counted, f), abs=5e-2)
