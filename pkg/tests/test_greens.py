import math

import pytest
from scipy.special import k0

from errors import DomainError, NearEigenvalueError
from greens import (bessel_k0, free_green, frac_power_kernel, green_finite, green_halfline,
                    green_kernel, krein_residual)
from solutions import Geometry


def test_free_interval_kernel_closed_form():
    value = free_green(Geometry.interval(1.0), 0.0, 0.0, -1.0, 0.5, 0.5)
    assert complex(value) == pytest.approx(math.sinh(0.5) ** 2 / math.sinh(1.0), rel=1e-8)
    assert complex(value).real == pytest.approx(0.231058, abs=1e-6)


def test_free_halfline_kernel_closed_form():
    value = free_green(Geometry.halfline(), 0.0, None, -1.0, 0.5, 0.5)
    assert complex(value) == pytest.approx(math.sinh(0.5) * math.exp(-0.5), rel=1e-8)
    assert complex(value).real == pytest.approx(0.316060, abs=1e-6)


def test_free_kernel_symmetry_and_dirichlet_edge():
    geometry = Geometry.interval(2.0)
    g = free_green(geometry, math.pi / 3, math.pi / 5, 1.0 + 1.0j, 0.3, 0.7)
    h = free_green(geometry, math.pi / 3, math.pi / 5, 1.0 + 1.0j, 0.7, 0.3)
    assert complex(g) == complex(h)
    assert complex(free_green(geometry, 0.0, 0.0, -1.0, 0.0, 0.7)) == 0


def test_robin_free_eigenvalue_is_detected():
    # e^{-x} satisfies ψ' + ψ = 0 at both ends for every R
    with pytest.raises(NearEigenvalueError):
        free_green(Geometry.interval(2.0), math.pi / 4, math.pi / 4, -1.0, 0.5, 1.0)


def test_zero_potential_matches_free_kernel(zero):
    value = green_finite(zero, math.pi / 4, 0.0, 2.0, -1.5, 0.4, 1.3)
    assert value == pytest.approx(complex(free_green(Geometry.interval(2.0), math.pi / 4, 0.0, -1.5, 0.4, 1.3)),
                                  rel=1e-9)
    value = green_halfline(zero, 0.0, -1.0, 0.5, 0.5)
    assert value == pytest.approx(math.sinh(0.5) * math.exp(-0.5), rel=1e-9)


def test_perturbed_kernel_symmetry(well):
    geometry = Geometry.interval(3.0)
    g = green_kernel(well, geometry, 0.0, math.pi / 4, 1.0 + 1.0j, 0.3, 2.1)
    h = green_kernel(well, geometry, 0.0, math.pi / 4, 1.0 + 1.0j, 2.1, 0.3)
    assert g.value == pytest.approx(h.value, rel=1e-8)
    assert g.bcs == (0.0, math.pi / 4)


def test_interval_kernel_below_halfline(zero, well):
    for pot in (zero, well):
        inner = green_finite(pot, 0.0, 0.0, 2.0, -1.0 if pot.is_zero else -3.0, 0.5, 0.5)
        outer = green_halfline(pot, 0.0, -1.0 if pot.is_zero else -3.0, 0.5, 0.5)
        assert 0 < inner.real <= outer.real


def test_halfline_kernel_rejects_continuous_spectrum(well):
    with pytest.raises(DomainError):
        green_halfline(well, 0.0, 2.0, 0.5, 0.5)


def test_krein_interval_vs_halfline(zero, well):
    assert krein_residual(zero, 0.0, -1.0, 0.25, 0.75, beta=0.0, R=1.0) <= 1e-9
    assert krein_residual(well, 0.0, 1.0 + 1.0j, 0.5, 1.5, beta=math.pi / 3, R=2.5) <= 1e-7


def test_krein_two_angles(well):
    assert krein_residual(well, 0.0, -3.0, 0.5, 0.5, alpha_tilde=math.pi / 4) <= 1e-7
    assert krein_residual(well, math.pi / 4, -3.0, 0.5, 0.8, alpha_tilde=math.pi / 4) == 0.0


def test_krein_needs_a_mode(well):
    with pytest.raises(DomainError):
        krein_residual(well, 0.0, -1.0, 0.5, 0.5)


@pytest.mark.parametrize("t", [1e-4, 0.5, 2.0, 7.5])
def test_bessel_k0(t):
    assert bessel_k0(t) == pytest.approx(k0(t), rel=1e-7)


def test_bessel_k0_edges():
    assert bessel_k0(2.0) == pytest.approx(0.1138938727, rel=1e-8)
    assert math.isinf(bessel_k0(0.0))
    with pytest.raises(DomainError):
        bessel_k0(-1.0)


@pytest.mark.parametrize("t", [30.0, 120.0, 900.0])
def test_bessel_k0_far_tail(t):
    assert bessel_k0(t) == pytest.approx(k0(t), rel=1e-7, abs=1e-15)


def test_half_power_halfline_kernel():
    value = frac_power_kernel(Geometry.halfline(), 1.0, 0.5, 0.4, 1.1)
    assert value == pytest.approx((k0(0.7) - k0(1.5)) / math.pi, rel=1e-8)


def test_half_power_diagonal_diverges():
    assert math.isinf(frac_power_kernel(Geometry.halfline(), 1.0, 0.5, 1.0, 1.0))
    assert frac_power_kernel(Geometry.interval(2.0), 1.0, 0.5, 0.0, 1.0) == 0.0


def test_fractional_kernel_dominance():
    inner = frac_power_kernel(Geometry.interval(2.0), 1.0, 0.5, 0.3, 0.6)
    outer = frac_power_kernel(Geometry.halfline(), 1.0, 0.5, 0.3, 0.6)
    assert 0.0 <= inner <= outer


@pytest.mark.parametrize("geometry", [Geometry.halfline(), Geometry.interval(2.0)])
def test_general_power_path_matches_special_cases(geometry):
    special = frac_power_kernel(geometry, 1.0, 0.5, 0.3, 0.9)
    general = frac_power_kernel(geometry, 1.0, 0.5, 0.3, 0.9, general=True)
    assert general == pytest.approx(special, rel=1e-6)


def test_unit_power_is_the_resolvent():
    geometry = Geometry.interval(2.0)
    value = frac_power_kernel(geometry, 4.0, 1.0, 0.5, 1.2)
    assert value == pytest.approx(complex(free_green(geometry, 0.0, 0.0, -4.0, 0.5, 1.2)).real, rel=1e-10)


def test_fractional_kernel_rejects_bad_arguments():
    with pytest.raises(DomainError):
        frac_power_kernel(Geometry.halfline(), 0.0, 0.5, 0.3, 0.6)
    with pytest.raises(DomainError):
        frac_power_kernel(Geometry.halfline(), 1.0, 1.5, 0.3, 0.6)
    with pytest.raises(DomainError):
        frac_power_kernel(Geometry.interval(1.0), 1.0, 0.5, 0.3, 1.6)


@pytest.mark.parametrize("points", [(0.3, 0.6), (0.1, 1.9), (0.9, 1.3)])
def test_half_power_interval_kernel_matches_general_quadrature(points):
    geometry = Geometry.interval(2.0)
    special = frac_power_kernel(geometry, 2.0, 0.5, *points)
    general = frac_power_kernel(geometry, 2.0, 0.5, *points, general=True)
    assert general == pytest.approx(special, rel=1e-6)
    assert 0.0 <= special <= frac_power_kernel(Geometry.halfline(), 2.0, 0.5, *points)


def test_half_power_kernel_far_apart_points():
    value = frac_power_kernel(Geometry.interval(2000.0), 1.0, 0.5, 1.0, 1500.0)
    assert value == pytest.approx(0.0, abs=1e-300)
    assert value >= 0.0
