import math

import numpy as np
import pytest

from errors import ConfigError, DomainError
from potential import Potential, evaluate, factorize, l1_tail, load_grid_csv, truncate_and_split


def test_closed_form_values(well, expo):
    assert evaluate(well, 0.5) == -1.0
    assert evaluate(well, 2.0) == 0.0
    assert evaluate(expo, 1.0) == pytest.approx(-2.0 / math.e, rel=1e-15)


def test_factorization_signs(well, expo):
    fac = factorize(well)
    assert fac.u(0.5) == -1.0 and fac.v(0.5) == 1.0
    assert fac.u(3.0) == 0.0 and fac.v(3.0) == 0.0
    fac = factorize(expo)
    assert fac.u(0.0) == pytest.approx(-math.sqrt(2.0))
    assert fac.v(0.0) == pytest.approx(math.sqrt(2.0))


@pytest.mark.parametrize("pot", [Potential.square_well(-1.0, 1.0), Potential.exponential(-2.0, 1.0),
                                 Potential.gaussian_bump(-1.5, 2.0, 0.4)])
def test_factorization_reproduces_potential(pot):
    xs = np.linspace(0.0, 6.0, 301)
    fac = factorize(pot)
    np.testing.assert_allclose(fac.u(xs) * fac.v(xs), pot(xs), rtol=0, atol=1e-15)


def test_truncation_and_parts(well):
    truncated, plus, minus = truncate_and_split(well, 0.5)
    assert truncated(0.75) == 0.0
    assert truncated(0.25) == -1.0
    xs = np.linspace(0.0, 3.0, 61)
    np.testing.assert_array_equal(plus(xs), np.zeros_like(xs))
    np.testing.assert_array_equal(minus(xs), np.abs(well(xs)))


def test_truncation_is_idempotent(expo):
    once = expo.truncated(3.0)
    twice = once.truncated(5.0)
    xs = np.linspace(0.0, 8.0, 161)
    np.testing.assert_array_equal(once(xs), twice(xs))


def test_parts_of_sampled_potential():
    xs = np.linspace(0.0, 10.0, 201)
    pot = Potential.grid_sampled(xs, np.exp(-xs) * np.cos(xs))
    np.testing.assert_allclose(pot.positive_part()(xs) + pot.negative_part()(xs), np.abs(pot(xs)), atol=1e-15)
    np.testing.assert_allclose(pot.positive_part()(xs) - pot.negative_part()(xs), pot(xs), atol=1e-15)


def test_l1_tail_closed_forms(well, expo):
    assert l1_tail(expo, 0.0) == pytest.approx(2.0)
    assert l1_tail(expo, math.log(2.0)) == pytest.approx(1.0)
    assert l1_tail(well, 1.0) == 0.0
    ladder = np.linspace(0.0, 5.0, 11)
    tails = [expo.l1_tail(a) for a in ladder]
    assert all(b <= a for a, b in zip(tails[:-1], tails[1:]))


def test_signed_integral(expo, zero):
    assert expo.integral() == pytest.approx(-2.0)
    assert zero.integral() == 0.0


def test_support_and_breakpoints(well, expo):
    assert well.support_end == 1.0
    assert well.breakpoints == (1.0,)
    assert math.isinf(expo.support_end)
    assert expo.truncated(4.0).support_end == 4.0
    assert well.shifted(0.25)(0.7) == -1.0 and well.shifted(0.25)(0.8) == 0.0


def test_constant_interpolation():
    pot = Potential.grid_sampled([0.0, 1.0, 2.0], [3.0, -1.0, 0.0], interpolation="constant")
    assert pot(0.5) == 3.0
    assert pot(1.5) == -1.0
    assert pot(5.0) == 0.0


@pytest.mark.parametrize("make", [
    lambda: Potential.square_well(-1.0, 0.0),
    lambda: Potential.exponential(1.0, -1.0),
    lambda: Potential.gaussian_bump(1.0, 0.0, 0.0),
    lambda: Potential.grid_sampled([0.0, 1.0, 1.0], [0.0, 0.0, 0.0]),
    lambda: Potential("harmonic"),
])
def test_invalid_potentials(make):
    with pytest.raises(DomainError):
        make()


def test_negative_abscissa_rejected(well):
    with pytest.raises(DomainError):
        evaluate(well, -0.1)


def test_grid_csv_with_header(tmp_path):
    path = tmp_path / "v.csv"
    path.write_text("x,v\n0,-1\n1,-0.5\n2,0\n", encoding="utf-8")
    pot = load_grid_csv(str(path), support_hint=2.0)
    assert pot(0.5) == pytest.approx(-0.75)
    assert pot.support_end == 2.0


def test_grid_csv_non_monotone_names_row(tmp_path):
    path = tmp_path / "v.csv"
    path.write_text("x,v\n0,0\n1,1\n0.5,2\n", encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_grid_csv(str(path))
    assert info.value.row == 4
    assert "row 4" in str(info.value)
