import math

import numpy as np
import pytest

from errors import DomainError
from potential import Potential
from solutions import Geometry
from ssf import (SpectralShiftGrid, count_states, count_states_batch, counting_grid, default_lambda_grid,
                 halfline_eigenvalues, locate_eigenvalues, normalization_anchor, spectral_lower_bound,
                 trace_formula_residual, trace_formula_sides, xi_finite, xi_halfline_phase, xi_sign_split)


def test_free_dirichlet_counts(zero):
    assert count_states(zero, 0.0, 0.0, math.pi, 1.5) == 1
    assert count_states(zero, 0.0, 0.0, math.pi, 0.5) == 0
    assert count_states(zero, 0.0, 0.0, math.pi, 4.5) == 2


def test_free_neumann_counts(zero):
    # Neumann on (0, π): eigenvalues n², n >= 0
    assert count_states(zero, math.pi / 2, math.pi / 2, math.pi, 0.5) == 1
    assert count_states(zero, math.pi / 2, math.pi / 2, math.pi, 4.5) == 3


def test_no_states_below_lower_bound(well):
    for alpha, beta in [(0.0, 0.0), (math.pi / 4, 3 * math.pi / 4)]:
        bound = spectral_lower_bound(well, Geometry.interval(5.0), alpha, beta)
        assert count_states(well, alpha, beta, 5.0, bound - 1e-6) == 0


def test_locate_free_eigenvalues(zero):
    eig = locate_eigenvalues(zero, 0.0, 0.0, math.pi, 0.0, 10.0)
    np.testing.assert_allclose(eig, [1.0, 4.0, 9.0], rtol=1e-9)


def test_xi_zero_potential(zero):
    xi = xi_finite(zero, 0.0, 0.0, 5.0, lambda_max=20.0)
    assert np.all(xi.values == 0)
    phase = xi_halfline_phase(zero, 0.0, lambda_max=20.0)
    assert np.all(phase.values == 0)


def test_xi_counts_bound_states(deep_well):
    xi = xi_finite(deep_well, 0.0, 0.0, 10.0, lambdas=[-0.5, 0.0, 1.0])
    assert xi.values[0] == -count_states(deep_well, 0.0, 0.0, 10.0, -0.5)
    assert np.all(xi.values == np.round(xi.values))


def test_xi_normalization(well):
    geometry = Geometry.interval(10.0)
    xi = xi_finite(well, 0.0, 0.0, 10.0, lambda_max=20.0)
    assert xi.anchor <= spectral_lower_bound(well, geometry, 0.0, 0.0)
    assert xi.anchor == normalization_anchor([well, Potential.zero()], geometry, 0.0, 0.0)
    assert xi.value_at(xi.anchor) == 0.0
    assert xi.values[0] == 0.0


def test_nonnegative_potential_gives_nonnegative_xi(bump):
    xi = xi_finite(bump, 0.0, 0.0, 5.0, lambda_max=50.0)
    assert np.all(xi.values >= 0)
    assert np.any(xi.values > 0)


def test_nonpositive_potential_gives_nonpositive_xi(deep_well):
    xi = xi_finite(deep_well, math.pi / 4, 0.0, 5.0, lambda_max=50.0)
    assert np.all(xi.values <= 0)


def test_counting_grid_brackets_eigenvalues(zero):
    grid = counting_grid([zero], 0.0, 0.0, math.pi, lambda_max=10.0)
    for eig in (1.0, 4.0, 9.0):
        gap = np.abs(grid - eig) / (1.0 + eig)
        assert np.min(gap) > 0.9e-6
        assert np.count_nonzero(gap < 1.1e-6) == 2


def test_flank_counts_do_not_depend_on_the_batch(well):
    grid = counting_grid([well], 0.0, 0.0, 5.0, lambda_max=30.0)
    eig = locate_eigenvalues(well, 0.0, 0.0, 5.0, grid[0], grid[-1])
    near = np.min(np.abs(grid[:, None] - eig[None, :]) / (1.0 + np.abs(eig)), axis=1) < 2e-6
    flanks = grid[near]
    assert flanks.size == 2 * eig.size
    batch = count_states_batch(well, 0.0, 0.0, 5.0, grid)[near]
    single = [count_states(well, 0.0, 0.0, 5.0, lam) for lam in flanks]
    assert list(batch) == single
    assert single == [k // 2 + k % 2 for k in range(flanks.size)]


def test_default_grid_shape():
    grid = default_lambda_grid(-2.0, 200.0)
    assert grid[0] == -2.0 and grid[-1] == 200.0
    assert np.all(np.diff(grid) > 0)
    assert np.max(np.diff(grid[(grid > 0) & (grid < 1)])) <= 1e-3 + 1e-12


def test_grid_value_lookup():
    xi = SpectralShiftGrid(np.array([-2.0, -1.0, 0.0, 5.0]), np.array([0.0, -1.0, 0.0, 0.0]), "counting",
                           Geometry.interval(3.0), (0.0, 0.0), None, -2.0)
    assert xi.value_at(-1.0) == -1.0
    assert xi.value_at(-0.5) == -1.0
    assert xi.value_at(-3.0) == 0.0
    with pytest.raises(DomainError):
        SpectralShiftGrid(np.array([0.0, 0.0]), np.array([0.0, 1.0]), "counting", Geometry.interval(3.0), (0.0, 0.0))


def test_grid_files_roundtrip(tmp_path, well):
    xi = xi_finite(well, 0.0, 0.0, 5.0, lambda_max=10.0)
    csv_path, meta_path = xi.write(str(tmp_path / "xi.csv"))
    again = SpectralShiftGrid.from_files(csv_path)
    np.testing.assert_array_equal(again.lambdas, xi.lambdas)
    np.testing.assert_array_equal(again.values, xi.values)
    assert again.geometry == xi.geometry and again.anchor == xi.anchor


def test_grid_files_keep_every_bit(tmp_path):
    rng = np.random.default_rng(7)
    lambdas = np.sort(rng.uniform(-3.0, 40.0, 500)) / 3.0
    values = rng.normal(size=500) * 1e-3 / 7.0
    xi = SpectralShiftGrid(lambdas, values, "phase", Geometry.halfline(), (0.3,), 1e-4, -2.0)
    csv_path, _ = xi.write(str(tmp_path / "bits.csv"))
    again = SpectralShiftGrid.from_files(csv_path)
    assert again.lambdas.tobytes() == xi.lambdas.tobytes()
    assert again.values.tobytes() == xi.values.tobytes()


def test_halfline_bound_state(deep_well):
    eig = halfline_eigenvalues(deep_well, 0.0)
    assert eig.size == 1
    assert -1.0 < eig[0] < -0.1
    xi = xi_halfline_phase(deep_well, 0.0, lambdas=[-2.0, eig[0] - 0.05, eig[0] + 0.05, -0.05])
    values = xi.value_at(np.array([-2.0, eig[0] - 0.05, eig[0] + 0.05, -0.05]))
    np.testing.assert_allclose(values, [0.0, 0.0, -1.0, -1.0], atol=1e-2)


def test_counting_agrees_with_phase_below_zero(deep_well):
    eig = halfline_eigenvalues(deep_well, 0.0)
    lams = np.linspace(-4.5, -0.02, 50)
    lams = lams[np.abs(lams - eig[0]) >= 1e-2]
    phase = xi_halfline_phase(deep_well, 0.0, lambdas=lams)
    counted = xi_finite(deep_well, 0.0, 0.0, 60.0, lams)
    np.testing.assert_array_equal(counted.values, np.round(phase.value_at(lams)))


@pytest.mark.slow
def test_phase_decays_at_high_energy(well):
    xi = xi_halfline_phase(well, 0.0)
    assert abs(xi.value_at(200.0)) <= 0.05


def test_sign_split_of_nonpositive_potential(well):
    plus, minus = xi_sign_split(well, Geometry.interval(5.0), 0.0, 0.0, lambda_max=30.0)
    xi = xi_finite(well, 0.0, 0.0, 5.0, plus.lambdas)
    assert np.all(plus.values == 0)
    np.testing.assert_array_equal(minus.values, -xi.values)
    assert plus.label == "xi_plus" and minus.label == "xi_minus"


def test_sign_split_of_mixed_potential():
    xs = np.linspace(0.0, 4.0, 81)
    pot = Potential.grid_sampled(xs, 3.0 * np.sin(2.0 * xs) * np.exp(-xs), support_hint=4.0)
    plus, minus = xi_sign_split(pot, Geometry.interval(4.0), 0.0, 0.0, lambda_max=40.0)
    xi = xi_finite(pot, 0.0, 0.0, 4.0, plus.lambdas)
    np.testing.assert_array_equal(plus.values - minus.values, xi.values)
    assert np.all(plus.values >= 0) and np.all(minus.values >= 0)


def test_chain_rule():
    R = 5.0
    xs = np.linspace(0.0, R, 101)
    mixed = Potential.grid_sampled(xs, 3.0 * np.sin(2.0 * xs) * np.exp(-xs), support_hint=R)
    plus = mixed.positive_part()
    grid = counting_grid([mixed, plus, Potential.zero()], 0.0, 0.0, R, lambda_max=40.0)
    whole = xi_finite(mixed, 0.0, 0.0, R, grid)
    first = xi_finite(plus, 0.0, 0.0, R, grid)
    second = xi_finite(mixed, 0.0, 0.0, R, grid, reference=plus)
    np.testing.assert_array_equal(whole.values, first.values + second.values)


def test_trace_formula_zero(zero):
    xi = xi_halfline_phase(zero, 0.0, lambda_max=20.0)
    assert trace_formula_sides(zero, 0.0, -5.0, xi, 1) == (0j, 0j, 0.0)


def test_trace_formula_rejects_real_point_in_support(well):
    xi = xi_finite(well, 0.0, 0.0, 5.0, lambda_max=50.0)
    with pytest.raises(DomainError):
        trace_formula_sides(well, 0.0, 10.0, xi, 1, beta=0.0, R=5.0)
    with pytest.raises(DomainError):
        trace_formula_sides(well, 0.0, -5.0, xi, 1)


@pytest.mark.slow
@pytest.mark.parametrize("n, limit", [(1, 1e-3), (2, 5e-3)])
def test_trace_formula_square_well(well, n, limit):
    xi = xi_halfline_phase(well, 0.0)
    lhs, rhs, _ = trace_formula_sides(well, 0.0, -5.0, xi, n)
    assert abs(lhs - rhs) <= limit * abs(rhs)
    assert trace_formula_residual(well, 0.0, -5.0, xi, n) == pytest.approx(abs(lhs - rhs))
