import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from fracplasma import (SolverOptions, apply_fractional, build_domain,
                        constraint_mass, eigendecompose, minimize_energy,
                        plasma_rhs, project, residual_norm, solve_constrained,
                        solve_fixed_lambda, steiner_symmetrize,
                        symmetric_decreasing_rearrangement)

GAMMA = 0.1


@pytest.fixture(scope="module")
def basis1d():
    dom = build_domain("interval", 129, bounds=(0.0, np.pi))
    return eigendecompose(dom, dom.n_interior)


@pytest.fixture(scope="module")
def basis2d():
    dom = build_domain("rectangle", 25, bounds=((0.0, np.pi), (0.0, np.pi)))
    return eigendecompose(dom, dom.n_interior)


def test_rhs_is_positive_part():
    u = np.array([-1.0, 0.0, 0.05, 0.1, 0.4])
    np.testing.assert_allclose(plasma_rhs(u, 0.1),
                               [0.0, 0.0, 0.0, 0.0, 0.3])


@pytest.mark.parametrize("s", [0.3, 0.5, 0.75, 1.0])
def test_fixed_lambda_converges_supercritical_1d(basis1d, s):
    lam = 4.0 * float(basis1d.eigenvalues[0] ** s)
    sol = solve_fixed_lambda(basis1d, lam, GAMMA, s)
    assert sol.status == "converged"
    assert sol.residual <= 1e-10
    assert sol.field.nodal.max() > GAMMA


@pytest.mark.parametrize("s", [0.3, 0.75])
def test_fixed_lambda_converges_supercritical_2d(basis2d, s):
    lam = 4.0 * float(basis2d.eigenvalues[0] ** s)
    sol = solve_fixed_lambda(basis2d, lam, GAMMA, s)
    assert sol.status == "converged"
    assert sol.residual <= 1e-10
    assert sol.field.nodal.max() > GAMMA


def test_solution_satisfies_equation_nodally(basis1d):
    s = 0.5
    lam = 4.0 * float(basis1d.eigenvalues[0] ** s)
    sol = solve_fixed_lambda(basis1d, lam, GAMMA, s)
    lhs = apply_fractional(sol.field, s).nodal
    rhs = lam * plasma_rhs(sol.field.nodal, GAMMA)
    assert np.abs(lhs - rhs).max() < 1e-9


def test_subcritical_multiplier_gives_zero(basis1d):
    lam = 0.5 * float(basis1d.eigenvalues[0] ** 0.5)
    sol = solve_fixed_lambda(basis1d, lam, GAMMA, 0.5)
    assert sol.status == "trivial"
    np.testing.assert_array_equal(sol.field.nodal, 0.0)


def test_solution_positive_and_bounded(basis1d):
    s = 0.75
    lam = 4.0 * float(basis1d.eigenvalues[0] ** s)
    sol = solve_fixed_lambda(basis1d, lam, GAMMA, s)
    u = sol.field.nodal
    assert u.min() > -1e-12
    # the plasma set is a strict subset: u exceeds gamma only in the middle
    full = sol.trace
    assert full[1] < GAMMA and full[-2] < GAMMA


def test_plasma_set_is_interval_1d(basis1d):
    s = 0.5
    lam = 4.0 * float(basis1d.eigenvalues[0] ** s)
    sol = solve_fixed_lambda(basis1d, lam, GAMMA, s)
    active = sol.field.nodal > GAMMA
    idx = np.flatnonzero(active)
    assert idx.size > 3
    assert np.all(np.diff(idx) == 1)


def test_invalid_problem_parameters_rejected(basis1d):
    with pytest.raises(ValueError):
        solve_fixed_lambda(basis1d, -1.0, GAMMA, 0.5)
    with pytest.raises(ValueError):
        solve_fixed_lambda(basis1d, 1.0, -0.1, 0.5)
    with pytest.raises(ValueError):
        solve_fixed_lambda(basis1d, 1.0, GAMMA, 1.5)


def test_oracle_agreement_integer_order(basis1d):
    lam = 4.0 * float(basis1d.eigenvalues[0])
    sol = solve_fixed_lambda(basis1d, lam, GAMMA, 1.0)
    ref = oracles.newton_plasma_1d(0.0, np.pi, 129, lam, GAMMA)
    assert np.abs(sol.field.nodal - ref).max() < 1e-8


def test_constrained_solve_hits_mass_target(basis1d):
    s = 0.5
    lam = 4.0 * float(basis1d.eigenvalues[0] ** s)
    ref = solve_fixed_lambda(basis1d, lam, GAMMA, s)
    target = constraint_mass(basis1d.domain, ref.field.nodal, GAMMA)
    sol = solve_constrained(basis1d, target, GAMMA, s)
    assert sol.status == "converged"
    got = constraint_mass(basis1d.domain, sol.field.nodal, GAMMA)
    assert got == pytest.approx(target, rel=1e-5)
    assert sol.lam == pytest.approx(lam, rel=1e-4)


def test_energy_minimizer_meets_constraint_and_equation(basis1d):
    s = 0.5
    lam = 4.0 * float(basis1d.eigenvalues[0] ** s)
    ref = solve_fixed_lambda(basis1d, lam, GAMMA, s)
    target = constraint_mass(basis1d.domain, ref.field.nodal, GAMMA)
    sol = minimize_energy(basis1d, target, GAMMA, s)
    assert sol.status == "converged"
    got = constraint_mass(basis1d.domain, sol.field.nodal, GAMMA)
    assert got == pytest.approx(target, rel=1e-5)
    # minimizer satisfies the same Euler-Lagrange equation
    res = residual_norm(basis1d, sol.field.coeffs, sol.lam, GAMMA, s)
    assert res < 1e-5


# -- rearrangements ------------------------------------------------------------------


def test_rearrangement_output_is_symmetric_decreasing():
    v = np.array([0.1, 0.9, 0.3, 0.7, 0.2, 0.5, 0.0])
    r = symmetric_decreasing_rearrangement(v)
    n = len(r)
    c = (n - 1) / 2
    # values weakly decrease with distance from the centre
    order = np.argsort([abs(i - c) for i in range(n)], kind="stable")
    seq = r[order]
    assert np.all(np.diff(seq) <= 1e-15)
    assert sorted(r) == sorted(v)


@given(st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=3,
                max_size=40))
def test_rearrangement_preserves_multiset(vals):
    v = np.asarray(vals)
    r = symmetric_decreasing_rearrangement(v)
    np.testing.assert_allclose(np.sort(r), np.sort(v), atol=0.0)


def test_steiner_preserves_line_multisets_and_symmetrizes():
    dom = build_domain("rectangle", 17, bounds=((0.0, 1.0), (0.0, 1.0)))
    rng = np.random.default_rng(8)
    U = np.zeros(dom.grid_shape)
    U[dom.interior] = rng.uniform(0.0, 1.0, dom.n_interior)
    for axis in (0, 1):
        S = steiner_symmetrize(dom, U, axis)
        moved = np.moveaxis(S, axis, 0)
        orig = np.moveaxis(U, axis, 0)
        n_axis = moved.shape[0]
        c = (n_axis - 1) / 2
        order = np.argsort([abs(i - c) for i in range(n_axis)], kind="stable")
        for j in range(moved.shape[1]):
            # each symmetrized line carries the same values as the original
            np.testing.assert_allclose(np.sort(moved[:, j]),
                                       np.sort(orig[:, j]), atol=0.0)
            # and decreases weakly with distance from the line centre
            assert np.all(np.diff(moved[order, j]) <= 1e-15)


def test_steiner_requires_symmetry_axis():
    dom = build_domain("disk", 17, bounds=((-1.2, 1.2), (-1.2, 1.2)),
                       radius=0.9, center=(0.15, 0.0))
    with pytest.raises(ValueError):
        steiner_symmetrize(dom, np.zeros(dom.grid_shape), 0)


def test_history_records_decreasing_residuals(basis1d):
    s = 0.5
    lam = 4.0 * float(basis1d.eigenvalues[0] ** s)
    sol = solve_fixed_lambda(basis1d, lam, GAMMA, s)
    assert sol.history is not None and len(sol.history) >= 1
    assert sol.history[-1] <= 1e-10
