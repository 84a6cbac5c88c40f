import numpy as np
import pytest

from fdsecrecy.sdp import (LmiProblem, ModelError, block, check_feasible,
                           compile_problem, solve)


def _rowvec(v):
    return np.asarray(v, dtype=complex).reshape(1, -1)


def test_minimize_scalar_on_psd_cone():
    p = LmiProblem()
    t = p.scalar("t")
    p.add_lmi(t, "t_psd")
    p.minimize(t)
    sol = solve(p)
    assert sol.status[0] == "optimal"
    assert abs(sol.value("t")[0]) <= 1e-7


def test_trace_ball_quadratic_form_infeasible():
    # max of v X v^H over tr X <= 1 is ||v||^2 = 0.5 < 1
    v = _rowvec([0.5, 0.5])
    p = LmiProblem()
    x = p.hermitian("X", 2)
    p.add_le(x.trace() - 1.0, "trace")
    p.add_le(1.0 - v @ x @ v.conj().T, "form")
    f = check_feasible(p)
    assert not f.feasible[0] and not f.failed[0]
    assert f.margin[0] > 0


def test_trace_ball_quadratic_form_feasible_below_limit():
    v = _rowvec([0.5, 0.5])
    p = LmiProblem()
    x = p.hermitian("X", 2)
    p.add_le(x.trace() - 1.0, "trace")
    p.add_le(0.4 - v @ x @ v.conj().T, "form")
    assert check_feasible(p).feasible[0]


def test_empty_constraint_set_is_feasible():
    p = LmiProblem()
    p.scalar("x")
    assert check_feasible(p).feasible[0]


def test_constant_violation_is_infeasible():
    p = LmiProblem()
    x = p.scalar("x")
    p.add_le(0.0 * x + 1.0, "one_le_zero")
    f = check_feasible(p)
    assert not f.feasible[0]


def test_min_trace_product_is_smallest_eigenvalue():
    rng = np.random.default_rng(3)
    for n in (2, 3):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        c = g + g.conj().T
        p = LmiProblem()
        x = p.hermitian("X", n)
        p.add_eq(x.trace() - 1.0, "unit_trace")
        p.minimize((c @ x).trace())
        sol = solve(p, gap_tol=1e-9)
        assert sol.status[0] == "optimal"
        assert sol.objective[0] == pytest.approx(np.linalg.eigvalsh(c)[0], abs=1e-6)


def test_batched_parameters_and_monotone_feasibility():
    # X >= 0, tr X <= 1, [1 0] X [1 0]^H >= a: feasible iff a <= 1
    a = np.array([0.2, 0.9, 0.99, 1.01, 1.5])
    e = _rowvec([1, 0])
    p = LmiProblem(batch=a.size)
    x = p.hermitian("X", 2)
    p.add_le(x.trace() - 1.0)
    p.add_le(a - e @ x @ e.conj().T)
    f = check_feasible(p)
    np.testing.assert_array_equal(f.feasible, a <= 1.0)


def test_duals_nonnegative_and_complementary():
    p = LmiProblem()
    x = p.hermitian("X", 2)
    c = np.diag([1.0, 2.0]).astype(complex)
    p.add_le(1.0 - x.trace(), "cover")
    p.minimize((c @ x).trace())
    sol = solve(p, gap_tol=1e-10)
    y = sol.dual("cover")[0]
    assert y == pytest.approx(1.0, abs=1e-6)
    z = sol.dual("psd:X")[0]
    assert np.linalg.eigvalsh(z)[0] >= -1e-8
    # stationarity: C - y I - Z = 0
    np.testing.assert_allclose(c - y * np.eye(2) - z, 0, atol=1e-6)


def test_block_lmi():
    # [[t, 1], [1, t]] >= 0 gives t >= 1
    p = LmiProblem()
    t = p.scalar("t")
    one = p.constant(1.0)
    p.add_lmi(block([[t, one], [one, t]]), "blk")
    p.minimize(t)
    sol = solve(p, gap_tol=1e-10)
    assert sol.value("t")[0] == pytest.approx(1.0, abs=1e-6)


def test_model_errors():
    p = LmiProblem()
    p.hermitian("X", 2)
    with pytest.raises(ModelError):
        p.hermitian("X", 2)
    x = p.variable("X")
    assert x.dim == 2
    with pytest.raises(ValueError):
        solve(p, feas_tol=0.0)


def test_solve_is_deterministic():
    rng = np.random.default_rng(5)
    g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    c = g @ g.conj().T

    def build():
        p = LmiProblem()
        x = p.hermitian("X", 2)
        p.add_le(1.0 - x.trace())
        p.minimize((c @ x).trace())
        return p

    a, b = solve(build()), solve(build())
    np.testing.assert_array_equal(a.x, b.x)
    assert compile_problem(build()).n == 4
