import io as stdio

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from oracles import lattice_min, linear_cost
from ecotable.lp import LpProblem, LpSolution, LpStatus, check_integrality, load_lp, solve, write_lp
from ecotable.lp.simplex import solve_simplex


def difference_lp(n, windows, horizon, c):
    rows = [({j: 1.0, i: -1.0}, lo, hi) for i, j, lo, hi in windows]
    return LpProblem.from_rows(n, rows, list(c), var_lo=0.0, var_hi=float(horizon))


def random_difference_lp(rng, n, horizon):
    x0 = rng.integers(0, horizon + 1, n)
    windows = []
    for _ in range(rng.integers(n - 1, 2 * n + 1)):
        i, j = rng.choice(n, 2, replace=False)
        d = int(x0[j] - x0[i])
        windows.append((int(i), int(j), d - int(rng.integers(0, 4)), d + int(rng.integers(0, 4))))
    c = rng.integers(-5, 6, n).astype(float)
    return windows, c


def test_box_only():
    p = LpProblem.from_rows(1, [], [1.0], var_lo=2.0, var_hi=5.0)
    sol = solve(p)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.x[0] == 2.0 and sol.objective_value == 2.0


def test_single_difference_row():
    p = difference_lp(2, [(0, 1, 1, 3)], 10, [1.0, -1.0])
    sol = solve(p)
    assert sol.objective_value == pytest.approx(-3.0, abs=1e-12)
    assert sol.x[1] - sol.x[0] == pytest.approx(3.0)


def test_integrality_check():
    ok = LpSolution(LpStatus.OPTIMAL, np.array([2.0, 5.0]), 0.0)
    assert check_integrality(ok) == (True, 0.0)
    assert check_integrality(LpSolution(LpStatus.OPTIMAL, np.array([2.5]), 0.0)) == (False, 0.5)
    with pytest.raises(ValueError):
        check_integrality(LpSolution(LpStatus.INFEASIBLE, np.zeros(1), np.nan))


def test_infeasible_and_unbounded():
    p = difference_lp(2, [(0, 1, 5, 6), (1, 0, 0, 3)], 10, [0.0, 0.0])
    assert solve(p).status is LpStatus.INFEASIBLE
    p = LpProblem.from_rows(2, [({0: 1.0, 1: -1.0}, 0.0, np.inf)], [-1.0, 0.0], var_lo=0.0)
    assert solve(p).status is LpStatus.UNBOUNDED


def test_empty_row_handling():
    A = sp.csr_matrix((2, 1))
    p = LpProblem(np.zeros(1), np.ones(1), A, np.array([0.0, 1.0]), np.array([0.0, 2.0]), np.ones(1))
    sol = solve(p)
    assert sol.status is LpStatus.INFEASIBLE and sol.certificate == 1


def test_lattice_oracle_six_variables():
    rng = np.random.default_rng(11)
    for _ in range(30):
        windows, c = random_difference_lp(rng, 6, 12)
        opt, _ = lattice_min(6, windows, 12, linear_cost(c))
        sol = solve(difference_lp(6, windows, 12, c))
        assert sol.status is LpStatus.OPTIMAL
        assert sol.objective_value == pytest.approx(opt, abs=1e-9)
        assert check_integrality(sol)[0]


def test_bland_only_path_agrees():
    rng = np.random.default_rng(5)
    for _ in range(20):
        windows, c = random_difference_lp(rng, 6, 12)
        p = difference_lp(6, windows, 12, c)
        a = solve(p)
        b = solve(p, bland_after=0)
        assert b.status is a.status is LpStatus.OPTIMAL
        assert b.objective_value == pytest.approx(a.objective_value, abs=1e-9)
        assert b.info["bland_iterations"] >= b.iterations > 0


def test_determinism():
    rng = np.random.default_rng(3)
    windows, c = random_difference_lp(rng, 40, 200)
    p = difference_lp(40, windows, 200, c)
    a, b = solve(p), solve(p)
    assert np.array_equal(a.x, b.x) and a.iterations == b.iterations


def random_general_lp(rng, n, m):
    A = sp.random(m, n, density=0.4, random_state=rng, data_rvs=lambda k: rng.integers(-4, 5, k)).tocsr()
    x0 = rng.uniform(-5, 5, n)
    ax = A @ x0
    lo = np.where(rng.random(m) < 0.3, -np.inf, ax - rng.uniform(0, 3, m))
    hi = np.where(rng.random(m) < 0.3, np.inf, ax + rng.uniform(0, 3, m))
    vlo = np.where(rng.random(n) < 0.2, -np.inf, x0 - rng.uniform(0, 4, n))
    vhi = np.where(rng.random(n) < 0.2, np.inf, x0 + rng.uniform(0, 4, n))
    c = rng.normal(size=n)
    return LpProblem(vlo, vhi, A, lo, hi, c)


def test_general_lps_against_highs():
    rng = np.random.default_rng(2024)
    seen = set()
    for _ in range(60):
        p = random_general_lp(rng, int(rng.integers(3, 15)), int(rng.integers(2, 15)))
        a = solve(p)
        b = solve(p, backend="highs")
        seen.add(a.status)
        assert a.status is b.status
        if a.status is LpStatus.OPTIMAL:
            assert a.objective_value == pytest.approx(b.objective_value, rel=1e-7, abs=1e-7)
            assert p.max_violation(a.x) <= 1e-6
    assert LpStatus.OPTIMAL in seen


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_weak_duality_and_vertex(s):
    rng = np.random.default_rng(s)
    windows, c = random_difference_lp(rng, 8, 20)
    p = difference_lp(8, windows, 20, c)
    sol = solve(p)
    assert sol.status is LpStatus.OPTIMAL and sol.is_vertex
    assert check_integrality(sol)[1] <= 1e-7
    # random feasible lattice points never beat the optimum
    for _ in range(20):
        x = rng.integers(0, 21, 8).astype(float)
        if p.max_violation(x) == 0:
            assert c @ x >= sol.objective_value - 1e-9


def test_text_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    p = random_general_lp(rng, 5, 4)
    buf = stdio.StringIO()
    write_lp(p, buf)
    (tmp_path / "p.lp").write_text(buf.getvalue())
    q = load_lp(tmp_path / "p.lp")
    assert np.allclose(q.A.toarray(), p.A.toarray())
    assert np.array_equal(q.var_lo, p.var_lo) and np.array_equal(q.row_hi, p.row_hi)
    assert solve_simplex(q).objective_value == pytest.approx(solve_simplex(p).objective_value)


def test_perturbation_keeps_the_true_optimum():
    rng = np.random.default_rng(17)
    for _ in range(20):
        windows, c = random_difference_lp(rng, 10, 30)
        p = difference_lp(10, windows, 30, c)
        a, b = solve(p), solve(p, perturb=False)
        assert a.objective_value == pytest.approx(b.objective_value, abs=1e-9)
        assert check_integrality(a)[0]
    for _ in range(20):
        p = random_general_lp(rng, int(rng.integers(3, 12)), int(rng.integers(2, 12)))
        a, b = solve(p), solve(p, perturb=False)
        assert a.status is b.status
        if a.status is LpStatus.OPTIMAL:
            assert a.objective_value == pytest.approx(b.objective_value, rel=1e-9, abs=1e-9)
