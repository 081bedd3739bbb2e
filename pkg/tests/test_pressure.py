import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from cfdim.errors import BudgetExceeded, DomainError
from cfdim.pressure import (PressureProblem, alphabet_dimension, bisect_decreasing, dimension_curve, gm_eval,
                            joint_curve, partition_sum, pressure_value, solve_depth_dimension, solve_dimension,
                            solve_tb_direct, transfer_eigenvalue)

GOLD = (math.sqrt(5) - 1) / 2


def brute_log_sum(n, M, B, s, m=2):
    # plain float loop over every word, no log-domain tricks
    total = 0.0
    for w in itertools.product(range(1, M + 1), repeat=n):
        qp, q = 0, 1
        for a in w:
            qp, q = q, a * q + qp
        total += q ** (-2 * s)
    return math.log(total) - n * gm_eval(m, s) * math.log(B)


# -- g_m -----------------------------------------------------------------------


def test_gm_examples():
    assert gm_eval(1, 0.7) == 0.7
    for m in range(1, 8):
        assert gm_eval(m, 1.0) == 1.0
        assert gm_eval(m, 0.0) == 0.0


@given(st.floats(0, 1))
def test_g2_is_square(s):
    assert gm_eval(2, s) == pytest.approx(s * s, rel=1e-15, abs=1e-300)


@given(st.integers(1, 10), st.floats(0.001, 0.999))
def test_gm_decreasing_in_m(m, s):
    # each step multiplies by s/(1-s+g) < 1 when g < s
    assert 0 < gm_eval(m + 1, s) <= gm_eval(m, s)


def test_gm_domain():
    with pytest.raises(DomainError):
        gm_eval(0, 0.5)
    with pytest.raises(DomainError):
        gm_eval(2, 1.5)


# -- partition sums --------------------------------------------------------------


@pytest.mark.parametrize("n,s,B,M,expected", [
    (1, 1.0, 2, 1, 0.5),
    (1, 0.5, 4, 2, 2 ** -0.5 + 8 ** -0.5),
    (2, 0.5, 4, 1, 0.25),
])
def test_partition_sum_examples(n, s, B, M, expected):
    for method in ("enumeration", "prefix-recursive"):
        assert float(partition_sum(n, PressureProblem(M, B, 2, s), method)) == pytest.approx(expected, rel=1e-14)


@given(st.integers(1, 4), st.integers(1, 8), st.floats(0.01, 1.0), st.floats(1.0, 50.0), st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_prefix_matches_enumeration(M, n, s, B, m):
    prob = PressureProblem(M, B, m, s)
    a = partition_sum(n, prob, "enumeration").value.log
    b = partition_sum(n, prob, "prefix-recursive").value.log
    assert b == pytest.approx(a, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("n,M", [(3, 3), (6, 2)])
def test_partition_sum_brute(n, M):
    assert partition_sum(n, PressureProblem(M, 3.0, 2, 0.4)).value.log == pytest.approx(
        brute_log_sum(n, M, 3.0, 0.4), rel=1e-13)


def test_prefix_split_invariance():
    from cfdim.pressure import _log_qsum_prefix
    ref = _log_qsum_prefix(9, 3, 0.55)
    for chunk in (1, 3, 27, 1 << 20):
        assert _log_qsum_prefix(9, 3, 0.55, chunk) == pytest.approx(ref, rel=1e-13)


@given(st.integers(1, 4), st.integers(1, 6), st.floats(1.01, 20.0))
@settings(max_examples=30, deadline=None)
def test_partition_sum_decreasing_in_s(M, n, B):
    vals = [partition_sum(n, PressureProblem(M, B, 2, s)).value.log for s in np.linspace(0.05, 1.0, 12)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_partition_sum_budget():
    with pytest.raises(BudgetExceeded):
        partition_sum(11, PressureProblem(5, 2.0), "enumeration")
    with pytest.raises(DomainError):
        partition_sum(0, PressureProblem(2, 2.0))


def test_problem_validation():
    for kw in ({"M": 0, "B": 2}, {"M": 2, "B": 0.5}, {"M": 2, "B": 2, "m": 0}, {"M": 2, "B": 2, "s": 1.2}):
        with pytest.raises(DomainError):
            PressureProblem(**kw)


# -- depth-n dimension -----------------------------------------------------------


def test_depth_one_two_term_oracle():
    s_star = brentq(lambda s: -s * s * math.log(4) + math.log1p(4.0 ** -s), 0.01, 1.0, xtol=1e-14)
    r = solve_depth_dimension(1, 4, 2)
    assert r.value == pytest.approx(s_star, abs=1e-9)
    assert r.value == pytest.approx(0.530, abs=2e-3)


@pytest.mark.parametrize("B", [1.5, 4, 100])
def test_depth_one_single_digit_is_zero(B):
    r = solve_depth_dimension(1, B, 1)
    assert r.value == 0.0 and r.boundary == "lower"


def test_depth_contraction():
    t1, t2, t3 = (solve_depth_dimension(n, 2, 3).value for n in (1, 2, 3))
    assert abs(t3 - t2) < abs(t2 - t1)


def test_bisect_flags():
    assert bisect_decreasing(lambda s: -1.0)[3] == "lower"
    assert bisect_decreasing(lambda s: 1.0)[3] == "upper"
    root, width, _, boundary, _ = bisect_decreasing(lambda s: 0.3 - s, tol=1e-12)
    assert boundary is None and width <= 1e-12 and root == pytest.approx(0.3, abs=1e-12)
    with pytest.raises(DomainError):
        bisect_decreasing(lambda s: 0.3 - s, tol=0)


# -- transfer operator ----------------------------------------------------------


@given(st.floats(0.3, 4.0))
@settings(max_examples=25, deadline=None)
def test_single_branch_fixed_point(t):
    # one contraction x -> 1/(1+x) has eigenvalue equal to its weight at the fixed point
    assert transfer_eigenvalue(t, 1).eigenvalue == pytest.approx(GOLD**t, rel=1e-10)


def test_golden_example():
    assert transfer_eigenvalue(1.0, 1).eigenvalue == pytest.approx(0.61803, abs=1e-5)


def test_full_alphabet_t2_is_one():
    assert transfer_eigenvalue(2.0, 1, tail=True).eigenvalue == pytest.approx(1.0, abs=1e-5)
    assert transfer_eigenvalue(2.0, 400).eigenvalue == pytest.approx(1.0, abs=5e-3)


def test_eigenvalue_increasing_in_M_and_sandwiched():
    prev = 0.0
    for M in (1, 2, 3, 5, 10, 20, 50):
        lam = transfer_eigenvalue(2.0, M)
        assert lam.eigenvalue > prev and lam.eigenvalue < 1
        assert lam.residual < 1e-8
        a = np.arange(1, M + 1)
        # branch weights (a+x)^-2 on [0,1] bracket the spectral radius
        assert np.sum((a + 1.0) ** -2) <= lam.eigenvalue <= np.sum(a ** -2.0)
        prev = lam.eigenvalue


def test_eigenvalue_vs_partition_ratio():
    # consecutive partition sums grow by lambda up to a geometrically shrinking error
    prob = PressureProblem(3, 1.0, 2, 0.7)
    target = math.log(transfer_eigenvalue(1.4, 3).eigenvalue)
    errs = []
    for n in (4, 8, 12):
        ratio = partition_sum(n + 1, prob).value.log - partition_sum(n, prob).value.log
        errs.append(abs(ratio - target))
    assert errs[1] < errs[0] / 20 and errs[2] < errs[1] / 20
    assert errs[2] < 1e-6


def test_alphabet_dimension_matches_ratio_oracle():
    # depth-20 partition-sum root of log Z_20 = log Z_19 for digits {1, 2}
    def f(s):
        p = PressureProblem(2, 1.0, 2, s)
        return partition_sum(20, p).value.log - partition_sum(19, p).value.log

    oracle = brentq(f, 0.4, 0.7, xtol=1e-13)
    r = alphabet_dimension(2)
    assert r.value == pytest.approx(oracle, abs=1e-8)
    assert r.value == pytest.approx(0.5313, abs=1e-4)
    assert transfer_eigenvalue(2 * r.value, 2).eigenvalue == pytest.approx(1.0, abs=1e-8)


def test_eigen_domain():
    with pytest.raises(DomainError):
        transfer_eigenvalue(0, 2)
    with pytest.raises(DomainError):
        transfer_eigenvalue(1, 2, degree=3)
    with pytest.raises(DomainError):
        transfer_eigenvalue(1.0, 2, tail=True)


# -- pressure and dimension ----------------------------------------------------------


def test_pressure_at_one_with_e():
    assert pressure_value(1.0, math.e, 1, tail=True) == pytest.approx(-1.0, abs=1e-5)


def test_pressure_formula():
    lam = transfer_eigenvalue(1.2, 5).eigenvalue
    assert pressure_value(0.6, 2, 5, m=3) == pytest.approx(math.log(lam) - gm_eval(3, 0.6) * math.log(2), rel=1e-13)


def test_pressure_cross_validation_decreasing():
    P = pressure_value(0.6, 2, 5)
    prob = PressureProblem(5, 2.0, 2, 0.6)
    errs = [abs(partition_sum(n, prob).value.log / n - P) for n in (4, 8, 12)]
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("B", [1.5, 2.0, 8.0])
def test_m2_matches_direct_potential(B):
    a = solve_dimension(B, 20, m=2)
    b = solve_tb_direct(B, 20)
    assert abs(a.value - b.value) <= 1e-9


@given(st.floats(0.01, 100.0))
@settings(max_examples=8, deadline=None)
def test_root_scale_invariance(c):
    a = solve_dimension(3.0, 10, tol=1e-11)
    b = solve_dimension(3.0, 10, tol=1e-11, scale=c)
    assert abs(a.value - b.value) <= 2e-11


@given(st.floats(1.05, 50.0), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
@settings(max_examples=20, deadline=None)
def test_pressure_decreasing_in_s(B, s1, s2):
    lo, hi = sorted((s1, s2))
    if hi - lo < 1e-3:
        return
    assert pressure_value(hi, B, 5) < pressure_value(lo, B, 5)


def test_solve_rejects_B_le_one():
    with pytest.raises(DomainError, match="B must exceed 1"):
        solve_dimension(1.0, 10)
    with pytest.raises(DomainError):
        solve_dimension(2.0, 10, scale=-1)


def test_result_json():
    r = solve_dimension(2.0, 10, tol=1e-8)
    rec = r.to_record()
    assert set(rec) >= {"problem", "value", "bracket_width", "method", "residual"}
    assert r.bracket_width <= 1e-8


# -- curves -------------------------------------------------------------------------


def test_curve_strictly_decreasing():
    c = dimension_curve([2, 4, 8], 20)
    vals = [p.s_star for p in c.points]
    assert c.monotone and vals[0] > vals[1] > vals[2]


def test_curve_single_point_and_errors():
    assert len(dimension_curve([3], 5).points) == 1
    with pytest.raises(DomainError):
        dimension_curve([4, 2], 5)
    with pytest.raises(DomainError):
        dimension_curve([1, 2], 5)


def test_joint_curve_ordered():
    rows = joint_curve([1.5, 4, 32], 20)
    assert all(r["ordered"] for r in rows)
    assert all(r["s_B"] <= r["t_B"] for r in rows)


def test_curve_thread_determinism(monkeypatch):
    a = dimension_curve([2, 3, 5], 10, tol=1e-8, workers=1).rows()
    b = dimension_curve([2, 3, 5], 10, tol=1e-8, workers=3).rows()
    assert a == b
