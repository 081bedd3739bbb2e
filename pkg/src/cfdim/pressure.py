"""Restricted pressure functions of the Gauss map and their zeros.

Two independent routes to the pressure of the potential
``-g_m(s) log B - s log|T'|`` over the alphabet {1..M}:

* depth-n partition sums  sum_{a_1..a_n <= M} B^{-n g_m(s)} q_n^{-2s};
* the leading eigenvalue of the transfer operator
  (L_t f)(x) = sum_a (a + x)^{-t} f(1/(a + x)) with t = 2s, discretised by
  Chebyshev collocation on [0, 1].

The dimension numbers s_B (m = 1), t_B (m = 2) and their m-fold analogues are
the zeros in s of the pressure, found by bisection.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp, zeta

from .cf import LogValue
from .errors import BudgetExceeded, ConvergenceError, DomainError

__all__ = [
    "PressureProblem",
    "PartitionSum",
    "SpectralEstimate",
    "DimensionResult",
    "CurvePoint",
    "Curve",
    "gm_eval",
    "partition_sum",
    "solve_depth_dimension",
    "transfer_eigenvalue",
    "pressure_value",
    "alphabet_dimension",
    "solve_dimension",
    "solve_tb_direct",
    "dimension_curve",
    "joint_curve",
    "bisect_decreasing",
]

ENUMERATION_LIMIT = 10**6
PREFIX_BUDGET = 2 * 10**9
DEFAULT_DEGREE = 32
DEFAULT_TOL = 1e-10
MAX_BISECTIONS = 80
# with the tail on, digits up to this bound are always summed explicitly; the
# second-order Taylor fold is only accurate once 1/(a + x) is small
TAIL_EXPLICIT = 32


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("CFDIM_THREADS", "1")))
    except ValueError:
        return 1


def gm_eval(m: int, s: float) -> float:
    """g_1(s) = s, g_m(s) = s g_{m-1}(s) / (1 - s + g_{m-1}(s))."""
    if m < 1:
        raise DomainError("m must be >= 1")
    if not 0 <= s <= 1:
        raise DomainError(f"s must lie in [0, 1], got {s}")
    if s == 1:
        return 1.0
    g = s
    for _ in range(m - 1):
        g = s * g / (1 - s + g)
    return g


@dataclass(frozen=True)
class PressureProblem:
    """Alphabet bound M, growth base B, product order m, candidate s.

    B = 1 is accepted here only to switch the growth weight off (plain
    alphabet sums); the dimension solvers insist on B > 1.
    """

    M: int
    B: float
    m: int = 2
    s: float = 0.5

    def __post_init__(self):
        if self.M < 1:
            raise DomainError("M must be >= 1")
        if self.B < 1:
            raise DomainError("B must be >= 1")
        if self.m < 1:
            raise DomainError("m must be >= 1")
        if not 0 <= self.s <= 1:
            raise DomainError("s must lie in [0, 1]")


@dataclass(frozen=True)
class PartitionSum:
    n: int
    value: LogValue
    method: str

    def __float__(self) -> float:
        return float(self.value)


def _log_qsum_enumerate(n: int, M: int, s: float) -> float:
    """log sum q_n^{-2s} by walking every word with exact integer q_n."""
    logs = []
    for word in itertools.product(range(1, M + 1), repeat=n):
        q_prev, q = 0, 1
        for a in word:
            q_prev, q = q, a * q + q_prev
        logs.append(-2.0 * s * math.log(q))
    return float(logsumexp(np.asarray(logs)))


def _log_qsum_prefix(n: int, M: int, s: float, chunk: int = 1 << 16) -> float:
    """log sum q_n^{-2s} by level-wise expansion of (q_{k-1}, q_k) states.

    Words are split at a fixed depth into prefixes explored in order; each
    prefix's subtree is expanded as numpy arrays and the last digit is summed
    without materialising its level.  Reductions happen in a fixed order, so
    the result does not depend on how the work is split.
    """
    digits = np.arange(1, M + 1, dtype=np.float64)
    tail_depth = n - 1
    while tail_depth > 0 and M**tail_depth > chunk:
        tail_depth -= 1
    head_depth = n - 1 - tail_depth
    partial = []
    for head in itertools.product(range(1, M + 1), repeat=head_depth):
        q_prev, q = 0, 1
        for a in head:
            q_prev, q = q, a * q + q_prev
        qp = np.array([float(q_prev)])
        qc = np.array([float(q)])
        for _ in range(tail_depth):
            new = (digits[None, :] * qc[:, None] + qp[:, None]).ravel()
            qp = np.repeat(qc, M)
            qc = new
        ref = float(np.log(qc).min())
        total = 0.0
        for d in range(1, M + 1):
            total += float(np.exp(-2.0 * s * (np.log(d * qc + qp) - ref)).sum())
        partial.append(-2.0 * s * ref + math.log(total))
    return float(logsumexp(np.asarray(partial)))


def partition_sum(n: int, prob: PressureProblem, method: str = "auto") -> PartitionSum:
    """sum over words in {1..M}^n of B^{-n g_m(s)} q_n^{-2s}, in log domain.

    For m = 2 this is sum (B^{ns} q_n^2)^{-s}.  ``method`` is
    ``"enumeration"`` (exact integer q_n per word, M^n <= 10^6),
    ``"prefix-recursive"`` (vectorised state expansion) or ``"auto"``.
    """
    if n < 1:
        raise DomainError("depth n must be >= 1")
    M, s = prob.M, prob.s
    size = M**n
    if method == "auto":
        method = "prefix-recursive"
    if method == "enumeration":
        if size > ENUMERATION_LIMIT:
            raise BudgetExceeded(f"M^n = {size} exceeds enumeration limit {ENUMERATION_LIMIT}")
        lq = _log_qsum_enumerate(n, M, s)
    elif method == "prefix-recursive":
        if size > PREFIX_BUDGET:
            raise BudgetExceeded(f"M^n = {size} exceeds prefix budget {PREFIX_BUDGET}")
        lq = _log_qsum_prefix(n, M, s)
    else:
        raise DomainError(f"unknown method {method!r}")
    growth = -n * gm_eval(prob.m, s) * math.log(prob.B) if prob.B != 1 else 0.0
    return PartitionSum(n, LogValue(lq + growth), method)


@dataclass
class DimensionResult:
    """Root s* of a dimension equation with its bracket and diagnostics.

    ``boundary`` is ``"lower"`` or ``"upper"`` when the equation had no sign
    change on [0, 1] and the corresponding endpoint was returned.
    """

    value: float
    bracket_width: float
    method: str
    problem: dict
    residual: float
    boundary: str | None = None
    iterations: int = 0

    def to_record(self) -> dict:
        return {
            "problem": self.problem,
            "value": self.value,
            "bracket_width": self.bracket_width,
            "method": self.method,
            "residual": self.residual,
            "boundary": self.boundary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def bisect_decreasing(f, lo: float = 0.0, hi: float = 1.0, tol: float = DEFAULT_TOL,
                      max_iter: int = MAX_BISECTIONS):
    """Zero of a decreasing function on [lo, hi] by bisection.

    Returns (root, width, residual, boundary, iterations).  When f(lo) <= 0
    the lower end is returned with boundary="lower"; when f(hi) > 0 the upper
    end with boundary="upper".
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    f_lo = f(lo)
    if f_lo <= 0:
        return lo, 0.0, f_lo, "lower", 0
    f_hi = f(hi)
    if f_hi > 0:
        return hi, 0.0, f_hi, "upper", 0
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid > 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        it += 1
    root = 0.5 * (lo + hi)
    res = f(root)
    return root, hi - lo, res, None, it


def solve_depth_dimension(n: int, B: float, M: int, m: int = 2, tol: float = DEFAULT_TOL,
                          method: str = "auto") -> DimensionResult:
    """t_{n,B}(M) = inf{s >= 0 : g_n(s) <= 1} for the depth-n partition sum."""

    def f(s):
        return partition_sum(n, PressureProblem(M, B, m, s), method).value.log

    root, width, res, boundary, it = bisect_decreasing(f, 0.0, 1.0, tol)
    return DimensionResult(
        value=root,
        bracket_width=width,
        method=f"partition-sum(n={n})",
        problem={"B": B, "M": M, "m": m, "n": n},
        residual=res,
        boundary=boundary,
        iterations=it,
    )


# -- transfer operator ---------------------------------------------------------


@dataclass(frozen=True)
class SpectralEstimate:
    t: float
    eigenvalue: float
    degree: int
    residual: float
    iterations: int
    M: int
    tail: bool = False


@lru_cache(maxsize=32)
def _chebyshev(N: int):
    """Chebyshev points of the second kind on [0, 1], barycentric weights and
    the differentiation matrix."""
    j = np.arange(N + 1)
    x = 0.5 * (1.0 - np.cos(np.pi * j / N))
    w = (-1.0) ** j
    w[0] *= 0.5
    w[-1] *= 0.5
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    for arr in (x, w, D):
        arr.setflags(write=False)
    return x, w, D


def _interp_matrix(y: np.ndarray, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Rows map node values to interpolant values at the points y."""
    diff = y[..., None] - x
    exact = diff == 0.0
    diff = np.where(exact, 1.0, diff)
    terms = w / diff
    P = terms / terms.sum(axis=-1, keepdims=True)
    hit = exact.any(axis=-1)
    if hit.any():
        P[hit] = exact[hit].astype(float)
    return P


def _operator_matrix(t: float, M: int, N: int, tail: bool) -> np.ndarray:
    x, w, D = _chebyshev(N)
    A = np.zeros((N + 1, N + 1))
    # accumulate by blocks of digits to bound memory for large M
    for start in range(1, M + 1, 256):
        a = np.arange(start, min(M, start + 255) + 1, dtype=float)[:, None]
        base = a + x[None, :]
        P = _interp_matrix(1.0 / base, x, w)
        A += np.einsum("ai,aij->ij", base ** (-t), P)
    if tail:
        if t <= 1:
            raise DomainError("the infinite-alphabet tail diverges for t <= 1")
        # sum_{a>M} (a+x)^{-t} f(1/(a+x)) with f expanded to second order at 0
        q = M + 1 + x
        e0 = np.zeros(N + 1)
        e0[0] = 1.0
        d1 = D[0]
        d2 = (D @ D)[0]
        A += (zeta(t, q)[:, None] * e0[None, :]
              + zeta(t + 1, q)[:, None] * d1[None, :]
              + 0.5 * zeta(t + 2, q)[:, None] * d2[None, :])
    return A


def transfer_eigenvalue(t: float, M: int, degree: int = DEFAULT_DEGREE, tol: float = 1e-12,
                        max_iter: int = 10_000, tail: bool = False) -> SpectralEstimate:
    """Leading eigenvalue of L_t restricted to the digits {1..M}.

    With ``tail=True`` the full alphabet is approximated: digits up to
    max(M, TAIL_EXPLICIT) are summed directly and the rest folded in through
    Hurwitz zeta sums (needs t > 1).
    """
    if t <= 0:
        raise DomainError("t must be positive")
    if M < 1:
        raise DomainError("M must be >= 1")
    if degree < 4:
        raise DomainError("collocation degree must be >= 4")
    A = _operator_matrix(t, max(M, TAIL_EXPLICIT) if tail else M, degree, tail)
    v = np.ones(degree + 1)
    lam = 0.0
    for it in range(1, max_iter + 1):
        Av = A @ v
        new = float(np.max(np.abs(Av)))
        if new == 0.0:
            raise ConvergenceError("operator annihilated the iterate")
        v = Av / new
        if it > 1 and abs(new - lam) <= tol * new:
            lam = new
            break
        lam = new
    else:
        raise ConvergenceError(f"power iteration did not settle in {max_iter} steps")
    if np.any(v <= 0):
        raise ConvergenceError("eigenfunction is not positive at every node; raise the degree")
    residual = float(np.linalg.norm(A @ v - lam * v) / np.linalg.norm(lam * v))
    return SpectralEstimate(t, lam, degree, residual, it, M, tail)


def pressure_value(s: float, B: float, M: int, m: int = 2, degree: int = DEFAULT_DEGREE,
                   tail: bool = False) -> float:
    """log lambda_M(2s) - g_m(s) log B.

    s = 0 is evaluated in closed form (log M, or +inf with the tail), as is
    any s <= 1/2 with the tail switched on.
    """
    if not 0 <= s <= 1:
        raise DomainError("s must lie in [0, 1]")
    growth = gm_eval(m, s) * math.log(B) if B != 1 else 0.0
    if tail and 2 * s <= 1:
        return math.inf
    if s == 0:
        return math.log(M) - growth
    lam = transfer_eigenvalue(2 * s, M, degree, tail=tail).eigenvalue
    return math.log(lam) - growth


def _check_B(B: float) -> None:
    if not B > 1:
        raise DomainError("B must exceed 1")


def solve_dimension(B: float, M: int, m: int = 2, tol: float = DEFAULT_TOL,
                    degree: int = DEFAULT_DEGREE, tail: bool = True,
                    scale: float = 1.0) -> DimensionResult:
    """inf{s >= 0 : P(-g_m(s) log B - s log|T'|) <= 0} by bisection.

    m = 1 gives s_B, m = 2 gives t_B.  ``tail`` folds the digits above M in,
    so M acts as a truncation level of the full alphabet; set it False for
    the dimension over {1..M} alone.  ``scale`` multiplies the pressure by a
    positive constant, which must not move the root.
    """
    _check_B(B)
    if scale <= 0:
        raise DomainError("scale must be positive")

    def f(s):
        return scale * pressure_value(s, B, M, m, degree, tail)

    root, width, res, boundary, it = bisect_decreasing(f, 0.0, 1.0, tol)
    return DimensionResult(
        value=root,
        bracket_width=width,
        method="transfer-operator",
        problem={"B": B, "M": M, "m": m, "degree": degree, "tail": tail},
        residual=res,
        boundary=boundary,
        iterations=it,
    )


def solve_tb_direct(B: float, M: int, tol: float = DEFAULT_TOL, degree: int = DEFAULT_DEGREE,
                    tail: bool = True) -> DimensionResult:
    """t_B with the potential -s^2 log B - s log|T'| written out explicitly."""
    _check_B(B)
    logB = math.log(B)

    def f(s):
        if s == 0:
            return math.inf if tail else math.log(M)
        if tail and 2 * s <= 1:
            return math.inf
        lam = transfer_eigenvalue(2 * s, M, degree, tail=tail).eigenvalue
        return math.log(lam) - s * s * logB

    root, width, res, boundary, it = bisect_decreasing(f, 0.0, 1.0, tol)
    return DimensionResult(root, width, "transfer-operator(s^2 log B)",
                           {"B": B, "M": M, "m": 2, "degree": degree, "tail": tail},
                           res, boundary, it)


def alphabet_dimension(M: int, tol: float = DEFAULT_TOL, degree: int = DEFAULT_DEGREE) -> DimensionResult:
    """Hausdorff dimension of the reals with every partial quotient in {1..M}."""

    def f(s):
        if s == 0:
            return math.log(M)
        return math.log(transfer_eigenvalue(2 * s, M, degree).eigenvalue)

    root, width, res, boundary, it = bisect_decreasing(f, 0.0, 1.0, tol)
    return DimensionResult(root, width, "transfer-operator(alphabet)",
                           {"M": M, "degree": degree}, res, boundary, it)


# -- curves --------------------------------------------------------------------


@dataclass
class CurvePoint:
    B: float
    m: int
    M: int
    s_star: float | None
    residual: float | None
    error: str | None = None


@dataclass
class Curve:
    points: list[CurvePoint]
    monotone: bool
    violations: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [asdict(p) for p in self.points]


def _solve_point(B, M, m, tol, degree, tail) -> CurvePoint:
    try:
        r = solve_dimension(B, M, m, tol, degree, tail)
    except (DomainError, ConvergenceError) as exc:
        return CurvePoint(B, m, M, None, None, str(exc))
    return CurvePoint(B, m, M, r.value, r.residual)


def dimension_curve(grid, M: int, m: int = 2, tol: float = DEFAULT_TOL,
                    degree: int = DEFAULT_DEGREE, tail: bool = True,
                    workers: int | None = None) -> Curve:
    """solve_dimension over an ascending grid of B; flags any increase in s*."""
    grid = [float(b) for b in grid]
    if any(b2 < b1 for b1, b2 in zip(grid, grid[1:])):
        raise DomainError("grid must be sorted ascending")
    for b in grid:
        _check_B(b)
    workers = workers or _workers()
    args = [(b, M, m, tol, degree, tail) for b in grid]
    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(lambda a: _solve_point(*a), args))
    else:
        points = [_solve_point(*a) for a in args]
    violations = []
    solved = [p for p in points if p.s_star is not None]
    for p1, p2 in zip(solved, solved[1:]):
        if p2.s_star > p1.s_star + tol:
            violations.append(f"s* rises from {p1.s_star} at B={p1.B} to {p2.s_star} at B={p2.B}")
    return Curve(points, not violations, violations)


def joint_curve(grid, M: int, tol: float = DEFAULT_TOL, degree: int = DEFAULT_DEGREE,
                tail: bool = True) -> list[dict]:
    """Rows (B, M, s_B, t_B, ordered) where ordered checks s_B <= t_B."""
    sb = dimension_curve(grid, M, 1, tol, degree, tail)
    tb = dimension_curve(grid, M, 2, tol, degree, tail)
    rows = []
    for p1, p2 in zip(sb.points, tb.points):
        ok = None
        if p1.s_star is not None and p2.s_star is not None:
            ok = p1.s_star <= p2.s_star + tol
        rows.append({"B": p1.B, "M": M, "s_B": p1.s_star, "t_B": p2.s_star, "ordered": ok})
    return rows
