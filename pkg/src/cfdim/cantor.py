"""The Cantor-type subset F_M(B) used for the lower dimension bound.

A spec fixes B, s (so alpha = B^s), an alphabet bound M, a block length L and
peak positions n_1 < n_2 < ...  Digit constraints by position j:

* j = n_k       the single peak digit round(2 alpha^{n_k});
* j = n_k + 1   any integer in [B^{n_k} / (2 alpha^{n_k}), B^{n_k} / alpha^{n_k}];
* otherwise     any digit in 1..M.

Free positions between peaks are grouped into blocks of L digits that carry
the weights (alpha^L q_L^2)^{-s} of the measure.  Everything about a single
word (intervals, lengths, gaps) is exact; scans over whole levels use floats
only for logarithms.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import mpmath
import numpy as np
from scipy.special import logsumexp
from scipy.stats import linregress

from .cf import CylinderInterval, LogValue, Word, _pq, cylinder_interval
from .errors import BudgetExceeded, DomainError, SpecError

__all__ = [
    "CantorSpec",
    "Node",
    "LengthReport",
    "GapResult",
    "MeasureNode",
    "HolderReport",
    "SamplePoint",
    "BoxEstimate",
    "generate_n_seq",
    "validate_spec",
    "admissible_children",
    "case_of",
    "fundamental_interval",
    "fundamental_length",
    "gap",
    "brute_force_gaps",
    "measure",
    "level_nodes",
    "level_size",
    "holder_scan",
    "sample_point",
    "max_length_at_level",
    "box_dimension_estimate",
    "level_csv",
    "spec_to_json",
    "spec_from_json",
]

LEVEL_BUDGET = 10**7
BLOCK_BUDGET = 10**7
_APPROX_BITS = 256


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def _exact_root(x: int, k: int) -> int | None:
    """The integer r with r**k == x, if there is one."""
    if x < 0:
        return None
    if x in (0, 1) or k == 1:
        return x
    with mpmath.workprec(x.bit_length() + 64):
        r = int(mpmath.nint(mpmath.root(x, k)))
    for c in (r - 1, r, r + 1):
        if c >= 0 and c**k == x:
            return c
    return None


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


# -- spec ----------------------------------------------------------------------


@dataclass(frozen=True)
class CantorSpec:
    """Parameters of F_M(B).  B and s are held as exact rationals.

    An empty ``n_seq`` leaves every position free, giving the plain
    bounded-digit set over {1..M}.
    """

    B: Fraction
    s: Fraction
    M: int
    L: int
    n_seq: tuple[int, ...]
    epsilon0: float | None = None
    k0: int = 0

    def __post_init__(self):
        object.__setattr__(self, "B", _as_fraction(self.B))
        object.__setattr__(self, "s", _as_fraction(self.s))
        object.__setattr__(self, "n_seq", tuple(int(n) for n in self.n_seq))

    # alpha = B^s, exact when B^s is rational
    @cached_property
    def alpha_exact(self) -> Fraction | None:
        a, b = self.s.numerator, self.s.denominator
        if a < 0:
            return None
        num = _exact_root(self.B.numerator**a, b)
        den = _exact_root(self.B.denominator**a, b)
        if num is None or den is None:
            return None
        return Fraction(num, den)

    @property
    def alpha(self) -> float:
        return float(self.B) ** float(self.s)

    def alpha_pow(self, n: int) -> Fraction:
        """alpha^n, exact when possible, else to 256 bits."""
        if self.alpha_exact is not None:
            return self.alpha_exact**n
        with mpmath.workprec(_APPROX_BITS + 8 * n):
            v = mpmath.power(mpmath.mpf(self.B.numerator) / self.B.denominator,
                             mpmath.mpf(self.s.numerator) / self.s.denominator * n)
            man, exp = mpmath.mpf(v).man_exp
        return Fraction(int(man)) * Fraction(2) ** int(exp)

    @cached_property
    def peaks(self) -> dict[int, int]:
        """Peak position n_k -> its digit round(2 alpha^{n_k})."""
        return {n: _round_half_up(2 * self.alpha_pow(n)) for n in self.n_seq}

    @cached_property
    def post_ranges(self) -> dict[int, tuple[int, int]]:
        """Position n_k + 1 -> (lowest, highest) admissible digit."""
        out = {}
        for n in self.n_seq:
            ratio = self.B**n / self.alpha_pow(n)
            out[n + 1] = (_ceil(ratio / 2), _floor(ratio))
        return out

    @cached_property
    def segment_starts(self) -> tuple[int, ...]:
        """First free position of each run of free digits."""
        return (1,) + tuple(n + 2 for n in self.n_seq)

    @cached_property
    def m_k(self) -> tuple[int, ...]:
        """Number of whole blocks between consecutive peaks."""
        return tuple((n - start) // self.L for n, start in zip(self.n_seq, self.segment_starts))

    @cached_property
    def default_epsilon0(self) -> float:
        if not self.n_seq:
            return 0.01
        worst = max(1 - (n - start) / n for n, start in zip(self.n_seq, self.segment_starts))
        return worst + 0.01

    @property
    def eps0(self) -> float:
        return self.epsilon0 if self.epsilon0 is not None else self.default_epsilon0

    def position_kind(self, j: int) -> tuple[str, int, int]:
        """("free" | "peak" | "post", lowest digit, highest digit) at position j."""
        if j < 1:
            raise DomainError("positions start at 1")
        if j in self.peaks:
            a = self.peaks[j]
            return "peak", a, a
        if j in self.post_ranges:
            lo, hi = self.post_ranges[j]
            return "post", lo, hi
        return "free", 1, self.M

    def block_offset(self, j: int) -> int:
        """Offset of free position j within its block."""
        start = 1
        for st in self.segment_starts:
            if st <= j:
                start = st
        return (j - start) % self.L

    # block weights of the measure
    @cached_property
    def _block_table(self) -> list[np.ndarray]:
        M, L = self.M, self.L
        if M**L > BLOCK_BUDGET:
            raise BudgetExceeded(f"M^L = {M**L} block words exceed {BLOCK_BUDGET}")
        digits = np.arange(1, M + 1, dtype=np.float64)
        qp = np.zeros(1)
        q = np.ones(1)
        for _ in range(L):
            new = (q[:, None] * digits[None, :] + qp[:, None]).ravel()
            qp = np.repeat(q, M)
            q = new
        logs = [None] * (L + 1)
        logs[L] = -2.0 * float(self.s) * np.log(q)
        for r in range(L - 1, -1, -1):
            logs[r] = logsumexp(logs[r + 1].reshape(-1, M), axis=1)
        return logs

    @cached_property
    def normalizer(self) -> LogValue:
        """w = sum over blocks of (alpha^L q_L^2)^{-s}."""
        lw = float(self._block_table[0][0]) - float(self.s) * self.L * math.log(self.alpha)
        return LogValue(lw)

    def log_transition(self, prefix, digit: int, conserving: bool = True) -> float:
        """log mu(prefix + digit) - log mu(prefix)."""
        j = len(prefix) + 1
        kind, lo, hi = self.position_kind(j)
        if not lo <= digit <= hi:
            raise DomainError(f"digit {digit} is not admissible at position {j}")
        if kind == "peak":
            return 0.0 if conserving else -math.log(2 * float(self.alpha_pow(j)))
        if kind == "post":
            n = j - 1
            if conserving:
                return -math.log(hi - lo + 1)
            return math.log(2) + n * (math.log(self.alpha) - math.log(self.B))
        r = self.block_offset(j)
        table = self._block_table
        idx = 0
        for a in prefix[len(prefix) - r:] if r else ():
            idx = idx * self.M + (a - 1)
        return float(table[r + 1][idx * self.M + digit - 1] - table[r][idx])


def generate_n_seq(count: int, L: int = 1, gamma: float = 4.0, start: int | None = None,
                   mode: str = "geometric") -> tuple[int, ...]:
    """Peak positions with whole blocks between them.

    ``mode="geometric"`` takes n_k as the least admissible integer >= gamma
    n_{k-1}; ``mode="doubling"`` the least admissible >= 2 n_{k-1} + 2.
    Admissible means the free run before n_k splits into blocks of L.
    """
    if count < 1 or L < 1:
        raise DomainError("count and L must be >= 1")
    n1 = start if start is not None else L + 1
    if n1 < 2 or (n1 - 1) % L:
        raise DomainError(f"n_1 = {n1} must be >= 2 with n_1 - 1 divisible by L")
    seq = [n1]
    while len(seq) < count:
        prev = seq[-1]
        if mode == "geometric":
            target = math.ceil(gamma * prev)
        elif mode == "doubling":
            target = 2 * prev + 2
        else:
            raise DomainError(f"unknown mode {mode!r}")
        target = max(target, prev + 2)
        free = target - prev - 2
        target += (-free) % L
        seq.append(target)
    return tuple(seq)


def validate_spec(spec: CantorSpec) -> CantorSpec:
    """Check every invariant of a spec; return it with epsilon0 filled in.

    Raises SpecError listing every violation found.
    """
    v = []
    if not spec.B > 1:
        v.append(f"B = {spec.B} must exceed 1")
    if not 0 < spec.s < 1:
        v.append(f"s = {spec.s} must lie in (0, 1)")
    if spec.M < 1:
        v.append("M must be >= 1")
    if spec.L < 1:
        v.append("L must be >= 1")
    if v:
        raise SpecError(v)
    if not spec.alpha_pow(1) <= spec.B:
        v.append("alpha = B^s exceeds B")
    if not spec.alpha_pow(1) > 1:
        v.append("alpha = B^s must exceed 1")
    prev = 0
    for k, (n, start) in enumerate(zip(spec.n_seq, spec.segment_starts), start=1):
        if n < start:
            v.append(f"n_{k} = {n} leaves no room after n_{k-1} = {prev}")
        elif (n - start) % spec.L:
            v.append(f"free run before n_{k} = {n} has {n - start} digits, "
                     f"not a multiple of L = {spec.L}")
        prev = n
    for n in spec.n_seq:
        lo, hi = spec.post_ranges[n + 1]
        if lo > hi:
            v.append(f"empty peak range at n = {n}: ceil(B^n/(2 alpha^n)) = {lo} "
                     f"> floor(B^n/alpha^n) = {hi}")
        if spec.peaks[n] < 1:
            v.append(f"peak digit at n = {n} rounds to {spec.peaks[n]}")
    eps = spec.eps0
    if eps <= 0:
        v.append("epsilon0 must be positive")
    for k, (n, start) in enumerate(zip(spec.n_seq, spec.segment_starts), start=1):
        if k > spec.k0 and (n - start) / n < 1 - eps:
            v.append(f"m_{k} L / n_{k} = {(n - start) / n:.4f} < 1 - epsilon0 = {1 - eps:.4f}")
    if v:
        raise SpecError(v)
    if spec.epsilon0 is None:
        return CantorSpec(spec.B, spec.s, spec.M, spec.L, spec.n_seq, eps, spec.k0)
    return spec


def _check_word(w, spec: CantorSpec) -> Word:
    w = Word(w)
    for j, a in enumerate(w, start=1):
        _, lo, hi = spec.position_kind(j)
        if not lo <= a <= hi:
            raise DomainError(f"word {list(w)} is not admissible at position {j}")
    return w


def admissible_children(w, spec: CantorSpec) -> range:
    """Digits a with w + (a,) admissible."""
    w = _check_word(w, spec)
    _, lo, hi = spec.position_kind(len(w) + 1)
    if lo > hi:
        raise SpecError([f"no admissible digit at position {len(w) + 1}"])
    return range(lo, hi + 1)


def case_of(n: int, spec: CantorSpec) -> str:
    """Structural case of a level-n fundamental cylinder."""
    if n in spec.peaks:
        return "peak"
    if n + 1 in spec.peaks:
        return "pre-peak"
    return "interior"


# -- fundamental cylinders -------------------------------------------------------


def _interval_from_state(p_prev, q_prev, p, q, lo, hi, n) -> CylinderInterval:
    # union over a in [lo, hi] of I_{n+1}: spans from E(lo) (closed) to E(hi+1)
    e_lo = Fraction(lo * p + p_prev, lo * q + q_prev)
    e_hi = Fraction((hi + 1) * p + p_prev, (hi + 1) * q + q_prev)
    if e_lo < e_hi:
        return CylinderInterval(e_lo, e_hi, True, False, n)
    return CylinderInterval(e_hi, e_lo, False, True, n)


def fundamental_interval(w, spec: CantorSpec) -> CylinderInterval:
    """J_n(w): the union of the admissible next-level basic cylinders."""
    w = _check_word(w, spec)
    if not w:
        raise DomainError("need a nonempty word")
    _, lo, hi = spec.position_kind(len(w) + 1)
    return _interval_from_state(*_pq(w), lo, hi, len(w))


@dataclass
class LengthReport:
    """Exact |J_n| with its case bounds.

    ``bounds`` are asserted; ``diagnostics`` hold variants that are reported
    but not required to hold.  Each entry is (lower, upper, holds).
    """

    word: Word
    case: str
    length: Fraction
    bounds: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(b[2] for b in self.bounds.values())


def _bound(lo, hi, x) -> tuple[Fraction, Fraction, bool]:
    return lo, hi, lo <= x <= hi


def fundamental_length(w, spec: CantorSpec, strict: bool = True) -> LengthReport:
    """Exact |J_n(w)| from the telescoped child sum, checked against its case.

    With ``strict`` a failed case bound raises AssertionError.
    """
    w = _check_word(w, spec)
    n = len(w)
    if n == 0:
        raise DomainError("need a nonempty word")
    p_prev, q_prev, p, q = _pq(w)
    _, lo, hi = spec.position_kind(n + 1)
    length = Fraction(hi - lo + 1, (lo * q + q_prev) * ((hi + 1) * q + q_prev))
    assert length == fundamental_interval(w, spec).length
    case = case_of(n, spec)
    rep = LengthReport(w, case, length)
    q2 = q * q
    if case == "interior":
        rep.bounds["SC1"] = _bound(Fraction(1, 6 * q2), Fraction(1, q2), length)
        if n - 1 in spec.peaks:
            # post-peak level: q_n is about B^{n-1} q_{n-2}
            qq = denominators_before(w, 2)
            nk = n - 1
            rep.diagnostics["sdee-printed"] = _bound(
                Fraction(1, 24 * spec.B ** (2 * n) * qq * qq),
                Fraction(1, 4 * spec.B ** (2 * n) * qq * qq), length)
            rep.diagnostics["sdee-n_k"] = _bound(
                Fraction(1, 24 * spec.B ** (2 * nk) * qq * qq),
                Fraction(1, spec.B ** (2 * nk) * qq * qq), length)
    elif case == "pre-peak":
        A = lo
        rep.bounds["SC2"] = _bound(Fraction(1, 2 * (A + 1) ** 2 * q2), Fraction(1, A * A * q2), length)
        an1 = spec.alpha_pow(n + 1)
        rep.diagnostics["SC2-printed"] = _bound(1 / (12 * an1 * q2), 1 / (2 * an1 * q2), length)
    else:
        an = spec.alpha_pow(n)
        bn = spec.B**n
        qm = q_prev * q_prev
        rep.bounds["SC3"] = _bound(1 / (32 * an * bn * qm), 1 / (2 * an * bn * qm), length)
        rep.bounds["SC3-q_n"] = _bound(an / (6 * bn * q2), 2 * an / (bn * q2), length)
    if strict and not rep.ok:
        bad = {k: v for k, v in rep.bounds.items() if not v[2]}
        raise AssertionError(f"length bound violated for {list(w)}: {bad}")
    return rep


def denominators_before(w, back: int) -> int:
    """q_{n-back} of a word of length n."""
    return _pq(Word(w)[: len(w) - back])[3]


# -- gaps ----------------------------------------------------------------------


@dataclass
class GapResult:
    """Distances from J_n(w) to the nearest level-n fundamental cylinders.

    A side is None when no admissible word of that order lies on that side
    (the word is extreme), in which case ``one_sided`` is set.
    ``closed_form`` is the two-neighbour formula, filled in for interior
    words whose last digit has an admissible right sibling a_n + 1;
    ``case_bound`` is the case lower bound measured inside I_n.
    """

    word: Word
    case: str
    left: Fraction | None
    right: Fraction | None
    length: Fraction
    closed_form: Fraction | None = None
    case_bound: Fraction | None = None

    @property
    def G(self) -> Fraction | None:
        sides = [g for g in (self.left, self.right) if g is not None]
        return min(sides) if sides else None

    @property
    def one_sided(self) -> bool:
        return self.left is None or self.right is None

    @property
    def floor(self) -> Fraction:
        return {"interior": None, "pre-peak": Fraction(1, 2), "peak": Fraction(1, 4)}[self.case]

    def floor_ok(self, M: int) -> bool | None:
        if self.G is None:
            return None
        f = self.floor if self.case != "interior" else Fraction(1, 2 * M)
        return self.G >= f * self.length


def _extreme_descendant(prefix: list, n: int, spec: CantorSpec, leftmost: bool) -> list:
    word = list(prefix)
    for j in range(len(word) + 1, n + 1):
        _, lo, hi = spec.position_kind(j)
        # for even j a larger digit moves right, for odd j it moves left
        take_min = (j % 2 == 0) == leftmost
        word.append(lo if take_min else hi)
    return word


def _neighbour(w: Word, spec: CantorSpec, side: str) -> list | None:
    n = len(w)
    for j in range(n, 0, -1):
        _, lo, hi = spec.position_kind(j)
        step = 1 if (j % 2 == 0) == (side == "right") else -1
        d = w[j - 1] + step
        if lo <= d <= hi:
            return _extreme_descendant(list(w[: j - 1]) + [d], n, spec, leftmost=side == "right")
    return None


def gap(w, spec: CantorSpec) -> GapResult:
    """Exact gaps between J_n(w) and its nearest same-order neighbours."""
    w = _check_word(w, spec)
    n = len(w)
    if n == 0:
        raise DomainError("need a nonempty word")
    J = fundamental_interval(w, spec)
    left = right = None
    nb = _neighbour(w, spec, "left")
    if nb is not None:
        left = J.left - fundamental_interval(nb, spec).right
    nb = _neighbour(w, spec, "right")
    if nb is not None:
        right = fundamental_interval(nb, spec).left - J.right
    case = case_of(n, spec)
    res = GapResult(w, case, left, right, J.length)
    p_prev, q_prev, p, q = _pq(w)
    _, lo, hi = spec.position_kind(n + 1)
    _, lo_n, hi_n = spec.position_kind(n)
    if case == "interior":
        # the right sibling alone pins the nearer gap, at either parity
        if w[-1] < hi_n:
            res.closed_form = Fraction(1, ((spec.M + 1) * (q + q_prev) + q_prev) * (q + q_prev))
    else:
        # distance from J to the far end of I_n on its narrow side
        res.case_bound = Fraction(1, ((hi + 1) * q + q_prev) * (q + q_prev))
    return res


def brute_force_gaps(spec: CantorSpec, n: int, budget: int = 10**5) -> dict:
    """word -> (left gap, right gap) by sorting every level-n interval."""
    nodes = level_nodes(spec, n, budget=budget)
    _, lo, hi = spec.position_kind(n + 1)
    ivs = sorted(((_interval_from_state(nd.p_prev, nd.q_prev, nd.p, nd.q, lo, hi, n), nd.word)
                  for nd in nodes), key=lambda t: t[0].left)
    out = {}
    for i, (iv, word) in enumerate(ivs):
        left = iv.left - ivs[i - 1][0].right if i > 0 else None
        right = ivs[i + 1][0].left - iv.right if i + 1 < len(ivs) else None
        out[word] = (left, right)
    return out


# -- measure and level enumeration ------------------------------------------------


@dataclass(frozen=True)
class Node:
    word: Word
    p_prev: int
    q_prev: int
    p: int
    q: int
    log_mu: float


@dataclass(frozen=True)
class MeasureNode:
    word: Word
    mu: LogValue
    normalizer: LogValue


def measure(w, spec: CantorSpec, conserving: bool = True) -> MeasureNode:
    """mu(J_n(w)).

    The default measure is a probability measure: block marginals on free
    runs, all mass to the single peak digit, uniform over the post-peak range.
    ``conserving=False`` uses the literal peak factors 1/(2 alpha^n) and
    2 alpha^n / B^n instead, which do not preserve total mass.
    """
    w = _check_word(w, spec)
    lg = 0.0
    for j in range(len(w)):
        lg += spec.log_transition(w[:j], w[j], conserving)
    return MeasureNode(w, LogValue(lg), spec.normalizer)


def level_size(spec: CantorSpec, n: int) -> int:
    size = 1
    for j in range(1, n + 1):
        _, lo, hi = spec.position_kind(j)
        size *= hi - lo + 1
    return size


def level_nodes(spec: CantorSpec, n: int, budget: int = LEVEL_BUDGET,
                conserving: bool = True) -> list[Node]:
    """Every admissible word of length n with its convergents and log mu."""
    size = level_size(spec, n)
    if size > budget:
        raise BudgetExceeded(f"level {n} has {size} words, budget {budget}")
    nodes = [Node(Word(()), 1, 0, 0, 1, 0.0)]
    for j in range(1, n + 1):
        _, lo, hi = spec.position_kind(j)
        nxt = []
        for nd in nodes:
            for a in range(lo, hi + 1):
                lt = spec.log_transition(nd.word, a, conserving)
                nxt.append(Node(nd.word + Word((a,)), nd.p, nd.q, a * nd.p + nd.p_prev,
                                a * nd.q + nd.q_prev, nd.log_mu + lt))
        nodes = nxt
    return nodes


def _log_length(nd: Node, lo: int, hi: int) -> float:
    return (math.log(hi - lo + 1) - math.log(lo * nd.q + nd.q_prev)
            - math.log((hi + 1) * nd.q + nd.q_prev))


@dataclass
class HolderReport:
    level: int
    exponent: float
    argmin: Word
    bound: float
    ok: bool
    count: int


def holder_scan(spec: CantorSpec, n: int, slack: float = 0.0, budget: int = LEVEL_BUDGET,
                conserving: bool = True) -> HolderReport:
    """min over level-n words of log mu(J_n) / log |J_n|."""
    if n < 1:
        raise DomainError("level must be >= 1")
    nodes = level_nodes(spec, n, budget, conserving)
    _, lo, hi = spec.position_kind(n + 1)
    best, arg = math.inf, None
    for nd in nodes:
        e = nd.log_mu / _log_length(nd, lo, hi)
        if e < best:
            best, arg = e, nd.word
    bound = float(spec.s) - 6.0 / spec.L - spec.eps0 - slack
    return HolderReport(n, best, arg, bound, best >= bound, len(nodes))


# -- sampling ------------------------------------------------------------------


@dataclass
class SamplePoint:
    word: Word
    point: float
    exact: Fraction
    interval: CylinderInterval


def _uniform_int(rng: np.random.Generator, lo: int, hi: int) -> int:
    cnt = hi - lo + 1
    if cnt < 2**62:
        return lo + int(rng.integers(0, cnt))
    nbits = cnt.bit_length()
    while True:
        r = int.from_bytes(rng.bytes((nbits + 7) // 8), "little") >> (8 * ((nbits + 7) // 8) - nbits)
        if r < cnt:
            return lo + r


def sample_point(spec: CantorSpec, depth: int, seed: int = 0) -> SamplePoint:
    """A mu-random admissible word of the given depth and its cylinder midpoint."""
    if depth < 1:
        raise DomainError("depth must be >= 1")
    rng = np.random.default_rng(seed)
    word: list[int] = []
    for j in range(1, depth + 1):
        kind, lo, hi = spec.position_kind(j)
        if kind == "peak":
            word.append(lo)
        elif kind == "post":
            word.append(_uniform_int(rng, lo, hi))
        else:
            logp = np.array([spec.log_transition(word, a) for a in range(lo, hi + 1)])
            prob = np.exp(logp - logsumexp(logp))
            word.append(lo + int(rng.choice(len(prob), p=prob / prob.sum())))
    w = Word(word)
    iv = cylinder_interval(w)
    return SamplePoint(w, float(iv.midpoint), iv.midpoint, iv)


# -- box counting ----------------------------------------------------------------


def max_length_at_level(spec: CantorSpec, n: int, budget: int = LEVEL_BUDGET) -> float:
    """log of max |J_n| over level n, by best-first search.

    Lengths shrink along descendants, so the first level-n word popped off a
    max-heap keyed by |J| is the longest one.
    """
    import heapq

    def loglen(qp, q, j):
        _, lo, hi = spec.position_kind(j + 1)
        return math.log(hi - lo + 1) - math.log(lo * q + qp) - math.log((hi + 1) * q + qp)

    heap = [(0.0, 0, 0, 1)]
    seen = 0
    while heap:
        neg, j, qp, q = heapq.heappop(heap)
        if j == n:
            return -neg
        _, lo, hi = spec.position_kind(j + 1)
        seen += hi - lo + 1
        if seen > budget:
            raise BudgetExceeded("best-first search exceeded its budget")
        for a in range(lo, hi + 1):
            nq = a * q + qp
            heapq.heappush(heap, (-loglen(q, nq, j + 1), j + 1, q, nq))
    raise DomainError("empty level")


@dataclass
class BoxEstimate:
    slope: float
    stderr: float
    band: tuple[float, float]
    levels: list[int]
    log_delta: list[float]
    counts: list[int]


def _stopping_counts(spec: CantorSpec, log_deltas: np.ndarray, budget: int) -> np.ndarray:
    """N(delta) = number of J with |J| <= delta < |J(parent)|, for each delta."""
    order = np.sort(log_deltas)
    diff = np.zeros(len(order) + 1, dtype=np.int64)
    target = order[0]
    qp = np.zeros(1)
    q = np.ones(1)
    parent = np.full(1, np.inf)
    j = 0
    processed = 0
    while q.size:
        _, lo, hi = spec.position_kind(j + 1)
        if j > 0:
            ll = math.log(hi - lo + 1) - np.log(lo * q + qp) - np.log((hi + 1) * q + qp)
        else:
            ll = np.zeros(1)
        i_lo = np.searchsorted(order, ll, side="left")
        i_hi = np.searchsorted(order, parent, side="left")
        hit = i_hi > i_lo
        np.add.at(diff, i_lo[hit], 1)
        np.add.at(diff, i_hi[hit], -1)
        keep = ll > target
        q, qp, ll = q[keep], qp[keep], ll[keep]
        if not q.size:
            break
        digits = np.arange(lo, hi + 1, dtype=np.float64)
        processed += q.size * digits.size
        if processed > budget:
            raise BudgetExceeded(f"stopping-time cover exceeded {budget} nodes")
        new_q = (q[:, None] * digits[None, :] + qp[:, None]).ravel()
        qp = np.repeat(q, digits.size)
        parent = np.repeat(ll, digits.size)
        q = new_q
        j += 1
    counts = np.cumsum(diff)[:-1]
    # back to the caller's order
    return counts[np.searchsorted(order, log_deltas)]


def box_dimension_estimate(spec: CantorSpec, levels, budget: int = LEVEL_BUDGET) -> BoxEstimate:
    """Slope of log N(delta_n) against -log delta_n over a ladder of levels.

    delta_n is the longest level-n fundamental cylinder and N counts the
    stopping-time cover at that scale: the J with |J| <= delta_n whose
    parent is longer than delta_n.
    """
    levels = sorted(set(int(n) for n in levels))
    if len(levels) < 3:
        raise DomainError("need at least 3 ladder levels")
    ld = np.array([max_length_at_level(spec, n, budget) for n in levels])
    counts = _stopping_counts(spec, ld, budget)
    use = counts > 0
    if use.sum() < 3:
        raise DomainError("fewer than 3 usable ladder levels")
    x = -ld[use]
    y = np.log(counts[use].astype(float))
    if np.ptp(x) == 0:
        raise DomainError("ladder scales are all equal")
    fit = linregress(x, y)
    se = float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
    return BoxEstimate(float(fit.slope), se, (float(fit.slope) - 2 * se, float(fit.slope) + 2 * se),
                       levels, ld.tolist(), counts.tolist())


# -- serialization ---------------------------------------------------------------


def level_csv(spec: CantorSpec, n: int, budget: int = 10**5) -> str:
    """CSV dump of level n: word, exact length, log mu, case, gap lower bound."""
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["word", "length_num", "length_den", "mu_log", "case", "gap_lower"])
    for nd in level_nodes(spec, n, budget):
        rep = fundamental_length(nd.word, spec, strict=False)
        g = gap(nd.word, spec).G
        out.writerow([json.dumps(list(nd.word)), rep.length.numerator, rep.length.denominator,
                      repr(nd.log_mu), rep.case, "" if g is None else str(g)])
    return buf.getvalue()


def spec_to_json(spec: CantorSpec) -> str:
    return json.dumps({
        "B": str(spec.B), "s": str(spec.s), "M": spec.M, "L": spec.L,
        "n_seq": list(spec.n_seq), "epsilon0": spec.epsilon0, "k0": spec.k0,
    }, sort_keys=True)


def spec_from_json(data) -> CantorSpec:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        return CantorSpec(Fraction(str(data["B"])), Fraction(str(data["s"])), int(data["M"]),
                          int(data["L"]), tuple(data["n_seq"]), data.get("epsilon0"),
                          int(data.get("k0", 0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError([f"malformed spec: {exc}"]) from exc
