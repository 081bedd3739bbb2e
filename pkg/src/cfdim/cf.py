"""Exact continued-fraction arithmetic.

Gauss-map expansion, convergents, basic cylinders and the classical
inequalities (Khintchine's bounds, Legendre's theorem) that the rest of the
package leans on.  Denominators are Python ints throughout; nothing here is
rounded unless a float goes in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterator, NamedTuple, Sequence

from .errors import DomainError, PrecisionError

__all__ = [
    "Word",
    "Convergent",
    "CylinderInterval",
    "LogValue",
    "QuadraticSurd",
    "Expansion",
    "KhintchineReport",
    "gauss_map",
    "expand",
    "iter_digits",
    "convergents",
    "denominators",
    "cylinder_interval",
    "cylinder_length",
    "tn_derivative_magnitude",
    "khintchine_check",
    "legendre_check",
    "word_to_json",
    "word_from_json",
    "rational_to_json",
    "rational_from_json",
]


class Word(tuple):
    """A finite string of positive partial quotients (a_1, ..., a_n)."""

    def __new__(cls, digits: Sequence[int] = ()):
        digits = tuple(int(a) for a in digits)
        for a in digits:
            if a < 1:
                raise DomainError(f"partial quotients must be >= 1, got {a}")
        return super().__new__(cls, digits)

    def __repr__(self) -> str:
        return f"Word({list(self)})"

    def __add__(self, other):
        return Word(tuple(self) + tuple(other))

    def __getitem__(self, item):
        out = super().__getitem__(item)
        return Word(out) if isinstance(item, slice) else out

    def to_json(self) -> list[int]:
        return list(self)


class Convergent(NamedTuple):
    p: int
    q: int
    n: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.p, self.q)


@dataclass(frozen=True)
class CylinderInterval:
    """Basic cylinder I_n: exact endpoints plus which ends are closed."""

    left: Fraction
    right: Fraction
    closed_left: bool
    closed_right: bool
    order: int

    @property
    def length(self) -> Fraction:
        return self.right - self.left

    def contains(self, x) -> bool:
        above = _compare(x, self.left)
        below = _compare(x, self.right)
        ok_left = above > 0 or (above == 0 and self.closed_left)
        ok_right = below < 0 or (below == 0 and self.closed_right)
        return ok_left and ok_right

    __contains__ = contains

    @property
    def midpoint(self) -> Fraction:
        return (self.left + self.right) / 2


# -- log-domain values --------------------------------------------------------

_EXACT_LOG_LIMIT = 700.0


@dataclass(frozen=True)
class LogValue:
    """A nonnegative real held by its natural log.

    When the value came from a rational of moderate size the rational is kept
    too, so conversions back are exact.
    """

    log: float
    exact: Fraction | None = None

    @classmethod
    def from_rational(cls, r) -> "LogValue":
        r = Fraction(r)
        if r < 0:
            raise DomainError("LogValue holds nonnegative reals only")
        if r == 0:
            return cls(-math.inf, r)
        lg = math.log(r.numerator) - math.log(r.denominator)
        return cls(lg, r if abs(lg) < _EXACT_LOG_LIMIT else None)

    @classmethod
    def from_float(cls, v: float) -> "LogValue":
        if v < 0:
            raise DomainError("LogValue holds nonnegative reals only")
        return cls(math.log(v) if v > 0 else -math.inf)

    def __float__(self) -> float:
        if self.exact is not None:
            return float(self.exact)
        return math.exp(self.log)

    def __mul__(self, other: "LogValue") -> "LogValue":
        exact = None
        if self.exact is not None and other.exact is not None:
            return LogValue.from_rational(self.exact * other.exact)
        return LogValue(self.log + other.log, exact)

    def __add__(self, other: "LogValue") -> "LogValue":
        if self.exact is not None and other.exact is not None:
            return LogValue.from_rational(self.exact + other.exact)
        return LogValue(float(_logaddexp(self.log, other.log)))

    def __lt__(self, other: "LogValue") -> bool:
        if self.exact is not None and other.exact is not None:
            return self.exact < other.exact
        return self.log < other.log

    def __le__(self, other: "LogValue") -> bool:
        return self == other or self < other


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


# -- quadratic surds -----------------------------------------------------------


def _sign_surd(u: int, v: int, d: int) -> int:
    """Sign of u + v*sqrt(d) for integers u, v and non-square d > 1."""
    if u >= 0 and v >= 0:
        return 0 if (u == 0 and v == 0) else 1
    if u <= 0 and v <= 0:
        return -1
    # mixed signs: the larger magnitude wins
    if u * u > v * v * d:
        return 1 if u > 0 else -1
    return 1 if v > 0 else -1


@dataclass(frozen=True)
class QuadraticSurd:
    """The real number (a + b*sqrt(d)) / c with integer a, b, c and d > 1 non-square."""

    a: int
    b: int
    d: int
    c: int = 1

    def __post_init__(self):
        if self.d < 2 or math.isqrt(self.d) ** 2 == self.d:
            raise DomainError(f"d={self.d} must be a non-square integer > 1")
        if self.c == 0:
            raise DomainError("zero denominator")
        a, b, c = self.a, self.b, self.c
        if c < 0:
            a, b, c = -a, -b, -c
        g = math.gcd(math.gcd(a, b), c)
        object.__setattr__(self, "a", a // g)
        object.__setattr__(self, "b", b // g)
        object.__setattr__(self, "c", c // g)

    def __float__(self) -> float:
        return (self.a + self.b * math.sqrt(self.d)) / self.c

    def floor(self) -> int:
        # floor((a + y)/c) == floor((a + floor(y))/c) for c > 0 and irrational y
        r2 = self.b * self.b * self.d
        root = math.isqrt(r2)
        fy = root if self.b >= 0 else -root - 1
        return (self.a + fy) // self.c

    def __sub__(self, k: int) -> "QuadraticSurd":
        return QuadraticSurd(self.a - k * self.c, self.b, self.d, self.c)

    def reciprocal(self) -> "QuadraticSurd":
        den = self.a * self.a - self.b * self.b * self.d
        return QuadraticSurd(self.c * self.a, -self.c * self.b, self.d, den)

    def compare(self, r) -> int:
        """Sign of self - r for a rational r."""
        r = Fraction(r)
        u = self.a * r.denominator - r.numerator * self.c
        v = self.b * r.denominator
        return _sign_surd(u, v, self.d)

    def __lt__(self, r):
        return self.compare(r) < 0

    def __gt__(self, r):
        return self.compare(r) > 0


def _compare(x, r: Fraction) -> int:
    if isinstance(x, QuadraticSurd):
        return x.compare(r)
    x = Fraction(x)
    return (x > r) - (x < r)


# -- the Gauss map and expansions ---------------------------------------------


def gauss_map(x):
    """T(0) = 0, T(x) = frac(1/x) on (0, 1).

    Exact for ints, Fractions and quadratic surds; floats stay floats.
    """
    if isinstance(x, QuadraticSurd):
        if not (x.compare(0) >= 0 and x.compare(1) < 0):
            raise DomainError("gauss_map needs 0 <= x < 1")
        inv = x.reciprocal()
        return inv - inv.floor()
    if not 0 <= x < 1:
        raise DomainError(f"gauss_map needs 0 <= x < 1, got {x}")
    if x == 0:
        return x * 0
    if isinstance(x, Rational):
        inv = 1 / Fraction(x)
        return inv - math.floor(inv)
    inv = 1.0 / x
    return inv - math.floor(inv)


@dataclass(frozen=True)
class Expansion:
    """Leading partial quotients of a real, with the reason it stopped."""

    word: Word
    rational: bool = False
    precision_exhausted: bool = False

    @property
    def truncated(self) -> bool:
        return self.rational or self.precision_exhausted


def _as_interval(x, precision):
    """Return (center, halfwidth) with exact rationals, or (surd, None)."""
    if isinstance(x, QuadraticSurd):
        return x, None
    if isinstance(x, tuple):
        value, precision = x
        return _as_interval(value, precision)
    if isinstance(x, float):
        center = Fraction(repr(x))
        delta = Fraction(precision) if precision is not None else Fraction(math.ulp(x))
        return center, delta
    center = Fraction(x)
    return center, (Fraction(precision) if precision is not None else Fraction(0))


def iter_digits(x, precision=None) -> Iterator[tuple[int, str | None]]:
    """Yield (digit, None) per certified partial quotient, then (0, reason).

    ``reason`` is ``"rational"`` when an iterate hits 0 exactly and
    ``"precision"`` once the uncertainty interval straddles a digit boundary.
    Quadratic surds never stop.
    """
    center, delta = _as_interval(x, precision)
    if isinstance(center, QuadraticSurd):
        if not (center.compare(0) > 0 and center.compare(1) < 0):
            raise DomainError("expand needs 0 < x < 1")
        y = center
        while True:
            inv = y.reciprocal()
            a = inv.floor()
            yield a, None
            y = inv - a
    if not 0 < center < 1:
        raise DomainError(f"expand needs 0 < x < 1, got {center}")
    y = center
    lo, hi = center - delta, center + delta
    if delta and (lo <= 0 or hi >= 1):
        yield 0, "precision"
        return
    while True:
        inv = 1 / y
        a = math.floor(inv)
        nxt = inv - a
        if delta:
            # the Gauss map reverses order on a cylinder, so track both ends
            ilo, ihi = 1 / hi, 1 / lo
            if math.floor(ilo) != a or math.floor(ihi) != a or ilo == a:
                if nxt == 0:
                    yield a, None
                    yield 0, "rational"
                else:
                    yield 0, "precision"
                return
            lo, hi = ilo - a, ihi - a
        yield a, None
        if nxt == 0:
            yield 0, "rational"
            return
        y = nxt


def expand(x, n: int, precision=None) -> Expansion:
    """First n partial quotients of x.

    x may be an int/Fraction (exact), a QuadraticSurd (exact, infinite), a
    float (taken as its shortest decimal with a one-ulp uncertainty) or a
    ``(value, precision)`` pair.  Rational inputs come back short with
    ``rational=True``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    digits: list[int] = []
    for a, reason in iter_digits(x, precision):
        if reason == "rational":
            return Expansion(Word(digits), rational=True)
        if reason == "precision":
            return Expansion(Word(digits), precision_exhausted=True)
        digits.append(a)
        if len(digits) == n:
            break
    return Expansion(Word(digits))


# -- convergents and cylinders -------------------------------------------------


def convergents(w: Sequence[int]) -> list[Convergent]:
    """(p_k, q_k) for k = 1..n from the standard three-term recurrence."""
    p_prev, p = 1, 0
    q_prev, q = 0, 1
    out = []
    for k, a in enumerate(Word(w), start=1):
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        out.append(Convergent(p, q, k))
    return out


def _pq(w: Sequence[int]) -> tuple[int, int, int, int]:
    """(p_{n-1}, q_{n-1}, p_n, q_n) with the (1, 0, 0, 1) seed for n = 0."""
    p_prev, p = 1, 0
    q_prev, q = 0, 1
    for a in w:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
    return p_prev, q_prev, p, q


def denominators(w: Sequence[int]) -> tuple[int, int]:
    """(q_{n-1}, q_n) of a word."""
    q_prev, q = 0, 1
    for a in w:
        q_prev, q = q, a * q + q_prev
    return q_prev, q


def cylinder_interval(w: Sequence[int]) -> CylinderInterval:
    """The basic cylinder I_n(w) of reals whose expansion starts with w."""
    w = Word(w)
    if not w:
        raise DomainError("cylinder of the empty word is all of [0, 1)")
    p_prev, q_prev, p, q = _pq(w)
    conv = Fraction(p, q)
    mediant = Fraction(p + p_prev, q + q_prev)
    if len(w) % 2 == 0:
        return CylinderInterval(conv, mediant, True, False, len(w))
    return CylinderInterval(mediant, conv, False, True, len(w))


def cylinder_length(w: Sequence[int]) -> Fraction:
    """|I_n(w)| = 1 / (q_n (q_n + q_{n-1})), exactly."""
    w = Word(w)
    if not w:
        raise DomainError("need a nonempty word")
    q_prev, q = denominators(w)
    return Fraction(1, q * (q + q_prev))


def tn_derivative_magnitude(w: Sequence[int], x) -> LogValue:
    """|(T^n)'(x)| = 1/(x q_{n-1} - p_{n-1})^2 for x in I_n(w)."""
    w = Word(w)
    if w and not cylinder_interval(w).contains(x):
        raise DomainError(f"x={x} is not in the cylinder of {list(w)}")
    p_prev, q_prev, _, _ = _pq(w)
    if isinstance(x, (Rational, Fraction)):
        base = Fraction(x) * q_prev - p_prev
        return LogValue.from_rational(1 / (base * base))
    base = float(x) * q_prev - p_prev
    return LogValue(-2.0 * math.log(abs(base)))


# -- classical inequalities ----------------------------------------------------


@dataclass
class KhintchineReport:
    word: Word
    k: int
    k_is_last: bool
    growth_ok: bool
    ratio_ok: bool
    product_ok: bool
    witnesses: list[str]

    @property
    def passed(self) -> bool:
        return self.growth_ok and self.ratio_ok and self.product_ok


def khintchine_check(w: Sequence[int], k: int) -> KhintchineReport:
    """Check q_n >= 2^((n-1)/2), the deleted-digit ratio bound at position k,
    and q_i q_j <= q_n <= 2 q_i q_j for every split n = i + j.  Exact ints.

    The ratio bound at k = n deletes the last digit; that case is reported
    through ``k_is_last`` so callers can separate it.
    """
    w = Word(w)
    n = len(w)
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= {n}")
    witnesses = []
    _, qn = denominators(w)
    growth_ok = qn * qn >= 2 ** (n - 1)
    if not growth_ok:
        witnesses.append(f"q_n={qn} < 2^((n-1)/2)")

    ak = w[k - 1]
    _, qdel = denominators(w[: k - 1] + w[k:])
    ratio_ok = (ak + 1) * qdel <= 2 * qn and qn <= (ak + 1) * qdel
    if not ratio_ok:
        witnesses.append(f"ratio q_n/q_del = {qn}/{qdel} outside [{ak + 1}/2, {ak + 1}]")

    product_ok = True
    for i in range(1, n):
        _, qa = denominators(w[:i])
        _, qb = denominators(w[i:])
        if not qa * qb <= qn <= 2 * qa * qb:
            product_ok = False
            witnesses.append(f"split {i}: q_n={qn}, q_i*q_j={qa * qb}")
    return KhintchineReport(w, k, k == n, growth_ok, ratio_ok, product_ok, witnesses)


def legendre_check(x, p: int, q: int, precision=None) -> bool:
    """If |x - p/q| < 1/(2q^2), confirm p/q is a convergent of x.

    Returns whether the implication held (vacuously True when the hypothesis
    fails).  Raises PrecisionError when a float input cannot settle either
    the hypothesis or the convergent search.
    """
    if q < 1 or math.gcd(p, q) != 1:
        raise DomainError("need q >= 1 and gcd(p, q) = 1")
    target = Fraction(p, q)
    radius = Fraction(1, 2 * q * q)
    center, delta = _as_interval(x, precision)
    if isinstance(center, QuadraticSurd):
        inside = center.compare(target - radius) > 0 and center.compare(target + radius) < 0
    else:
        dist = abs(center - target)
        if delta and abs(dist - radius) <= delta:
            raise PrecisionError("x is too close to the Legendre threshold to decide")
        inside = dist < radius
    if not inside:
        return True
    p_prev, p_cur = 1, 0
    q_prev, q_cur = 0, 1
    if (p, q) == (0, 1):
        return True  # p_0/q_0
    for a, reason in iter_digits(x, precision):
        if reason == "rational":
            return False
        if reason == "precision":
            raise PrecisionError("expansion exhausted before reaching denominator q")
        p_prev, p_cur = p_cur, a * p_cur + p_prev
        q_prev, q_cur = q_cur, a * q_cur + q_prev
        if (p_cur, q_cur) == (p, q):
            return True
        if q_cur > q:
            return False
    return False  # pragma: no cover - generator never ends without a reason


# -- JSON forms ----------------------------------------------------------------


def word_to_json(w: Sequence[int]) -> list[int]:
    return list(Word(w))


def word_from_json(data) -> Word:
    return Word(data)


def rational_to_json(r) -> dict[str, str]:
    r = Fraction(r)
    return {"num": str(r.numerator), "den": str(r.denominator)}


def rational_from_json(data) -> Fraction:
    return Fraction(int(data["num"]), int(data["den"]))
