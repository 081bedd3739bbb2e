"""Growth regimes, membership scans and zero-one-law experiments.

Everything here works at a finite truncation N.  Tail properties such as
"for infinitely many n" or "for all sufficiently large n" are read off the
final window of [1, N], so verdicts are evidence, never proof.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath
import numpy as np

from .cf import Word, expand
from .errors import DomainError, HypothesisError, PrecisionError
from .pressure import DEFAULT_TOL, solve_dimension

__all__ = [
    "GrowthFunction",
    "GrowthExponents",
    "MembershipVerdict",
    "DirichletSpec",
    "DirichletVerdict",
    "MonteCarloReport",
    "Prediction",
    "geometric",
    "power",
    "doubly_exponential",
    "from_loglog",
    "from_log",
    "table",
    "growth_exponents",
    "membership",
    "dirichlet_classify",
    "series_diagnosis",
    "sample_gauss_digits",
    "monte_carlo_law",
    "dimension_predict",
]

GOLDEN = (1 + math.sqrt(5)) / 2
_GROWING = 1.2
_DECAYING = 0.75


# -- growth functions ----------------------------------------------------------


@dataclass(frozen=True)
class GrowthFunction:
    """Phi: N -> (1, inf) held through log Phi (and log log Phi when Phi is
    too large for log Phi to be a float).

    ``exact`` optionally returns Phi(n) as a Fraction so that integer
    comparisons a >= Phi(n) are decided exactly.
    """

    log_phi: Callable[[int], float]
    tag: str
    descriptor: str
    params: dict = field(default_factory=dict)
    loglog_phi: Callable[[int], float] | None = None
    exact: Callable[[int], Fraction] | None = None

    def log(self, n: int) -> float:
        return self.log_phi(n)

    def loglog(self, n: int) -> float:
        if self.loglog_phi is not None:
            return self.loglog_phi(n)
        lp = self.log_phi(n)
        if lp <= 0:
            raise HypothesisError(f"Phi({n}) <= 1 has no log log")
        return math.log(lp)

    def exceeded_by(self, value: int, n: int) -> bool:
        """value >= Phi(n)."""
        if value <= 0:
            return False
        if self.exact is not None:
            return value >= self.exact(n)
        return math.log(value) >= self.log_phi(n)

    def to_record(self) -> dict:
        return {"tag": self.tag, "descriptor": self.descriptor,
                "params": {k: str(v) for k, v in self.params.items()}}


def geometric(B) -> GrowthFunction:
    """Phi(n) = B^n."""
    Bf = Fraction(repr(B)) if isinstance(B, float) else Fraction(B)
    if Bf <= 0:
        raise DomainError("B must be positive")
    lb = math.log(Bf.numerator) - math.log(Bf.denominator)
    return GrowthFunction(lambda n: n * lb, "geometric", f"{Bf}^n", {"B": Bf},
                          exact=lambda n: Bf**n)


def power(exponent: int | float, scale=1) -> GrowthFunction:
    """Phi(n) = scale * n^exponent."""
    sc = Fraction(repr(scale)) if isinstance(scale, float) else Fraction(scale)
    ls = math.log(sc)
    exact = None
    if isinstance(exponent, int) and exponent >= 0:
        exact = lambda n: sc * n**exponent  # noqa: E731
    return GrowthFunction(lambda n: ls + exponent * math.log(n), "power",
                          f"{sc}*n^{exponent}", {"exponent": exponent, "scale": sc}, exact=exact)


def doubly_exponential(b: float, c: float = 1.0) -> GrowthFunction:
    """Phi(n) = exp(c b^n)."""
    if b <= 0 or c <= 0:
        raise DomainError("b and c must be positive")
    lb, lc = math.log(b), math.log(c)

    def log_phi(n):
        ll = lc + n * lb
        return math.exp(ll) if ll < 700 else math.inf

    return GrowthFunction(log_phi, "doubly-exponential", f"exp({c}*{b}^n)", {"b": b, "c": c},
                          loglog_phi=lambda n: lc + n * lb)


def from_loglog(loglog: Callable[[int], float], descriptor: str, params: dict | None = None) -> GrowthFunction:
    """Phi given by log log Phi(n), for towers like exp(exp(n^2))."""

    def log_phi(n):
        v = loglog(n)
        return math.exp(v) if v < 700 else math.inf

    return GrowthFunction(log_phi, "custom", descriptor, params or {}, loglog_phi=loglog)


def from_log(log_phi: Callable[[int], float], descriptor: str, params: dict | None = None) -> GrowthFunction:
    return GrowthFunction(log_phi, "custom", descriptor, params or {})


def table(values: Sequence[float] | dict, descriptor: str = "table") -> GrowthFunction:
    """Phi from a finite table; a sequence is read as Phi(1), Phi(2), ..."""
    if not isinstance(values, dict):
        values = {n: v for n, v in enumerate(values, start=1)}
    logs = {int(n): math.log(v) for n, v in values.items()}

    def log_phi(n):
        try:
            return logs[n]
        except KeyError:
            raise DomainError(f"Phi({n}) is not in the table") from None

    return GrowthFunction(log_phi, "table", descriptor, {"size": len(logs)})


# -- growth exponents ------------------------------------------------------------


@dataclass
class GrowthExponents:
    """Window minima of log Phi(n)/n and log log Phi(n)/n over [N/2, N].

    A finite window only bounds a liminf from above; ``caveat`` says so.
    """

    logB: float
    B_regime: str  # "B=1", "finite", "B=inf"
    logb: float
    b_regime: str  # "b=1", "finite", "b=inf"
    window: tuple[int, int]
    caveat: str = "window minima only bound the liminf from above"

    @property
    def B(self) -> float:
        return math.exp(self.logB) if self.B_regime == "finite" else (
            math.inf if self.B_regime == "B=inf" else 1.0)

    @property
    def b(self) -> float:
        if self.b_regime == "b=inf":
            return math.inf
        if self.b_regime == "b=1":
            return 1.0
        return math.exp(self.logb)


def _trend(values: np.ndarray) -> float:
    # ratio of the window's last value to its first
    if not np.isfinite(values[-1]):
        return math.inf
    if values[0] <= 0:
        return math.inf if values[-1] > 0 else 1.0
    return float(values[-1] / values[0])


def growth_exponents(phi: GrowthFunction, N: int, ceiling: float = 50.0,
                     start: int | None = None) -> GrowthExponents:
    """Estimate log B = liminf log Phi(n)/n and log b = liminf log log Phi(n)/n.

    The window is [start, N], by default [N/2, N].  Fixing ``start`` and
    raising N nests the windows, so the minima can only go down.
    """
    if N < 10:
        raise DomainError("N must be >= 10")
    start = N // 2 if start is None else start
    if not 1 <= start < N:
        raise DomainError("need 1 <= start < N")
    ns = np.arange(start, N + 1)
    lp = np.array([phi.log(int(n)) for n in ns], dtype=float)
    if np.any(lp <= 0):
        bad = int(ns[np.argmax(lp <= 0)])
        raise HypothesisError(f"Phi({bad}) <= 1")
    llp = np.array([phi.loglog(int(n)) for n in ns], dtype=float)
    r1 = lp / ns
    r2 = llp / ns
    logB = float(np.min(r1))
    t1 = _trend(r1)
    if not np.isfinite(logB) or logB > ceiling or (t1 > _GROWING and np.all(np.diff(r1) > 0)):
        B_regime, logB = "B=inf", math.inf
    elif t1 < _DECAYING:
        B_regime = "B=1"
    else:
        B_regime = "finite"
    logb = float(np.min(r2))
    t2 = _trend(r2)
    if logb > ceiling or (t2 > _GROWING and np.all(np.diff(r2) > 0)):
        b_regime, logb = "b=inf", math.inf
    elif t2 < _DECAYING or logb <= 0:
        b_regime = "b=1"
    else:
        b_regime = "finite"
    return GrowthExponents(logB, B_regime, logb, b_regime, (int(ns[0]), int(ns[-1])))


# -- membership ----------------------------------------------------------------


@dataclass
class MembershipVerdict:
    set_tag: str
    N: int
    events: list[int]
    tail_window: tuple[int, int]
    tail_violations: list[int]
    verdict: str  # "events-seen", "no-events", "tail-condition-violated"

    @property
    def member(self) -> bool:
        return self.verdict == "events-seen"


def membership(digits: Sequence[int], phi: GrowthFunction, set_tag: str, N: int | None = None,
               tail_fraction: float = 0.5) -> MembershipVerdict:
    """Scan a digit string for the events defining E1, E2 or F.

    E1: a_n >= Phi(n).  E2: a_n a_{n+1} >= Phi(n).  F: E2 events together
    with a_{n+1} < Phi(n) throughout the tail window.  Events count as
    "infinitely often" when one falls in the tail window, the last
    ``tail_fraction`` of [1, N].
    """
    a = list(Word(digits))
    N = len(a) if N is None else N
    if len(a) < N or N < 1:
        raise DomainError(f"need at least N = {N} digits, got {len(a)}")
    if set_tag not in ("E1", "E2", "F"):
        raise DomainError(f"unknown set {set_tag!r}")
    if not 0 < tail_fraction <= 1:
        raise DomainError("tail_fraction must lie in (0, 1]")
    start = max(1, math.ceil((1 - tail_fraction) * N))
    last = N if set_tag == "E1" else min(N, len(a) - 1)
    if last < 1:
        raise DomainError("need at least two digits for product events")
    if set_tag == "E1":
        events = [n for n in range(1, last + 1) if phi.exceeded_by(a[n - 1], n)]
    else:
        events = [n for n in range(1, last + 1) if phi.exceeded_by(a[n - 1] * a[n], n)]
    violations = []
    if set_tag == "F":
        violations = [n for n in range(start, last + 1) if phi.exceeded_by(a[n], n)]
    seen = any(n >= start for n in events)
    if violations:
        verdict = "tail-condition-violated"
    else:
        verdict = "events-seen" if seen else "no-events"
    return MembershipVerdict(set_tag, N, events, (start, last), violations, verdict)


# -- Dirichlet improvability --------------------------------------------------------


@dataclass(frozen=True)
class DirichletSpec:
    """psi with the constants w < W used to read off improvability.

    ``psi`` is called with mpmath numbers so that t = W^n cannot overflow.
    """

    psi: Callable
    t0: float = 1.0
    w: float = GOLDEN
    W: float = 4.0
    descriptor: str = "psi"

    def __post_init__(self):
        if not (self.w > 1 and self.W > 1 and self.W > self.w):
            raise DomainError("need 1 < w < W")

    def phi(self, t) -> mpmath.mpf:
        """Phi(t) = t psi(t) / (1 - t psi(t))."""
        tp = mpmath.mpf(t) * self.psi(mpmath.mpf(t))
        if not 0 < tp < 1:
            raise HypothesisError(f"t psi(t) = {mpmath.nstr(tp, 6)} is not in (0, 1) at t = {mpmath.nstr(t, 6)}")
        return tp / (1 - tp)


@dataclass
class DirichletVerdict:
    verdict: str  # "improvable-evidence", "non-improvable-evidence", "inconclusive"
    condition_i: bool
    condition_ii: bool
    window: tuple[int, int]
    witnesses_ii: list[int]
    failures_i: list[int]


def dirichlet_classify(digits: Sequence[int], spec: DirichletSpec, N: int | None = None,
                       tail_fraction: float = 0.5) -> DirichletVerdict:
    """Test the two sufficient conditions for Dirichlet improvability.

    (i)  a_n a_{n+1} <= Phi(w^n)/4 for every n in the tail window;
    (ii) a_n a_{n+1} > Phi(W^n) for some n in the tail window.
    """
    a = list(Word(digits))
    N = len(a) - 1 if N is None else N
    if N < 1 or len(a) < N + 1:
        raise DomainError("need N + 1 digits with N >= 1")
    start = max(1, math.ceil((1 - tail_fraction) * N))
    ns = [n for n in range(start, N + 1) if spec.w**n >= spec.t0]
    if not ns:
        raise DomainError("tail window lies below t0")
    fail_i, wit_ii = [], []
    with mpmath.workdps(30):
        for n in ns:
            prod = a[n - 1] * a[n]
            if prod > spec.phi(mpmath.mpf(spec.w) ** n) / 4:
                fail_i.append(n)
            if prod > spec.phi(mpmath.mpf(spec.W) ** n):
                wit_ii.append(n)
    ci, cii = not fail_i, bool(wit_ii)
    if ci and not cii:
        verdict = "improvable-evidence"
    elif cii and not ci:
        verdict = "non-improvable-evidence"
    else:
        verdict = "inconclusive"
    return DirichletVerdict(verdict, ci, cii, (ns[0], ns[-1]), wit_ii, fail_i)


# -- Monte Carlo -----------------------------------------------------------------


def sample_gauss_digits(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. digits with the Gauss-measure law P(a >= k) = log2(1 + 1/k).

    Returned as float64 because the tail is heavy.
    """
    u = 1.0 - rng.random(shape)  # in (0, 1]
    return np.floor(1.0 / np.expm1(u * math.log(2.0)))


def series_diagnosis(phi: GrowthFunction, law: str = "borel-bernstein", K: int = 60) -> dict:
    """Heuristic convergence call for sum 1/Phi(n) (or sum log Phi(n)/Phi(n)).

    Uses Cauchy condensation: the condensed terms 2^k f(2^k) for k in
    [K/2, K] are fitted against log k; a slope below -1 (or geometric decay)
    reads as convergent.  Table-backed Phi cannot be condensed.
    """
    ks = np.arange(max(2, K // 2), K + 1)
    try:
        lp = np.array([phi.log(int(2**k)) for k in ks], dtype=float)
    except DomainError:
        return {"series": law, "diagnosis": "undetermined", "slope": None}
    with np.errstate(divide="ignore"):
        terms = ks * math.log(2.0) - lp
        if law == "kw":
            terms = terms + np.log(np.maximum(lp, 1e-300))
    if np.all(np.isneginf(terms)) or terms[-1] < -700:
        return {"series": law, "diagnosis": "convergent", "slope": -math.inf}
    slope = float(np.polyfit(np.log(ks), terms, 1)[0])
    return {"series": law, "diagnosis": "convergent" if slope < -1 else "divergent", "slope": slope}


@dataclass
class MonteCarloReport:
    law: str
    phi_descriptor: str
    S: int
    N: int
    window: tuple[int, int]
    fraction: float
    hits: int
    series_diagnosis: dict
    seed: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _exact_digits(rng: np.random.Generator, count: int, bits: int) -> np.ndarray:
    # expand a random dyadic interval of width 2^-bits
    while True:
        k = int.from_bytes(rng.bytes((bits + 7) // 8), "little") >> (8 * ((bits + 7) // 8) - bits)
        center = Fraction(2 * k + 1, 2 ** (bits + 1))
        exp = expand((center, Fraction(1, 2 ** (bits + 1))), count)
        if len(exp.word) == count:
            return np.array(exp.word, dtype=float)
        if exp.rational:
            continue
        raise PrecisionError(f"{bits} random bits gave only {len(exp.word)} of {count} digits")


def monte_carlo_law(phi: GrowthFunction, S: int, N: int, seed: int = 0, law: str = "borel-bernstein",
                    chunk: int = 4096, mode: str = "stationary") -> MonteCarloReport:
    """Fraction of sampled expansions with an event in the window [N/2, N].

    Events are a_n >= Phi(n) ("borel-bernstein") or a_n a_{n+1} >= Phi(n)
    ("kw").  ``mode="stationary"`` draws i.i.d. digits from the Gauss
    measure; ``mode="exact"`` expands uniformly random reals (slow).  Chunks
    use independent child seeds, so the result depends only on the seed.
    """
    if S < 1 or N < 1:
        raise DomainError("S and N must be >= 1")
    if law not in ("borel-bernstein", "kw"):
        raise DomainError(f"unknown law {law!r}")
    lo = max(1, N // 2)
    ns = np.arange(lo, N + 1)
    extra = 1 if law == "kw" else 0
    thresh = np.array([phi.log(int(n)) for n in ns], dtype=float)
    n_chunks = -(-S // chunk)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    hits = 0
    for c, ss in enumerate(children):
        rng = np.random.default_rng(ss)
        size = min(chunk, S - c * chunk)
        if mode == "stationary":
            a = sample_gauss_digits(rng, (size, ns.size + extra))
        elif mode == "exact":
            bits = 4 * (N + extra) + 256
            a = np.stack([_exact_digits(rng, N + extra, bits)[lo - 1:] for _ in range(size)])
        else:
            raise DomainError(f"unknown mode {mode!r}")
        la = np.log(a)
        if law == "kw":
            la = la[:, :-1] + la[:, 1:]
        hits += int(np.any(la >= thresh[None, :], axis=1).sum())
    diag = series_diagnosis(phi, law)
    return MonteCarloReport(law, phi.descriptor, S, N, (int(lo), int(N)), hits / S, hits, diag, seed)


# -- dimension prediction -----------------------------------------------------------


@dataclass
class Prediction:
    value: float
    regime: str
    B: float
    b: float
    detail: dict = field(default_factory=dict)


def dimension_predict(phi: GrowthFunction, M: int = 50, tol: float = DEFAULT_TOL, m: int = 2,
                      N: int = 200) -> Prediction:
    """Predicted Hausdorff dimension from the growth regime of Phi.

    1 < B < inf: the pressure root for the potential -g_m(s) log B - s log|T'|.
    B = inf: 1/(1 + b), which is 1/2 for b = 1 and 0 for b = inf.
    B = 1 is refused.  Declared parameters of geometric and doubly
    exponential Phi are used directly; anything else goes through
    ``growth_exponents``.
    """
    if phi.tag == "geometric":
        B, b, regime = float(phi.params["B"]), 1.0, "finite"
        if B <= 1:
            regime = "B=1"
    elif phi.tag == "doubly-exponential":
        B, b, regime = math.inf, float(phi.params["b"]), "B=inf"
        if b <= 1:
            raise DomainError("exp(c b^n) with b <= 1 is not doubly exponential")
    else:
        ge = growth_exponents(phi, N)
        regime, B, b = ge.B_regime, ge.B, ge.b
    if regime == "B=1":
        raise DomainError("B must exceed 1: the B = 1 regime is outside the solver's range")
    if regime == "finite":
        res = solve_dimension(B, M, m=m, tol=tol)
        return Prediction(res.value, "finite", B, b, {"solver": res.to_record()})
    if m != 2:
        raise DomainError("the B = inf formula is stated for m = 2 only")
    value = 0.0 if math.isinf(b) else 1.0 / (1.0 + b)
    return Prediction(value, "B=inf", math.inf, b)
