"""q-deformed special functions and continuous q^{-1}-Hermite polynomials.

Every routine here is a pure function.  Arithmetic follows the type of the
inputs: pass :class:`fractions.Fraction` values for exact results, floats for
double precision, or :mod:`mpmath` numbers for extended precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from numbers import Rational
from typing import Any

import gmpy2
import mpmath

__all__ = [
    "ModelParams",
    "to_rational",
    "is_rational",
    "SeriesControl",
    "SeriesError",
    "q_pochhammer",
    "q_pochhammer_inf",
    "q_binomial",
    "basic_2phi1",
    "hermite_qinv",
    "hermite_qinv_sequence",
    "hermite_q",
    "hermite_q_coefficients",
    "f_map",
    "sumid_lhs",
    "sumid_generating_function",
]

BACKENDS = ("float", "exact")


class SeriesError(ArithmeticError):
    """Raised when an infinite product or series cannot be summed."""


RATIONAL_TYPES = (Rational, type(gmpy2.mpq(0)), type(gmpy2.mpz(0)))


def is_rational(value) -> bool:
    return isinstance(value, RATIONAL_TYPES)


def _exact_sqrt(value):
    if value < 0:
        return None
    num, den = int(value.numerator), int(value.denominator)
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return gmpy2.mpq(rn, rd)
    return None


def to_rational(value: Any):
    """Exact rational (gmpy2.mpq) from an int, Fraction, float or ``"p/r"`` string."""
    if isinstance(value, str):
        value = Fraction(value.strip())
    if isinstance(value, (Rational, float)) or is_rational(value):
        f = Fraction(value) if isinstance(value, float) else value
        return gmpy2.mpq(int(f.numerator), int(f.denominator))
    raise TypeError(f"cannot convert {value!r} to an exact rational")


@dataclass(frozen=True)
class ModelParams:
    """The pair (q, alpha) together with the arithmetic backend.

    With ``backend="exact"`` both parameters are stored as exact rationals
    (gmpy2.mpq, which interoperates with Fraction and int); strings
    such as ``"1/2"`` are accepted.  Square roots of q and alpha are needed by
    :func:`f_map` and the summation identity; in the exact backend they exist
    only when q and alpha are squares of rationals (see :meth:`from_roots`).
    """

    q: Any
    alpha: Any
    backend: str = "float"
    _sqrt_q: Any = field(default=None, repr=False, compare=False)
    _sqrt_alpha: Any = field(default=None, repr=False, compare=False)
    _powers: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "exact":
            q, alpha = to_rational(self.q), to_rational(self.alpha)
        else:
            q, alpha = float(Fraction(self.q)) if isinstance(self.q, str) else float(self.q), (
                float(Fraction(self.alpha)) if isinstance(self.alpha, str) else float(self.alpha)
            )
        if not 0 < q < 1:
            raise ValueError(f"q must lie in (0, 1), got {q}")
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def exact(cls, q, alpha) -> "ModelParams":
        return cls(q, alpha, backend="exact")

    @classmethod
    def from_roots(cls, sqrt_q, sqrt_alpha) -> "ModelParams":
        """Exact parameters q = Q**2, alpha = A**2 with known rational roots."""
        Q, A = to_rational(sqrt_q), to_rational(sqrt_alpha)
        return cls(Q * Q, A * A, backend="exact", _sqrt_q=Q, _sqrt_alpha=A)

    @property
    def is_exact(self) -> bool:
        return self.backend == "exact"

    def num(self, value):
        """Convert a constant to the backend's number type."""
        return to_rational(value) if self.is_exact else float(value)

    def qpow(self, e: int):
        """q**e, memoised per parameter set."""
        try:
            return self._powers[e]
        except KeyError:
            value = self._powers[e] = self.q ** e
            return value

    @property
    def sqrt_q(self):
        return self._root(self.q, self._sqrt_q, "q")

    @property
    def sqrt_alpha(self):
        return self._root(self.alpha, self._sqrt_alpha, "alpha")

    def _root(self, value, cached, name):
        if cached is not None:
            return cached
        if not self.is_exact:
            return math.sqrt(value)
        root = _exact_sqrt(value)
        if root is None:
            raise ValueError(
                f"{name}={value} is not the square of a rational; "
                "use ModelParams.from_roots for exact half-integer powers"
            )
        return root

    def with_alpha(self, alpha) -> "ModelParams":
        return replace(self, alpha=alpha, _sqrt_alpha=None)

    def as_float(self) -> "ModelParams":
        if not self.is_exact:
            return self
        return ModelParams(float(self.q), float(self.alpha))


@dataclass(frozen=True)
class SeriesControl:
    tail_tolerance: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.tail_tolerance > 0:
            raise ValueError("tail_tolerance must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")


DEFAULT_CONTROL = SeriesControl()


def q_pochhammer(a, q, n, ctl: SeriesControl = DEFAULT_CONTROL):
    """(a; q)_n = prod_{k<n} (1 - a q^k); ``n`` may be ``math.inf``."""
    if n == math.inf:
        return q_pochhammer_inf(a, q, ctl)[0]
    if n < 0 or int(n) != n:
        raise ValueError(f"n must be a natural number or inf, got {n}")
    result = 1
    term = a
    for _ in range(int(n)):
        result *= 1 - term
        term *= q
    return result


def q_pochhammer_inf(a, q, ctl: SeriesControl = DEFAULT_CONTROL) -> tuple[float, float]:
    """Infinite product (a; q)_inf together with a bound on the truncation error.

    Factors are multiplied until ``|a q^k| < tail_tolerance``.  The neglected
    tail prod_{j>=k}(1 - a q^j) is approximated by exp(-a q^k / (1 - q)); the
    returned error bound covers the remaining second-order term.
    """
    a, q = float(a), float(q)
    if abs(q) >= 1:
        raise SeriesError("(a; q)_inf diverges for |q| >= 1")
    result = 1.0
    term = a
    for _ in range(ctl.max_terms):
        if abs(term) < ctl.tail_tolerance:
            tail = term / (1.0 - q)
            result *= math.exp(-tail)
            err = abs(result) * math.expm1(tail * tail / (1.0 - q * q) + abs(tail) * 1e-16)
            return result, abs(err)
        result *= 1.0 - term
        term *= q
    raise SeriesError(f"(a; q)_inf did not converge within {ctl.max_terms} factors")


def q_binomial(n: int, j: int, q):
    """Gaussian binomial coefficient, evaluated as a product of ratios."""
    if not 0 <= j <= n:
        raise ValueError(f"need 0 <= j <= n, got n={n}, j={j}")
    j = min(j, n - j)
    result = 1
    for i in range(1, j + 1):
        result = result * (1 - q ** (n - j + i)) / (1 - q ** i)
    return result


def _is_zero(value, reference) -> bool:
    if is_rational(value):
        return value == 0
    return abs(value) <= 64 * 2.220446049250313e-16 * max(1.0, abs(reference))


def basic_2phi1(a, b, c, q, z, ctl: SeriesControl = DEFAULT_CONTROL):
    """The basic hypergeometric series 2phi1(a, b; c; q; z).

    The series stops when a numerator factor (1 - a q^k) or (1 - b q^k)
    vanishes, which lets a = q^{-m} be used with any base q.  A series that
    does not terminate needs |q| < 1 and |z| < 1.
    """
    convergent = abs(q) < 1 and abs(z) < 1
    term = 1
    total = 1
    for k in range(ctl.max_terms):
        try:
            qk = q ** k
        except OverflowError:
            break
        num_a, num_b = 1 - a * qk, 1 - b * qk
        if _is_zero(num_a, a * qk) or _is_zero(num_b, b * qk):
            return total
        den = (1 - c * qk) * (1 - qk * q)
        if _is_zero(den, 1):
            raise SeriesError(f"2phi1 denominator vanishes at term {k + 1}")
        term = term * num_a * num_b / den * z
        total += term
        if term == 0:
            return total
        if convergent and not is_rational(term) and abs(term) < ctl.tail_tolerance * max(1.0, abs(total)):
            return total
    if not convergent:
        raise SeriesError("non-terminating 2phi1 needs |q| < 1 and |z| < 1")
    raise SeriesError(f"2phi1 did not converge within {ctl.max_terms} terms")


def hermite_qinv_sequence(nmax: int, x, q) -> list:
    """[h_0(x|q), ..., h_nmax(x|q)] by the forward three-term recursion."""
    if nmax < 0:
        raise ValueError("nmax must be non-negative")
    prev, cur = 0 * x, 1 + 0 * x
    values = [cur]
    qinv = 1 / q
    qinv_k = 1 + 0 * q
    for _ in range(nmax):
        prev, cur = cur, 2 * x * cur - (qinv_k - 1) * prev
        qinv_k = qinv_k * qinv
        values.append(cur)
    return values


def hermite_qinv(n: int, x, q):
    """Continuous q^{-1}-Hermite polynomial h_n(x|q).

    Recursion 2x h_n = h_{n+1} + (q^{-n} - 1) h_{n-1}, h_{-1} = 0, h_0 = 1.
    Leading coefficient is 2^n.
    """
    return hermite_qinv_sequence(n, x, q)[n]


def hermite_q(n: int, x, q):
    """Continuous q-Hermite polynomial H_n(x|q): 2x H_n = H_{n+1} + (1 - q^n) H_{n-1}."""
    if n < 0:
        raise ValueError("n must be non-negative")
    prev, cur = 0 * x, 1 + 0 * x
    qk = 1 + 0 * q
    for _ in range(n):
        prev, cur = cur, 2 * x * cur - (1 - qk) * prev
        qk = qk * q
    return cur


def hermite_q_coefficients(n: int, q) -> list:
    """Monomial coefficients [c_0, ..., c_n] of H_n(x|q)."""
    prev: list = [0]
    cur: list = [1]
    qk = 1 + 0 * q
    for _ in range(n):
        nxt = [0] * (len(cur) + 1)
        for i, c in enumerate(cur):
            nxt[i + 1] += 2 * c
        for i, c in enumerate(prev):
            nxt[i] -= (1 - qk) * c
        prev, cur = cur, nxt
        qk = qk * q
    return cur


def f_map(s: int, params: ModelParams):
    """f(s) = q^{-s/2} alpha^{1/2} - q^{s/2} alpha^{-1/2}."""
    rq, ra = params.sqrt_q, params.sqrt_alpha
    return rq ** (-s) * ra - rq ** s / ra


def _sumid_terms(n, q, rq, ra):
    alpha = ra * ra
    x = (ra / rq - rq / ra) / 2
    h = hermite_qinv_sequence(n, x, q)
    total = 0
    for j in range(n + 1):
        sign = -1 if j % 2 else 1
        total += sign * q_binomial(n, j, q) * q ** (j * (j + 1) // 2) * (rq * ra) ** (-j) * h[j]
    return alpha, total


def sumid_lhs(n: int, params: ModelParams, *, dps: int | None = None):
    """Left side of the q^{-1}-Hermite summation identity (its value is 1).

    alpha^n q^{-n(n+1)/2} sum_j (-1)^j [n j]_q q^{j(j+1)/2} (q alpha)^{-j/2}
    h_j(f(1)/2 | q).

    The alternating sum cancels across many orders of magnitude, so the float
    backend evaluates it in mpmath with enough working digits to cover the
    cancellation and returns a float.  The exact backend returns an exact rational.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if params.is_exact:
        q = params.q
        alpha, total = _sumid_terms(n, q, params.sqrt_q, params.sqrt_alpha)
        return alpha ** n / q ** (n * (n + 1) // 2) * total
    q, alpha = params.q, params.alpha
    if dps is not None:
        return _sumid_mp(n, q, alpha, dps)
    # digits lost to cancellation: largest term against the ~q^{n(n+1)/2}/alpha^n result
    lost = (n * (n + 1) / 2 + n * n / 2) * abs(math.log10(q)) + n * abs(math.log10(alpha))
    dps = int(30 + lost)
    value = _sumid_mp(n, q, alpha, dps)
    while True:
        check = _sumid_mp(n, q, alpha, dps + 20)
        if abs(check - value) <= 1e-15 * max(1.0, abs(check)):
            return check
        dps, value = 2 * dps, check


def _sumid_mp(n, q, alpha, dps):
    with mpmath.workdps(dps):
        mq, ma = mpmath.mpf(q), mpmath.mpf(alpha)
        alpha_mp, total = _sumid_terms(n, mq, mpmath.sqrt(mq), mpmath.sqrt(ma))
        return float(alpha_mp ** n / mq ** (n * (n + 1) // 2) * total)


def sumid_generating_function(n: int, params: ModelParams, *, dps: int = 50):
    """Closed form of the terminating generating function used to prove the identity.

    Returns (-q/alpha; q)_n * 2phi1(q^n, 0; -q^n/alpha; 1/q; 1/q), which equals
    the bare sum inside :func:`sumid_lhs` (without the alpha^n q^{-n(n+1)/2}
    prefactor).  The infinite-product ratio of the generating function has been
    reduced to the finite product (-q/alpha; q)_n.
    """
    if params.is_exact:
        q, alpha = params.q, params.alpha
        return q_pochhammer(-q / alpha, q, n) * basic_2phi1(q ** n, 0, -q ** n / alpha, 1 / q, 1 / q)
    with mpmath.workdps(dps):
        q, alpha = mpmath.mpf(params.q), mpmath.mpf(params.alpha)
        # base 1/q > 1: the series terminates at j = n
        series = basic_2phi1(q ** n, 0, -q ** n / alpha, 1 / q, 1 / q)
        return float(q_pochhammer(-q / alpha, q, n) * series)
