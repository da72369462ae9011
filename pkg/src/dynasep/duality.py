"""Duality functional between dynamic ASEP and n-particle ASEP, and its exact checks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .lattice import HeightWindow, ParticleConfig, enumerate_windows
from .process import apply_dynamic_generator, asep_generator_apply, flip_rates
from .qspecial import ModelParams, q_pochhammer

__all__ = [
    "DualityObservable",
    "duality_factor",
    "duality_Z",
    "duality_Z_subset",
    "duality_Z_alpha0",
    "duality_Z_alpha_scaled",
    "step_closed_form",
    "half_closed_form",
    "check_duality_identity",
    "sweep_duality",
    "clusters",
    "check_cluster_decomposition",
    "TelescopingResult",
    "verify_cluster_telescoping",
    "sweep_cluster_telescoping",
]

NORMALIZATIONS = ("raw", "step-normalized", "half-normalized")


def duality_factor(k: int, x: int, N: int, params: ModelParams):
    """k-th factor of Z written with N = (s_x - x)/2:
    q^{-x} - q^{2(k-1)}/alpha - q^{k-1} (q^{-N-x} - q^N/alpha)."""
    p = params.qpow
    return p(-x) - p(2 * (k - 1)) / params.alpha - p(k - 1) * (p(-N - x) - p(N) / params.alpha)


def _N_at(w: HeightWindow, x: int) -> int:
    if x not in w:
        raise ValueError(f"particle at {x} lies outside window [{w.x_left}, {w.x_right}]")
    return (w.heights[x - w.x_left] - x) // 2


def duality_Z(x: ParticleConfig, w: HeightWindow, params: ModelParams):
    """Z_{n;q,alpha}(x; s); every exponent is an integer in the even-parity sector."""
    result = params.num(1)
    for k, xk in enumerate(x.positions, start=1):
        result *= duality_factor(k, xk, _N_at(w, xk), params)
    return result


def duality_Z_subset(I: Iterable[int], x: ParticleConfig, w: HeightWindow, params: ModelParams):
    """Partial product of Z over the (1-based) labels in I."""
    result = params.num(1)
    for k in sorted(set(I)):
        if not 1 <= k <= x.n:
            raise ValueError(f"label {k} outside 1..{x.n}")
        xk = x.positions[k - 1]
        result *= duality_factor(k, xk, _N_at(w, xk), params)
    return result


def duality_Z_alpha0(x: ParticleConfig, w: HeightWindow, q):
    """alpha -> 0 duality functional prod_k (q^{k-1} - q^{N_{x_k}})."""
    result = 1 + 0 * q
    for k, xk in enumerate(x.positions, start=1):
        result *= q ** (k - 1) - q ** _N_at(w, xk)
    return result


def duality_Z_alpha_scaled(x: ParticleConfig, w: HeightWindow, params: ModelParams):
    """prod_k (-alpha q^{1-k}) Z; tends to :func:`duality_Z_alpha0` as alpha -> 0."""
    scale = params.num(1)
    for k in range(1, x.n + 1):
        scale *= -params.alpha * params.q ** (1 - k)
    return scale * duality_Z(x, w, params)


def step_closed_form(x: ParticleConfig | Iterable[int], q):
    """prod_k (q^{-x_k 1[x_k <= 0]} - q^{k-1})."""
    result = 1 + 0 * q
    for k, xk in enumerate(x, start=1):
        result *= (q ** (-xk) if xk <= 0 else 1) - q ** (k - 1)
    return result


def half_closed_form(x: ParticleConfig | Iterable[int], q):
    """prod_k (q^{(1-x_k) 1[x_k <= 1]} - q^{k-1})."""
    result = 1 + 0 * q
    for k, xk in enumerate(x, start=1):
        result *= (q ** (1 - xk) if xk <= 1 else 1) - q ** (k - 1)
    return result


@dataclass(frozen=True)
class DualityObservable:
    """Z_{n;q,alpha} with one of the normalisations used for step or half-stationary data."""

    n: int
    params: ModelParams
    normalization: str = "raw"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def prefactor(self):
        q, alpha = self.params.q, self.params.alpha
        if self.normalization == "step-normalized":
            return 1 / q_pochhammer(-1 / alpha, q, self.n)
        if self.normalization == "half-normalized":
            return alpha ** self.n / q ** (self.n * (self.n - 1) // 2)
        return self.params.num(1)

    def __call__(self, x: ParticleConfig, w: HeightWindow):
        if x.n != self.n:
            raise ValueError(f"expected {self.n} particles, got {x.n}")
        return self.prefactor * duality_Z(x, w, self.params)


def check_duality_identity(x: ParticleConfig, w: HeightWindow, params: ModelParams, *, Z=duality_Z):
    """(L_{q,alpha} Z)(x; .)(w) - (L^n_{1,q} Z)(.; w)(x); identically zero by the duality.

    ``Z`` can be swapped for a perturbed functional to test the check itself.
    """
    for xk in x.positions:
        if not w.is_interior(xk):
            raise ValueError(f"particle at {xk} needs one site of margin inside "
                             f"[{w.x_left}, {w.x_right}]")
    lhs = apply_dynamic_generator(lambda v: Z(x, v, params), w, params)
    rhs = asep_generator_apply(lambda y: Z(y, w, params), x, params.num(1), params.q)
    return lhs - rhs


def _placements(sites: list[int], n: int) -> Iterator[ParticleConfig]:
    from itertools import combinations
    for combo in combinations(sorted(sites, reverse=True), n):
        yield ParticleConfig(combo)


def sweep_duality(n: int, length: int, params: ModelParams, *, x_left: int | None = None,
                  s_left: int | None = None, Z=duality_Z) -> Iterator[tuple[int, ParticleConfig, object]]:
    """Duality residual for every window of ``length`` sites and every interior placement.

    Yields (window_id, x, residual).  The default anchor is x_left = -(length // 2)
    with s_left = |x_left|.
    """
    if x_left is None:
        x_left = -(length // 2)
    if s_left is None:
        s_left = abs(x_left)
    for wid, w in enumerate(enumerate_windows(x_left, s_left, length)):
        interior = list(range(w.x_left + 1, w.x_right))
        if len(interior) < n:
            continue
        for x in _placements(interior, n):
            yield wid, x, check_duality_identity(x, w, params, Z=Z)


def clusters(x: ParticleConfig) -> list[list[int]]:
    """Labels (1-based) grouped into maximal runs of adjacent particles."""
    groups = [[1]]
    for k in range(2, x.n + 1):
        if x.positions[k - 2] == x.positions[k - 1] + 1:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def _cluster_generator(G, x: ParticleConfig, labels: list[int], left_rate, right_rate):
    base = G(x)
    total = 0 * base
    pos = x.positions
    for k in labels:
        i = k - 1
        if i == x.n - 1 or pos[i + 1] != pos[i] - 1:
            total += left_rate * (G(x.moved(i, -1)) - base)
        if i == 0 or pos[i - 1] != pos[i] + 1:
            total += right_rate * (G(x.moved(i, 1)) - base)
    return total


def check_cluster_decomposition(x: ParticleConfig, w: HeightWindow, params: ModelParams) -> list:
    """Residuals of the chain of equalities reducing the duality to single clusters.

    Returns [L^n Z - sum_i Z_{I_i^c} L^{I_i} Z_{I_i},
             sum_i Z_{I_i^c} (L^{I_i} Z_{I_i} - L_{q,alpha} Z_{I_i}),
             sum_i Z_{I_i^c} L_{q,alpha} Z_{I_i} - L_{q,alpha} Z].
    """
    one, q = params.num(1), params.q
    labels = list(range(1, x.n + 1))
    full_asep = asep_generator_apply(lambda y: duality_Z(y, w, params), x, one, q)
    full_dyn = apply_dynamic_generator(lambda v: duality_Z(x, v, params), w, params)
    via_asep = 0 * full_asep
    via_dyn = 0 * full_asep
    for group in clusters(x):
        rest = duality_Z_subset([k for k in labels if k not in group], x, w, params)
        asep_part = _cluster_generator(lambda y: duality_Z_subset(group, y, w, params), x, group, one, q)
        dyn_part = apply_dynamic_generator(lambda v: duality_Z_subset(group, x, v, params), w, params)
        via_asep += rest * asep_part
        via_dyn += rest * dyn_part
    return [full_asep - via_asep, via_asep - via_dyn, via_dyn - full_dyn]


@dataclass(frozen=True)
class TelescopingResult:
    """Both evaluations of sum_k L(k, n) - A(a, n) - B(b, n) and their term-wise agreement."""

    ratio_residual: object
    table_residual: object
    discrepancy: object

    @property
    def residual(self):
        return max(abs(self.ratio_residual), abs(self.table_residual), abs(self.discrepancy))


def _cluster_ratio_terms(a, b, n, x, w, params):
    # proof labels i in [a, b] sit at x + i - 1; the duality label of proof label i is n + 1 - i
    q, one = params.q, params.num(1)

    def Z(positions, v):
        result = one
        for i in range(a, b + 1):
            y = positions[i]
            result *= duality_factor(n + 1 - i, y, _N_at(v, y), params)
        return result

    pos = {i: x + i - 1 for i in range(a, b + 1)}
    # factor k vanishes iff N = k - 1; test the integers so floats cannot miss it
    if any(_N_at(w, pos[i]) == n - i for i in range(a, b + 1)):
        raise ValueError("cluster duality product vanishes; ratios undefined")
    base = Z(pos, w)
    L = []
    for k in range(a - 1, b):
        y = x + k
        down, up = flip_rates(w.s(y - 1), w.s(y), w.s(y + 1), params)
        term = 0 * one
        if up:
            term += up * (Z(pos, w.flipped(y, 2)) / base - 1)
        if down:
            term += down * (Z(pos, w.flipped(y, -2)) / base - 1)
        L.append(term)
    A = Z({**pos, a: pos[a] - 1}, w) / base - 1
    B = q * (Z({**pos, b: pos[b] + 1}, w) / base - 1)
    return L, A, B


def _cluster_table_terms(a, b, n, x, w, params):
    q, alpha = params.q, params.alpha
    N = lambda y: _N_at(w, y)  # noqa: E731
    eta = lambda y: (1 + w.s(y) - w.s(y + 1)) // 2  # occupation of the bond (y, y+1)  # noqa: E731

    def hole(y):
        return (1 - q) * q * alpha / (q ** (n + x + N(y)) + q * alpha)

    def particle(e, y):
        p = q ** (e + N(y))
        return (1 - q) * p / (p - q ** n)

    L = []
    for m in range(a - 1, b):
        right = hole(x + m + 1) if eta(x + m) == 0 else particle(m + 2, x + m + 1)
        left = hole(x + m) if eta(x + m - 1) == 0 else particle(m + 1, x + m)
        L.append(right - left)
    A = -hole(x + a - 1) if eta(x + a - 2) == 0 else -particle(a, x + a - 1)
    B = hole(x + b) if eta(x + b - 1) == 0 else particle(b + 1, x + b)
    return L, A, B


def verify_cluster_telescoping(a: int, b: int, n: int, x_anchor: int, w: HeightWindow,
                               params: ModelParams) -> TelescopingResult:
    """Check sum_{k=a-1}^{b-1} L(k, n) = A(a, n) + B(b, n) for a single cluster.

    In this identity particles carry reversed labels: label i in [a, b] sits at
    x_anchor + i - 1 and enters Z as factor n + 1 - i.  L, A and B are computed
    both from ratios of Z (with the dynamic flip rates) and from the closed-form
    case tables; each path must telescope to zero and the two must agree term by
    term.  Raises ValueError when Z or a table denominator vanishes.
    """
    if not 1 <= a <= b <= n:
        raise ValueError(f"need 1 <= a <= b <= n, got a={a}, b={b}, n={n}")
    if x_anchor + a - 2 < w.x_left or x_anchor + b > w.x_right:
        raise ValueError("window must cover sites x+a-2 .. x+b")
    if not (w.is_interior(x_anchor + a - 1) and w.is_interior(x_anchor + b - 1)):
        raise ValueError("cluster sites must be interior to the window")
    try:
        Lr, Ar, Br = _cluster_ratio_terms(a, b, n, x_anchor, w, params)
        Lt, At, Bt = _cluster_table_terms(a, b, n, x_anchor, w, params)
    except ZeroDivisionError as exc:
        raise ValueError(f"degenerate local pattern: {exc}") from None
    disc = max(abs(u - v) for u, v in zip([*Lr, Ar, Br], [*Lt, At, Bt]))
    return TelescopingResult(sum(Lr) - Ar - Br, sum(Lt) - At - Bt, disc)


def sweep_cluster_telescoping(params: ModelParams, *, max_width: int = 4, n_max: int = 6,
                              anchors: Iterable[int] = range(-2, 3),
                              base_N: Iterable[int] = range(-2, 3)) -> Iterator[tuple[tuple, TelescopingResult | None]]:
    """Run :func:`verify_cluster_telescoping` over clusters with b - a <= max_width and all local patterns.

    A local pattern is the occupation of every bond between x+a-2 and x+b
    together with N at the left end.  Yields ((a, b, n, x, w), result), with
    result None for degenerate patterns.
    """
    anchors, base_N = list(anchors), list(base_N)
    for n in range(1, n_max + 1):
        for a in range(1, n + 1):
            for b in range(a, min(n, a + max_width) + 1):
                for x in anchors:
                    x_left = x + a - 2
                    length = b - a + 3
                    for N0 in base_N:
                        for w in enumerate_windows(x_left, x_left + 2 * N0, length):
                            try:
                                res = verify_cluster_telescoping(a, b, n, x, w, params)
                            except ValueError:
                                res = None
                            yield (a, b, n, x, w), res
