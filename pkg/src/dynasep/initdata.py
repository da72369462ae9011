"""Step, half-stationary and stationary initial data.

Besides samplers this module holds the exact checks attached to each kind of
initial data: the transfer-operator evaluation of E[Z] for half-stationary
data, the eigenrelation of the one-step kernel K in the q^{-1}-Hermite basis,
and the identities satisfied by the stationary one-point weights m_n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np

from .duality import duality_factor, half_closed_form
from .lattice import HeightWindow, ParticleConfig
from .qspecial import ModelParams, f_map, hermite_qinv, hermite_qinv_sequence, q_pochhammer, q_pochhammer_inf

__all__ = [
    "step_heights",
    "half_transition",
    "K_apply",
    "sample_half_stationary",
    "sample_half_stationary_batch",
    "half_expectation_Z",
    "half_identity_residual",
    "eigencheck_hermite",
    "keyit_check",
    "StationaryMeasure",
    "stationary_measure",
    "stationary_normalizer",
    "m_weight",
    "marginal_propagation_residuals",
    "sample_stationary",
    "sample_stationary_batch",
    "pattern_probabilities",
    "detailed_balance_check",
    "zeta_moment_from_measure",
    "printed_zeta_moment",
    "orthogonality_check",
    "StationarityReport",
    "stationarity_test",
]

MP_DPS = 40


def step_heights(x_left: int, x_right: int) -> HeightWindow:
    """Step initial data s_x = |x| on [x_left, x_right]."""
    if not x_left <= 0 <= x_right:
        raise ValueError("step window must contain the origin")
    return HeightWindow(x_left, tuple(abs(x) for x in range(x_left, x_right + 1)))


def half_transition(s: int, params: ModelParams):
    """(P(s_{x-1} = s + 1), P(s_{x-1} = s - 1)) given s_x = s."""
    qs = params.qpow(s)
    return qs / (params.alpha + qs), params.alpha / (params.alpha + qs)


def K_apply(f: Callable[[int], object], s: int, params: ModelParams):
    """(K f)(s) = q^s/(alpha + q^s) f(s+1) + alpha/(alpha + q^s) f(s-1)."""
    up, down = half_transition(s, params)
    return up * f(s + 1) + down * f(s - 1)


# ---------------------------------------------------------------- half-stationary

def sample_half_stationary(x_left: int, x_right: int, params: ModelParams, seed) -> HeightWindow:
    """s_x = x for x >= 1; below, the height-dependent walk run from s_1 = 1 leftwards."""
    rng = np.random.default_rng(seed)
    h = sample_half_stationary_batch(x_left, x_right, params, 1, rng)[0]
    return HeightWindow(x_left, tuple(int(v) for v in h))


def sample_half_stationary_batch(x_left: int, x_right: int, params: ModelParams, trials: int,
                                 rng: np.random.Generator) -> np.ndarray:
    if x_left > 0 or x_right < 1:
        raise ValueError("half-stationary window must contain sites 0 and 1")
    q, alpha = float(params.q), float(params.alpha)
    L = x_right - x_left + 1
    h = np.empty((trials, L), dtype=np.int64)
    for x in range(1, x_right + 1):
        h[:, x - x_left] = x
    s = np.ones(trials, dtype=np.int64)
    for x in range(0, x_left - 1, -1):
        qs = np.exp(s * math.log(q))
        up = rng.random(trials) < qs / (alpha + qs)
        s = np.where(up, s + 1, s - 1)
        h[:, x - x_left] = s
    return h


def half_expectation_Z(x: ParticleConfig, params: ModelParams):
    """E[Z_{n;q,alpha}(x; s_half)] computed exactly by forward transfer.

    Heights are deterministic at sites >= 1.  From s_1 = 1 the law of s_y is
    carried down site by site as a finitely supported weight vector, multiplied
    by the k-th duality factor at y = x_k.  There is no truncation.
    """
    one = params.num(1)
    scalar = one
    for k, xk in enumerate(x.positions, start=1):
        if xk >= 2:
            scalar *= duality_factor(k, xk, 0, params)  # s_x = x gives N = 0
    factors = {xk: k for k, xk in enumerate(x.positions, start=1) if xk <= 1}
    if not factors:
        return scalar
    weights = {1: one}
    lowest = min(factors)
    for y in range(1, lowest - 1, -1):
        if y in factors:
            k = factors[y]
            weights = {s: p * duality_factor(k, y, (s - y) // 2, params) for s, p in weights.items()}
        if y == lowest:
            break
        nxt: dict = {}
        for s, p in weights.items():
            up, down = half_transition(s, params)
            nxt[s + 1] = nxt.get(s + 1, 0) + p * up
            nxt[s - 1] = nxt.get(s - 1, 0) + p * down
        weights = nxt
    return scalar * sum(weights.values())


def half_identity_residual(x: ParticleConfig, params: ModelParams):
    """alpha^n q^{-n(n-1)/2} E[Z] minus prod_{k=1}^{n} (q^{(1-x_k) 1[x_k<=1]} - q^{k-1})."""
    n = x.n
    q = params.q
    lhs = params.alpha ** n / q ** (n * (n - 1) // 2) * half_expectation_Z(x, params)
    return lhs - half_closed_form(x.positions, q)


def eigencheck_hermite(n: int, s_range, params: ModelParams, *, eigenvalue=None) -> float:
    """max_s |K psi_n(s) - q^{n/2} psi_n(s)| / max(1, |psi_n(s)|), psi_n(s) = h_n(f(s)/2 | q)."""
    q = params.q
    lam = params.sqrt_q ** n if eigenvalue is None else eigenvalue

    def psi(s):
        return hermite_qinv(n, f_map(s, params) / 2, q)

    worst = 0.0
    for s in s_range:
        value = psi(s)
        res = abs(K_apply(psi, s, params) - lam * value) / max(1, abs(value))
        worst = max(worst, float(res))
    return worst


def _K_power(g: Callable[[int], object], s0: int, steps: int, params: ModelParams):
    # E[g(S_steps) | S_0 = s0] for the half-stationary kernel, by exact forward transfer
    weights = {s0: params.num(1)}
    for _ in range(steps):
        nxt: dict = {}
        for s, p in weights.items():
            up, down = half_transition(s, params)
            nxt[s + 1] = nxt.get(s + 1, 0) + p * up
            nxt[s - 1] = nxt.get(s - 1, 0) + p * down
        weights = nxt
    return sum(p * g(s) for s, p in weights.items())


def keyit_check(ell: int, lag: int, s_values, params: ModelParams) -> float:
    """Relative residual of the one-index-shift iteration

    E[f(S(t)) h_l(f(S(t))/2) | S(t')] = q^{d(l+1)/2} h_{l+1}(f(S(t'))/2)
                                        + (q^{-l} - 1) q^{d(l-1)/2} h_{l-1}(f(S(t'))/2),

    d = t - t' = ``lag``, with the left side computed by exact transfer.
    """
    q, rq = params.q, params.sqrt_q

    def g(s):
        fs = f_map(s, params)
        return fs * hermite_qinv(ell, fs / 2, q)

    worst = 0.0
    for s0 in s_values:
        h = hermite_qinv_sequence(ell + 1, f_map(s0, params) / 2, q)
        lower = h[ell - 1] if ell >= 1 else 0
        rhs = rq ** (lag * (ell + 1)) * h[ell + 1] + (q ** (-ell) - 1) * rq ** (lag * (ell - 1)) * lower
        lhs = _K_power(g, s0, lag, params)
        worst = max(worst, float(abs(lhs - rhs) / max(1, abs(rhs))))
    return worst


# ---------------------------------------------------------------- stationary

def stationary_normalizer(params: ModelParams) -> float:
    """(-1/alpha, -q alpha, q; q)_inf."""
    q, alpha = float(params.q), float(params.alpha)
    return (q_pochhammer_inf(-1 / alpha, q)[0] * q_pochhammer_inf(-q * alpha, q)[0]
            * q_pochhammer_inf(q, q)[0])


def _log_weight(n: int, q: float, alpha: float, log_norm: float) -> float:
    # log of alpha^{-2n} q^{n(2n-1)} (1 + q^{2n}/alpha) / normalizer
    lq, la = math.log(q), math.log(alpha)
    extra = np.logaddexp(0.0, 2 * n * lq - la)
    return -2 * n * la + n * (2 * n - 1) * lq + float(extra) - log_norm


def m_weight(n: int, params: ModelParams) -> float:
    """P(s_0 = 2n) = alpha^{-2n} q^{n(2n-1)} (1 + q^{2n}/alpha) / (-1/alpha, -q alpha, q; q)_inf."""
    q, alpha = float(params.q), float(params.alpha)
    return math.exp(_log_weight(n, q, alpha, math.log(stationary_normalizer(params))))


@dataclass
class StationaryMeasure:
    """One-point weights of stationary data on a truncated support.

    ``tilde=True`` gives the odd-site marginal (alpha replaced by alpha/q),
    supported on heights 2n + 1 instead of 2n.
    """

    params: ModelParams
    normalizer: float
    n_min: int
    n_max: int
    weights: np.ndarray = field(repr=False)
    tilde: bool = False

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    @property
    def heights(self) -> np.ndarray:
        return 2 * self.indices + (1 if self.tilde else 0)

    def pmf(self, n: int) -> float:
        if self.n_min <= n <= self.n_max:
            return float(self.weights[n - self.n_min])
        return 0.0

    @property
    def total(self) -> float:
        return float(math.fsum(self.weights))


def stationary_measure(params: ModelParams, *, tilde: bool = False, cut: float = 1e-16) -> StationaryMeasure:
    """Weights m_n (or m~_n) on the smallest index range whose end weights are below cut * max."""
    q, alpha = float(params.q), float(params.alpha)
    eff = params.with_alpha(params.alpha / params.q) if tilde else params
    ea = alpha / q if tilde else alpha
    log_norm = math.log(stationary_normalizer(eff))
    lq = math.log(q)
    centre = int(round((2 * math.log(ea) + lq) / (4 * lq)))
    logs = {centre: _log_weight(centre, q, ea, log_norm)}
    top = logs[centre]
    lo = hi = centre
    threshold = math.log(cut)
    while True:
        grown = False
        for side in (-1, 1):
            edge = lo if side < 0 else hi
            if logs[edge] - top > threshold or edge == centre:
                nxt = edge + side
                logs[nxt] = _log_weight(nxt, q, ea, log_norm)
                top = max(top, logs[nxt])
                if side < 0:
                    lo = nxt
                else:
                    hi = nxt
                grown = True
        if not grown:
            break
    weights = np.exp(np.array([logs[n] for n in range(lo, hi + 1)]))
    return StationaryMeasure(params, math.exp(log_norm), lo, hi, weights, tilde)


def _mp_qpoch_inf(a, q):
    total = mpmath.mpf(1)
    term = a
    eps = mpmath.mpf(10) ** (-mpmath.mp.dps - 5)
    while abs(term) > eps:
        total *= 1 - term
        term *= q
    return total


def _mp_weight_fn(q, alpha):
    norm = _mp_qpoch_inf(-1 / alpha, q) * _mp_qpoch_inf(-q * alpha, q) * _mp_qpoch_inf(q, q)

    def weight(n):
        return alpha ** (-2 * n) * q ** (n * (2 * n - 1)) * (1 + q ** (2 * n) / alpha) / norm

    return weight


def _measure_sum(term: Callable[[int], object], weight, *, rel_cut=None):
    """sum_n weight(n) term(n) over Z, walking outward from 0 until terms are negligible."""
    rel_cut = rel_cut or mpmath.mpf(10) ** (-mpmath.mp.dps)
    total = mpmath.mpf(0)
    peak = mpmath.mpf(0)
    for direction in (1, -1):
        n = 0 if direction == 1 else -1
        small_run = 0
        while small_run < 3:
            value = weight(n) * term(n)
            total += value
            peak = max(peak, abs(value))
            small_run = small_run + 1 if abs(value) <= rel_cut * max(peak, 1) and weight(n) < rel_cut else 0
            n += direction
    return total


def marginal_propagation_residuals(params: ModelParams, n_range=range(-8, 9)) -> tuple[float, float]:
    """Max residuals of

    m~_n = q^{2n}/(alpha + q^{2n}) m_n + alpha/(alpha + q^{2n+2}) m_{n+1},
    m_n  = q^{2n-1}/(alpha + q^{2n-1}) m~_{n-1} + alpha/(alpha + q^{2n+1}) m~_n.
    """
    with mpmath.workdps(MP_DPS):
        q, alpha = mpmath.mpf(params.q), mpmath.mpf(params.alpha)
        m = _mp_weight_fn(q, alpha)
        mt = _mp_weight_fn(q, alpha / q)
        r1 = max(abs(mt(n) - (q ** (2 * n) / (alpha + q ** (2 * n)) * m(n)
                              + alpha / (alpha + q ** (2 * n + 2)) * m(n + 1))) for n in n_range)
        r2 = max(abs(m(n) - (q ** (2 * n - 1) / (alpha + q ** (2 * n - 1)) * mt(n - 1)
                             + alpha / (alpha + q ** (2 * n + 1)) * mt(n))) for n in n_range)
        return float(r1), float(r2)


def sample_stationary(x_left: int, x_right: int, params: ModelParams, seed) -> HeightWindow:
    rng = np.random.default_rng(seed)
    h = sample_stationary_batch(x_left, x_right, params, 1, rng)[0]
    return HeightWindow(x_left, tuple(int(v) for v in h))


def sample_stationary_batch(x_left: int, x_right: int, params: ModelParams, trials: int,
                            rng: np.random.Generator, *, tail_tolerance: float = 1e-12) -> np.ndarray:
    """Stationary height functions on [x_left, x_right], one per row.

    The rightmost height is drawn from its one-point marginal (m_n at even
    sites, m~_n at odd sites) by inverse CDF; the half-stationary kernel then
    generates the heights leftwards.
    """
    if x_left > x_right:
        raise ValueError("empty window")
    measure = stationary_measure(params, tilde=bool(x_right % 2))
    if abs(measure.total - 1) > tail_tolerance:
        raise ValueError(f"truncated stationary weights sum to {measure.total}, "
                         f"outside tolerance {tail_tolerance}")
    cdf = np.cumsum(measure.weights)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(trials), side="right")
    s = measure.heights[np.minimum(idx, len(cdf) - 1)].astype(np.int64)
    L = x_right - x_left + 1
    h = np.empty((trials, L), dtype=np.int64)
    h[:, -1] = s
    q, alpha = float(params.q), float(params.alpha)
    lq = math.log(q)
    for col in range(L - 2, -1, -1):
        qs = np.exp(s * lq)
        up = rng.random(trials) < qs / (alpha + qs)
        s = np.where(up, s + 1, s - 1)
        h[:, col] = s
    return h


def pattern_probabilities(s: int, params: ModelParams, *, alpha=None):
    """Conditional probabilities, given s_{x+1} = s, of the peak (s, s+1, s) and the valley (s, s-1, s)
    read leftwards through the half-stationary kernel."""
    alpha = params.alpha if alpha is None else alpha
    q = params.q
    qs, qs1, qsm = q ** s, q ** (s + 1), q ** (s - 1)
    peak = qs / (alpha + qs) * alpha / (alpha + qs1)
    valley = alpha / (alpha + qs) * qsm / (alpha + qsm)
    return peak, valley


def detailed_balance_check(s: int, params: ModelParams, *, measure_alpha=None):
    """|rate(s-1 -> s+1) / rate(s+1 -> s-1) - P(peak)/P(valley)| at neighbour height s.

    Zero when the stationary data is reversible for the dynamics.  ``measure_alpha``
    replaces alpha in the pattern probabilities only (for mutation tests).
    """
    q, alpha = params.q, params.alpha
    up = (1 + alpha * q ** (-s + 1)) / (1 + alpha * q ** (-s))
    down = q * (1 + alpha * q ** (-s - 1)) / (1 + alpha * q ** (-s))
    peak, valley = pattern_probabilities(s, params, alpha=measure_alpha)
    return abs(up / down - peak / valley)


def zeta_moment_from_measure(k: int, params: ModelParams) -> float:
    """sum_n m_n x_n^k with support points x_n = alpha^{1/2} q^{-n} - alpha^{-1/2} q^n."""
    if k < 0:
        raise ValueError("k must be non-negative")
    with mpmath.workdps(MP_DPS):
        q, alpha = mpmath.mpf(params.q), mpmath.mpf(params.alpha)
        ra = mpmath.sqrt(alpha)
        weight = _mp_weight_fn(q, alpha)
        return float(_measure_sum(lambda n: (ra * q ** (-n) - q ** n / ra) ** k, weight))


def printed_zeta_moment(k: int, q) -> float:
    """(1 - 1/q)^{k/2} sum_{i=-k/2}^{k/2} C(k, k/2+i) (-1)^i q^{-i(i-1)/2} for even k, else 0."""
    if k % 2:
        return 0.0
    half = k // 2
    total = sum(math.comb(k, half + i) * (-1) ** i * q ** (-i * (i - 1) / 2) for i in range(-half, half + 1))
    base = 1 - 1 / q
    return float(base ** half * total)


def orthogonality_check(a: int, b: int, params: ModelParams) -> float:
    """sum_n m_n h_a(f(2n)/2) h_b(f(2n)/2) - delta_ab (q;q)_a / q^{a(a+1)/2}."""
    if not (0 <= a <= 8 and 0 <= b <= 8):
        raise ValueError("degrees must lie in 0..8")
    with mpmath.workdps(MP_DPS):
        q, alpha = mpmath.mpf(params.q), mpmath.mpf(params.alpha)
        ra = mpmath.sqrt(alpha)
        weight = _mp_weight_fn(q, alpha)

        def term(n):
            x = (ra * q ** (-n) - q ** n / ra) / 2
            h = hermite_qinv_sequence(max(a, b), x, q)
            return h[a] * h[b]

        total = _measure_sum(term, weight)
        norm = q_pochhammer(q, q, a) / q ** (a * (a + 1) // 2) if a == b else 0
        return float(total - norm)


# ---------------------------------------------------------------- stationarity under the dynamics

@dataclass
class StationarityReport:
    heights: np.ndarray
    counts: np.ndarray
    expected: np.ndarray
    z_scores: np.ndarray
    trials: int
    seed: int

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z_scores)))

    def passes(self, sigmas: float = 3.0) -> bool:
        return self.max_abs_z <= sigmas


def stationarity_test(params: ModelParams, t: float, trials: int, seed: int, *, length: int = 21,
                      chunk: int = 20_000, min_expected: float = 5.0) -> StationarityReport:
    """Histogram the centre height after running stationary data for time t.

    The window is [-(length // 2), length // 2], centred on site 0, whose
    one-point law is m_n on heights 2n.  Each bin's count is compared with trials * m_n through
    the binomial standard deviation; bins with expected count below
    ``min_expected`` are pooled into their outer neighbours.
    """
    from .process import simulate_dynamic_asep_batch

    if length < 3 or length % 2 == 0:
        raise ValueError("length must be odd and at least 3")
    half = length // 2
    x_left, x_right = -half, half
    params_f = params.as_float()
    values = []
    for c, start in enumerate(range(0, trials, chunk)):
        m = min(chunk, trials - start)
        rng = np.random.default_rng([seed, c])
        h0 = sample_stationary_batch(x_left, x_right, params_f, m, rng)
        h = simulate_dynamic_asep_batch(h0, t, params_f, rng)
        values.append(h[:, half])
    centre = np.concatenate(values)
    measure = stationary_measure(params_f)
    probs = measure.weights / measure.weights.sum()
    counts = np.array([np.sum(centre == s) for s in measure.heights], dtype=float)
    stray = trials - counts.sum()
    keep = probs * trials >= min_expected
    first, last = np.argmax(keep), len(keep) - 1 - np.argmax(keep[::-1])
    exp_b = probs[first:last + 1].copy()
    cnt_b = counts[first:last + 1].copy()
    exp_b[0] += probs[:first].sum()
    exp_b[-1] += probs[last + 1:].sum()
    cnt_b[0] += counts[:first].sum()
    cnt_b[-1] += counts[last + 1:].sum() + stray
    sd = np.sqrt(trials * exp_b * (1 - exp_b))
    z = (cnt_b - trials * exp_b) / sd
    return StationarityReport(measure.heights[first:last + 1], cnt_b, trials * exp_b, z, trials, seed)
