"""Continuous-time dynamics: dynamic ASEP on a window and n-particle standard ASEP.

The window's endpoint heights are frozen; only interior sites flip.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import HeightWindow, ParticleConfig, format_window
from .qspecial import ModelParams

__all__ = [
    "BoundaryPolicy",
    "Trajectory",
    "flip_rates",
    "simulate_dynamic_asep",
    "simulate_dynamic_asep_batch",
    "apply_dynamic_generator",
    "asep_generator_apply",
    "simulate_asep",
    "window_radius",
    "REFRESH_INTERVAL",
]

REFRESH_INTERVAL = 1 << 16


@dataclass(frozen=True)
class BoundaryPolicy:
    mode: str = "frozen"

    def __post_init__(self):
        if self.mode != "frozen":
            raise ValueError(f"unsupported boundary mode {self.mode!r}")


def _down_rate(s, q, alpha):
    # q (1 + alpha q^{-s}) / (1 + alpha q^{-s+1}), arranged so q^{|s|} never overflows
    if s >= 0:
        qs = q ** s
        return q * (qs + alpha) / (qs + alpha * q)
    qs = q ** (-s)
    return q * (1 + alpha * qs) / (1 + alpha * qs * q)


def _up_rate(s, q, alpha):
    # (1 + alpha q^{-s}) / (1 + alpha q^{-s-1})
    if s >= 0:
        qs = q ** s
        return q * (qs + alpha) / (qs * q + alpha)
    qs = q ** (-s)
    return q * (1 + alpha * qs) / (q + alpha * qs)


def flip_rates(s_prev: int, s: int, s_next: int, params: ModelParams):
    """(rate of s -> s-2, rate of s -> s+2) for the local profile around a site.

    Only a local maximum can move down and only a local minimum can move up.
    """
    if abs(s - s_prev) != 1 or abs(s - s_next) != 1:
        raise ValueError(f"invalid local profile ({s_prev}, {s}, {s_next})")
    zero = params.num(0)
    q, alpha = params.q, params.alpha
    if s_prev == s_next == s - 1:
        return _down_rate(s, q, alpha), zero
    if s_prev == s_next == s + 1:
        return zero, _up_rate(s, q, alpha)
    return zero, zero


def _site_rate(heights, i, q, alpha) -> tuple[float, int]:
    s = heights[i]
    a, b = heights[i - 1], heights[i + 1]
    if a == b == s - 1:
        return _down_rate(s, q, alpha), -2
    if a == b == s + 1:
        return _up_rate(s, q, alpha), 2
    return 0.0, 0


@dataclass
class Trajectory:
    initial: HeightWindow
    horizon: float
    events: list[tuple[float, int, int]] = field(default_factory=list)

    def window_at(self, t: float) -> HeightWindow:
        heights = list(self.initial.heights)
        for time, site, delta in self.events:
            if time > t:
                break
            heights[site - self.initial.x_left] += delta
        return HeightWindow(self.initial.x_left, tuple(heights))

    @property
    def final(self) -> HeightWindow:
        return self.window_at(self.horizon)

    def dump(self) -> str:
        lines = [format_window(self.initial), "t site delta"]
        lines += [f"{t!r} {site} {delta:+d}" for t, site, delta in self.events]
        return "\n".join(lines) + "\n"


def simulate_dynamic_asep(init: HeightWindow, t: float, params: ModelParams, seed: int) -> Trajectory:
    """Event-driven sample of the frozen-boundary dynamics on [0, t].

    Each step draws the exponential waiting time first and the site second,
    so a trajectory is reproducible from (seed, init).
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    rng = np.random.default_rng(seed)
    q, alpha = float(params.q), float(params.alpha)
    heights = list(init.heights)
    L = len(heights)
    traj = Trajectory(init, float(t))
    if L < 3 or t == 0:
        return traj
    rates = [0.0] * L
    deltas = [0] * L

    def refresh(i):
        rates[i], deltas[i] = _site_rate(heights, i, q, alpha)

    for i in range(1, L - 1):
        refresh(i)
    total = sum(rates)
    now = 0.0
    count = 0
    while total > 0:
        now += rng.exponential(1.0 / total)
        if now > t:
            break
        u = rng.random() * total
        acc = 0.0
        site = L - 2
        for i in range(1, L - 1):
            acc += rates[i]
            if u < acc:
                site = i
                break
        while rates[site] == 0.0:  # u landed on float round-off past the last positive rate
            site -= 1
        heights[site] += deltas[site]
        traj.events.append((now, init.x_left + site, deltas[site]))
        for j in (site - 1, site, site + 1):
            if 0 < j < L - 1:
                old = rates[j]
                refresh(j)
                total += rates[j] - old
        count += 1
        if count % REFRESH_INTERVAL == 0:
            total = sum(rates)
    return traj


def _batch_rates(h: np.ndarray, q: float, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    mid = h[:, 1:-1]
    left, right = h[:, :-2], h[:, 2:]
    is_max = (left == mid - 1) & (right == mid - 1)
    is_min = (left == mid + 1) & (right == mid + 1)
    s = mid.astype(float)
    # q^s + alpha over q^{s} q + alpha etc., with q^s computed as exp(s log q) clipped from overflow
    qs = np.exp(np.clip(s * np.log(q), -700.0, 700.0))
    down = q * (qs + alpha) / (qs + alpha * q)
    up = q * (qs + alpha) / (qs * q + alpha)
    rates = np.where(is_max, down, np.where(is_min, up, 0.0))
    deltas = np.where(is_max, -2, np.where(is_min, 2, 0))
    return rates, deltas


def simulate_dynamic_asep_batch(heights: np.ndarray, t: float, params: ModelParams,
                                rng: np.random.Generator) -> np.ndarray:
    """Run independent copies of the dynamics to time t, vectorised over rows.

    ``heights`` has shape (trials, window_length); the returned array holds the
    heights at time t.  Every row is an exact-in-law sample.
    """
    h = np.array(heights, dtype=np.int64, copy=True)
    trials, L = h.shape
    if L < 3 or t == 0:
        return h
    q, alpha = float(params.q), float(params.alpha)
    now = np.zeros(trials)
    active = np.arange(trials)
    while active.size:
        sub = h[active]
        rates, deltas = _batch_rates(sub, q, alpha)
        total = rates.sum(axis=1)
        alive = total > 0
        wait = np.full(active.size, np.inf)
        wait[alive] = rng.exponential(1.0, size=int(alive.sum())) / total[alive]
        now[active] += wait
        go = now[active] <= t
        if not go.any():
            break
        cum = np.cumsum(rates[go], axis=1)
        u = rng.random(int(go.sum())) * total[go]
        col = (cum <= u[:, None]).sum(axis=1)
        col = np.minimum(col, L - 3)
        rows = np.nonzero(go)[0]
        # guard against landing on a zero-rate site through round-off
        bad = rates[rows, col] == 0
        if bad.any():
            last = L - 3 - np.argmax(rates[rows[bad]][:, ::-1] > 0, axis=1)
            col[bad] = last
        h[active[rows], col + 1] += deltas[rows, col]
        active = active[go]
    return h


def window_radius(max_abs_x: int, t: float, q: float) -> int:
    """Half-width of a window whose frozen ends do not influence sites within max_abs_x by time t."""
    return int(max_abs_x + np.ceil(4 * (1 + q) * t) + 20)


def apply_dynamic_generator(F: Callable[[HeightWindow], object], w: HeightWindow, params: ModelParams):
    """(L F)(w): sum over interior sites of rate(w -> flipped w) (F(flipped w) - F(w))."""
    base = F(w)
    total = params.num(0)
    for x in range(w.x_left + 1, w.x_right):
        down, up = flip_rates(w.s(x - 1), w.s(x), w.s(x + 1), params)
        if down:
            total += down * (F(w.flipped(x, -2)) - base)
        if up:
            total += up * (F(w.flipped(x, 2)) - base)
    return total


def asep_generator_apply(G: Callable[[ParticleConfig], object], x: ParticleConfig,
                         left_rate, right_rate):
    """Generator of n-particle ASEP (left jumps at left_rate, right at right_rate) applied to G."""
    base = G(x)
    total = 0 * base
    pos = x.positions
    n = len(pos)
    for i in range(n):
        if i == n - 1 or pos[i + 1] != pos[i] - 1:
            total += left_rate * (G(x.moved(i, -1)) - base)
        if i == 0 or pos[i - 1] != pos[i] + 1:
            total += right_rate * (G(x.moved(i, 1)) - base)
    return total


def simulate_asep(x: ParticleConfig, left_rate: float, right_rate: float, t: float,
                  seed: int) -> ParticleConfig:
    """Exact-in-law sample of n-particle ASEP on Z at time t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    rng = np.random.default_rng(seed)
    pos = list(x.positions)
    n = len(pos)
    now = 0.0
    while True:
        moves = []
        for i in range(n):
            if left_rate > 0 and (i == n - 1 or pos[i + 1] != pos[i] - 1):
                moves.append((i, -1, left_rate))
            if right_rate > 0 and (i == 0 or pos[i - 1] != pos[i] + 1):
                moves.append((i, 1, right_rate))
        total = sum(m[2] for m in moves)
        if total == 0:
            break
        now += rng.exponential(1.0 / total)
        if now > t:
            break
        u = rng.random() * total
        acc = 0.0
        for i, d, r in moves:
            acc += r
            if u < acc:
                break
        pos[i] += d
    return ParticleConfig(tuple(pos))
