import math

import gmpy2
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynasep.lattice import HeightWindow, ParticleConfig, enumerate_windows
from dynasep.process import (
    BoundaryPolicy,
    apply_dynamic_generator,
    asep_generator_apply,
    flip_rates,
    simulate_asep,
    simulate_dynamic_asep,
    simulate_dynamic_asep_batch,
    window_radius,
)
from dynasep.qspecial import ModelParams


def test_boundary_policy():
    assert BoundaryPolicy().mode == "frozen"
    with pytest.raises(ValueError):
        BoundaryPolicy("periodic")


class TestFlipRates:
    def test_local_max(self):
        down, up = flip_rates(-1, 0, -1, ModelParams(0.5, 1.0))
        assert down == pytest.approx(2 / 3) and up == 0

    def test_local_max_exact(self):
        down, up = flip_rates(-1, 0, -1, ModelParams.exact("1/2", "1"))
        assert down == gmpy2.mpq(2, 3) and up == 0

    def test_alpha_zero_limit(self):
        p = ModelParams(0.4, 1e-13)
        assert flip_rates(2, 3, 2, p)[0] == pytest.approx(0.4, rel=1e-9)
        assert flip_rates(4, 3, 4, p)[1] == pytest.approx(1.0, rel=1e-9)

    def test_slopes_are_frozen(self):
        p = ModelParams(0.5, 1.0)
        assert flip_rates(-1, 0, 1, p) == (0, 0)
        assert flip_rates(1, 0, -1, p) == (0, 0)

    def test_invalid_profile(self):
        with pytest.raises(ValueError):
            flip_rates(0, 0, 1, ModelParams(0.5, 1.0))

    @given(st.floats(0.01, 0.99), st.floats(1e-6, 1e6), st.integers(-400, 400))
    def test_positive_and_finite(self, q, a, s):
        p = ModelParams(q, a)
        down = flip_rates(s - 1, s, s - 1, p)[0]
        up = flip_rates(s + 1, s, s + 1, p)[1]
        for r in (down, up):
            assert r > 0 and math.isfinite(r)

    def test_alpha_shift_covariance(self):
        q = gmpy2.mpq(2, 5)
        one = ModelParams.exact(q, 1)
        for m in range(-3, 4):
            shifted = ModelParams.exact(q, q ** m)
            for s in range(-6, 7):
                for prof in ((s - 1, s, s - 1), (s + 1, s, s + 1)):
                    moved = tuple(v - m for v in prof)
                    assert flip_rates(*prof, shifted) == flip_rates(*moved, one)


def _valid_events(traj):
    w = traj.initial
    heights = list(w.heights)
    last = 0.0
    for t, site, delta in traj.events:
        assert t > last and t <= traj.horizon
        assert w.is_interior(site) and delta in (-2, 2)
        last = t
        heights[site - w.x_left] += delta
        HeightWindow(w.x_left, tuple(heights))


class TestSimulate:
    w = HeightWindow(-4, (4, 3, 2, 1, 0, 1, 2, 3, 4))

    def test_zero_time(self):
        assert simulate_dynamic_asep(self.w, 0.0, ModelParams(0.5, 1.0), 3).events == []

    def test_deterministic(self):
        p = ModelParams(0.5, 1.0)
        a = simulate_dynamic_asep(self.w, 3.0, p, 11)
        b = simulate_dynamic_asep(self.w, 3.0, p, 11)
        c = simulate_dynamic_asep(self.w, 3.0, p, 12)
        assert a.events == b.events and a.dump() == b.dump()
        assert a.events != c.events

    @given(st.integers(0, 2**32), st.floats(0.1, 0.9), st.floats(0.1, 5.0))
    def test_events_valid(self, seed, q, a):
        _valid_events(simulate_dynamic_asep(self.w, 2.0, ModelParams(q, a), seed))

    def test_window_at(self):
        traj = simulate_dynamic_asep(self.w, 2.0, ModelParams(0.5, 1.0), 5)
        assert traj.window_at(0.0) == self.w
        assert traj.final == traj.window_at(2.0)

    def test_dump_format(self):
        traj = simulate_dynamic_asep(self.w, 1.0, ModelParams(0.5, 1.0), 5)
        lines = traj.dump().splitlines()
        assert lines[0] == "-4 4 3 2 1 0 1 2 3 4"
        assert lines[1] == "t site delta"
        assert len(lines) == 2 + len(traj.events)

    def test_first_waiting_time_ks(self):
        # single local max, alpha -> 0: only one clock, of rate q
        q = 0.5
        p = ModelParams(q, 1e-12)
        w = HeightWindow(-1, (-1, 0, -1))
        n = 100_000
        rng = np.random.default_rng(7)
        times = np.sort([simulate_dynamic_asep(w, 50.0, p, int(s)).events[0][0]
                         for s in rng.integers(0, 2**63, n)])
        cdf = 1 - np.exp(-q * times)
        d = max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(n) / n))
        # 3 sigma Kolmogorov quantile
        assert d * math.sqrt(n) < 1.82


def _exact_law(w0, t, params):
    """Distribution of the window at time t by uniformisation of the generator."""
    states = [w for w in enumerate_windows(w0.x_left, w0.heights[0], len(w0)) if w.heights[-1] == w0.heights[-1]]
    index = {w: i for i, w in enumerate(states)}
    G = np.zeros((len(states), len(states)))
    for w, i in index.items():
        for x in range(w.x_left + 1, w.x_right):
            down, up = flip_rates(w.s(x - 1), w.s(x), w.s(x + 1), params)
            for rate, d in ((down, -2), (up, 2)):
                if rate:
                    G[i, index[w.flipped(x, d)]] += rate
                    G[i, i] -= rate
    lam = max(-np.diag(G))
    P = np.eye(len(states)) + G / lam
    law = np.zeros(len(states))
    law[index[w0]] = 1.0
    out = np.zeros(len(states))
    weight = math.exp(-lam * t)
    for k in range(400):
        out += weight * law
        law = law @ P
        weight *= lam * t / (k + 1)
    return states, out


class TestLaw:
    def test_single_and_batch_match_master_equation(self):
        p = ModelParams(0.5, 0.7)
        w0 = HeightWindow(-3, (3, 2, 1, 0, 1, 2, 3))
        t = 1.2
        states, law = _exact_law(w0, t, p)
        index = {w.heights: i for i, w in enumerate(states)}
        n = 40_000
        batch = simulate_dynamic_asep_batch(np.tile(w0.heights, (n, 1)), t, p, np.random.default_rng(1))
        single = [simulate_dynamic_asep(w0, t, p, s).final.heights for s in range(n // 4)]
        for sample in (batch, single):
            counts = np.zeros(len(states))
            for row in sample:
                counts[index[tuple(int(v) for v in row)]] += 1
            m = len(sample)
            sd = np.sqrt(m * law * (1 - law)) + 1e-12
            z = (counts - m * law) / sd
            assert np.max(np.abs(z[law * m > 5])) < 4.5

    def test_batch_zero_time(self):
        h = np.array([[1, 0, 1], [1, 2, 1]])
        out = simulate_dynamic_asep_batch(h, 0.0, ModelParams(0.5, 1.0), np.random.default_rng(0))
        assert np.array_equal(out, h)

    def test_batch_keeps_invariants(self):
        w0 = HeightWindow(-5, tuple(abs(x) for x in range(-5, 6)))
        out = simulate_dynamic_asep_batch(np.tile(w0.heights, (500, 1)), 3.0, ModelParams(0.3, 2.0),
                                          np.random.default_rng(4))
        assert np.all(np.abs(np.diff(out, axis=1)) == 1)
        assert np.all(out[:, 0] == 5) and np.all(out[:, -1] == 5)

    def test_window_radius(self):
        assert window_radius(3, 1.0, 0.5) == 3 + 6 + 20


class TestGenerators:
    p = ModelParams.exact("1/2", "1/3")

    def test_constant(self):
        w = HeightWindow(-2, (2, 1, 0, 1, 2))
        assert apply_dynamic_generator(lambda v: 5, w, self.p) == 0
        assert asep_generator_apply(lambda y: 5, ParticleConfig((1, -1)), 1, self.p.q) == 0

    def test_frozen_window(self):
        w = HeightWindow(0, (0, 1, 2, 3))
        assert apply_dynamic_generator(lambda v: v.heights[1] ** 3, w, self.p) == 0

    def test_hand_expansion(self):
        # length 3, interior local min at s = 0: only the up flip to s = 2
        p = self.p
        q, a = p.q, p.alpha
        w = HeightWindow(-1, (1, 0, 1))

        def F(v):
            s = v.s(0)
            return q ** 0 - 1 / a - (q ** (-s // 2) - q ** (s // 2) / a)

        up = (1 + a) / (1 + a / q)
        assert apply_dynamic_generator(F, w, p) == up * (F(w.flipped(0, 2)) - F(w))

    def test_linearity(self):
        p = ModelParams(0.4, 2.0)
        w = HeightWindow(-3, (1, 0, -1, 0, 1, 0, 1))
        F = lambda v: sum(h * h for h in v.heights)  # noqa: E731
        G = lambda v: v.s(0) - 3 * v.s(-1)  # noqa: E731
        lhs = apply_dynamic_generator(lambda v: 2 * F(v) - 0.5 * G(v), w, p)
        rhs = 2 * apply_dynamic_generator(F, w, p) - 0.5 * apply_dynamic_generator(G, w, p)
        assert lhs == pytest.approx(rhs, rel=1e-14, abs=1e-14)

    def test_single_particle(self):
        q, l, r = 0.3, 1.0, 0.3
        for x in (-2, 0, 5):
            got = asep_generator_apply(lambda y: q ** (-y[0]), ParticleConfig((x,)), l, r)
            assert got == pytest.approx((l * (q - 1) + r * (1 / q - 1)) * q ** (-x))

    def test_packed_cluster(self):
        moves = []
        asep_generator_apply(lambda y: moves.append(y.positions) or 0, ParticleConfig((2, 1, 0)), 1, 1)
        assert sorted(moves[1:]) == [(2, 1, -1), (3, 1, 0)]


class TestAsep:
    def test_zero_time(self):
        x = ParticleConfig((2, 0))
        assert simulate_asep(x, 1.0, 0.5, 0.0, 1) == x

    def test_left_poisson_mean(self):
        n, t = 100_000, 1.5
        disp = np.array([simulate_asep(ParticleConfig((0,)), 1.0, 0.0, t, s)[0] for s in range(n)])
        assert abs(disp.mean() + t) < 3 * math.sqrt(t / n)

    @given(st.integers(0, 10_000))
    def test_exclusion(self, seed):
        y = simulate_asep(ParticleConfig((1, 0, -1, -3)), 1.0, 0.6, 2.0, seed)
        assert all(a > b for a, b in zip(y.positions, y.positions[1:]))
