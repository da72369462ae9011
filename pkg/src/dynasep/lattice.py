"""Height functions on finite windows, occupation variables and particle configurations.

Windows live in the even-parity sector s_x = x (mod 2), which keeps every
exponent of the duality functional an integer.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator, Sequence

__all__ = [
    "HeightWindow",
    "ParticleConfig",
    "to_occupation",
    "to_N",
    "from_occupation",
    "enumerate_windows",
    "format_window",
    "parse_window",
]


@dataclass(frozen=True)
class HeightWindow:
    """Heights (s_{x_left}, ..., s_{x_right}) with +-1 increments."""

    x_left: int
    heights: tuple[int, ...]

    def __post_init__(self):
        heights = tuple(int(h) for h in self.heights)
        object.__setattr__(self, "heights", heights)
        if not heights:
            raise ValueError("a window needs at least one site")
        for x, s in zip(self.sites, heights):
            if (s - x) % 2:
                raise ValueError(f"parity violation at x={x}: s={s}")
        for x, (a, b) in enumerate(zip(heights, heights[1:]), start=self.x_left):
            if abs(b - a) != 1:
                raise ValueError(f"increment between x={x} and x={x + 1} is {b - a}, not +-1")

    @property
    def x_right(self) -> int:
        return self.x_left + len(self.heights) - 1

    @property
    def sites(self) -> range:
        return range(self.x_left, self.x_left + len(self.heights))

    def __len__(self) -> int:
        return len(self.heights)

    def __contains__(self, x: int) -> bool:
        return self.x_left <= x <= self.x_right

    def s(self, x: int) -> int:
        if x not in self:
            raise IndexError(f"site {x} outside window [{self.x_left}, {self.x_right}]")
        return self.heights[x - self.x_left]

    def N(self, x: int) -> int:
        return (self.s(x) - x) // 2

    def is_interior(self, x: int) -> bool:
        return self.x_left < x < self.x_right

    def flipped(self, x: int, delta: int) -> "HeightWindow":
        """Window with s_x replaced by s_x + delta (delta = +-2)."""
        i = x - self.x_left
        heights = list(self.heights)
        heights[i] += delta
        # only the neighbourhood of x can break the invariants
        for j in (i - 1, i + 1):
            if 0 <= j < len(heights) and abs(heights[j] - heights[i]) != 1:
                raise ValueError(f"flip at x={x} by {delta} breaks the +-1 increments")
        if delta % 2:
            raise ValueError("flips change a height by an even amount")
        new = object.__new__(HeightWindow)
        object.__setattr__(new, "x_left", self.x_left)
        object.__setattr__(new, "heights", tuple(heights))
        return new


@dataclass(frozen=True)
class ParticleConfig:
    """Strictly decreasing particle positions x_1 > x_2 > ... > x_n."""

    positions: tuple[int, ...]

    def __post_init__(self):
        positions = tuple(int(p) for p in self.positions)
        object.__setattr__(self, "positions", positions)
        if not positions:
            raise ValueError("need at least one particle")
        if any(a <= b for a, b in zip(positions, positions[1:])):
            raise ValueError(f"positions must be strictly decreasing: {positions}")

    @property
    def n(self) -> int:
        return len(self.positions)

    def __len__(self) -> int:
        return len(self.positions)

    def __iter__(self):
        return iter(self.positions)

    def __getitem__(self, i):
        return self.positions[i]

    def moved(self, i: int, delta: int) -> "ParticleConfig":
        positions = list(self.positions)
        positions[i] += delta
        return ParticleConfig(tuple(positions))

    def shifted(self, delta: int) -> "ParticleConfig":
        return ParticleConfig(tuple(p + delta for p in self.positions))


def to_occupation(w: HeightWindow) -> tuple[int, ...]:
    """eta_{x+1/2} = (1 + s_x - s_{x+1}) / 2; a down-step is a particle."""
    return tuple((1 + a - b) // 2 for a, b in zip(w.heights, w.heights[1:]))


def to_N(w: HeightWindow) -> tuple[int, ...]:
    """N_x = (s_x - x) / 2 on every site of the window."""
    return tuple((s - x) // 2 for x, s in zip(w.sites, w.heights))


def from_occupation(x_left: int, s_left: int, eta: Sequence[int]) -> HeightWindow:
    if (s_left - x_left) % 2:
        raise ValueError(f"parity violation at anchor ({x_left}, {s_left})")
    heights = [s_left]
    for e in eta:
        if e not in (0, 1):
            raise ValueError(f"occupation values must be 0 or 1, got {e}")
        heights.append(heights[-1] + 1 - 2 * e)
    return HeightWindow(x_left, tuple(heights))


def enumerate_windows(x_left: int, s_left: int, length: int) -> Iterator[HeightWindow]:
    """All 2**(length-1) windows of the given length anchored at (x_left, s_left).

    The i-th window is the binary expansion of i read as occupations, so any
    single window can be regenerated from its index.
    """
    if length < 1:
        raise ValueError("length must be at least 1")
    for eta in product((0, 1), repeat=length - 1):
        yield from_occupation(x_left, s_left, eta)


def format_window(w: HeightWindow) -> str:
    """Plain-text form ``x_left s_{x_left} ... s_{x_right}``."""
    return " ".join(str(v) for v in (w.x_left, *w.heights))


def parse_window(text: str) -> HeightWindow:
    values = [int(tok) for tok in text.split()]
    if len(values) < 2:
        raise ValueError("window text needs x_left and at least one height")
    return HeightWindow(values[0], tuple(values[1:]))
