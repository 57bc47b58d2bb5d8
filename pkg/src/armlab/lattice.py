"""Square, matching (star) and triangular lattice geometry on L-infinity boxes.

Sites are integer pairs ``(x, y)``.  A box ``B_n = [-n, n]^2`` is stored
row-major: row ``y + n``, column ``x + n``, flat index ``(y + n) * W + (x + n)``
with ``W = 2n + 1``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np


class Site(NamedTuple):
    x: int
    y: int


def norm(v) -> int:
    """L-infinity norm of a site."""
    return max(abs(v[0]), abs(v[1]))


class Adjacency(enum.Enum):
    ORTHOGONAL = "orthogonal"
    STAR = "star"
    TRIANGULAR = "triangular"

    @property
    def offsets(self) -> tuple[tuple[int, int], ...]:
        """Neighbor offsets in counterclockwise order starting at (1, 0)."""
        return _OFFSETS[self]

    @property
    def forward_offsets(self) -> tuple[tuple[int, int], ...]:
        """Half of the offsets; every lattice edge is generated exactly once."""
        return tuple(d for d in self.offsets if d[1] > 0 or (d[1] == 0 and d[0] > 0))

    def matching(self) -> "Adjacency":
        """Adjacency used by the opposite color (closed paths for open ones)."""
        if self is Adjacency.ORTHOGONAL:
            return Adjacency.STAR
        if self is Adjacency.STAR:
            return Adjacency.ORTHOGONAL
        return Adjacency.TRIANGULAR

    def has_diagonal(self, d) -> bool:
        return tuple(d) in _OFFSETS[self] and d[0] != 0 and d[1] != 0


_OFFSETS = {
    Adjacency.ORTHOGONAL: ((1, 0), (0, 1), (-1, 0), (0, -1)),
    Adjacency.STAR: ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)),
    # Z^2 plus the (+1,+1)/(-1,-1) diagonal of every face.
    Adjacency.TRIANGULAR: ((1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)),
}


class Lattice(enum.Enum):
    SQUARE = "square"
    TRIANGULAR = "triangular"

    @property
    def open_adjacency(self) -> Adjacency:
        return Adjacency.ORTHOGONAL if self is Lattice.SQUARE else Adjacency.TRIANGULAR

    @property
    def closed_adjacency(self) -> Adjacency:
        return self.open_adjacency.matching()

    def adjacency(self, color: int) -> Adjacency:
        return self.open_adjacency if color else self.closed_adjacency

    @property
    def pc(self) -> float:
        return P_C[self]

    @classmethod
    def parse(cls, value) -> "Lattice":
        if isinstance(value, Lattice):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown lattice {value!r} (square or triangular)") from None


# Square-lattice site threshold is a literature estimate, used as a run parameter.
P_C = {Lattice.SQUARE: 0.59274605, Lattice.TRIANGULAR: 0.5}


def neighbors(v, adj: Adjacency) -> list[Site]:
    """Lattice neighbors of ``v`` (unclipped)."""
    x, y = v
    return [Site(x + dx, y + dy) for dx, dy in adj.offsets]


def neighbors_in_box(v, adj: Adjacency, n: int) -> list[Site]:
    return [u for u in neighbors(v, adj) if norm(u) <= n]


@dataclass(frozen=True)
class Box:
    """The box ``B_n = [-n, n]^2``."""

    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("box radius must be nonnegative")

    @property
    def width(self) -> int:
        return 2 * self.n + 1

    @property
    def size(self) -> int:
        return self.width ** 2

    def contains(self, v) -> bool:
        return norm(v) <= self.n

    def index(self, v) -> int:
        if not self.contains(v):
            raise ValueError(f"site {tuple(v)} outside B_{self.n}")
        return (v[1] + self.n) * self.width + (v[0] + self.n)

    def site(self, idx: int) -> Site:
        row, col = divmod(int(idx), self.width)
        return Site(col - self.n, row - self.n)

    def sites(self) -> list[Site]:
        """All sites in row-major order."""
        return [self.site(i) for i in range(self.size)]


@dataclass(frozen=True)
class Annulus:
    """``A(n1, n2) = B_n2 minus B_(n1-1)``."""

    n1: int
    n2: int

    def __post_init__(self):
        if not 0 <= self.n1 < self.n2:
            raise ValueError(f"annulus needs 0 <= n1 < n2, got ({self.n1}, {self.n2})")

    def contains(self, v) -> bool:
        return self.n1 <= norm(v) <= self.n2


def ring(m: int) -> list[Site]:
    """Sites with norm exactly ``m``, counterclockwise from ``(m, -m)``."""
    if m == 0:
        return [Site(0, 0)]
    out = [Site(m, y) for y in range(-m, m)]
    out += [Site(x, m) for x in range(m, -m, -1)]
    out += [Site(-m, y) for y in range(m, -m, -1)]
    out += [Site(x, -m) for x in range(-m, m)]
    return out


def inner_boundary(box: Box | int) -> list[Site]:
    """Inner vertex boundary of ``B_n`` in counterclockwise order from ``(n, -n)``."""
    n = box.n if isinstance(box, Box) else box
    return ring(n)


def annulus_sites(n1: int, n2: int) -> set[Site]:
    ann = Annulus(n1, n2)
    return {Site(x, y) for x in range(-n2, n2 + 1) for y in range(-n2, n2 + 1)
            if ann.contains((x, y))}


def arm_inner_radius(k: int) -> int:
    """Smallest radius whose inner boundary has at least ``k`` sites."""
    m = 0
    while len(ring(m)) < k:
        m += 1
    return m


@lru_cache(maxsize=None)
def spiral_order(n: int) -> np.ndarray:
    """Flat indices of ``B_n`` sorted by shell, each shell in ring order.

    The first ``(2m+1)^2`` entries enumerate ``B_m``, so a stream of draws laid
    out in this order restricts consistently to smaller boxes.
    """
    box = Box(n)
    order = [box.index(v) for m in range(n + 1) for v in ring(m)]
    arr = np.asarray(order, dtype=np.int64)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def norm_grid(n: int) -> np.ndarray:
    """``norm`` of every site of ``B_n`` as a flat row-major array."""
    r = np.arange(-n, n + 1)
    g = np.maximum(np.abs(r)[:, None], np.abs(r)[None, :]).ravel().astype(np.int64)
    g.setflags(write=False)
    return g
