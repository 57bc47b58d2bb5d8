"""Percolation configurations on a box, bit-packed one bit per site."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import Box, Lattice, Site, spiral_order

DUMP_MAGIC = "perc-cfg v1"


def stream(seed: int, index: int = 0, purpose: int = 0, *key: int) -> np.random.Generator:
    """Counter-based generator for sample ``index`` of stream ``purpose``.

    Keyed only by ``(seed, purpose, index, *key)``, so sample ``i`` is the
    same no matter which worker draws it or in which order.
    """
    spawn = (int(purpose), int(index)) + tuple(int(k) for k in key)
    ss = np.random.SeedSequence(int(seed), spawn_key=spawn)
    return np.random.Generator(np.random.Philox(ss))


def draw_states(gen: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Flat row-major uint8 states of ``B_n``; draws are consumed in spiral order."""
    order = spiral_order(n)
    u = gen.random(order.size)
    states = np.empty(order.size, dtype=np.uint8)
    states[order] = u < p
    return states


def _check_p(p) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return p


@dataclass(frozen=True, eq=False)
class Configuration:
    """Open (1) / closed (0) states of every site of ``box``."""

    box: Box
    bits: np.ndarray  # packed, little bit order, row-major
    p: float
    lattice: Lattice = Lattice.SQUARE
    seed: int | None = None

    @classmethod
    def from_states(cls, box: Box, states, p: float, lattice=Lattice.SQUARE, seed=None):
        arr = np.asarray(states, dtype=np.uint8).reshape(-1)
        if arr.size != box.size:
            raise ValueError(f"expected {box.size} states, got {arr.size}")
        if np.any(arr > 1):
            raise ValueError("states must be 0 or 1")
        bits = np.packbits(arr, bitorder="little")
        bits.setflags(write=False)
        return cls(box, bits, float(p), Lattice.parse(lattice), seed)

    @classmethod
    def from_grid(cls, grid, p: float, lattice=Lattice.SQUARE, seed=None):
        """Build from a square ``(2n+1, 2n+1)`` array indexed ``[y + n, x + n]``."""
        g = np.asarray(grid)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] % 2 == 0:
            raise ValueError("grid must be square with odd side")
        return cls.from_states(Box(g.shape[0] // 2), g, p, lattice, seed)

    @classmethod
    def filled(cls, n: int, state: int, p: float = 0.5, lattice=Lattice.SQUARE):
        box = Box(n)
        return cls.from_states(box, np.full(box.size, state, dtype=np.uint8), p, lattice)

    @classmethod
    def from_function(cls, n: int, is_open, p: float = 0.5, lattice=Lattice.SQUARE):
        box = Box(n)
        return cls.from_states(box, [1 if is_open(v) else 0 for v in box.sites()], p, lattice)

    @property
    def n(self) -> int:
        return self.box.n

    @property
    def states(self) -> np.ndarray:
        """Flat row-major uint8 copy of the states."""
        return np.unpackbits(self.bits, count=self.box.size, bitorder="little")

    @property
    def grid(self) -> np.ndarray:
        return self.states.reshape(self.box.width, self.box.width)

    def state(self, v) -> int:
        i = self.box.index(v)
        return int((self.bits[i >> 3] >> (i & 7)) & 1)

    def is_open(self, v) -> bool:
        return self.state(v) == 1

    @property
    def n_open(self) -> int:
        return int(np.unpackbits(self.bits).sum())

    def flip(self, v) -> "Configuration":
        return flip(self, v)

    def restrict(self, n: int) -> "Configuration":
        """The sub-configuration on ``B_n``."""
        if n > self.n:
            raise ValueError(f"cannot restrict B_{self.n} to larger B_{n}")
        off = self.n - n
        g = self.grid[off:off + 2 * n + 1, off:off + 2 * n + 1]
        return Configuration.from_grid(g, self.p, self.lattice, self.seed)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return (self.box == other.box and self.lattice == other.lattice
                and np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash((self.box, self.lattice, self.bits.tobytes()))

    def dump(self) -> str:
        seed = "-" if self.seed is None else str(self.seed)
        lines = [f"{DUMP_MAGIC} {self.lattice.value} {self.n} {self.p!r} {seed}"]
        lines += ["".join("1" if s else "0" for s in row) for row in self.grid]
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "Configuration":
        lines = text.strip("\n").split("\n")
        head = lines[0].split()
        if " ".join(head[:2]) != DUMP_MAGIC or len(head) != 6:
            raise ValueError("not a perc-cfg v1 dump")
        lattice, n, p, seed = head[2], int(head[3]), float(head[4]), head[5]
        rows = lines[1:]
        if len(rows) != 2 * n + 1 or any(len(r) != 2 * n + 1 for r in rows):
            raise ValueError("dump body does not match the header radius")
        grid = [[1 if ch == "1" else 0 for ch in r] for r in rows]
        return cls.from_grid(grid, p, lattice, None if seed == "-" else int(seed))


def sample(box: Box | int, p: float, rng, lattice=Lattice.SQUARE) -> Configuration:
    """I.i.d. Bernoulli(p) configuration on ``box``.

    ``rng`` is either an integer seed (stream ``(seed, 0)``) or a generator.
    """
    box = box if isinstance(box, Box) else Box(box)
    p = _check_p(p)
    seed = None
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
        rng = stream(seed)
    return Configuration.from_states(box, draw_states(rng, box.n, p), p, lattice, seed)


def flip(omega: Configuration, v) -> Configuration:
    """``omega`` with the state of ``v`` toggled."""
    i = omega.box.index(v)
    bits = omega.bits.copy()
    bits[i >> 3] ^= np.uint8(1 << (i & 7))
    bits.setflags(write=False)
    return Configuration(omega.box, bits, omega.p, omega.lattice, omega.seed)


def increment_c(omega: Configuration, v) -> float:
    """``-(1 - p)`` if ``v`` is open, ``p`` if closed."""
    return omega.p - omega.state(v)


@dataclass(eq=False)
class TrackedConfiguration:
    """Read-only view of a configuration that records every queried site."""

    inner: Configuration
    accessed: np.ndarray = field(init=False)
    reveals: list = field(init=False, default_factory=list)

    def __post_init__(self):
        self.accessed = np.zeros(self.inner.box.size, dtype=bool)
        self._states = self.inner.states

    @property
    def box(self) -> Box:
        return self.inner.box

    @property
    def lattice(self) -> Lattice:
        return self.inner.lattice

    @property
    def p(self) -> float:
        return self.inner.p

    def state(self, v) -> int:
        i = self.inner.box.index(v)
        s = int(self._states[i])
        if not self.accessed[i]:
            self.accessed[i] = True
            self.reveals.append((Site(*v), s))
        return s

    def accessed_sites(self) -> set[Site]:
        box = self.inner.box
        return {box.site(i) for i in np.flatnonzero(self.accessed)}
