"""Interface exploration of the open clusters attached to the boundary of ``B_2n``.

The procedure only ever asks ``reader.state(v)``, and which site it asks for
next depends only on the answers so far.  It therefore defines a decision
tree on the configuration, which gives the flip invariance of the visited
indicators for free.

Walk state is a pair ``(a, b)`` of orthogonal neighbors with ``a`` open on the
left and ``b`` closed on the right; the walk heads in direction
``t = rot90(b - a)`` and inspects the face ahead, ``a + t`` and ``b + t``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import Configuration, TrackedConfiguration
from .lattice import Lattice, Site, neighbors, norm, ring


class Unrevealed(LookupError):
    """Raised by a partial reader when the exploration asks for an unknown site."""

    def __init__(self, site):
        super().__init__(site)
        self.site = site


class PartialReader:
    """Reader backed by a dict of known states; unknown sites raise ``Unrevealed``."""

    def __init__(self, lattice: Lattice, n_box: int, known: dict):
        self.lattice = lattice
        self.n_box = n_box
        self.known = known
        self.reveals: list = []
        self._seen: set = set()

    def state(self, v) -> int:
        v = Site(*v)
        if norm(v) > self.n_box:
            raise ValueError(f"site {tuple(v)} outside B_{self.n_box}")
        try:
            s = self.known[v]
        except KeyError:
            raise Unrevealed(v) from None
        if v not in self._seen:
            self._seen.add(v)
            self.reveals.append((v, s))
        return s


@dataclass
class ExplorationTrace:
    n: int
    z: int
    visited: frozenset
    reveals: list
    interfaces: list = field(default_factory=list)  # medial walks, doubled coordinates

    @property
    def z_from_exploration(self) -> int:
        return self.z

    def y(self, v) -> int:
        return int(Site(*v) in self.visited)

    def dump(self) -> str:
        """Reveal log, one ``(x,y,state)`` per line."""
        return "".join(f"({v.x},{v.y},{s})\n" for v, s in self.reveals)


def _rot(d):
    return (-d[1], d[0])


class _Explorer:
    def __init__(self, reader, n: int):
        self.reader = reader
        self.n = n
        self.N = 2 * n
        self.open_adj = reader.lattice.open_adjacency
        self.known: dict[Site, int] = {}

    def state(self, v) -> int:
        v = Site(*v)
        s = self.known.get(v)
        if s is None:
            s = self.reader.state(v)
            self.known[v] = s
        return s

    def inside(self, v) -> bool:
        return norm(v) <= self.N

    def trace(self, a, b):
        """Follow one interface from the boundary pair ``(a, b)`` until it leaves the box."""
        path = [(a[0] + b[0], a[1] + b[1])]
        opens = [a]
        seen = {(a, b)}
        while True:
            d = (b[0] - a[0], b[1] - a[1])
            t = _rot(d)
            a2 = Site(a[0] + t[0], a[1] + t[1])
            if not self.inside(a2):
                return a, path, opens
            b2 = Site(b[0] + t[0], b[1] + t[1])
            if self.open_adj.has_diagonal((t[0] + d[0], t[1] + d[1])):
                # Face split along a--b2.
                if self.state(b2):
                    nxt = (b2, b)
                elif self.state(a2):
                    nxt = (a2, b2)
                else:
                    nxt = (a, a2)
            else:
                # Face split along a2--b, or not split at all (square lattice).
                if not self.state(a2):
                    nxt = (a, a2)
                elif not self.state(b2):
                    nxt = (a2, b2)
                else:
                    nxt = (b2, b)
            if nxt == (a2, b2):
                # Straight across the face: pass its center.
                path.append((a[0] + b[0] + t[0], a[1] + b[1] + t[1]))
            a, b = nxt
            path.append((a[0] + b[0], a[1] + b[1]))
            if (a, b) in seen:
                raise RuntimeError("interface walk revisited a pair")
            seen.add((a, b))
            opens.append(a)

    def reaches_inner(self, sources) -> bool:
        """Open search from known cluster sites; stops at the first site of ``B_n``."""
        if any(norm(v) <= self.n for v in sources):
            return True
        seen = set(sources)
        q = deque(sources)
        while q:
            u = q.popleft()
            for w in neighbors(u, self.open_adj):
                if w in seen or not self.inside(w):
                    continue
                seen.add(w)
                if self.state(w):
                    if norm(w) <= self.n:
                        return True
                    q.append(w)
        return False

    def run(self):
        N = self.N
        boundary = ring(N)
        L = len(boundary)
        states = [self.state(v) for v in boundary]
        if not any(states):
            return 0, []
        # Open arcs: maximal runs in cyclic ring order.
        arc = [-1] * L
        if all(states):
            arc = [0] * L
            n_arcs = 1
        else:
            start = next(i for i in range(L) if not states[i])
            n_arcs = 0
            for k in range(1, L + 1):
                i = (start + k) % L
                if states[i]:
                    if not states[(i - 1) % L]:
                        n_arcs += 1
                    arc[i] = n_arcs - 1
        parent = list(range(n_arcs))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        pos = {v: i for i, v in enumerate(boundary)}
        members: dict[int, list] = {}
        for i in range(L):
            if states[i]:
                members.setdefault(arc[i], []).append(boundary[i])
        interfaces = []
        extra: dict[int, list] = {}
        for i in range(L):
            j = (i + 1) % L
            if states[i] and not states[j]:
                end, path, opens = self.trace(boundary[i], boundary[j])
                interfaces.append(path)
                ra, rb = find(arc[i]), find(arc[pos[end]])
                parent[rb] = ra
                extra.setdefault(arc[i], []).extend(opens)
        classes: dict[int, list] = {}
        for a_id in range(n_arcs):
            r = find(a_id)
            classes.setdefault(r, []).extend(members.get(a_id, []))
            classes[r].extend(extra.get(a_id, []))
        z = sum(1 for sites in classes.values() if self.reaches_inner(list(dict.fromkeys(sites))))
        return z, interfaces


def _reader(omega):
    if isinstance(omega, Configuration):
        return TrackedConfiguration(omega)
    return omega


def explore(omega, n: int) -> ExplorationTrace:
    """Run the exploration on a (tracked) configuration covering ``B_2n``."""
    if n < 1:
        raise ValueError("exploration needs n >= 1")
    reader = _reader(omega)
    box_n = getattr(reader, "n_box", None)
    if box_n is None:
        box_n = reader.box.n
    if box_n < 2 * n:
        raise ValueError(f"configuration on B_{box_n} does not cover B_{2 * n}")
    ex = _Explorer(reader, n)
    z, interfaces = ex.run()
    reveals = list(reader.reveals)
    return ExplorationTrace(n, z, frozenset(v for v, _ in reveals), reveals, interfaces)


def check_flip_invariance(omega: Configuration, n: int,
                          trace: ExplorationTrace | None = None) -> bool:
    """``Y_j`` is unchanged by flipping ``v_j``, for every ``v_j`` in ``B_(n-1)``."""
    base = trace or explore(omega, n)
    for m in range(n):
        for v in ring(m):
            if explore(omega.flip(v), n).y(v) != base.y(v):
                return False
    return True


def replay(omega: Configuration, trace: ExplorationTrace) -> bool:
    """Re-run on a fresh tracked view and compare the reveal sequence."""
    return explore(TrackedConfiguration(omega), trace.n).reveals == trace.reveals


@dataclass(frozen=True)
class RevealmentProfile:
    n: int
    count: int
    mean: np.ndarray   # indexed [y + n - 1, x + n - 1] over B_(n-1)
    stderr: np.ndarray

    def at(self, v) -> float:
        return float(self.mean[v[1] + self.n - 1, v[0] + self.n - 1])


def revealment_profile(samples, n: int) -> RevealmentProfile:
    """Per-site visit frequency on ``B_(n-1)`` over an iterable of configurations."""
    w = 2 * n - 1
    hits = np.zeros((w, w), dtype=np.int64)
    count = 0
    for omega in samples:
        tr = explore(omega, n)
        for v in tr.visited:
            if norm(v) <= n - 1:
                hits[v[1] + n - 1, v[0] + n - 1] += 1
        count += 1
    if count < 1:
        raise ValueError("need at least one sample")
    mean = hits / count
    stderr = np.sqrt(mean * (1 - mean) / count)
    return RevealmentProfile(n, count, mean, stderr)


# Compiled port, used for exhaustive enumeration and bulk estimation.

def _ring_arrays(N: int):
    r = ring(N)
    return (np.array([v.x for v in r], dtype=np.int64), np.array([v.y for v in r], dtype=np.int64))


class CompiledExplorer:
    """Reusable buffers for repeated compiled explorations on ``B_nb``."""

    def __init__(self, lattice: Lattice, nb: int, n: int):
        from .cluster import offset_arrays
        if nb < 2 * n:
            raise ValueError(f"B_{nb} does not cover B_{2 * n}")
        self.lattice, self.nb, self.n = lattice, nb, n
        total = (2 * nb + 1) ** 2
        self.rx, self.ry = _ring_arrays(2 * n)
        self.odx, self.ody = offset_arrays(lattice.open_adjacency, forward=False)
        self.tri = lattice is Lattice.TRIANGULAR
        self.known = np.full(total, -1, dtype=np.int8)
        self.order = np.empty(total, dtype=np.int64)
        self.cnt = np.zeros(1, dtype=np.int64)
        self.ops = np.empty(16 * total + 64, dtype=np.int64)
        self.seen = np.zeros(total, dtype=np.int64)
        self.queue = np.empty(total + self.ops.size, dtype=np.int64)
        self.stamp = np.zeros(1, dtype=np.int64)

    def run(self, states: np.ndarray) -> tuple[int, np.ndarray]:
        """``(Z, flat indices in reveal order)`` for flat uint8 ``states`` of ``B_nb``."""
        from . import _kernels as K
        self.cnt[0] = 0
        z = K.explore_flat(states, self.nb, self.n, self.tri, self.rx, self.ry, self.odx,
                           self.ody, self.known, self.order, self.cnt, self.ops, self.seen,
                           self.queue, self.stamp)
        if z < 0:
            raise RuntimeError("exploration buffer overflow")
        seq = self.order[:self.cnt[0]].copy()
        self.known[seq] = -1
        return int(z), seq
