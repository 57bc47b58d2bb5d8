"""Alternating arm events, pivotality for Z, and four-arm events at a site."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import _kernels as K
from .cluster import (CLOSED, OPEN, _mask, _require_cover, annulus_crossing_count,
                      count_crossing_clusters, crossing_count_masks, offset_arrays,
                      shifted_norms)
from .config import Configuration
from .lattice import Site, arm_inner_radius, neighbors, norm, ring

SUPPORTED_K = (1, 2, 4)
ORACLE_MAX_RADIUS = 6


def check_k(k) -> int:
    if k not in SUPPORTED_K:
        raise ValueError("k must be 1, 2, or 4")
    return int(k)


@dataclass(frozen=True)
class ArmSpec:
    """Alternating ``k``-arm event across ``A(n1, n2)``; ``n1`` defaults to ``k~``."""

    k: int
    n2: int
    n1: int = field(default=None)

    def __post_init__(self):
        check_k(self.k)
        if self.n1 is None:
            object.__setattr__(self, "n1", arm_inner_radius(self.k))
        if not 0 <= self.n1 < self.n2:
            raise ValueError(f"need 0 <= n1 < n2, got ({self.n1}, {self.n2})")

    @property
    def colors(self) -> tuple[int, ...]:
        return tuple(OPEN if i % 2 == 0 else CLOSED for i in range(self.k))


def arm_event(omega: Configuration, spec: ArmSpec, center=(0, 0)) -> bool:
    """Arm event via crossing-cluster counts of the annulus around ``center``."""
    n_open = annulus_crossing_count(omega, spec.n1, spec.n2, OPEN, center)
    if spec.k == 1:
        return n_open >= 1
    if spec.k == 4 and n_open >= 2:
        return True
    n_closed = annulus_crossing_count(omega, spec.n1, spec.n2, CLOSED, center)
    return four_arm_from_counts(n_open, n_closed) if spec.k == 4 else n_open >= 1 and n_closed >= 1


def four_arm_from_counts(n_open, n_closed):
    # On the triangular lattice two disjoint open arms of one cluster can be
    # joined by a chord of the inner ring that cuts off a closed arm, so the
    # closed count is needed as well.
    return (n_open >= 2) | (n_closed >= 2)


# Literal path-based reference

class _UnitFlow:
    """Vertex-disjoint path search via node splitting and BFS augmentation."""

    def __init__(self):
        self.cap: dict[object, dict[object, int]] = {}

    def add(self, u, v, c=1):
        self.cap.setdefault(u, {})
        self.cap.setdefault(v, {})
        self.cap[u][v] = self.cap[u].get(v, 0) + c
        self.cap[v].setdefault(u, 0)

    def copy(self) -> "_UnitFlow":
        f = _UnitFlow()
        f.cap = {u: dict(e) for u, e in self.cap.items()}
        return f

    def max_flow(self, s, t, limit: int) -> int:
        flow = 0
        cap = self.cap
        while flow < limit:
            prev = {s: None}
            q = deque([s])
            while q and t not in prev:
                u = q.popleft()
                for w, c in cap[u].items():
                    if c > 0 and w not in prev:
                        prev[w] = u
                        q.append(w)
            if t not in prev:
                break
            w = t
            while prev[w] is not None:
                u = prev[w]
                cap[u][w] -= 1
                cap[w][u] += 1
                w = u
            flow += 1
        return flow


class _ArmGraph:
    """Truncated crossings of one color: from norm ``n1``, strictly inside, to norm ``n2``."""

    def __init__(self, omega: Configuration, color: int, n1: int, n2: int, center):
        cx, cy = center
        adj = omega.lattice.adjacency(color)
        rel = lambda v: max(abs(v[0] - cx), abs(v[1] - cy))  # noqa: E731
        sites = [Site(cx + x, cy + y) for x in range(-n2, n2 + 1) for y in range(-n2, n2 + 1)]
        self.color_sites = {v for v in sites if n1 <= rel(v) <= n2 and omega.state(v) == color}
        self.sources = [v for v in self.color_sites if rel(v) == n1]
        self.target_pos = {Site(cx + v.x, cy + v.y): i for i, v in enumerate(ring(n2))}
        self.targets = [t for t in self.target_pos if t in self.color_sites]
        self.succ: dict[Site, list[Site]] = {}
        for u in self.color_sites:
            r = rel(u)
            if r == n2:
                continue
            outs = []
            for w in neighbors(u, adj):
                if w in self.color_sites and n1 < rel(w):
                    outs.append(w)
            self.succ[u] = outs

    def reachable_targets(self) -> set[Site]:
        seen = set(self.sources)
        q = deque(self.sources)
        while q:
            u = q.popleft()
            for w in self.succ.get(u, ()):
                if w not in seen:
                    seen.add(w)
                    q.append(w)
        return {t for t in self.targets if t in seen}

    def network(self) -> _UnitFlow:
        f = _UnitFlow()
        for u in self.color_sites:
            f.add(("in", u), ("out", u))
        for u in self.sources:
            f.add("S", ("in", u))
        for u, outs in self.succ.items():
            for w in outs:
                f.add(("out", u), ("in", w))
        return f

    def disjoint_to_groups(self, base: _UnitFlow, groups) -> bool:
        """Disjoint crossings, one ending in each target group."""
        f = base.copy()
        for g, group in enumerate(groups):
            for t in group:
                f.add(("out", t), ("grp", g))
            f.add(("grp", g), "T")
        return f.max_flow("S", "T", len(groups)) == len(groups)


def arm_event_oracle(omega: Configuration, spec: ArmSpec, center=(0, 0)) -> bool:
    """Literal search for ``k`` disjoint alternating crossings (exponential-time reference)."""
    if spec.n2 > ORACLE_MAX_RADIUS:
        raise ValueError(f"oracle limited to n2 <= {ORACLE_MAX_RADIUS}")
    _require_cover(omega, spec.n2, center)
    g_open = _ArmGraph(omega, OPEN, spec.n1, spec.n2, center)
    t_open = g_open.reachable_targets()
    if spec.k == 1:
        return bool(t_open)
    g_closed = _ArmGraph(omega, CLOSED, spec.n1, spec.n2, center)
    t_closed = g_closed.reachable_targets()
    if spec.k == 2:
        return bool(t_open) and bool(t_closed)
    if len(t_open) < 2 or len(t_closed) < 2:
        return False
    net_open, net_closed = g_open.network(), g_closed.network()
    if not g_open.disjoint_to_groups(net_open, [t_open, t_open]):
        return False
    if not g_closed.disjoint_to_groups(net_closed, [t_closed, t_closed]):
        return False
    pos = g_open.target_pos
    for a, b in combinations(sorted(t_open, key=pos.get), 2):
        pa, pb = pos[a], pos[b]
        if not g_open.disjoint_to_groups(net_open, [[a], [b]]):
            continue
        inside = [t for t in t_closed if pa < pos[t] < pb]
        outside = [t for t in t_closed if pos[t] < pa or pos[t] > pb]
        if inside and outside and g_closed.disjoint_to_groups(net_closed, [inside, outside]):
            return True
    return False


# Pivotality

def _check_interior(v, n: int):
    if n < 1 or norm(v) > n - 1:
        raise ValueError(f"site {tuple(v)} is not in B_{n - 1}")


def z_value(omega: Configuration, n: int) -> int:
    """``Z = |C(n, 2n)|``, the open clusters of ``B_2n`` joining ``B_n`` to its boundary."""
    return count_crossing_clusters(omega, n, 2 * n, OPEN).z


def is_pivotal(omega: Configuration, v, n: int) -> bool:
    _check_interior(v, n)
    return z_value(omega.flip(v), n) != z_value(omega, n)


def z_after_flips(omega: Configuration, n: int, sites) -> np.ndarray:
    """``Z`` of ``omega`` with each listed site flipped in turn."""
    _require_cover(omega, 2 * n)
    d = shifted_norms(omega.n)
    dx, dy = offset_arrays(omega.lattice.open_adjacency)
    idx = np.array([omega.box.index(v) for v in sites], dtype=np.int64)
    states = omega.states
    return K.crossing_counts_after_flips(states, omega.box.width, _mask(d <= 2 * n),
                                         _mask(d <= n), _mask(d == 2 * n), dx, dy, idx)


def pivotal_sites(omega: Configuration, n: int) -> set[Site]:
    """All pivotal sites of ``B_(n-1)``."""
    inner = [v for m in range(n) for v in ring(m)]
    z0 = z_value(omega, n)
    zf = z_after_flips(omega, n, inner)
    return {v for v, z in zip(inner, zf) if z != z0}


def four_arm_at_site(omega: Configuration, v, r: int) -> bool:
    """Two open arms from distinct open clusters at neighbors of ``v`` reach distance ``r``.

    Clusters are taken in ``(v + B_r) \\ {v}``; two of them force the two
    separating closed arms, giving the alternating four-arm event centered at ``v``.
    """
    _require_cover(omega, r, v)
    d = shifted_norms(omega.n, v[0], v[1])
    nbr = np.zeros(omega.box.size, dtype=bool)
    for u in neighbors(v, omega.lattice.open_adjacency):
        nbr[omega.box.index(u)] = True
    region = (d >= 1) & (d <= r)
    return crossing_count_masks(omega, OPEN, region, nbr, d == r) >= 2
