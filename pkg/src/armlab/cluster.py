"""Cluster labeling and crossing-cluster counts."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .config import Configuration
from .lattice import Adjacency, Box, Lattice, Site, norm, ring, spiral_order

OPEN, CLOSED = 1, 0


@lru_cache(maxsize=None)
def offset_arrays(adj: Adjacency, forward: bool = True) -> tuple[np.ndarray, np.ndarray]:
    offs = adj.forward_offsets if forward else adj.offsets
    dx = np.array([d[0] for d in offs], dtype=np.int64)
    dy = np.array([d[1] for d in offs], dtype=np.int64)
    return dx, dy


def _color_adjacency(lattice: Lattice, color: int, adj: Adjacency | None) -> Adjacency:
    want = lattice.adjacency(color)
    if adj is not None and adj is not want:
        raise ValueError(f"{'open' if color else 'closed'} clusters on the {lattice.value} "
                         f"lattice use {want.value} adjacency, not {adj.value}")
    return want


@lru_cache(maxsize=256)
def shifted_norms(n: int, cx: int = 0, cy: int = 0) -> np.ndarray:
    """``norm(v - c)`` for every site ``v`` of ``B_n`` (flat, row-major)."""
    r = np.arange(-n, n + 1)
    g = np.maximum(np.abs(r - cy)[:, None], np.abs(r - cx)[None, :]).ravel().astype(np.int64)
    g.setflags(write=False)
    return g


def _mask(cond: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(cond, dtype=np.uint8)


@dataclass(frozen=True)
class ClusterLabeling:
    """Union-find labels of one color class; ``labels[i] = -1`` off the class."""

    box: Box
    color: int
    adjacency: Adjacency
    labels: np.ndarray

    @property
    def roots(self) -> np.ndarray:
        return np.unique(self.labels[self.labels >= 0])

    @property
    def n_clusters(self) -> int:
        return int(self.roots.size)

    def same_cluster(self, u, v) -> bool:
        a = self.labels[self.box.index(u)]
        return a >= 0 and a == self.labels[self.box.index(v)]

    def clusters(self) -> list[set[Site]]:
        out: dict[int, set[Site]] = {}
        for i in np.flatnonzero(self.labels >= 0):
            out.setdefault(int(self.labels[i]), set()).add(self.box.site(i))
        return list(out.values())

    def sizes(self) -> list[int]:
        _, counts = np.unique(self.labels[self.labels >= 0], return_counts=True)
        return sorted(counts.tolist(), reverse=True)


def label(omega: Configuration, color: int = OPEN, adj: Adjacency | None = None) -> ClusterLabeling:
    adj = _color_adjacency(omega.lattice, color, adj)
    member = _mask(omega.states == color)
    dx, dy = offset_arrays(adj)
    labels = K.label(member, omega.box.width, dx, dy)
    return ClusterLabeling(omega.box, color, adj, labels)


@dataclass(frozen=True)
class CrossingCount:
    z: int
    n1: int
    n2: int


def _require_cover(omega: Configuration, radius: int, center=(0, 0)):
    if norm(center) + radius > omega.n:
        raise ValueError(f"configuration on B_{omega.n} does not cover a radius-{radius} "
                         f"box around {tuple(center)}")


def crossing_count_masks(omega: Configuration, color: int, region, inner, outer) -> int:
    """Clusters of ``color`` restricted to ``region`` meeting ``inner`` and ``outer``."""
    adj = omega.lattice.adjacency(color)
    dx, dy = offset_arrays(adj)
    member = _mask((omega.states == color) & region)
    return int(K.crossing_count(member, omega.box.width, _mask(inner), _mask(outer), dx, dy))


def count_crossing_clusters(omega: Configuration, n1: int, n2: int,
                            color: int = OPEN) -> CrossingCount:
    """Clusters of ``B_n2`` (of one color) with a site in ``B_n1`` and one on ``ring(n2)``."""
    if not 0 <= n1 < n2:
        raise ValueError(f"need 0 <= n1 < n2, got ({n1}, {n2})")
    _require_cover(omega, n2)
    d = shifted_norms(omega.n)
    z = crossing_count_masks(omega, color, d <= n2, d <= n1, d == n2)
    return CrossingCount(z, n1, n2)


def annulus_crossing_count(omega: Configuration, n1: int, n2: int, color: int = OPEN,
                           center=(0, 0)) -> int:
    """Clusters of ``center + A(n1, n2)`` joining its inner and outer rings."""
    if not 0 <= n1 < n2:
        raise ValueError(f"need 0 <= n1 < n2, got ({n1}, {n2})")
    _require_cover(omega, n2, center)
    d = shifted_norms(omega.n, *center)
    region = (d >= n1) & (d <= n2)
    return crossing_count_masks(omega, color, region, d == n1, d == n2)


@dataclass(frozen=True)
class Rect:
    x1: int
    x2: int
    y1: int
    y2: int

    def __post_init__(self):
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError("empty rectangle")


def _rect_masks(omega: Configuration, rect: Rect, vertical: bool):
    n = omega.n
    for c in (rect.x1, rect.x2, rect.y1, rect.y2):
        if abs(c) > n:
            raise ValueError("rectangle leaves the configuration box")
    r = np.arange(-n, n + 1)
    X = np.broadcast_to(r[None, :], (r.size, r.size)).ravel()
    Y = np.broadcast_to(r[:, None], (r.size, r.size)).ravel()
    region = (X >= rect.x1) & (X <= rect.x2) & (Y >= rect.y1) & (Y <= rect.y2)
    if vertical:
        return region, region & (Y == rect.y1), region & (Y == rect.y2)
    return region, region & (X == rect.x1), region & (X == rect.x2)


def crossing_event(omega: Configuration, rect: Rect | tuple, color: int = OPEN,
                   vertical: bool = False) -> bool:
    """Monochromatic crossing of ``rect`` between its left and right sides.

    ``vertical=True`` asks for a bottom-to-top crossing instead.  Rectangles
    are given as ``(x1, x2, y1, y2)`` in box coordinates.
    """
    rect = rect if isinstance(rect, Rect) else Rect(*rect)
    region, a, b = _rect_masks(omega, rect, vertical)
    return crossing_count_masks(omega, color, region, a, b) > 0


# Multi-scale kernels over raw state arrays (used by mc).

@lru_cache(maxsize=32)
def _shell_tables(n: int):
    order = spiral_order(n)
    shell_end = np.array([(2 * m + 1) ** 2 - 1 for m in range(n + 1)], dtype=np.int64)
    return order, shell_end


@lru_cache(maxsize=32)
def _arm_masks(n: int, lattice: Lattice):
    box = Box(n)
    ring1 = np.zeros(box.size, dtype=np.uint8)
    for v in ring(1):
        ring1[box.index(v)] = 1
    nbr = np.zeros(box.size, dtype=np.uint8)
    for d in lattice.open_adjacency.offsets:
        nbr[box.index(d)] = 1
    return ring1, nbr


def arm_counts_multiscale(states: np.ndarray, n: int, scales, lattice: Lattice) -> np.ndarray:
    """Per scale ``m``: open and closed crossing clusters of ``A(1, m)`` and the arm-1 flag.

    Row ``[n_open, n_closed, arm1]`` for each ``m`` in ``scales`` (ascending,
    ``1 <= m <= n``).  ``arm1`` already includes the state of the origin.
    """
    order, shell_end = _shell_tables(n)
    ring1, nbr = _arm_masks(n, lattice)
    odx, ody = offset_arrays(lattice.open_adjacency, forward=False)
    cdx, cdy = offset_arrays(lattice.closed_adjacency, forward=False)
    sc = np.asarray(scales, dtype=np.int64)
    out = K.annulus_arm_counts(states, 2 * n + 1, order, shell_end, sc, ring1,
                               odx, ody, cdx, cdy, nbr)
    out[:, 2] &= states[order[0]]
    return out


def z_multiscale(states: np.ndarray, n: int, pairs, lattice: Lattice) -> np.ndarray:
    """Open crossing counts ``|C(n1, n2)|`` inside ``B_n2`` for each ``(n1, n2)`` pair.

    Pairs must be sorted by ``n2``; ``n1 <= n2 <= n``.
    """
    pairs = list(pairs)
    order, shell_end = _shell_tables(n)
    n1 = np.array([a for a, _ in pairs], dtype=np.int64)
    n2 = np.array([b for _, b in pairs], dtype=np.int64)
    if np.any(np.diff(n2) < 0) or np.any(n1 > n2) or (n2.size and n2[-1] > n):
        raise ValueError("pairs must satisfy n1 <= n2 <= n, sorted by n2")
    odx, ody = offset_arrays(lattice.open_adjacency, forward=False)
    return K.box_crossing_multiscale(states, 2 * n + 1, order, shell_end,
                                     shifted_norms(n), n1, n2, odx, ody)
