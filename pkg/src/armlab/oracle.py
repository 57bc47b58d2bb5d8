"""Exact expectations by enumerating every configuration of a tiny box.

All site-level tallies are integers grouped by the number of open variable
sites ``k``; an expectation at parameter ``p`` is then the compensated sum
``sum_k p^k (1-p)^(m-k) * count_k``.  The tallies do not depend on ``p`` and
are cached.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .arm import ArmSpec, check_k
from .cluster import offset_arrays, shifted_norms
from .explore import _ring_arrays
from .lattice import Box, Lattice, Site, neighbors, norm, ring

MAX_VARIABLES = 25
TOLERANCE = 1e-10


def _guard(n_var: int):
    if n_var > MAX_VARIABLES:
        raise ValueError(f"{n_var} variable sites exceed the enumeration guard of "
                         f"{MAX_VARIABLES} (2^{MAX_VARIABLES} configurations)")


def _weights(p: float, m: int) -> list[float]:
    # 0**0 == 1 keeps the p in {0, 1} limits exact.
    return [p ** k * (1.0 - p) ** (m - k) for k in range(m + 1)]


def _expect(counts, w) -> float:
    """``sum_k w[k] * counts[k]`` for a 1-D count array."""
    return math.fsum(float(w[k]) * int(c) for k, c in enumerate(counts) if c)


def _u8(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.uint8)


@dataclass(frozen=True)
class _Tallies:
    n: int
    lattice: Lattice
    sites: tuple
    z_hist: np.ndarray
    piv: np.ndarray
    zpiv: np.ndarray
    mono_violations: int
    ey: np.ndarray
    ezy: np.ndarray
    pair: np.ndarray
    z_mismatch: int
    flip_violations: int


def _variables(n: int, free, base_states):
    box = Box(2 * n)
    if free is None:
        free = box.sites()
    sites = sorted({Site(*v) for v in free}, key=box.index)
    for v in sites:
        box.index(v)
    _guard(len(sites))
    base = np.zeros(box.size, dtype=np.uint8) if base_states is None else _u8(base_states).copy()
    var_idx = np.array([box.index(v) for v in sites], dtype=np.int64)
    return box, tuple(sites), var_idx, base


@lru_cache(maxsize=8)
def _tallies(n: int, lattice: Lattice, free: tuple | None, base_key: bytes | None) -> _Tallies:
    base_states = None if base_key is None else np.frombuffer(base_key, dtype=np.uint8)
    box, sites, var_idx, base = _variables(n, free, base_states)
    m = len(sites)
    d = shifted_norms(2 * n)
    fdx, fdy = offset_arrays(lattice.open_adjacency)
    z = K.count_table(m, var_idx, box.width, base, _u8(d <= 2 * n), 1, _u8(d <= n),
                      _u8(d == 2 * n), fdx, fdy)
    pop = K.popcounts(m)
    interior = _u8([norm(v) <= n - 1 for v in sites])
    piv, zpiv, z_hist, mono = K.accumulate_flip_tables(z, pop, m, interior)
    rx, ry = _ring_arrays(2 * n)
    odx, ody = offset_arrays(lattice.open_adjacency, forward=False)
    rev, zex = K.explore_enumerate(m, var_idx, base, 2 * n, n, lattice is Lattice.TRIANGULAR,
                                   rx, ry, odx, ody)
    ey, ezy, pair, z_bad, flip_bad = K.accumulate_reveal_tables(rev, zex, z, pop, m)
    return _Tallies(n, lattice, sites, z_hist, piv, zpiv, int(mono), ey, ezy, pair,
                    int(z_bad), int(flip_bad))


@dataclass
class ExactReport:
    """Exact expectations over all configurations of the variable sites of ``B_2n``.

    Per-site arrays follow ``sites``; ``pairwise[i, j]`` is
    ``E[(C_i Y_i)(C_j Y_j)]``.  Pivotality refers to ``Z = |C(n, 2n)|``.
    """

    n: int
    p: float
    lattice: Lattice
    sites: tuple
    interior: np.ndarray
    e_cy: np.ndarray
    e_zcy: np.ndarray
    e_zc_piv: np.ndarray
    p_piv: np.ndarray
    e_y: np.ndarray
    pairwise: np.ndarray
    e_z: float
    e_z2: float
    e_sqrt_z: float
    pi: dict = field(default_factory=dict)
    matched_pi4: dict = field(default_factory=dict)
    mono_violations: int = 0
    z_mismatch: int = 0
    flip_violations: int = 0
    sign_residual: float = 0.0
    n_configs: int = 0

    def site_index(self, v) -> int:
        return self.sites.index(Site(*v))

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, np.ndarray):
                v = v.tolist()
            elif isinstance(v, Lattice):
                v = v.value
            elif k == "sites":
                v = [list(s) for s in v]
            out[k] = v
        return out


def enumerate_exact(n: int = 1, p: float = 0.5, lattice=Lattice.SQUARE, free=None,
                    base=None) -> ExactReport:
    """Exact report for ``Z = |C(n, 2n)|`` and the exploration indicators.

    ``free`` restricts the enumeration to a subset of sites of ``B_2n``; the
    others keep their state in ``base`` (all closed by default).  Identities
    then hold conditionally on the fixed sites.
    """
    lattice = Lattice.parse(lattice)
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if n < 1:
        raise ValueError("n must be at least 1")
    if free is None:
        _guard(Box(2 * n).size)
    free_key = None if free is None else tuple(sorted(Site(*v) for v in free))
    base_key = None if base is None else _u8(base).tobytes()
    T = _tallies(n, lattice, free_key, base_key)
    m = len(T.sites)
    w = _weights(p, m)
    c_of = {1: p - 1.0, 0: p}

    def site_expect(table, with_c: bool) -> np.ndarray:
        out = np.empty(m)
        for j in range(m):
            terms = []
            for s in (0, 1):
                mult = c_of[s] if with_c else 1.0
                terms += [w[k] * mult * int(table[k, j, s]) for k in range(m + 1) if table[k, j, s]]
            out[j] = math.fsum(terms)
        return out

    e_y = site_expect(T.ey, False)
    e_cy = site_expect(T.ey, True)
    e_zcy = site_expect(T.ezy, True)
    e_zc_piv = site_expect(T.zpiv, True)
    p_piv = site_expect(T.piv, False)

    pairwise = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            terms = [w[k] * c_of[si] * c_of[sj] * int(T.pair[k, i, j, si, sj])
                     for k in range(m + 1) for si in (0, 1) for sj in (0, 1)
                     if T.pair[k, i, j, si, sj]]
            pairwise[i, j] = pairwise[j, i] = math.fsum(terms)
    for j in range(m):
        pairwise[j, j] = math.fsum(w[k] * c_of[s] ** 2 * int(T.ey[k, j, s])
                                   for k in range(m + 1) for s in (0, 1) if T.ey[k, j, s])

    zs = np.arange(T.z_hist.shape[1])

    def z_moment(f) -> float:
        return math.fsum(w[k] * f(z) * int(T.z_hist[k, z])
                         for k in range(m + 1) for z in zs if T.z_hist[k, z])

    # P(w) C(w) + P(w^j) C(w^j) for a pair differing at one site, all k.
    sign = max((abs(w[k] * c_of[1] + w[k - 1] * c_of[0]) for k in range(1, m + 1)), default=0.0)

    interior = np.array([norm(v) <= n - 1 for v in T.sites])
    rep = ExactReport(
        n=n, p=p, lattice=lattice, sites=T.sites, interior=interior,
        e_cy=e_cy, e_zcy=e_zcy, e_zc_piv=e_zc_piv, p_piv=p_piv, e_y=e_y, pairwise=pairwise,
        e_z=z_moment(float), e_z2=z_moment(lambda z: float(z) ** 2),
        e_sqrt_z=z_moment(lambda z: math.sqrt(z)),
        mono_violations=T.mono_violations, z_mismatch=T.z_mismatch,
        flip_violations=T.flip_violations, sign_residual=sign, n_configs=1 << m)
    if free is None and base is None:
        r = 2 * n
        for k in (1, 2, 4):
            spec = ArmSpec(k, r)
            if _n_annulus_vars(spec.n1, r) <= MAX_VARIABLES:
                rep.pi[f"pi{k}({spec.n1},{r})"] = exact_pi(spec.n1, r, k, p, lattice)
        rep.matched_pi4 = {(0, 0): exact_four_arm_at_site(r, p, lattice)}
    return rep


@dataclass(frozen=True)
class ChainCheck:
    name: str
    passed: bool
    residual: float


def verify_chain(report: ExactReport, tol: float = TOLERANCE) -> list[ChainCheck]:
    """Exact identities and inequalities of the variance argument.

    Equalities report ``max |lhs - rhs|``; inequalities report the most
    negative slack (``0`` when every slack is nonnegative).
    """
    r = report
    p = r.p
    inner = np.flatnonzero(r.interior)
    out = []

    def eq(name, resid):
        resid = float(resid)
        out.append(ChainCheck(name, resid <= tol, resid))

    def ineq(name, slack):
        slack = float(min(slack, default=0.0)) if not np.isscalar(slack) else float(slack)
        out.append(ChainCheck(name, slack >= -tol, min(slack, 0.0)))

    off = r.pairwise - np.diag(np.diag(r.pairwise))
    eq("E[C_j Y_j] = 0", np.max(np.abs(r.e_cy)))
    eq("E[(C_i Y_i)(C_j Y_j)] = 0 for i != j", np.max(np.abs(off)) if off.size else 0.0)
    eq("E[Z C_j Y_j] = E[Z C_j 1_piv]", np.max(np.abs(r.e_zcy - r.e_zc_piv)))
    eq("P(w) C_j(w) Y_j(w) = -P(w^j) C_j(w^j) Y_j(w^j)",
       r.sign_residual if r.flip_violations == 0 else math.inf)
    eq("Y_j(w^j) = Y_j(w) (violations)", r.flip_violations)
    eq("Z from exploration = Z (mismatches)", r.z_mismatch)
    eq("closing an open site of B_(n-1) never lowers Z (violations)", r.mono_violations)
    ineq("E[Z C_j Y_j] >= p(1-p) P(v_j pivotal)",
         [r.e_zcy[j] - p * (1 - p) * r.p_piv[j] for j in inner])
    if r.matched_pi4:
        ineq("P(v_j pivotal) >= pi_4 at the matched radius",
             [r.p_piv[r.site_index(v)] - val for v, val in r.matched_pi4.items()])
    lhs = math.fsum(r.e_zcy[j] for j in inner)
    rhs = math.sqrt(r.e_z2) * math.sqrt(math.fsum(r.e_y[j] for j in inner))
    ineq("sum_j E[Z C_j Y_j] <= sqrt(E[Z^2]) sqrt(sum_j E[Y_j])", rhs - lhs)
    return out


# Arm probabilities

def _annulus_site_list(n1: int, n2: int) -> list[Site]:
    # B_n2 minus B_(n1 - 1); for n1 = 0 every site of B_n2.
    return [v for m in range(n1, n2 + 1) for v in ring(m)]


def _n_annulus_vars(n1: int, n2: int) -> int:
    return (2 * n2 + 1) ** 2 - (2 * n1 - 1) ** 2 if n1 > 0 else (2 * n2 + 1) ** 2


@lru_cache(maxsize=32)
def _arm_counts(n1: int, n2: int, lattice: Lattice):
    """Open and closed annulus crossing-cluster counts for every configuration."""
    sites = _annulus_site_list(n1, n2)
    _guard(len(sites))
    box = Box(n2)
    var_idx = np.array([box.index(v) for v in sites], dtype=np.int64)
    d = shifted_norms(n2)
    region = _u8((d >= n1) & (d <= n2))
    base = np.zeros(box.size, dtype=np.uint8)
    tables = []
    for color in (1, 0):
        dx, dy = offset_arrays(lattice.adjacency(color))
        tables.append(K.count_table(len(sites), var_idx, box.width, base, region, color,
                                    _u8(d == n1), _u8(d == n2), dx, dy))
    return tables[0], tables[1], K.popcounts(len(sites))


def arm_indicator_table(n1: int, n2: int, k: int, lattice=Lattice.SQUARE) -> np.ndarray:
    """``arm_event`` over every configuration of ``A(n1, n2)`` (bit ``b`` = annulus site ``b``)."""
    from .arm import four_arm_from_counts
    check_k(k)
    n_open, n_closed, _ = _arm_counts(n1, n2, Lattice.parse(lattice))
    if k == 1:
        return n_open >= 1
    if k == 2:
        return (n_open >= 1) & (n_closed >= 1)
    return four_arm_from_counts(n_open, n_closed)


def _by_popcount(indicator: np.ndarray, pop: np.ndarray, m: int) -> np.ndarray:
    return np.bincount(pop[indicator.astype(bool)], minlength=m + 1)


def exact_pi(n1: int, n2: int, k: int, p: float, lattice=Lattice.SQUARE) -> float:
    """Exact ``pi_k(n1, n2)`` at parameter ``p``."""
    lattice = Lattice.parse(lattice)
    ArmSpec(k, n2, n1)
    ind = arm_indicator_table(n1, n2, k, lattice)
    pop = _arm_counts(n1, n2, lattice)[2]
    m = len(_annulus_site_list(n1, n2))
    return _expect(_by_popcount(ind, pop, m), _weights(float(p), m))


@lru_cache(maxsize=8)
def _four_arm_site_counts(r: int, lattice: Lattice):
    box = Box(r)
    sites = _annulus_site_list(1, r)
    _guard(len(sites))
    var_idx = np.array([box.index(v) for v in sites], dtype=np.int64)
    d = shifted_norms(r)
    nbr = np.zeros(box.size, dtype=np.uint8)
    for u in neighbors((0, 0), lattice.open_adjacency):
        nbr[box.index(u)] = 1
    dx, dy = offset_arrays(lattice.open_adjacency)
    z = K.count_table(len(sites), var_idx, box.width, np.zeros(box.size, dtype=np.uint8),
                      _u8(d >= 1), 1, nbr, _u8(d == r), dx, dy)
    pop = K.popcounts(len(sites))
    return _by_popcount(z >= 2, pop, len(sites)), len(sites)


def exact_four_arm_at_site(r: int, p: float, lattice=Lattice.SQUARE) -> float:
    """Exact probability of ``four_arm_at_site(omega, (0, 0), r)``."""
    counts, m = _four_arm_site_counts(r, Lattice.parse(lattice))
    return _expect(counts, _weights(float(p), m))


def _truncated_graph(n1: int, n2: int, adj, box: Box):
    """CSR steps of truncated crossings: from norm ``n1`` through the interior into norm ``n2``."""
    ptr = [0]
    idx = []
    for i in range(box.size):
        v = box.site(i)
        if n1 <= norm(v) < n2:
            idx += [box.index(w) for w in neighbors(v, adj) if n1 < norm(w) <= n2]
        ptr.append(len(idx))
    return np.array(ptr, dtype=np.int64), np.array(idx, dtype=np.int64)


def exhaustive_arm1_disagreements(n1: int, n2: int, lattice=Lattice.SQUARE) -> tuple[int, int]:
    """Compare the cluster-count one-arm detector with literal path search on every configuration.

    Returns ``(disagreements, configurations)``.
    """
    lattice = Lattice.parse(lattice)
    sites = _annulus_site_list(n1, n2)
    _guard(len(sites))
    box = Box(n2)
    var_idx = np.array([box.index(v) for v in sites], dtype=np.int64)
    d = shifted_norms(n2)
    ptr, succ = _truncated_graph(n1, n2, lattice.open_adjacency, box)
    literal = K.truncated_reach_table(len(sites), var_idx, np.zeros(box.size, dtype=np.uint8), 1,
                                      _u8(d == n1), ptr, succ, _u8(d == n2))
    fast = arm_indicator_table(n1, n2, 1, lattice)
    return int(np.count_nonzero(literal.astype(bool) != fast)), int(literal.size)
