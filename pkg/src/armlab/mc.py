"""Monte Carlo estimation of arm probabilities, cluster-count moments and correlators.

Sample ``i`` of a run always comes from ``stream(seed, i, purpose, ...)`` and
every per-sample statistic is tallied as exact integers (or exact rationals
once multiplied by ``p``), so results do not depend on how sample indices
are split across workers or merged.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import partial, reduce

import numpy as np

from . import _kernels as K
from .arm import check_k, four_arm_from_counts
from .cluster import (_mask, arm_counts_multiscale, offset_arrays, shifted_norms,
                      z_multiscale)
from .config import draw_states, stream
from .explore import CompiledExplorer
from .lattice import Box, Lattice, arm_inner_radius, ring

ARMS, PI2, PI4, ZMOMENTS, RSW, CORRELATORS, EXPLORE = range(7)


def exact_p(p) -> Fraction:
    """The decimal value of ``p`` as typed, as an exact rational."""
    return Fraction(repr(float(p)))


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _frac_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class Estimate:
    """Sample mean of one statistic, stored as exact sufficient statistics.

    ``total`` and ``total_sq`` are exact sums of the per-sample values and
    their squares.  When ``transform == "sqrt"`` the per-sample value is the
    square root of an integer and ``hist`` holds the integer histogram.
    """

    statistic: str
    n: int
    count: int
    total: Fraction
    total_sq: Fraction
    lattice: str
    p: float
    seed: int | None = None
    n1: int | None = None
    ell: int | None = None
    hist: tuple | None = None
    transform: str | None = None

    @property
    def mean(self) -> float:
        if self.count == 0:
            return math.nan
        if self.transform == "sqrt":
            return math.fsum(c * math.sqrt(v) for v, c in self.hist) / self.count
        return float(self.total / self.count)

    @property
    def variance(self) -> float:
        if self.count < 2:
            return 0.0
        if self.transform == "sqrt":
            m = self.mean
            return max(float(self.total_sq) - self.count * m * m, 0.0) / (self.count - 1)
        v = (self.total_sq - self.total * self.total / self.count) / (self.count - 1)
        return max(float(v), 0.0)

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count else math.nan

    @property
    def is_zero(self) -> bool:
        return self.total == 0 and self.transform is None

    @property
    def upper95(self) -> float:
        """One-sided 95% upper bound; the rule of three when nothing was observed."""
        if self.is_zero:
            return 3.0 / self.count
        return self.mean + 1.6448536269514722 * self.stderr

    def key(self) -> tuple:
        return (self.statistic, self.n, self.n1, self.ell, self.lattice, self.p, self.seed,
                self.transform)

    def merge(self, other: "Estimate") -> "Estimate":
        if self.key() != other.key():
            raise ValueError("can only merge estimates of the same statistic and run")
        hist = None
        if self.hist is not None or other.hist is not None:
            acc: dict[int, int] = {}
            for v, c in (self.hist or ()) + (other.hist or ()):
                acc[v] = acc.get(v, 0) + c
            hist = tuple(sorted(acc.items()))
        return replace(self, count=self.count + other.count, total=self.total + other.total,
                       total_sq=self.total_sq + other.total_sq, hist=hist)

    def to_dict(self) -> dict:
        d = {"statistic": self.statistic, "lattice": self.lattice, "p": self.p, "n": self.n}
        if self.n1 is not None:
            d["n1"] = self.n1
        if self.ell is not None:
            d["ell"] = self.ell
        d.update(mean=self.mean, stderr=self.stderr, variance=self.variance, count=self.count,
                 seed=self.seed, total=_frac_str(self.total), total_sq=_frac_str(self.total_sq))
        if self.hist is not None:
            d["hist"] = [list(h) for h in self.hist]
        if self.transform is not None:
            d["transform"] = self.transform
        if self.is_zero:
            d["upper95"] = self.upper95
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Estimate":
        hist = d.get("hist")
        return cls(d["statistic"], d["n"], d["count"], Fraction(d["total"]),
                   Fraction(d["total_sq"]), d["lattice"], d["p"], d.get("seed"), d.get("n1"),
                   d.get("ell"), None if hist is None else tuple(tuple(h) for h in hist),
                   d.get("transform"))


def _linear_estimate(name, n, count, su, sv, suu, suv, svv, p, **meta) -> Estimate:
    """Estimate of a per-sample value ``p*u - v`` from integer sums."""
    P = exact_p(p)
    su, sv, suu, suv, svv = (int(x) for x in (su, sv, suu, suv, svv))
    return Estimate(name, n, count, P * su - sv, P * P * suu - 2 * P * suv + svv, p=float(p),
                    **meta)


def _indicator_estimate(name, n, count, hits, p, **meta) -> Estimate:
    h = int(hits)
    return Estimate(name, n, count, Fraction(h), Fraction(h), p=float(p), **meta)


# Parallel driver

def _add(a: dict, b: dict) -> dict:
    return {k: a[k] + b[k] for k in a}


def _ranges(samples: int, workers: int, start: int = 0):
    size = max(1, min(4096, math.ceil(samples / max(1, 4 * workers))))
    return [(lo, min(lo + size, start + samples)) for lo in range(start, start + samples, size)]


def run_chunks(task, samples: int, workers: int = 1, start: int = 0) -> dict:
    """Apply ``task((lo, hi))`` to consecutive index ranges and add the results in order."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    ranges = _ranges(samples, workers, start)
    if workers <= 1 or len(ranges) == 1:
        parts = [task(r) for r in ranges]
    else:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            parts = pool.map(task, ranges)
    return reduce(_add, parts)


def _check_prob(p) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return p


# Arm probabilities

def _arms_task(rng, seed, lattice, p, N, scales, purpose):
    lo, hi = rng
    sc = np.asarray(scales, dtype=np.int64)
    hits = np.zeros((len(scales), 3), dtype=np.int64)
    for i in range(lo, hi):
        s = draw_states(stream(seed, i, purpose), N, p)
        c = arm_counts_multiscale(s, N, sc, lattice)
        hits[:, 0] += c[:, 2]
        hits[:, 1] += (c[:, 0] >= 1) & (c[:, 1] >= 1)
        hits[:, 2] += four_arm_from_counts(c[:, 0], c[:, 1])
    return {"hits": hits}


def estimate_pi_scales(ks, scales, samples: int, lattice=Lattice.SQUARE, p=None, seed: int = 0,
                       workers: int = 1, purpose: int = ARMS, start: int = 0) -> dict:
    """``pi_k(k~, n)`` for every ``k`` in ``ks`` and ``n`` in ``scales`` from shared samples.

    Each sample is drawn once on the largest box; smaller boxes see exactly the
    configuration a direct draw of that box would produce.
    """
    lattice = Lattice.parse(lattice)
    p = _check_prob(lattice.pc if p is None else p)
    ks = [check_k(k) for k in ks]
    scales = sorted({int(n) for n in scales})
    for k in ks:
        if scales[0] <= arm_inner_radius(k):
            raise ValueError(f"scale {scales[0]} too small for k={k}")
    N = scales[-1]
    res = run_chunks(partial(_arms_task, seed=seed, lattice=lattice, p=p, N=N, scales=scales,
                             purpose=purpose), samples, workers, start)
    col = {1: 0, 2: 1, 4: 2}
    out = {}
    for k in ks:
        for s, n in enumerate(scales):
            out[(k, n)] = _indicator_estimate(f"pi{k}", n, samples, res["hits"][s, col[k]], p,
                                              lattice=lattice.value, seed=seed,
                                              n1=arm_inner_radius(k))
    return out


def estimate_pi(k: int, n: int, samples: int, lattice=Lattice.SQUARE, p=None, seed: int = 0,
                workers: int = 1) -> Estimate:
    return estimate_pi_scales([k], [n], samples, lattice, p, seed, workers)[(k, n)]


# Cluster-count moments

def _z_task(rng, seed, lattice, p, N, pairs, zmax):
    lo, hi = rng
    hist = np.zeros((len(pairs), zmax + 1), dtype=np.int64)
    rows = np.arange(len(pairs))
    for i in range(lo, hi):
        s = draw_states(stream(seed, i, ZMOMENTS), N, p)
        z = z_multiscale(s, N, pairs, lattice)
        hist[rows, z] += 1
    return {"hist": hist}


def estimate_z_moments_scales(scales, ell, samples: int, lattice=Lattice.SQUARE, p=None,
                              seed: int = 0, workers: int = 1, start: int = 0) -> dict:
    """Moments of ``|C(n, n + ell)|`` per scale; ``ell`` is an int or ``"n"`` (meaning ``ell = n``).

    Returns ``{n: {"E[Z]", "E[Z^2]", "E[sqrt Z]", "P(Z>=1)"}}``.
    """
    lattice = Lattice.parse(lattice)
    p = _check_prob(lattice.pc if p is None else p)
    scales = sorted({int(n) for n in scales})
    ells = {n: (n if ell == "n" else int(ell)) for n in scales}
    if any(l < 0 for l in ells.values()) or scales[0] < 1:
        raise ValueError("need n >= 1 and ell >= 0")
    pairs = sorted(((n, n + ells[n]) for n in scales), key=lambda t: t[1])
    N = pairs[-1][1]
    zmax = 8 * N
    res = run_chunks(partial(_z_task, seed=seed, lattice=lattice, p=p, N=N, pairs=pairs,
                             zmax=zmax), samples, workers, start)
    out = {}
    zs = np.arange(zmax + 1, dtype=object)
    for row, (n, n2) in enumerate(pairs):
        h = res["hist"][row]
        nz = np.flatnonzero(h)
        hist = tuple((int(z), int(h[z])) for z in nz)
        m1 = int(np.dot(zs[nz], h[nz].astype(object))) if nz.size else 0
        m2 = int(np.dot(zs[nz] ** 2, h[nz].astype(object))) if nz.size else 0
        m4 = int(np.dot(zs[nz] ** 4, h[nz].astype(object))) if nz.size else 0
        meta = dict(lattice=lattice.value, seed=seed, n1=n, ell=n2 - n, p=p)
        hits = samples - int(h[0])
        out[n] = {
            "E[Z]": Estimate("E[Z]", n, samples, Fraction(m1), Fraction(m2), **meta),
            "E[Z^2]": Estimate("E[Z^2]", n, samples, Fraction(m2), Fraction(m4), **meta),
            "E[sqrt Z]": Estimate("E[sqrt Z]", n, samples, Fraction(0), Fraction(m1),
                                  hist=hist, transform="sqrt", **meta),
            "P(Z>=1)": Estimate("P(Z>=1)", n, samples, Fraction(hits), Fraction(hits), **meta),
        }
    return out


def estimate_z_moments(n: int, ell, samples: int, lattice=Lattice.SQUARE, p=None, seed: int = 0,
                       workers: int = 1) -> dict:
    return estimate_z_moments_scales([n], ell, samples, lattice, p, seed, workers)[n]


# Correlators of the variance argument

_CORR_STATS = ("E[Z C_j Y_j]", "E[Z C_j 1_piv]", "E[C_j Y_j]", "P(piv)", "E[Y_j]",
               "E[Z C_j (Y_j - 1_piv)]")


def _corr_task(rng, seed, lattice, p, n):
    lo, hi = rng
    N = 2 * n
    box = Box(N)
    inner = np.array([box.index(v) for m in range(n) for v in ring(m)], dtype=np.int64)
    m = inner.size
    d = shifted_norms(N)
    region, inn, out = _mask(d <= N), _mask(d <= n), _mask(d == N)
    fdx, fdy = offset_arrays(lattice.open_adjacency)
    ex = CompiledExplorer(lattice, N, n)
    acc = {f"{k}_{s}": np.zeros(m + 1, dtype=object) for k in range(len(_CORR_STATS))
           for s in ("u", "v", "uu", "uv", "vv")}
    z_bad = 0
    for i in range(lo, hi):
        states = draw_states(stream(seed, i, CORRELATORS), N, p)
        z, seq = ex.run(states)
        z_uf = K.crossing_count(states & region, box.width, inn, out, fdx, fdy)
        z_bad += int(z != z_uf)
        visited = np.zeros(box.size, dtype=np.int64)
        visited[seq] = 1
        y = visited[inner]
        s = states[inner].astype(np.int64)
        zf = K.crossing_counts_after_flips(states.copy(), box.width, region, inn, out, fdx, fdy,
                                           inner)
        piv = (zf != z).astype(np.int64)
        uv = [(z * y, z * y * s), (z * piv, z * piv * s), (y, y * s),
              (np.zeros(m, dtype=np.int64), -piv), (np.zeros(m, dtype=np.int64), -y),
              (z * (y - piv), z * (y - piv) * s)]
        for k, (u, v) in enumerate(uv):
            U, V = int(u.sum()), int(v.sum())
            for name, site, tot in (("u", u, U), ("v", v, V), ("uu", u * u, U * U),
                                    ("uv", u * v, U * V), ("vv", v * v, V * V)):
                a = acc[f"{k}_{name}"]
                a[:m] += site
                a[m] += tot
    acc["z_mismatch"] = np.array([z_bad], dtype=object)
    return acc


@dataclass
class CorrelatorReport:
    n: int
    sites: list
    per_site: dict   # statistic -> list of Estimate over ``sites``
    summed: dict     # statistic -> Estimate of the per-sample sum over sites
    z_mismatch: int


def estimate_correlators(n: int, samples: int, lattice=Lattice.SQUARE, p=None, seed: int = 0,
                         workers: int = 1, start: int = 0) -> CorrelatorReport:
    """Monte Carlo versions of the exact per-site correlator tables on ``B_(n-1)``."""
    lattice = Lattice.parse(lattice)
    p = _check_prob(lattice.pc if p is None else p)
    res = run_chunks(partial(_corr_task, seed=seed, lattice=lattice, p=p, n=n), samples, workers,
                     start)
    sites = [v for m in range(n) for v in ring(m)]
    meta = dict(lattice=lattice.value, seed=seed)
    per_site, summed = {}, {}
    for k, name in enumerate(_CORR_STATS):
        cols = [res[f"{k}_{s}"] for s in ("u", "v", "uu", "uv", "vv")]
        per_site[name] = [_linear_estimate(name, n, samples, *(c[j] for c in cols), p, **meta)
                          for j in range(len(sites))]
        summed[name] = _linear_estimate(f"sum_j {name}", n, samples, *(c[-1] for c in cols), p,
                                        **meta)
    return CorrelatorReport(n, sites, per_site, summed, int(res["z_mismatch"][0]))


# Rectangle crossings

def rsw_rect(n: int, aspect: int = 4) -> tuple[int, int, int, int]:
    """``[0, aspect*n] x [0, n]`` shifted to sit around the origin."""
    x1 = -(aspect * n) // 2
    y1 = -n // 2
    return x1, x1 + aspect * n, y1, y1 + n


def _rsw_task(rng, seed, lattice, p, n, aspect):
    lo, hi = rng
    x1, x2, y1, y2 = rsw_rect(n, aspect)
    R = max(abs(x1), x2, abs(y1), y2)
    r = np.arange(-R, R + 1)
    X = np.broadcast_to(r[None, :], (r.size, r.size)).ravel()
    Y = np.broadcast_to(r[:, None], (r.size, r.size)).ravel()
    region = (X >= x1) & (X <= x2) & (Y >= y1) & (Y <= y2)
    left, right = _mask(region & (X == x1)), _mask(region & (X == x2))
    offs = {c: offset_arrays(lattice.adjacency(c)) for c in (0, 1)}
    hits = np.zeros(2, dtype=np.int64)
    W = 2 * R + 1
    for i in range(lo, hi):
        s = draw_states(stream(seed, i, RSW, n, aspect), R, p)
        for c in (1, 0):
            member = _mask(region & (s == c))
            hits[1 - c] += K.crossing_count(member, W, left, right, *offs[c]) > 0
    return {"hits": hits}


def rsw_scan(scales, samples: int, lattice=Lattice.SQUARE, p=None, seed: int = 0,
             aspect: int = 4, workers: int = 1, start: int = 0) -> dict:
    """Left-right open and closed crossing probabilities of ``[0, aspect*n] x [0, n]``."""
    lattice = Lattice.parse(lattice)
    p = _check_prob(lattice.pc if p is None else p)
    out = {}
    for n in sorted({int(n) for n in scales}):
        res = run_chunks(partial(_rsw_task, seed=seed, lattice=lattice, p=p, n=n, aspect=aspect),
                         samples, workers, start)
        meta = dict(lattice=lattice.value, seed=seed, ell=aspect)
        out[n] = {name: _indicator_estimate(name, n, samples, res["hits"][c], p, **meta)
                  for c, name in enumerate(("P(open crossing)", "P(closed crossing)"))}
    return out


# Exponent fits and trend tests

@dataclass(frozen=True)
class ExponentFit:
    alpha: float
    intercept: float
    stderr: float
    scales: tuple
    weighted: bool = True

    def to_dict(self) -> dict:
        return {"statistic": "alpha", "alpha": self.alpha, "intercept": self.intercept,
                "stderr": self.stderr, "scales": list(self.scales), "weighted": self.weighted}


def _wls(x, y, w):
    """Weighted least squares line; returns (slope, intercept, slope stderr, residuals)."""
    x, y, w = (np.asarray(a, dtype=float) for a in (x, y, w))
    A = np.column_stack([np.ones_like(x), x])
    AtW = A.T * w
    cov = np.linalg.inv(AtW @ A)
    beta = cov @ (AtW @ y)
    resid = y - A @ beta
    return beta[1], beta[0], cov, resid


def log_variance(e: Estimate) -> float:
    """Delta-method variance of ``log`` of a binomial estimate."""
    pi = e.mean
    return (1.0 - pi) / (pi * e.count) if pi < 1.0 else 1.0 / (e.count * e.count)


def fit_exponent(series) -> ExponentFit:
    """Fit ``-log pi = c + alpha * log n``.

    ``series`` holds ``(n, Estimate)`` pairs (weighted by ``pi * count / (1 - pi)``)
    or ``(n, value)`` pairs for exact input (unweighted).  Zero estimates are
    excluded; fewer than three remaining scales is an error.
    """
    pts = [(int(n), e) for n, e in series]
    exact = not all(isinstance(e, Estimate) for _, e in pts)
    vals = [(n, (e if exact else e.mean), e) for n, e in pts]
    kept = [(n, v, e) for n, v, e in vals if v > 0]
    if len(kept) < 3:
        raise ValueError("need at least 3 scales with nonzero estimates; increase samples")
    if len({n for n, _, _ in kept}) != len(kept):
        raise ValueError("duplicate scales")
    x = [math.log(n) for n, _, _ in kept]
    y = [-math.log(v) for _, v, _ in kept]
    if exact:
        w = [1.0] * len(kept)
    else:
        w = [1.0 / log_variance(e) for _, _, e in kept]
    slope, icpt, cov, resid = _wls(x, y, w)
    if exact:
        dof = len(kept) - 2
        s2 = float(resid @ resid) / dof if dof > 0 else 0.0
        stderr = math.sqrt(max(cov[1, 1] * s2, 0.0))
    else:
        stderr = math.sqrt(cov[1, 1])
    return ExponentFit(float(slope), float(icpt), stderr, tuple(n for n, _, _ in kept),
                       not exact)


@dataclass(frozen=True)
class Trend:
    slope: float
    stderr: float

    @property
    def increasing(self) -> bool:
        """Upward trend beyond three standard errors."""
        return self.slope - 3.0 * self.stderr > 0.0


def trend(ns, values, stderrs=None, log_values: bool = False) -> Trend:
    """Slope of ``values`` (or ``log values``) against ``log n``, weighted by ``1/stderr^2``."""
    x = [math.log(n) for n in ns]
    y = [math.log(v) for v in values] if log_values else list(values)
    if stderrs is None or all(s == 0 for s in stderrs):
        slope, _, cov, resid = _wls(x, y, [1.0] * len(x))
        dof = len(x) - 2
        s2 = float(resid @ resid) / dof if dof > 0 else 0.0
        return Trend(float(slope), math.sqrt(max(cov[1, 1] * s2, 0.0)))
    sig = [s / v if log_values else s for s, v in zip(stderrs, values)]
    slope, _, cov, _ = _wls(x, y, [1.0 / max(s, 1e-300) ** 2 for s in sig])
    return Trend(float(slope), math.sqrt(cov[1, 1]))


@dataclass
class TheoremRow:
    n: int
    pi4_3n: float
    pi2_n: float
    r: float
    r_stderr: float
    e4: Estimate | None = None
    e2: Estimate | None = None


@dataclass
class TheoremReport:
    lattice: str
    rows: list
    trend: Trend
    alpha4: ExponentFit | None = None
    alpha2: ExponentFit | None = None
    synthetic: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "FAIL" if self.trend.increasing else "PASS"

    @property
    def gap(self) -> float | None:
        if self.alpha4 is None or self.alpha2 is None:
            return None
        return self.alpha4.alpha - 1.0 - self.alpha2.alpha / 2.0

    def table(self) -> str:
        lines = [f"{'n':>6} {'pi4(3n)':>12} {'pi2(n)':>12} {'r(n)':>12} {'stderr':>10}"]
        for r in self.rows:
            lines.append(f"{r.n:>6} {r.pi4_3n:>12.6g} {r.pi2_n:>12.6g} {r.r:>12.6g} "
                         f"{r.r_stderr:>10.3g}")
        lines.append(f"trend slope {self.trend.slope:+.4f} +/- {self.trend.stderr:.4f}: "
                     f"{self.verdict}")
        return "\n".join(lines)


def verify_theorem(scales, samples: int, lattice=Lattice.SQUARE, p=None, seed: int = 0,
                   workers: int = 1, samples2: int | None = None,
                   start: int = 0) -> TheoremReport:
    """Table of ``r(n) = n * pi4(3n) / sqrt(pi2(n))`` with a trend verdict.

    ``pi4`` is sampled on ``B_(3 n_max)`` and ``pi2`` on ``B_(n_max)`` from
    independent streams.
    """
    lattice = Lattice.parse(lattice)
    scales = sorted({int(n) for n in scales})
    if len(scales) < 3:
        raise ValueError("need at least 3 scales")
    e4 = estimate_pi_scales([4], [3 * n for n in scales], samples, lattice, p, seed, workers, PI4,
                            start)
    e2 = estimate_pi_scales([2], scales, samples2 or samples, lattice, p, seed, workers, PI2,
                            start)
    rows = []
    for n in scales:
        a, b = e4[(4, 3 * n)], e2[(2, n)]
        if a.is_zero or b.is_zero:
            raise ValueError(f"zero estimate at n={n}; increase samples")
        r = n * a.mean / math.sqrt(b.mean)
        rs = r * math.sqrt(log_variance(a) + log_variance(b) / 4.0)
        rows.append(TheoremRow(n, a.mean, b.mean, r, rs, a, b))
    tr = trend([r.n for r in rows], [r.r for r in rows], [r.r_stderr for r in rows],
               log_values=True)
    fit4 = fit_exponent([(n, e4[(4, 3 * n)]) for n in scales])
    fit2 = fit_exponent([(n, e2[(2, n)]) for n in scales])
    return TheoremReport(lattice.value, rows, tr, fit4, fit2)


def verify_theorem_synthetic(scales, pi4, pi2) -> TheoremReport:
    """Same verdict logic on exact input functions ``pi4(m)`` and ``pi2(n)``."""
    scales = sorted({int(n) for n in scales})
    rows = []
    for n in scales:
        a, b = float(pi4(3 * n)), float(pi2(n))
        rows.append(TheoremRow(n, a, b, n * a / math.sqrt(b), 0.0))
    tr = trend([r.n for r in rows], [r.r for r in rows], None, log_values=True)
    return TheoremReport("synthetic", rows, tr, synthetic=True)


def allocate_samples(pilot: dict, budget: int, minimum: int = 1) -> dict:
    """Split ``budget`` across scales in proportion to ``1 / pi`` from pilot estimates."""
    inv = {n: 1.0 / (e.upper95 if e.is_zero else e.mean) for n, e in pilot.items()}
    total = sum(inv.values())
    return {n: max(minimum, int(round(budget * v / total))) for n, v in inv.items()}
