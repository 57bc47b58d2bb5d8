"""Acceptance criteria 1-8, one PASS/FAIL line each.

Sample sizes are fixed here, before looking at any outcome, and are not tuned
per criterion to make a verdict come out one way or the other.
"""

import itertools
import math
import time

from armlab import mc, oracle
from armlab.arm import ArmSpec, arm_event, arm_event_oracle, z_value
from armlab.cli import main
from armlab.config import Configuration, sample
from armlab.explore import check_flip_invariance, explore
from armlab.lattice import Box, Lattice

LATTICES = ("square", "triangular")
TOL = 1e-10


def pc(lattice):
    return Lattice.parse(lattice).pc


def stable(series, z=4.0):
    """Consecutive scales agree within ``z`` combined standard errors.

    Returns ``(ok, worst)`` where ``worst`` is the largest standardized gap.
    """
    worst = 0.0
    for (m1, s1), (m2, s2) in zip(series, series[1:]):
        s = math.hypot(s1, s2)
        gap = abs(m2 - m1) / s if s > 0 else (0.0 if m1 == m2 else math.inf)
        worst = max(worst, gap)
    return worst <= z, worst


def test_criterion_1_oracle_identities(acceptance_report):
    oracle._tallies.cache_clear()
    t0 = time.time()
    worst, failed = 0.0, []
    for p in (0.3, 0.5, 0.59274605):
        rep = oracle.enumerate_exact(1, p, "square")
        assert rep.n_configs == 2 ** 25
        for c in oracle.verify_chain(rep):
            worst = max(worst, abs(c.residual))
            if not c.passed:
                failed.append(f"{c.name} at p={p}")
        # the five named checks, compared directly against the report
        inner = rep.interior.nonzero()[0]
        off = rep.pairwise.copy()
        off[range(len(off)), range(len(off))] = 0.0
        assert abs(rep.e_cy).max() <= TOL
        assert abs(off).max() <= TOL
        assert abs(rep.e_zcy - rep.e_zc_piv).max() <= TOL
        assert min(rep.e_zcy[j] - p * (1 - p) * rep.p_piv[j] for j in inner) >= -TOL
        assert rep.p_piv[rep.site_index((0, 0))] - rep.matched_pi4[(0, 0)] >= -TOL
    elapsed = time.time() - t0
    ok = not failed and worst <= TOL and elapsed <= 15 * 60
    acceptance_report(1, "oracle identity suite", ok,
                      f"2^25 configurations x 3 p, max residual {worst:.1e}, "
                      f"{elapsed:.0f} s" + (f", failed: {failed}" if failed else ""))
    assert ok


def test_criterion_2_exploration_equivalence(acceptance_report):
    t0 = time.time()
    mismatches = flips = 0
    for lat in LATTICES:
        p = pc(lat)
        for n in (2, 3, 4, 8):
            for i in range(10_000):
                omega = sample(Box(2 * n), p, 1_000_000 * n + i, lat)
                mismatches += explore(omega, n).z_from_exploration != z_value(omega, n)
        for n in (2, 3):
            for i in range(1_000):
                omega = sample(Box(2 * n), p, 5_000_000 + 1_000 * n + i, lat)
                flips += not check_flip_invariance(omega, n)
    elapsed = time.time() - t0
    ok = mismatches == 0 and flips == 0 and elapsed <= 10 * 60
    acceptance_report(2, "exploration equivalence", ok,
                      f"{mismatches} Z mismatches in 8e4, {flips} flip violations in 4e3, "
                      f"{elapsed:.0f} s")
    assert ok


def test_criterion_3_arm_duality(acceptance_report):
    bad = total = 0
    for lat in LATTICES:
        spec = ArmSpec(1, 1, 0)
        for states in itertools.product((0, 1), repeat=9):
            omega = Configuration.from_states(Box(1), states, 0.5, lat)
            bad += arm_event(omega, spec) != arm_event_oracle(omega, spec)
            total += 1
        for k, n2 in ((2, 3), (2, 4), (4, 3), (4, 4)):
            spec = ArmSpec(k, n2, 1)
            for i in range(10_000):
                omega = sample(Box(n2), pc(lat), 9_000_000 + 100_000 * (2 * k + n2) + i, lat)
                bad += arm_event(omega, spec) != arm_event_oracle(omega, spec)
                total += 1
        d, m = oracle.exhaustive_arm1_disagreements(1, 2, lat)
        bad += d
        total += m
    acceptance_report(3, "arm detector equivalence", bad == 0,
                      f"{bad} disagreements in {total} comparisons")
    assert bad == 0


TRI_TARGETS = {1: (5 / 48, 0.04), 2: (0.25, 0.05), 4: (1.25, 0.12)}


def test_criterion_4_triangular_exponents(acceptance_report):
    scales = (8, 16, 32, 64, 128)
    est = mc.estimate_pi_scales((1, 2, 4), scales, 200_000, "triangular", 0.5, seed=7)
    fits = {k: mc.fit_exponent([(n, est[(k, n)]) for n in scales]) for k in (1, 2, 4)}
    ok = all(abs(fits[k].alpha - t) <= tol for k, (t, tol) in TRI_TARGETS.items())
    detail = ", ".join(f"alpha{k} = {fits[k].alpha:.3f} +/- {fits[k].stderr:.3f} "
                       f"(want {t:.3f} +/- {tol})" for k, (t, tol) in TRI_TARGETS.items())
    acceptance_report(4, "triangular arm exponents", ok, detail)
    assert ok


def test_criterion_5_theorem_verification(acceptance_report, capsys):
    scales = (4, 8, 16, 32, 64)
    parts, ok = [], True
    for lat in LATTICES:
        rep = mc.verify_theorem(scales, 20_000, lat, seed=11)
        parts.append(f"{lat} {rep.verdict} slope {rep.trend.slope:+.3f} +/- "
                     f"{rep.trend.stderr:.3f}")
        ok &= rep.verdict == "PASS"
        if lat == "triangular":
            parts.append(f"gap {rep.gap:.3f}")
            ok &= rep.gap >= -0.1
    code = main(["verify", "--synthetic", "1.0,0.25", "--scales", "4,8,16,32,64"])
    capsys.readouterr()
    parts.append(f"synthetic n^-1 exit {code}")
    ok &= code == 1
    acceptance_report(5, "theorem ratio trend", ok, ", ".join(parts))
    assert ok


def test_criterion_6_rsw_stability(acceptance_report):
    scales = (8, 16, 32, 64)
    parts, ok = [], True
    for lat in LATTICES:
        scan = mc.rsw_scan(scales, 10_000, lat, seed=13)
        for stat in ("P(open crossing)", "P(closed crossing)"):
            series = [(scan[n][stat].mean, scan[n][stat].stderr) for n in scales]
            inside = all(0.001 < m < 0.999 for m, _ in series)
            st, worst = stable(series)
            ok &= inside and st
            parts.append(f"{lat} {stat.split()[0][2:]} "
                         f"{'/'.join(f'{m:.4f}' for m, _ in series)} max gap {worst:.1f} sigma")
        z = mc.estimate_z_moments_scales(scales, "n", 100_000, lat, seed=13)
        delta = [(1.0 - z[n]["P(Z>=1)"].mean, z[n]["P(Z>=1)"].stderr) for n in scales]
        st, worst = stable(delta)
        pos = all(d > 0 for d, _ in delta)
        ok &= pos and st
        parts.append(f"{lat} delta {'/'.join(f'{d:.1e}' for d, _ in delta)} "
                     f"max gap {worst:.1f} sigma")
    acceptance_report(6, "RSW and annulus stability", ok, "; ".join(parts))
    assert ok


def test_criterion_7_moment_boundedness(acceptance_report):
    scales = (4, 8, 16, 32, 64)
    parts, ok = [], True
    for lat in LATTICES:
        z = mc.estimate_z_moments_scales(scales, "n", 10_000, lat, seed=17)
        for stat in ("E[Z^2]", "E[sqrt Z]"):
            es = [z[n][stat] for n in scales]
            tr = mc.trend(scales, [e.mean for e in es], [e.stderr for e in es])
            ok &= not tr.increasing
            steps = [b.mean - a.mean for a, b in zip(es, es[1:])]
            parts.append(f"{lat} {stat} {'/'.join(f'{e.mean:.3f}' for e in es)} slope "
                         f"{tr.slope:+.3f} +/- {tr.stderr:.3f}, increments "
                         f"{'/'.join(f'{s:.3f}' for s in steps)}")
    acceptance_report(7, "moment boundedness", ok, "; ".join(parts))
    assert ok


COMMANDS = [
    ["arms", "--lattice", "triangular", "--scales", "4,8,16", "--samples", "400"],
    ["verify", "--scales", "4,8,16", "--samples", "300"],
    ["oracle", "--n", "1", "--p", "0.5"],
    ["rsw", "--scales", "4,8", "--samples", "300"],
    ["explore-audit", "--n", "2", "--samples", "60"],
    ["zmoments", "--lattice", "triangular", "--scales", "2,4,8", "--samples", "300"],
]


def test_criterion_8_reproducibility(acceptance_report, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    failures = []

    def produce(argv, workers, name):
        path = tmp_path / name
        code = main(argv + ["--seed", "23", "--workers", str(workers), "--out", str(path)])
        capsys.readouterr()
        assert code in (0, 1)
        return path.read_bytes()

    for argv in COMMANDS:
        a = produce(argv, 1, "run.jsonl")
        if produce(argv, 1, "run.jsonl") != a:
            failures.append(f"{argv[0]} rerun")
        b = produce(argv, 3, "run.jsonl")
        if a.split(b"\n")[1:] != b.split(b"\n")[1:]:
            failures.append(f"{argv[0]} workers")
    half = ["arms", "--scales", "4,8,16", "--samples", "200"]
    merged = []
    for workers in (1, 2):
        produce(half, workers, "h1.jsonl")
        produce(half + ["--start", "200"], 3 - workers, "h2.jsonl")
        main(["merge", str(tmp_path / "h1.jsonl"), str(tmp_path / "h2.jsonl"),
              "--out", str(tmp_path / "m.jsonl")])
        capsys.readouterr()
        merged.append((tmp_path / "m.jsonl").read_bytes())
    if merged[0] != merged[1]:
        failures.append("merge")
    ok = not failures
    acceptance_report(8, "reproducibility", ok,
                      f"{len(COMMANDS) + 1} commands, 1 vs 3 workers" +
                      (f", differing: {failures}" if failures else ""))
    assert ok
