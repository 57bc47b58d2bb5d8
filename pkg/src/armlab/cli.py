"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 invalid configuration, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import mc
from .arm import check_k
from .records import (RunConfig, RunRecord, atomic_write, merge_records, read_record,
                      to_csv)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

COMMANDS = ("arms", "verify", "oracle", "rsw", "explore-audit", "zmoments", "merge")

_DEFAULT_SCALES = {"arms": "8,16,32,64", "verify": "4,8,16,32,64", "rsw": "8,16,32,64",
                   "zmoments": "4,8,16,32,64"}
_RSW_BOUNDS = (0.001, 0.999)


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="armlab", description="Arm events and cluster counts in planar site "
                                            "percolation.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "merge":
            sp.add_argument("inputs", nargs="+")
            sp.add_argument("--out")
            sp.add_argument("--csv")
            continue
        sp.add_argument("--config", help="key=value file; flags override it")
        sp.add_argument("--lattice")
        sp.add_argument("--p", help="probability or 'pc'")
        sp.add_argument("--scales", help="comma-separated n values")
        sp.add_argument("--samples", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out")
        sp.add_argument("--csv", help="also write the estimates as CSV")
        sp.add_argument("--start", type=int, help="first sample index")
        if name == "arms":
            sp.add_argument("--k", help="comma-separated arm counts")
        if name in ("oracle", "explore-audit"):
            sp.add_argument("--n", type=int)
        if name == "zmoments":
            sp.add_argument("--ell", help="integer or 'n'")
        if name == "rsw":
            sp.add_argument("--aspect", type=int)
        if name == "verify":
            sp.add_argument("--samples2", type=int, help="samples for the two-arm series")
            sp.add_argument("--synthetic", help="exponents a4,a2 of exact power laws")
    return ap


def read_config_file(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(ns, "config", None):
        values.update(read_config_file(ns.config))
    for key, v in vars(ns).items():
        if key not in ("config", "command") and v is not None:
            values[key] = v
    values.setdefault("seed", os.environ.get("ARMLAB_SEED", 0))
    if ns.command in _DEFAULT_SCALES:
        values.setdefault("scales", _DEFAULT_SCALES[ns.command])
    values.pop("command", None)
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        return RunConfig(command=ns.command, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# Commands. Each returns (record, exit code, summary lines).

def cmd_arms(cfg: RunConfig):
    try:
        ks = [check_k(k) for k in cfg.k]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rec = RunRecord(cfg)
    est = mc.estimate_pi_scales(ks, cfg.scales, cfg.samples, cfg.lattice, cfg.p, cfg.seed,
                                cfg.workers, start=cfg.start)
    lines = []
    for (k, n), e in est.items():
        rec.add("estimate", e.to_dict())
        lines.append(f"pi{k}({n}) = {e.mean:.6g} +/- {e.stderr:.2g}")
    for k in ks:
        try:
            fit = mc.fit_exponent([(n, est[(k, n)]) for n in cfg.scales])
        except ValueError as exc:
            lines.append(f"alpha{k}: not fitted ({exc})")
            continue
        rec.add("fit", {"k": k, "lattice": cfg.lattice, "p": cfg.p, **fit.to_dict()})
        lines.append(f"alpha{k} = {fit.alpha:.4f} +/- {fit.stderr:.4f}")
    return rec, EXIT_OK, lines


def _theorem_entries(rec: RunRecord, rep):
    for r in rep.rows:
        row = {"statistic": "r(n)", "lattice": rep.lattice, "n": r.n, "mean": r.r,
               "stderr": r.r_stderr, "pi4_3n": r.pi4_3n, "pi2_n": r.pi2_n}
        rec.add("row", row)
        for e in (r.e4, r.e2):
            if e is not None:
                rec.add("estimate", e.to_dict())
    for name, fit in (("alpha4", rep.alpha4), ("alpha2", rep.alpha2)):
        if fit is not None:
            rec.add("fit", {"name": name, "lattice": rep.lattice, **fit.to_dict()})
    v = {"statistic": "verdict", "verdict": rep.verdict, "slope": rep.trend.slope,
         "slope_stderr": rep.trend.stderr}
    if rep.gap is not None:
        v["gap"] = rep.gap
    rec.add("verdict", v)


def cmd_verify(cfg: RunConfig):
    rec = RunRecord(cfg)
    if cfg.synthetic is not None:
        a4, a2 = cfg.synthetic
        rep = mc.verify_theorem_synthetic(cfg.scales, lambda m: m ** -a4, lambda n: n ** -a2)
    else:
        rep = mc.verify_theorem(cfg.scales, cfg.samples, cfg.lattice, cfg.p, cfg.seed,
                                cfg.workers, cfg.samples2, start=cfg.start)
    _theorem_entries(rec, rep)
    lines = rep.table().splitlines() + [rep.verdict]
    return rec, EXIT_OK if rep.verdict == "PASS" else EXIT_FAIL, lines


def cmd_oracle(cfg: RunConfig):
    from .oracle import enumerate_exact, verify_chain

    rec = RunRecord(cfg)
    report = enumerate_exact(cfg.n, cfg.p, cfg.lattice)
    checks = verify_chain(report)
    lines = []
    for c in checks:
        rec.add("check", {"statistic": c.name, "n": cfg.n, "lattice": cfg.lattice, "p": cfg.p,
                          "passed": bool(c.passed), "residual": c.residual})
        lines.append(f"{'PASS' if c.passed else 'FAIL'} {c.name} (residual {c.residual:.3g})")
    for name, value in (("E[Z]", report.e_z), ("E[Z^2]", report.e_z2),
                        ("E[sqrt Z]", report.e_sqrt_z)):
        rec.add("exact", {"statistic": name, "n": cfg.n, "lattice": cfg.lattice, "p": cfg.p,
                          "mean": value, "stderr": 0.0, "count": report.n_configs})
    ok = all(c.passed for c in checks)
    return rec, EXIT_OK if ok else EXIT_FAIL, lines


def cmd_rsw(cfg: RunConfig):
    rec = RunRecord(cfg)
    res = mc.rsw_scan(cfg.scales, cfg.samples, cfg.lattice, cfg.p, cfg.seed, cfg.aspect,
                      cfg.workers, start=cfg.start)
    lo, hi = _RSW_BOUNDS
    ok = True
    lines = []
    for n, d in res.items():
        for e in d.values():
            rec.add("estimate", e.to_dict())
            inside = lo < e.mean < hi
            ok &= inside
            lines.append(f"{e.statistic} n={n}: {e.mean:.5f} +/- {e.stderr:.2g}"
                         f"{'' if inside else '  OUTSIDE'}")
    return rec, EXIT_OK if ok or cfg.p in (0.0, 1.0) else EXIT_FAIL, lines


def cmd_explore_audit(cfg: RunConfig):
    from .arm import z_value
    from .config import Configuration, draw_states, stream
    from .explore import check_flip_invariance, explore
    from .lattice import Box

    n, N = cfg.n, 2 * cfg.n
    box = Box(N)
    z_bad = flip_bad = 0
    for i in range(cfg.start, cfg.start + cfg.samples):
        states = draw_states(stream(cfg.seed, i, mc.EXPLORE), N, cfg.p)
        omega = Configuration.from_states(box, states, cfg.p, cfg.lattice)
        tr = explore(omega, n)
        z_bad += tr.z != z_value(omega, n)
        flip_bad += not check_flip_invariance(omega, n, tr)
    rec = RunRecord(cfg)
    meta = {"n": n, "lattice": cfg.lattice, "p": cfg.p, "count": cfg.samples, "seed": cfg.seed}
    rec.add("audit", {"statistic": "Z mismatches", "mean": z_bad, **meta})
    rec.add("audit", {"statistic": "flip-invariance violations", "mean": flip_bad, **meta})
    lines = [f"Z mismatches: {z_bad}", f"flip-invariance violations: {flip_bad}"]
    ok = z_bad == 0 and flip_bad == 0
    lines.append("PASS" if ok else "FAIL")
    return rec, EXIT_OK if ok else EXIT_FAIL, lines


def cmd_zmoments(cfg: RunConfig):
    rec = RunRecord(cfg)
    res = mc.estimate_z_moments_scales(cfg.scales, cfg.ell, cfg.samples, cfg.lattice, cfg.p,
                                       cfg.seed, cfg.workers, start=cfg.start)
    lines = []
    for n, d in res.items():
        for e in d.values():
            rec.add("estimate", e.to_dict())
            lines.append(f"{e.statistic} n={n}: {e.mean:.5f} +/- {e.stderr:.2g}")
    return rec, EXIT_OK, lines


def _refit(rec: RunRecord):
    """Recompute exponent fits of a merged arms record."""
    from .mc import Estimate
    by_k: dict = {}
    for e in rec.estimates():
        if e["statistic"].startswith("pi"):
            by_k.setdefault(int(e["statistic"][2:]), []).append((e["n"], Estimate.from_dict(e)))
    for k, series in sorted(by_k.items()):
        try:
            fit = mc.fit_exponent(series)
        except ValueError:
            continue
        rec.add("fit", {"k": k, "lattice": rec.config.lattice, "p": rec.config.p,
                        **fit.to_dict()})


HANDLERS = {"arms": cmd_arms, "verify": cmd_verify, "oracle": cmd_oracle, "rsw": cmd_rsw,
            "explore-audit": cmd_explore_audit, "zmoments": cmd_zmoments}


def _emit(rec: RunRecord, out: str | None, csv_path: str | None, lines):
    text = rec.dumps()
    if out:
        atomic_write(out, text)
        for line in lines:
            print(line)
    else:
        for line in lines:
            print(line, file=sys.stderr)
        sys.stdout.write(text)
    if csv_path:
        atomic_write(csv_path, to_csv(rec))


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        if ns.command == "merge":
            try:
                recs = [read_record(path) for path in ns.inputs]
            except OSError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_IO
            merged = recs[0]
            for r in recs[1:]:
                merged = merge_records(merged, r)
            if merged.config.command == "arms":
                _refit(merged)
            rec, code, lines = merged, EXIT_OK, [f"merged {len(recs)} records"]
            out, csv_path = ns.out, ns.csv
        else:
            try:
                cfg = resolve_config(ns)
            except OSError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_IO
            rec, code, lines = HANDLERS[ns.command](cfg)
            out, csv_path = cfg.out, cfg.csv
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _emit(rec, out, csv_path, lines)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
