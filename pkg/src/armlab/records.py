"""Run configuration and line-delimited JSON result records."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields, replace

from . import __version__
from .lattice import Lattice

SCHEMA = "armlab.run/1"

# Keys that do not change the numbers a run produces.
_NON_IDENTITY = ("workers", "out", "csv")


def parse_p(value, lattice) -> float:
    """A probability, or the token ``pc`` for the lattice's critical point."""
    if isinstance(value, str) and value.strip().lower() == "pc":
        return Lattice.parse(lattice).pc
    p = float(value)
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return p


def parse_int_list(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    out = [int(v) for v in str(value).replace(" ", "").split(",") if v]
    if not out:
        raise ValueError("empty list")
    return out


@dataclass(frozen=True)
class RunConfig:
    command: str
    lattice: str = "square"
    p: float | None = None
    scales: tuple = ()
    samples: int = 1000
    seed: int = 0
    workers: int = 1
    out: str | None = None
    k: tuple = (1, 2, 4)
    n: int = 1
    ell: str = "n"
    aspect: int = 4
    start: int = 0
    samples2: int | None = None
    synthetic: tuple | None = None
    csv: str | None = None

    def __post_init__(self):
        lat = Lattice.parse(self.lattice)
        object.__setattr__(self, "lattice", lat.value)
        object.__setattr__(self, "p", lat.pc if self.p is None else parse_p(self.p, lat))
        object.__setattr__(self, "scales", tuple(parse_int_list(self.scales)) if self.scales
                           else ())
        object.__setattr__(self, "k", tuple(parse_int_list(self.k)))
        if self.synthetic is not None:
            syn = self.synthetic
            syn = [float(v) for v in (syn.split(",") if isinstance(syn, str) else syn)]
            if len(syn) != 2:
                raise ValueError("synthetic takes two exponents: a4,a2")
            object.__setattr__(self, "synthetic", tuple(syn))
        for name in ("samples", "seed", "workers", "n", "aspect", "start"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.samples2 is not None:
            object.__setattr__(self, "samples2", int(self.samples2))
        ell = str(self.ell)
        if ell != "n":
            if int(ell) < 0:
                raise ValueError("ell must be >= 0")
            ell = str(int(ell))
        object.__setattr__(self, "ell", ell)
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.seed < 0 or self.start < 0:
            raise ValueError("seed and start must be nonnegative")
        if any(n < 1 for n in self.scales):
            raise ValueError("scales must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("scales", "k", "synthetic"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def identity(self) -> dict:
        d = self.to_dict()
        for key in _NON_IDENTITY:
            d.pop(key)
        return d

    @property
    def run_id(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch is not None else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


@dataclass
class RunRecord:
    config: RunConfig
    entries: list = field(default_factory=list)
    timestamp: str = field(default_factory=_timestamp)
    version: str = __version__
    run_id: str | None = None

    def __post_init__(self):
        if self.run_id is None:
            self.run_id = self.config.run_id

    def add(self, kind: str, payload: dict):
        self.entries.append({"kind": kind, **payload})

    def header(self) -> dict:
        return {"schema": SCHEMA, "type": "header", "run_id": self.run_id,
                "timestamp": self.timestamp, "version": self.version,
                "config": self.config.to_dict()}

    def lines(self) -> list[str]:
        out = [json.dumps(self.header(), sort_keys=True)]
        for e in self.entries:
            out.append(json.dumps({"type": "entry", "run_id": self.run_id,
                                   "version": self.version, **e}, sort_keys=True))
        return out

    def dumps(self) -> str:
        return "\n".join(self.lines()) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunRecord":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("type") != "header":
            raise ValueError("missing header line")
        head = rows[0]
        if head.get("schema") != SCHEMA:
            raise ValueError(f"unsupported schema {head.get('schema')!r}")
        entries = []
        for r in rows[1:]:
            r = dict(r)
            r.pop("type", None)
            r.pop("run_id", None)
            r.pop("version", None)
            entries.append(r)
        return cls(RunConfig.from_dict(head["config"]), entries, head["timestamp"],
                   head["version"], head["run_id"])

    def __eq__(self, other):
        return isinstance(other, RunRecord) and self.dumps() == other.dumps()

    def estimates(self) -> list[dict]:
        return [e for e in self.entries if e.get("kind") == "estimate"]


def atomic_write(path: str, text: str):
    """Write to a temporary file in the target directory, then rename over ``path``."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_record(path: str) -> RunRecord:
    with open(path, encoding="utf-8") as f:
        return RunRecord.loads(f.read())


CSV_COLUMNS = ("run_id", "lattice", "p", "statistic", "n", "n1", "ell", "mean", "stderr",
               "count", "seed", "version")


def to_csv(record: RunRecord) -> str:
    """Plot-ready table of the estimate entries."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for e in record.estimates():
        w.writerow({"run_id": record.run_id, "version": record.version, **e})
    return buf.getvalue()


def merge_records(a: RunRecord, b: RunRecord) -> RunRecord:
    """Pool the estimates of two runs that differ only in their sample ranges.

    Ranges must be adjacent; the merged record is the record of the combined
    range.  Derived entries (fits, verdicts) are dropped, and the caller may
    recompute them.
    """
    from .mc import Estimate

    ca, cb = a.config, b.config
    if cb.start < ca.start:
        a, b, ca, cb = b, a, cb, ca
    strip = lambda c: replace(c, samples=1, start=0, workers=1, out=None, csv=None)  # noqa: E731
    if strip(ca) != strip(cb):
        raise ValueError("records come from different run configurations")
    if ca.start + ca.samples != cb.start:
        raise ValueError("sample ranges are not adjacent")
    if ca.samples2 is not None or ca.command == "verify":
        raise ValueError("verify records cannot be merged")
    pool: dict = {}
    order = []
    for rec in (a, b):
        for e in rec.estimates():
            est = Estimate.from_dict(e)
            k = est.key()
            if k in pool:
                pool[k] = pool[k].merge(est)
            else:
                pool[k] = est
                order.append(k)
    cfg = replace(ca, samples=ca.samples + cb.samples, out=None, csv=None, workers=1)
    out = RunRecord(cfg, timestamp=max(a.timestamp, b.timestamp), version=a.version)
    for k in order:
        out.add("estimate", pool[k].to_dict())
    return out
