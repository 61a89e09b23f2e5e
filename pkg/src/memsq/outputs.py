"""Serialization: run/snapshot/similarity CSVs, the JSON manifest, and the
append-only resumable sweep store.

CSV files carry one header line, 17-significant-digit decimals and LF line
endings, so float64 values round-trip bit-exactly.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .criticality import SweepRecord
from .parabolic import Trajectory

__all__ = [
    "RunManifest",
    "SweepStore",
    "write_run_outputs",
    "read_run_csv",
    "read_snapshot_csv",
    "load_trajectory",
    "fmt",
]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: str, columns) -> int:
    rows = len(columns[0])
    lines = [header]
    for i in range(rows):
        lines.append(",".join(fmt(c[i]) for c in columns))
    data = ("\n".join(lines) + "\n").encode("ascii")
    path.write_bytes(data)
    return len(data)


def _read_csv(path: Path, expect_header: str) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        if header != expect_header:
            raise ValueError(f"{path}: expected header {expect_header!r}, got {header!r}")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    return body


# --------------------------------------------------------------------------
# manifest


@dataclass
class RunManifest:
    """Echo of the full problem spec plus the headline numbers and file
    inventory of one command invocation; round-trips through JSON."""

    command: str
    version: str
    spec: dict
    verdict: str | None = None
    headline: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    snapshot_times: list = field(default_factory=list)
    wall_seconds: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls.from_dict(json.loads(text))


def spec_echo(spec) -> dict:
    """Flat JSON-friendly echo of every ProblemSpec field."""
    dom = spec.domain
    echo = {
        "domain": dataclasses.asdict(dom) | {"kind": type(dom).__name__.lower()},
        "profile": dataclasses.asdict(spec.profile)
        | {"kind": type(spec.profile).__name__.lower()},
        "initial": dataclasses.asdict(spec.initial)
        | {"kind": type(spec.initial).__name__.lower()},
        "lambda": spec.lam,
        "pressure": spec.pressure,
        "resolution": spec.resolution,
        "solver": dataclasses.asdict(spec.controls),
    }
    return echo


# --------------------------------------------------------------------------
# run outputs


def write_run_outputs(traj: Trajectory, manifest: RunManifest, out_dir,
                      similarity=None) -> RunManifest:
    """Write run.csv, snapshots/NNNN.csv, optional similarity.csv and the
    manifest; the returned manifest carries the file inventory."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "snapshots").mkdir(exist_ok=True)
        files = []
        n = _write_csv(
            out / "run.csv",
            "t,U,gap,argmax,dt,ut_inf",
            (traj.t, traj.umax, traj.gap, traj.argmax_x, traj.dt, traj.ut_inf),
        )
        files.append({"path": "run.csv", "bytes": n})
        for i, (ts, u) in enumerate(zip(traj.snap_t, traj.snap_u)):
            name = f"snapshots/{i:04d}.csv"
            n = _write_csv(out / name, "x,u", (manifest_grid(manifest, u.size), u))
            files.append({"path": name, "bytes": n, "t": float(ts)})
        manifest.snapshot_times = [float(t) for t in traj.snap_t]
        if similarity is not None:
            s, w0, e, tol = similarity
            n = _write_csv(out / "similarity.csv", "s,w0,E,tolE", (s, w0, e, tol))
            files.append({"path": "similarity.csv", "bytes": n})
        manifest.files = files
        (out / "manifest.json").write_text(manifest.to_json() + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write outputs under {out}: {exc}") from exc
    return manifest


class IOFailure(OSError):
    """Unwritable output location (CLI exit code 4)."""


_GRID_CACHE: dict = {}


def manifest_grid(manifest: RunManifest, n_nodes: int) -> np.ndarray:
    """Node coordinates recovered from the spec echo."""
    dom = manifest.spec["domain"]
    extent = dom.get("length") or dom.get("radius")
    key = (extent, n_nodes)
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = np.linspace(0.0, extent, n_nodes)
    return _GRID_CACHE[key]


def read_run_csv(path) -> dict:
    body = _read_csv(Path(path), "t,U,gap,argmax,dt,ut_inf")
    keys = ("t", "umax", "gap", "argmax_x", "dt", "ut_inf")
    return {k: body[:, i] for i, k in enumerate(keys)}


def read_snapshot_csv(path) -> tuple[np.ndarray, np.ndarray]:
    body = _read_csv(Path(path), "x,u")
    return body[:, 0], body[:, 1]


def load_trajectory(run_dir) -> tuple[Trajectory, RunManifest]:
    """Rebuild a Trajectory from a run directory written by simulate/report."""
    run_dir = Path(run_dir)
    manifest = RunManifest.from_json((run_dir / "manifest.json").read_text())
    series = read_run_csv(run_dir / "run.csv")
    snap_t, snap_u = [], []
    for entry in manifest.files:
        if entry["path"].startswith("snapshots/"):
            _, u = read_snapshot_csv(run_dir / entry["path"])
            snap_t.append(entry["t"])
            snap_u.append(u)
    traj = Trajectory(
        t=series["t"],
        umax=series["umax"],
        gap=series["gap"],
        argmax_x=series["argmax_x"],
        ut_inf=series["ut_inf"],
        dt=series["dt"],
        snap_t=snap_t,
        snap_u=snap_u,
    )
    return traj, manifest


# --------------------------------------------------------------------------
# sweep store


class SweepStore:
    """Append-only JSON-lines store keyed by configuration hash.

    Existing keys are never rewritten; new records append in sorted key
    order, so re-running a sweep skips work already done and concurrent
    producers merge to the same record set.  A corrupt trailing line (e.g.
    truncation mid-write) is dropped with a warning on load.
    """

    def __init__(self, path):
        self.path = Path(path)

    def load(self) -> dict:
        records: dict = {}
        if not self.path.exists():
            return records
        raw = self.path.read_bytes()
        good_end = 0
        corrupt = False
        pos = 0
        while pos < len(raw):
            nl = raw.find(b"\n", pos)
            end = len(raw) if nl < 0 else nl + 1
            line = raw[pos:end].strip()
            if line:
                try:
                    rec = json.loads(line)
                    records[rec["key"]] = rec
                except (json.JSONDecodeError, KeyError, TypeError):
                    corrupt = True
                    break
            good_end = end
            pos = end
        if corrupt:
            print(f"warning: {self.path}: corrupt trailing line truncated", file=sys.stderr)
            self.path.write_bytes(raw[:good_end])
        return records

    def merge(self, new_records) -> int:
        """Append records whose keys are not present yet; returns the count."""
        existing = self.load()
        fresh = {}
        for rec in new_records:
            d = dataclasses.asdict(rec) if isinstance(rec, SweepRecord) else dict(rec)
            if d["key"] not in existing and d["key"] not in fresh:
                fresh[d["key"]] = d
        if not fresh:
            return 0
        lines = [json.dumps(fresh[k], sort_keys=True) for k in sorted(fresh)]
        with open(self.path, "a") as fh:
            fh.write("\n".join(lines) + "\n")
        return len(fresh)

    def records(self) -> list:
        """Keying-sorted view of the parsed store."""
        recs = self.load()
        return [recs[k] for k in sorted(recs)]
