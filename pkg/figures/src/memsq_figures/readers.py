"""Readers for the memsq output schemas (run.csv, snapshots, similarity.csv,
sweep store, manifest.json)."""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """Input file does not match the documented schema."""


def read_csv(path, expected_header: str) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            header = fh.readline().decode("ascii", "replace").strip()
            if header != expected_header:
                raise SchemaError(
                    f"{path}: expected columns {expected_header!r}, got {header!r}"
                )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # empty body handled below
                body = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise SchemaError(f"{path}: unparsable numeric body ({exc})") from exc
    if body.size == 0:
        raise SchemaError(f"{path}: no data rows")
    names = expected_header.split(",")
    return {name: body[:, i] for i, name in enumerate(names)}


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc


def read_run_dir(run_dir):
    """run.csv + manifest + snapshot list of a simulate/report output."""
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir / "manifest.json")
    series = read_csv(run_dir / "run.csv", "t,U,gap,argmax,dt,ut_inf")
    snapshots = []
    for entry in manifest.get("files", []):
        p = entry.get("path", "")
        if p.startswith("snapshots/"):
            snap = read_csv(run_dir / p, "x,u")
            snapshots.append((entry.get("t", 0.0), snap["x"], snap["u"]))
    return manifest, series, snapshots


def read_sweep_store(path) -> list:
    path = Path(path)
    records = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{i}: invalid record ({exc})") from exc
        for key in ("lam", "pressure", "verdict"):
            if key not in rec:
                raise SchemaError(f"{path}:{i}: record missing {key!r}")
        records.append(rec)
    if not records:
        raise SchemaError(f"{path}: empty store")
    return records
