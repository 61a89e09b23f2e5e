"""The five figure kinds, rendered deterministically to SVG."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .readers import SchemaError, read_csv, read_manifest, read_run_dir, read_sweep_store

FIGSIZE = (6.0, 4.0)

matplotlib.rcParams.update({
    "svg.fonttype": "none",        # keep labels as text elements
    "svg.hashsalt": "memsq",       # deterministic ids
    "font.family": "DejaVu Sans",
    "figure.figsize": FIGSIZE,
    "axes.grid": True,
    "grid.alpha": 0.3,
})

KINDS = (
    "profile-evolution",
    "rate-loglog",
    "phase-diagram",
    "energy-decay",
    "similarity-convergence",
)


def _save(fig, out_path):
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)


def _limit_from_manifest(manifest: dict) -> float:
    head = manifest.get("headline", {})
    for key in ("w_limit", "rate_amplitude_predicted"):
        if head.get(key) is not None:
            return float(head[key])
    lam = float(manifest["spec"]["lambda"])
    # constant-profile fallback: f(a) = profile value
    f_a = float(manifest["spec"]["profile"].get("value", 1.0))
    return (3.0 * lam * f_a) ** (1.0 / 3.0)


def render_profile_evolution(run_dir, out_path):
    manifest, _, snapshots = read_run_dir(run_dir)
    if not snapshots:
        raise SchemaError(f"{run_dir}: no snapshots to plot")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    cmap = plt.get_cmap("viridis")
    n = len(snapshots)
    step = max(1, n // 24)
    for i in range(0, n, step):
        t, x, u = snapshots[i]
        ax.plot(x, u, color=cmap(i / max(1, n - 1)), lw=1.0)
    ax.plot(*snapshots[-1][1:], color=cmap(1.0), lw=1.5, label=f"t = {snapshots[-1][0]:.6g}")
    ax.axhline(1.0, color="k", ls=":", lw=1.0, label="touchdown u = 1")
    ax.set_xlabel("x")
    ax.set_ylabel("u(x, t)")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(f"deflection evolution ({manifest.get('verdict', '?')})")
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, out_path)


def render_rate_loglog(run_dir, out_path):
    manifest, series, _ = read_run_dir(run_dir)
    t_hat = manifest.get("headline", {}).get("t_quench")
    if t_hat is None:
        raise SchemaError(f"{run_dir}/manifest.json: no t_quench headline (not a quenched run?)")
    tau = t_hat - series["t"]
    sel = (tau > 0.0) & (series["gap"] > 0.0)
    if not np.any(sel):
        raise SchemaError(f"{run_dir}/run.csv: no usable samples before t_quench")
    # against inverse remaining time, the rate law has slope -1/3
    inv_tau = 1.0 / tau[sel]
    gap = series["gap"][sel]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.loglog(inv_tau, gap, "o-", ms=2.5, lw=0.8, label="1 - max u")
    mid = len(gap) // 2
    ref = gap[mid] * (inv_tau / inv_tau[mid]) ** (-1.0 / 3.0)
    ax.loglog(inv_tau, ref, "k--", lw=1.2, label="slope -1/3 guide")
    ax.text(inv_tau[len(inv_tau) // 4], ref[len(ref) // 4] * 1.25, "slope -1/3",
            fontsize=9, color="k")
    ax.set_xlabel("1 / (T - t)")
    ax.set_ylabel("gap 1 - max u")
    ax.set_title("quenching rate")
    ax.legend(loc="lower left", fontsize=8)
    _save(fig, out_path)


def render_phase_diagram(store_path, out_path, bounds_path=None):
    records = read_sweep_store(store_path)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    markers = {"quenched": ("s", "#c44e52"), "global": ("o", "#4c72b0"),
               "undecided": ("x", "#937860")}
    for verdict, (marker, color) in markers.items():
        pts = [(r["lam"], r["pressure"]) for r in records if r["verdict"] == verdict]
        if pts:
            xs, ys = zip(*pts)
            ax.scatter(xs, ys, marker=marker, c=color, s=36, label=verdict)
    if bounds_path is not None:
        b = read_csv(bounds_path, "P,upper_torsion,upper_eigen,lower_operational")
        ax.plot(b["upper_torsion"], b["P"], "-", color="#55a868",
                lw=1.2, label="torsion bound")
        ax.plot(b["upper_eigen"], b["P"], "--", color="#8172b3",
                lw=1.2, label="eigenvalue bound")
        low = b["lower_operational"]
        sel = ~np.isnan(low)
        if np.any(sel):
            ax.plot(low[sel], b["P"][sel], ":", color="#444444", lw=1.2,
                    label="operational lower bound")
    ax.set_xlabel("voltage lambda")
    ax.set_ylabel("pressure P")
    ax.set_title("global existence vs quenching")
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, out_path)


def _read_similarity(path):
    path = Path(path)
    if path.is_dir():
        path = path / "similarity.csv"
    return path, read_csv(path, "s,w0,E,tolE")


def render_energy_decay(sim_path, out_path):
    path, cols = _read_similarity(sim_path)
    sel = ~np.isnan(cols["E"])
    if not np.any(sel):
        raise SchemaError(f"{path}: no energy rows (column E is all nan)")
    s, e, tol = cols["s"][sel], cols["E"][sel], cols["tolE"][sel]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(s, e, "o-", ms=3, lw=1.0, label="E[w](s)")
    ax.plot(s, e + tol, ":", color="#c44e52", lw=1.0, label="decay allowance")
    ax.set_xlabel("s = -log(T - t)")
    ax.set_ylabel("weighted energy")
    ax.set_title("similarity-frame energy decay")
    ax.legend(loc="upper right", fontsize=8)
    _save(fig, out_path)


def render_similarity_convergence(sim_path, out_path, manifest_path=None):
    path, cols = _read_similarity(sim_path)
    if manifest_path is None:
        manifest_path = path.parent / "manifest.json"
    manifest = read_manifest(manifest_path)
    limit = _limit_from_manifest(manifest)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(cols["s"], cols["w0"], "o-", ms=3, lw=1.0, label="w(0, s)")
    ax.axhline(limit, color="k", ls="--", lw=1.2)
    ax.text(cols["s"][0], limit * 1.01, f"(3 lam f(a))^(1/3) = {limit:.4f}", fontsize=9)
    ax.set_xlabel("s = -log(T - t)")
    ax.set_ylabel("rescaled centerline w(0, s)")
    ax.set_title("convergence of the rescaled profile")
    ax.legend(loc="lower right", fontsize=8)
    _save(fig, out_path)


def render(kind: str, in_path, out_path, bounds=None, manifest=None):
    if kind == "profile-evolution":
        render_profile_evolution(in_path, out_path)
    elif kind == "rate-loglog":
        render_rate_loglog(in_path, out_path)
    elif kind == "phase-diagram":
        render_phase_diagram(in_path, out_path, bounds_path=bounds)
    elif kind == "energy-decay":
        render_energy_decay(in_path, out_path)
    elif kind == "similarity-convergence":
        render_similarity_convergence(in_path, out_path, manifest_path=manifest)
    else:
        raise SchemaError(f"unknown figure kind {kind!r} (options: {', '.join(KINDS)})")
