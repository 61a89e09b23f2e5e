"""Config grammar, CLI exit codes, serialization round-trips and the
resumable sweep store."""

import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memsq.config import ConfigError, parse_config
from memsq.outputs import RunManifest, SweepStore, load_trajectory, read_run_csv
from memsq.cli import main as cli_main, spec_from_echo
from memsq.outputs import spec_echo

MINIMAL = """\
lambda = 5
pressure = 0
resolution = 64

[domain]
kind = interval
length = 1.0
"""


def test_parse_minimal_defaults():
    spec, opts = parse_config(MINIMAL)
    assert spec.lam == 5.0
    assert spec.pressure == 0.0
    assert spec.resolution == 64
    assert spec.controls.eps_quench == 1e-3
    assert spec.controls.gap_margin == 0.05
    assert type(spec.profile).__name__ == "Constant"
    assert type(spec.initial).__name__ == "Zero"
    assert opts.tol == 1e-3


def test_parse_full_sections():
    text = """\
lambda = 2.5
resolution = 128

[domain]
kind = ball
radius = 1.5
dimension = 3

[profile]
kind = bump
base = 1.0
amplitude = 0.5
center = 0.0
width = 0.3

[initial]
kind = bump
amplitude = 0.2
center = 0.0
width = 0.2

[solver]
eps_quench = 1e-4
t_max = 5.0

[command]
out = somewhere
lambdas = 1, 2, 3
"""
    spec, opts = parse_config(text)
    assert spec.domain.radius == 1.5 and spec.domain.dimension == 3
    assert spec.controls.eps_quench == 1e-4
    assert opts.out == "somewhere"
    assert opts.lambdas == [1.0, 2.0, 3.0]


@pytest.mark.parametrize(
    "text,fragment",
    [
        (MINIMAL.replace("pressure = 0", "pressure = -1"), "line 2"),
        (MINIMAL.replace("resolution = 64", "resolution = 64\nlambda = 6"), "duplicate"),
        (MINIMAL + "[solver]\nwhatever = 1\n", "unknown key"),
        (MINIMAL + "[weird]\n", "unknown section"),
        (MINIMAL.replace("lambda = 5", "lambda = abc"), "bad value"),
        (MINIMAL.replace("resolution = 64", "resolution = 8"), "resolution"),
        ("lambda = 1\n", "domain"),
        (MINIMAL + "[profile]\nkind = bump\nslope = 2\n", "does not apply"),
    ],
)
def test_parse_rejections(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_spec_echo_roundtrip():
    spec, _ = parse_config(MINIMAL)
    assert spec_from_echo(spec_echo(spec)) == spec


def run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "memsq.cli", *args],
        cwd=cwd, capture_output=True, text=True,
    )


@pytest.fixture(scope="module")
def quench_run_dir(tmp_path_factory):
    """One small quenched CLI run shared by the format tests."""
    root = tmp_path_factory.mktemp("cli")
    (root / "q.cfg").write_text(MINIMAL)
    r = run_cli(["simulate", "q.cfg", "--out", "q_out"], root)
    assert r.returncode == 0, r.stderr
    return root


def test_cli_quenched_artifacts(quench_run_dir):
    out = quench_run_dir / "q_out"
    assert (out / "run.csv").exists()
    assert (out / "similarity.csv").exists()
    assert (out / "manifest.json").exists()
    assert sorted((out / "snapshots").glob("*.csv"))
    manifest = RunManifest.from_json((out / "manifest.json").read_text())
    assert manifest.verdict == "quenched"


def test_cli_determinism(quench_run_dir):
    r = run_cli(["simulate", "q.cfg", "--out", "q_out2"], quench_run_dir)
    assert r.returncode == 0
    a = (quench_run_dir / "q_out" / "run.csv").read_bytes()
    b = (quench_run_dir / "q_out2" / "run.csv").read_bytes()
    assert a == b


def test_run_csv_reparses_bit_exact(quench_run_dir):
    out = quench_run_dir / "q_out"
    traj, manifest = load_trajectory(out)
    series = read_run_csv(out / "run.csv")
    spec = spec_from_echo(manifest.spec)
    from memsq.parabolic import integrate

    fresh, _ = integrate(spec)
    assert np.array_equal(series["t"], fresh.t)
    assert np.array_equal(series["umax"], fresh.umax)
    assert np.array_equal(series["gap"], fresh.gap)
    assert np.array_equal(series["ut_inf"], fresh.ut_inf)
    for u_read, u_fresh in zip(traj.snap_u, fresh.snap_u):
        assert np.array_equal(u_read, u_fresh)


def test_manifest_roundtrip(quench_run_dir):
    m = RunManifest.from_json((quench_run_dir / "q_out" / "manifest.json").read_text())
    assert RunManifest.from_json(m.to_json()) == m
    assert RunManifest.from_dict(m.to_dict()) == m


def test_cli_global_run_has_no_similarity(tmp_path):
    (tmp_path / "g.cfg").write_text(MINIMAL.replace("lambda = 5", "lambda = 0.5"))
    r = run_cli(["simulate", "g.cfg", "--out", "g_out"], tmp_path)
    assert r.returncode == 0, r.stderr
    assert not (tmp_path / "g_out" / "similarity.csv").exists()
    manifest = RunManifest.from_json((tmp_path / "g_out" / "manifest.json").read_text())
    assert manifest.verdict == "global"


def test_cli_exit_undecided(tmp_path):
    cfg = MINIMAL.replace("lambda = 5", "lambda = 1.4") + "\n[solver]\nt_max = 0.01\n"
    (tmp_path / "u.cfg").write_text(cfg)
    r = run_cli(["simulate", "u.cfg", "--out", "u_out"], tmp_path)
    assert r.returncode == 2
    manifest = RunManifest.from_json((tmp_path / "u_out" / "manifest.json").read_text())
    assert manifest.verdict == "undecided"


def test_cli_exit_config_error(tmp_path):
    (tmp_path / "bad.cfg").write_text(MINIMAL.replace("pressure = 0", "pressure = -2"))
    r = run_cli(["simulate", "bad.cfg", "--out", "x"], tmp_path)
    assert r.returncode == 3
    assert "line 2" in r.stderr


def test_cli_exit_io_error(tmp_path):
    (tmp_path / "q.cfg").write_text(MINIMAL)
    (tmp_path / "blocker").write_text("file, not a directory")
    r = run_cli(["eigen", "q.cfg", "--out", "blocker/sub"], tmp_path)
    assert r.returncode == 4


def test_cli_rate_and_similarity_from_run(quench_run_dir):
    r = run_cli(["rate", "q.cfg", "--run", "q_out", "--out", "rate_out"], quench_run_dir)
    assert r.returncode == 0, r.stderr
    m = RunManifest.from_json((quench_run_dir / "rate_out" / "manifest.json").read_text())
    assert abs(m.headline["rate_exponent"] - 1.0 / 3.0) < 0.05
    r = run_cli(["similarity", "q.cfg", "--run", "q_out", "--out", "sim_out"], quench_run_dir)
    assert r.returncode == 0, r.stderr
    assert (quench_run_dir / "sim_out" / "similarity.csv").exists()


def test_cli_critical_and_bounds(tmp_path):
    cfg = MINIMAL.replace("lambda = 5", "lambda = 0") + "\n[command]\ntol = 0.05\n"
    (tmp_path / "c.cfg").write_text(cfg)
    r = run_cli(["critical", "c.cfg", "--out", "crit"], tmp_path)
    assert r.returncode == 0, r.stderr
    m = RunManifest.from_json((tmp_path / "crit" / "manifest.json").read_text())
    assert m.headline["bracket_lo"] < m.headline["lam_star"] <= m.headline["bracket_hi"]
    assert m.headline["lam_star"] == pytest.approx(1.40, abs=0.08)
    assert (tmp_path / "crit" / "critical_log.csv").exists()
    r = run_cli(["bounds", "c.cfg", "--out", "b", "--pstar", "7.5"], tmp_path)
    assert r.returncode == 0, r.stderr
    mb = RunManifest.from_json((tmp_path / "b" / "manifest.json").read_text())
    assert mb.headline["upper_torsion"] == pytest.approx(12.0, rel=1e-2)
    assert mb.headline["lower_operational"] is not None
    assert (tmp_path / "b" / "bounds.csv").exists()


def test_cli_report_adds_richardson(tmp_path):
    (tmp_path / "q.cfg").write_text(MINIMAL)
    r = run_cli(["report", "q.cfg", "--out", "rep"], tmp_path)
    assert r.returncode == 0, r.stderr
    m = RunManifest.from_json((tmp_path / "rep" / "manifest.json").read_text())
    assert m.command == "report"
    assert "t_quench_richardson_rel" in m.headline
    assert m.headline["t_quench_richardson_rel"] <= 0.01


def test_csv_format_contract(quench_run_dir):
    raw = (quench_run_dir / "q_out" / "run.csv").read_bytes()
    assert b"\r" not in raw                      # LF endings only
    assert raw.decode("ascii").splitlines()[0] == "t,U,gap,argmax,dt,ut_inf"
    # 17 significant digits round-trip float64 exactly
    from memsq.outputs import fmt

    for x in (1.0 / 3.0, 0.07515074658841246, 1e-300, 123456.789):
        assert float(fmt(x)) == x


def test_threads_env(monkeypatch):
    from memsq.criticality import max_workers

    monkeypatch.delenv("MEMSQ_THREADS", raising=False)
    assert max_workers() == 1
    monkeypatch.setenv("MEMSQ_THREADS", "4")
    assert max_workers() == 4
    monkeypatch.setenv("MEMSQ_THREADS", "junk")
    assert max_workers() == 1


def test_sweep_threads_match_sequential(tmp_path, monkeypatch):
    from memsq.criticality import sweep_T_vs_lambda
    from conftest import interval_spec

    spec = interval_spec(0.0, n=64)
    monkeypatch.delenv("MEMSQ_THREADS", raising=False)
    seq = sweep_T_vs_lambda([15.0, 30.0, 60.0], 0.0, spec)
    monkeypatch.setenv("MEMSQ_THREADS", "3")
    par = sweep_T_vs_lambda([15.0, 30.0, 60.0], 0.0, spec)
    for a, b in zip(seq.records, par.records):
        assert a.t_hat == b.t_hat and a.digest == b.digest


# --------------------------------------------------------------------------
# sweep store


def _rec(key, lam=1.0):
    return {
        "key": key, "lam": lam, "pressure": 0.0, "domain_tag": "interval:L=1",
        "profile_tag": "const:1", "resolution": 64, "verdict": "quenched",
        "t_hat": 0.1, "digest": "d" * 16,
    }


def test_store_merge_idempotent(tmp_path):
    store = SweepStore(tmp_path / "s.jsonl")
    n = store.merge([_rec("a"), _rec("b"), _rec("c")])
    assert n == 3
    before = store.path.read_bytes()
    assert store.merge([_rec("a"), _rec("b"), _rec("c")]) == 0
    assert store.path.read_bytes() == before
    assert [r["key"] for r in store.records()] == ["a", "b", "c"]


def test_store_corrupt_trailing_line(tmp_path, capsys):
    store = SweepStore(tmp_path / "s.jsonl")
    store.merge([_rec("a")])
    with open(store.path, "a") as fh:
        fh.write('{"key": "b", "trunc')
    recs = store.load()
    assert list(recs) == ["a"]
    assert store.merge([_rec("b")]) == 1
    assert [r["key"] for r in store.records()] == ["a", "b"]


@settings(max_examples=30, deadline=None)
@given(order=st.permutations(["a", "b", "c", "d", "e"]), split=st.integers(1, 4))
def test_store_shuffled_merges_agree(tmp_path_factory, order, split):
    """Interleaved producers yield the sorted union regardless of order."""
    tmp = tmp_path_factory.mktemp("store")
    store = SweepStore(tmp / "s.jsonl")
    store.merge([_rec(k) for k in order[:split]])
    store.merge([_rec(k) for k in order[split:]])
    assert [r["key"] for r in store.records()] == ["a", "b", "c", "d", "e"]
