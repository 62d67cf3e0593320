import csv
import json
import math

import numpy as np
import pytest

from treeflow import cli
from treeflow.config import RunConfig, apply_overrides, load_config
from treeflow.embedding import FOLIATION_FIELDS
from treeflow.errors import ConfigError
from treeflow.io import fmt, write_csv
from treeflow.rng import derive_stream


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_defaults_validate():
    cfg = load_config()
    assert cfg.model.energies == [0.0, 0.0, 0.0] and cfg.model.p is None
    assert len(cfg.digest()) == 64


@pytest.mark.parametrize(
    "overrides",
    [
        ["spde.dt=-1"],
        ["model.energies=null"],
        ["model.energies=[0, 0]"],
        ["tree.cuts=[0.5, 0.25]"],
        ["tree.bogus=1"],
        ["nosuch.key=1"],
        ["seed=-3"],
        ["tree.n=2.5"],
        ["diagnostics.ks_level=2"],
        ["novalue"],
    ],
)
def test_bad_configs_rejected(overrides):
    with pytest.raises(ConfigError):
        load_config(None, overrides)


def test_overrides_switch_model_form():
    cfg = load_config(None, ["model.p=[0.25, 0.5, 0.25]", "spde.dt=1e-4", "seed=7"])
    assert cfg.model.energies is None and cfg.model.p == [0.25, 0.5, 0.25]
    assert cfg.spde.dt == 1e-4 and cfg.seed == 7
    data = apply_overrides(RunConfig().to_dict(), ["model.energies=[0, 1, 0]"])
    assert data["model"]["p"] is None


def test_yaml_file(tmp_path):
    f = tmp_path / "run.yaml"
    f.write_text("model:\n  p: [0.3, 0.4, 0.3]\ntree:\n  n: 40\nseed: 9\n")
    cfg = load_config(f)
    assert cfg.tree.n == 40 and cfg.seed == 9 and cfg.model.energies is None
    (tmp_path / "bad.yaml").write_text("model: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.yaml")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_derive_stream_examples():
    a = derive_stream(5, "tree", 0).random(10_000)
    b = derive_stream(5, "tree", 0).random(10_000)
    c = derive_stream(5, "tree", 1).random(10_000)
    d = derive_stream(5, "spde", 0).random(10_000)
    np.testing.assert_array_equal(a, b)
    assert not np.any(a == c) and not np.any(a == d)


def test_streams_order_independent():
    seq = [derive_stream(11, "rep", i).normal(size=100).mean() for i in range(8)]
    rev = [derive_stream(11, "rep", i).normal(size=100).mean() for i in reversed(range(8))][::-1]
    assert seq == rev


def test_fmt_round_trips(tmp_path):
    vals = [0.1, 1 / 3, 2.0**-60, 1e300, np.float64(np.pi)]
    p = write_csv(tmp_path / "x.csv", ("v",), ([v] for v in vals))
    back = [float(r[0]) for r in _read(p)[1:]]
    assert back == [float(v) for v in vals]
    assert fmt(np.int64(3)) == 3 and fmt(True) == 1


def test_solve_gibbs_command(tmp_path):
    assert cli.main(["solve-gibbs", "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "solve-gibbs" / "gibbs.json").read_text())
    assert rec["p"] == pytest.approx([1 / 3] * 3, abs=1e-12)
    man = json.loads((tmp_path / "solve-gibbs" / "manifest.json").read_text())
    assert man["seed"] == 20240101 and len(man["config_sha256"]) == 64
    assert "numpy" in man["versions"] and man["outputs"] == ["gibbs.json"]


def test_unknown_command_and_config_error_write_nothing(tmp_path, capsys):
    assert cli.main(["bogus", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["sample-tree", "--out", str(tmp_path), "--set", "tree.n=0"]) == cli.EXIT_CONFIG
    assert cli.main(["solve-gibbs", "--out", str(tmp_path), "--set", "model.p=[0.5, 0.1, 0.4]"]) == cli.EXIT_CONFIG
    assert list(tmp_path.iterdir()) == []
    assert "config error" in capsys.readouterr().err


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["sample-tree", "--set", "tree.generations=5"]) == 0
    rows = _read(tmp_path / "env" / "sample-tree" / "chain.csv")
    assert rows[0] == ["generation", "vertex", "parent"] and rows[1] == ["0", "1", "0"]


def test_byte_reproducible(tmp_path):
    args = ["--set", "tree.generations=40", "--set", "spde.depth=4", "--set", "spde.t_max=0.2"]
    for cmd in ("sample-tree", "embed-flow", "simulate-spde", "simulate-sde"):
        for sub in ("a", "b"):
            extra = ["--set", "spde.replicas=3"] if cmd == "simulate-sde" else []
            assert cli.main([cmd, "--out", str(tmp_path / sub), *args, *extra]) == 0
        for f in (tmp_path / "a" / cmd).iterdir():
            assert f.read_bytes() == (tmp_path / "b" / cmd / f.name).read_bytes(), f
    # a different seed changes the chain
    cli.main(["sample-tree", "--out", str(tmp_path / "c"), "--seed", "1", *args])
    assert (tmp_path / "c" / "sample-tree" / "chain.csv").read_bytes() != (
        tmp_path / "a" / "sample-tree" / "chain.csv"
    ).read_bytes()


def test_foliation_schema(tmp_path):
    assert cli.main(["foliation", "--out", str(tmp_path), "--set", "tree.generations=600"]) == 0
    rows = _read(tmp_path / "foliation" / "foliation.csv")
    assert tuple(rows[0]) == FOLIATION_FIELDS
    body = rows[1:]
    assert body and all(len(r) == 5 for r in body)
    n = load_config().tree.n
    first = {}
    for r in body:
        first.setdefault(int(r[2]), (round(float(r[1]) * n), float(r[3]), float(r[4])))
    # a fresh family of trajectories is launched every tenth generation
    launches = sorted({m for m, _, _ in first.values()})
    assert launches == list(range(0, 600, 10))
    assert all(x0 == v for _, x0, v in first.values())
    assert all(math.isfinite(float(r[4])) and float(r[4]) >= 0 for r in body)


def test_simulate_spde_outputs(tmp_path):
    code = cli.main(["simulate-spde", "--out", str(tmp_path), "--set", "spde.depth=5", "--set", "spde.t_max=0.3"])
    assert code == 0
    d = tmp_path / "simulate-spde"
    assert _read(d / "shocks.csv")[0] == ["s0", "s1", "x", "jump"]
    assert _read(d / "trajectory.csv")[0] == ["t", "x", "U"]
    man = json.loads((d / "manifest.json").read_text())
    assert man["shock_threshold"] == pytest.approx(4 * 2.0**-5)
