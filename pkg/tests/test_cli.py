import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from spinmod import cli
from spinmod.config import ConfigError, build, parse_text
from spinmod.timetags import read_stream


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = cli.main(list(args) + ["--out", str(out)])
    return code, out


def read_csv(path):
    lines = path.read_text().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    header = body[0].split(",")
    return header, np.loadtxt(body[1:], delimiter=",", ndmin=2)


def test_parser_and_presets():
    args = cli.make_parser().parse_args(["mzi", "--preset", "qd2", "--set", "physical.b_field_mT=50"])
    cfg = cli.resolve(args)
    assert cfg.physical.b_field_mT == 50.0
    with pytest.raises(SystemExit):
        cli.make_parser().parse_args(["nosuch"])


def test_unknown_key_is_config_error(tmp_path):
    code, _ = run(["mzi", "--preset", "qd1", "--set", "model.nonsense=1"], tmp_path)
    assert code == cli.EXIT_CONFIG
    code, _ = run(["mzi", "--preset", "qd1", "--set", "physical.t1_ns=abc"], tmp_path)
    assert code == cli.EXIT_CONFIG
    with pytest.raises(ConfigError):
        build({"grids.n_points": "many"}, "qd1")


def test_numerical_failure_exit_code(tmp_path):
    code, _ = run(["mzi", "--preset", "qd1", "--set", "physical.p_over_psat=0"], tmp_path)
    assert code == cli.EXIT_NUMERIC


def test_missing_config_is_io_error(tmp_path):
    code, _ = run(["mzi", "--config", str(tmp_path / "absent.cfg")], tmp_path)
    assert code == cli.EXIT_IO


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_rerun_from_echo_is_bit_exact(tmp_path, fmt):
    code, first = run(["mzi", "--preset", "qd1", "--format", fmt, "--set", "grids.n_points=512"], tmp_path, "a")
    assert code == 0
    f1 = first / f"mzi.{fmt}"
    code, second = run(["mzi", "--config", str(f1)], tmp_path, "b")
    assert code == 0
    assert (second / f"mzi.{fmt}").read_bytes() == f1.read_bytes()


def test_config_text_round_trip():
    cfg = build({}, "qd2")
    again = build(parse_text(cfg.to_text()), None)
    assert again.to_flat() == cfg.to_flat()


def test_units_switch(tmp_path):
    code, si = run(["spectrum", "--preset", "qd1_tuned"], tmp_path, "si")
    assert code == 0
    code, gm = run(["spectrum", "--preset", "qd1_tuned", "--units", "gamma"], tmp_path, "gm")
    assert code == 0
    h_si, d_si = read_csv(si / "spectrum.csv")
    h_gm, d_gm = read_csv(gm / "spectrum.csv")
    assert "freq_ghz" in h_si and "omega_over_gamma" in h_gm
    gamma = 1 / 0.46
    f = d_si[:, h_si.index("freq_ghz")]
    w = d_gm[:, h_gm.index("omega_over_gamma")]
    assert np.allclose(2 * np.pi * f / gamma, w)


def test_json_metadata(tmp_path):
    code, out = run(["hbt", "--preset", "qd1", "--format", "json", "--set", "grids.n_points=512"], tmp_path)
    assert code == 0
    doc = json.loads((out / "hbt.json").read_text())
    assert doc["metadata"]["subcommand"] == "hbt"
    assert "physical.t1_ns" in doc["metadata"]["config"]
    assert set(doc["columns"]) >= {"tau_ns", "g2", "g2_jittered", "g2_ensemble"}


TRAJ = ["trajectories", "--preset", "qd1", "--seed", "4",
        "--set", "trajectories.n=64", "--set", "trajectories.duration_ns=100",
        "--set", "trajectories.block_size=16"]


def test_trajectories_tag_file(tmp_path, monkeypatch):
    digests = []
    for threads in ("1", "2"):
        monkeypatch.setenv("SPINMOD_THREADS", threads)
        code, out = run(TRAJ, tmp_path, f"t{threads}")
        assert code == 0
        tag = out / "trajectories.ttag"
        digests.append(hashlib.sha256(tag.read_bytes()).hexdigest())
        s = read_stream(tag)
        assert s.seed == 4 and s.duration == 6400.0
        header, data = read_csv(out / "trajectories.csv")
        assert data[:, header.index("counts")].sum() > 0
    assert digests[0] == digests[1]


def test_corrupt_tag_file_is_io_error(tmp_path, monkeypatch):
    from spinmod.timetags import TimeTagFormatError

    def broken(cfg):
        raise TimeTagFormatError("bad magic")
    monkeypatch.setitem(cli.RUNNERS, "trajectories", broken)
    code, _ = run(TRAJ, tmp_path)
    assert code == cli.EXIT_IO


def test_console_entry_point(tmp_path):
    out = tmp_path / "ep"
    r = subprocess.run([sys.executable, "-m", "spinmod.cli", "mzi", "--preset", "qd2", "--set", "grids.n_points=256",
                        "--out", str(out)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (out / "mzi.csv").exists()


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = cli.main(["mzi", "--preset", "qd2", "--set", "grids.n_points=256", "--out", str(blocker / "sub")])
    assert code == cli.EXIT_IO
