import json

import numpy as np
import pytest

from deeppolar.cli import main
from deeppolar.deep import DeepCodeSpec

SUBCOMMANDS = ["construct", "profile", "encode", "decode", "dega", "simulate", "bec-example"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help(capsys, cmd):
    code, out, _ = run(capsys, cmd, "--help")
    assert code == 0 and "--config" in out


def test_bec_example(capsys):
    code, out, _ = run(capsys, "bec-example")
    assert code == 0
    assert "0.9375" in out and "0.0625" in out and "0.2668" in out and "0.27" in out


def test_construct_default_layers(tmp_path, capsys):
    path = tmp_path / "spec.json"
    code, _, _ = run(capsys, "construct", "--n0", "1024", "--m", "1088", "--k", "900",
                     "--out", str(path))
    assert code == 0
    spec = DeepCodeSpec.load(path)
    assert [layer.n for layer in spec.layers] == [64]
    assert spec.payload_k == 900 and spec.M == 1088 and spec.crc is not None


@pytest.fixture
def small_spec(tmp_path, capsys):
    path = tmp_path / "spec.json"
    assert run(capsys, "construct", "--n0", "64", "--m", "76", "--k", "30", "--snr", "2",
               "--out", str(path))[0] == 0
    return path


def test_encode_decode_round_trip(tmp_path, capsys, small_spec):
    spec = DeepCodeSpec.load(small_spec)
    rng = np.random.default_rng(0)
    msgs = ["".join(map(str, rng.integers(0, 2, spec.payload_k))) for _ in range(5)]
    src = tmp_path / "msgs.txt"
    src.write_text("\n".join(msgs) + "\n")
    cw = tmp_path / "cw.txt"
    assert run(capsys, "encode", "--spec", str(small_spec), "--in", str(src), "--out", str(cw))[0] == 0
    code, out, _ = run(capsys, "decode", "--spec", str(small_spec), "--in", str(cw), "--hard",
                       "--list", "2")
    assert code == 0 and out.split() == msgs
    llr = tmp_path / "llr.txt"
    rows = [" ".join(str(8.0 * (1 - 2 * int(b))) for b in line) for line in cw.read_text().split()]
    llr.write_text("\n".join(rows) + "\n")
    code, out, _ = run(capsys, "decode", "--spec", str(small_spec), "--in", str(llr))
    assert code == 0 and out.split() == msgs


def test_hex_format(tmp_path, capsys, small_spec):
    spec = DeepCodeSpec.load(small_spec)
    src = tmp_path / "m.txt"
    src.write_text("0" * ((spec.payload_k + 3) // 4) + "\n")
    code, out, _ = run(capsys, "encode", "--spec", str(small_spec), "--in", str(src),
                       "--format", "hex")
    assert code == 0 and set(out.strip()) == {"0"}


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('n0 = 64\nm = 76\nk = 20\nno_such = 1\n')
    assert run(capsys, "construct", "--config", str(cfg))[0] == 2
    cfg.write_text('n0 = 64\nm = 76\nk = 20\n')
    code, out, _ = run(capsys, "construct", "--config", str(cfg))
    assert code == 0 and DeepCodeSpec.from_json(out).payload_k == 20
    code, out, _ = run(capsys, "construct", "--config", str(cfg), "--k", "25")
    assert code == 0 and DeepCodeSpec.from_json(out).payload_k == 25
    jcfg = tmp_path / "c.json"
    jcfg.write_text(json.dumps({"n0": 64, "m": 80, "k": 22}))
    code, out, _ = run(capsys, "construct", "--config", str(jcfg))
    assert code == 0 and DeepCodeSpec.from_json(out).M == 80


def test_exit_codes(tmp_path, capsys):
    assert run(capsys, "construct", "--bogus")[0] == 2
    assert run(capsys, "nope")[0] == 2
    code, _, err = run(capsys, "construct", "--n0", "64", "--m", "200", "--k", "30")
    assert code == 1 and "error" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(capsys, "encode", "--spec", str(bad), "--in", str(bad))[0] == 1
    assert run(capsys, "construct", "--config", str(tmp_path / "missing.toml"))[0] == 2


def test_profile_and_dega_outputs(tmp_path, capsys):
    grid = tmp_path / "grid.csv"
    code, out, err = run(capsys, "profile", "--n0", "64", "--m", "76", "--k", "30",
                         "--grid-out", str(grid))
    assert code == 0 and "pe_ub" in err
    assert grid.read_text().startswith("K0,K1,K2,pe0,pe_ub")
    code, out, err = run(capsys, "dega", "--n0", "64", "--m", "76", "--k", "30")
    assert code == 0 and out.startswith("index,mu,eta") and len(out.splitlines()) == 65


def test_simulate_deterministic_and_gnuplot(tmp_path, capsys):
    outs = []
    for workers in ("1", "2"):
        path = tmp_path / f"r{workers}.csv"
        args = ["simulate", "--scheme", "deep", "--n0", "64", "--m", "76", "--k", "30",
                "--snr-start", "0", "--snr-stop", "1", "--max-frames", "600",
                "--min-errors", "20", "--chunk", "64", "--seed", "5", "--workers", workers,
                "--out", str(path)]
        if workers == "1":
            args += ["--gnuplot", str(tmp_path / "plot.gp"), "--json", str(tmp_path / "r.json")]
        assert run(capsys, *args)[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert "plot" in (tmp_path / "plot.gp").read_text()
    assert len(json.loads((tmp_path / "r.json").read_text())) == 3
