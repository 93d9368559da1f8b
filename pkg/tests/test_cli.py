import csv
import json
import threading
import time

import pytest

from fankit.cli import main
from fankit.sim import SimConfig


@pytest.fixture
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def fan(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_padding_verbs(capsys):
    code, out, _ = fan(capsys, "padding", "list")
    assert code == 0 and "dropmark_def\tid=1" in out
    code, out, _ = fan(capsys, "padding", "show", "dropmark_def")
    assert "on gap BeSilent silence" in out


def test_plugin_inspect_and_assemble(capsys, in_tmp):
    code, out, _ = fan(capsys, "plugin", "inspect", "dropmark_def")
    assert code == 0
    assert "memory 16777216" in out and out.count("\nentry ") == 6
    code, _, _ = fan(capsys, "plugin", "assemble", "dropmark_def", "-o", "dm")
    assert code == 0 and (in_tmp / "dm" / "dropmark_def.plugin").exists()
    code, out2, _ = fan(capsys, "plugin", "inspect", "dm")
    assert out2.split("\n", 1)[1] == out.split("\n", 1)[1]


def test_assemble_single_source(capsys, in_tmp):
    (in_tmp / "x.s").write_text("mov64 r0, 7\nexit\n")
    code, out, _ = fan(capsys, "plugin", "assemble", "x.s")
    assert code == 0 and (in_tmp / "x.o").read_bytes()[:1] == b"\xb7"


def test_plugin_load_dispatch_logs(capsys):
    code, out, _ = fan(capsys, "plugin", "load", "hello_world", "--dispatch", "circuit_open_add")
    assert code == 0
    assert "log fan.project/hello_world circuit_open_add" in out


def test_plugin_bench_report(capsys):
    code, out, _ = fan(capsys, "plugin", "bench", "hello_world", "--reps", "5")
    lines = [ln for ln in out.splitlines() if not ln.startswith("#")]
    header, row = lines[0].split("\t"), lines[1].split("\t")
    vals = dict(zip(header, row))
    assert float(vals["cold_median_us"]) < 5000


def test_ftl_lifecycle(capsys, in_tmp):
    assert fan(capsys, "ftl", "init", "--seed", "4", "--consensus", "c.json")[0] == 0
    assert fan(capsys, "ftl", "issue", "hello_world", "--protest-epoch", "0", "--push-epoch", "1")[0] == 0
    # not in the tree until the epoch is built
    code, _, err = fan(capsys, "ftl", "prove", "fan.project/hello_world")
    assert code == 1 and err.startswith("fan: error: NotPresent")
    fan(capsys, "ftl", "advance", "--consensus", "c.json")
    assert fan(capsys, "ftl", "prove", "fan.project/hello_world", "-o", "p.json")[0] == 0
    assert fan(capsys, "ftl", "verify", "p.json")[0] == 0
    assert fan(capsys, "ftl", "verify", "p.json", "--consensus", "c.json")[0] == 0
    code, out, _ = fan(capsys, "plugin", "load", "hello_world", "--consensus", "c.json")
    assert code == 0 and out.startswith("loaded")
    # a proof from an older epoch fails against the new root
    fan(capsys, "ftl", "advance")
    code, _, err = fan(capsys, "ftl", "verify", "p.json")
    assert code == 1 and "ProofInvalid" in err
    # tampering
    d = json.loads((in_tmp / "p.json").read_text())
    last = int(d["plugin"][-2:], 16) ^ 1
    d["plugin"] = d["plugin"][:-2] + f"{last:02x}"
    (in_tmp / "bad.json").write_text(json.dumps(d))
    code, _, err = fan(capsys, "ftl", "verify", "bad.json", "--root", d["root"])
    assert code == 1 and "ProofInvalid" in err


def test_ftl_withdraw_blocks_gate(capsys, in_tmp):
    fan(capsys, "ftl", "init", "--seed", "5")
    fan(capsys, "ftl", "issue", "hello_world", "--protest-epoch", "0", "--push-epoch", "0")
    fan(capsys, "ftl", "advance")
    assert fan(capsys, "ftl", "withdraw", "fan.project/hello_world")[0] == 0
    fan(capsys, "ftl", "advance", "--consensus", "c.json")
    code, _, err = fan(capsys, "plugin", "load", "hello_world", "--consensus", "c.json")
    assert code == 1 and "GateDenied" in err
    code, out, _ = fan(capsys, "ftl", "prove", "fan.project/hello_world", "--absence", "-o", "a.json")
    assert code == 0 and fan(capsys, "ftl", "verify", "a.json")[0] == 0


def test_ftl_protest(capsys, in_tmp):
    fan(capsys, "ftl", "init", "--seed", "6")
    fan(capsys, "ftl", "issue", "hello_world", "--protest-epoch", "1", "--push-epoch", "2")
    code, out, _ = fan(capsys, "ftl", "protest", "fan.project/hello_world", "--relay", "2")
    assert code == 0 and "accepted=True" in out


def test_ftl_over_socket(capsys, in_tmp):
    fan(capsys, "ftl", "init", "--seed", "7")
    sock = str(in_tmp / "s.sock")
    t = threading.Thread(target=main, args=(["ftl", "serve", "--socket", sock, "--duration", "4"],))
    t.start()
    for _ in range(100):
        if (in_tmp / "s.sock").exists():
            break
        time.sleep(0.02)
    try:
        assert fan(capsys, "ftl", "issue", "hello_world", "--protest-epoch", "0", "--push-epoch", "0",
                   "--socket", sock)[0] == 0
        code, out, _ = fan(capsys, "ftl", "advance", "--socket", sock)
        assert code == 0 and "epoch=1" in out
        assert fan(capsys, "ftl", "prove", "fan.project/hello_world", "--socket", sock, "-o", "p.json")[0] == 0
        assert fan(capsys, "ftl", "verify", "p.json", "--socket", sock)[0] == 0
    finally:
        t.join()
    # the server persisted what it was sent
    code, out, _ = fan(capsys, "ftl", "root")
    assert "epoch=1" in out


def test_sim_run_banner_reproduces(capsys, in_tmp):
    code, out, _ = fan(capsys, "sim", "run", "--circuits", "15", "--defense", "on", "--seed", "9", "-o", "m.csv")
    assert code == 0
    banner = "\n".join(ln[2:] for ln in out.splitlines()[1:] if ln.startswith("# "))
    cfg = SimConfig.from_text(banner)
    assert cfg.n_circuits == 15 and cfg.defense and cfg.seed == 9
    (in_tmp / "cfg.ini").write_text(banner)
    first = (in_tmp / "m.csv").read_bytes()
    fan(capsys, "sim", "run", "--config", "cfg.ini", "-o", "m2.csv")
    assert (in_tmp / "m2.csv").read_bytes() == first
    with open(in_tmp / "m.summary.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 1


def test_sim_sweep_table(capsys, in_tmp):
    code, out, _ = fan(capsys, "sim", "sweep", "--circuits", "10", "--fractions", "0.01,1.0", "-o", "s.csv")
    assert code == 0
    with open(in_tmp / "s.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[0]["bayes_reference"]) == pytest.approx(0.567, abs=0.001)
    assert float(rows[1]["bayes_reference"]) == 1.0


@pytest.mark.parametrize("argv, kind", [
    (["sim", "run", "--fraction-malicious", "1.5"], "UsageError"),
    (["sim", "run", "--set", "detector_mode=x"], "ConfigError"),
    (["sim", "run", "--set", "oops"], "CliError"),
    (["plugin", "inspect", "no_such_bundle"], "CliError"),
    (["ftl", "root", "--log", "missing"], "FtlError"),
    (["ftl", "init", "--depth", "40"], "UsageError"),
    (["padding", "show", "nope"], "CliError"),
])
def test_errors_are_one_parseable_line(capsys, in_tmp, argv, kind):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    err = capsys.readouterr().err.strip().splitlines()
    assert code != 0
    assert len(err) == 1 and err[0].startswith(f"fan: error: {kind}: ")
