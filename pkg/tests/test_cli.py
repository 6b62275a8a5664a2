import json
import re
import subprocess
import sys
import threading

import pytest

from haltlab.cli import COMMANDS, EXIT_CHECK, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from haltlab.oracle import HaltingSurrogate
from haltlab.records import (
    ExperimentReport,
    RecordError,
    append_record,
    dumps,
    read_records,
    validate_record,
    without_timestamp,
)

TS = re.compile(r'"timestamp":"[^"]*"')

# fast argument sets covering every command
FAST = {
    "enumerate": ["--x-max", "8"],
    "run-program": ["--x", "7", "--T", "500"],
    "oracle": ["--x-max", "20", "--T", "200"],
    "omega": ["--x-max", "12", "--T", "1000"],
    "measure": ["--x", "0", "--T", "0", "--D", "16", "--seed", "1"],
    "amplify": ["--x", "3", "--T", "100", "--D", "8", "--eps", "0.3", "--seed", "4"],
    "parity": ["--x", "7", "--T", "1000000", "--x-max", "32", "--D", "128", "--seed", "1"],
    "estimate-omega": ["--N", "5000", "--seed", "9"],
    "extract-bits": ["--N", "268435456", "--sampler", "binomial", "--n", "8", "--seed", "2"],
    "perturb": ["--n", "5", "--N", "100000", "--etas=-0.25,-0.0625,0.001", "--seed", "3"],
    "verify-oracle": ["--x-max", "20", "--budget", "5000", "--flip", "1", "--claim", "7"],
}


@pytest.fixture
def results(tmp_path, monkeypatch):
    path = tmp_path / "results.jsonl"
    monkeypatch.setenv("HALTLAB_RESULTS", str(path))
    return path


def last_record(path):
    return list(read_records(path))[-1][1]


def test_every_command_has_fast_args():
    assert set(FAST) == set(COMMANDS)


def test_measure_example(results, capsys):
    assert main(["measure", *FAST["measure"]]) == EXIT_OK
    rec = last_record(results)
    assert rec["protocol"] == "measure"
    assert rec["outcome"]["outcome"] == 1
    assert "1" in capsys.readouterr().out


def test_parity_example(results):
    assert main(["parity", *FAST["parity"]]) == EXIT_OK
    out = last_record(results)["outcome"]
    assert out["parity"] == 0 and out["h_T"] == 0 and out["x_prime"] % 2 == 0


@pytest.mark.parametrize("name", sorted(FAST))
def test_rerun_is_byte_identical_without_timestamp(results, name):
    assert main([name, *FAST[name], "--quiet"]) == EXIT_OK
    assert main([name, *FAST[name], "--quiet"]) == EXIT_OK
    first, second = results.read_text(encoding="utf-8").splitlines()
    assert TS.sub("", first) == TS.sub("", second)
    assert first != TS.sub("", first)


def test_records_pass_self_check(results, capsys):
    for name, args in FAST.items():
        assert main([name, *args, "--quiet"]) == EXIT_OK
    assert main(["--check", str(results)]) == EXIT_OK
    assert f"{len(FAST)}/{len(FAST)} records ok" in capsys.readouterr().out


def test_check_flags_tampered_record(results, capsys):
    main(["measure", *FAST["measure"], "--quiet"])
    rec = last_record(results)
    rec["outcome"]["outcome"] = 0
    results.write_text(json.dumps(rec) + "\n", encoding="utf-8")
    assert main(["--check", str(results)]) == EXIT_CHECK
    assert main(["--check", str(results), "--no-replay"]) == EXIT_OK
    results.write_text('{"protocol": "measure"}\n', encoding="utf-8")
    assert main(["--check", str(results), "--no-replay"]) == EXIT_CHECK
    capsys.readouterr()


def test_config_file_and_flag_override(results, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"x": 7, "T": 50, "D": 32, "seed": 5, "eps": 0.1}), encoding="utf-8")
    assert main(["measure", "--config", str(cfg), "--quiet"]) == EXIT_OK
    assert last_record(results)["params"] == {"x": 7, "T": 50, "D": 32, "seed": 5}
    assert main(["measure", "--config", str(cfg), "--x", "1", "--quiet"]) == EXIT_OK
    assert last_record(results)["params"]["x"] == 1


def test_config_rejects_unknown_keys(results, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}), encoding="utf-8")
    assert main(["measure", "--config", str(cfg)]) == EXIT_USAGE
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["kind"] == "usage"


def test_results_flag_beats_environment(results, tmp_path):
    other = tmp_path / "other.jsonl"
    assert main(["omega", "--results", str(other), "--quiet"]) == EXIT_OK
    assert other.exists() and not results.exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["measure"],
        ["measure", "--x", "0", "--eps", "0.1"],
        ["amplify", "--x", "0", "--eps", "0.7"],
        ["estimate-omega", "--sampler", "magic"],
        ["measure", "--x", "-1"],
        ["frobnicate"],
        [],
    ],
)
def test_usage_errors(results, capsys, argv):
    assert main(argv) == EXIT_USAGE
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["kind"] == "usage"


@pytest.mark.parametrize(
    "argv",
    [
        ["measure", "--x", "40", "--D", "16"],
        ["parity", "--x", "9", "--x-max", "9", "--D", "10", "--T", "100"],
    ],
)
def test_runtime_errors(results, capsys, argv):
    assert main(argv) == EXIT_RUNTIME
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["kind"] == "runtime"
    assert err["error"]["type"] == "TruncationError"
    assert not results.exists()


def test_oracle_output_document(results, tmp_path):
    doc = tmp_path / "surrogate.json"
    assert main(["oracle", "--x-max", "10", "--T", "100", "--output", str(doc), "--quiet"]) == EXIT_OK
    s = HaltingSurrogate.from_json(doc.read_text(encoding="utf-8"))
    assert s.x_max == 10 and s.bound == 100
    assert main(["oracle", "--x-max", "10", "--budget", "0", "--quiet"]) == EXIT_OK
    assert last_record(results)["outcome"]["surrogate"]["T"] == 0


def test_verify_oracle_command(results):
    assert main(["verify-oracle", *FAST["verify-oracle"], "--quiet"]) == EXIT_OK
    out = last_record(results)["outcome"]
    assert [r["x"] for r in out["refutations"]] == [1]
    assert 7 in out["pending"]


@pytest.mark.parametrize("name", ["estimate-omega", "extract-bits", "perturb"])
def test_figures_are_written(results, tmp_path, name, capsys):
    fig = tmp_path / "figs" / f"{name}.png"
    assert main([name, *FAST[name], "--figure", str(fig)]) == EXIT_OK
    assert fig.stat().st_size > 1000
    assert fig.read_bytes()[:4] == b"\x89PNG"
    assert str(fig) in capsys.readouterr().out


def test_console_entry_point(tmp_path):
    env_path = tmp_path / "r.jsonl"
    proc = subprocess.run(
        [sys.executable, "-m", "haltlab.cli", "omega", "--results", str(env_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "Omega_T" in proc.stdout


# -- record format -----------------------------------------------------------

def test_float_formatting_and_sorted_keys():
    assert dumps({"b": 0.1, "a": 1, "c": [2.0, True, None, "x"]}) == (
        '{"a":1,"b":0.10000000000000001,"c":[2.0,true,null,"x"]}'
    )
    assert json.loads(dumps({"v": 0.1}))["v"] == 0.1
    with pytest.raises(RecordError):
        dumps({"v": float("nan")})
    with pytest.raises(RecordError):
        dumps({1: 2})


def test_report_roundtrip():
    rep = ExperimentReport("omega", {"T": 1}, {"bits": "1"})
    rec = json.loads(rep.to_line())
    validate_record(rec)
    assert ExperimentReport.from_record(rec) == rep
    assert "timestamp" not in without_timestamp(rec)
    for broken in ({}, {**rec, "extra": 1}, {**rec, "timestamp": "yesterday"}, {**rec, "params": []}):
        with pytest.raises(RecordError):
            validate_record(broken)


def test_concurrent_appends_stay_line_atomic(tmp_path):
    path = tmp_path / "c.jsonl"
    payload = "z" * 20_000

    def worker(i):
        for j in range(25):
            append_record(path, ExperimentReport("omega", {"i": i, "j": j}, {"pad": payload}))

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    recs = [r for _, r in read_records(path)]
    assert len(recs) == 200
    assert {(r["params"]["i"], r["params"]["j"]) for r in recs} == {(i, j) for i in range(8) for j in range(25)}
