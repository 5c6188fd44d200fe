import json
import subprocess
import sys

import pytest

from oscl_sim.cli import BUDGET_ENV, main


def _read(path):
    return path.read_bytes()


# ===== flag validation, exit code 2 =====


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == 2
    capsys.readouterr()


def test_topology_rejects_tiny_n(tmp_path, capsys):
    code = main(["topology", "--n", "1", "--d", "3", "--out", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err
    assert "--n" in err and ">= 2" in err


def test_topology_rejects_zero_d(tmp_path, capsys):
    assert main(["topology", "--n", "8", "--d", "0", "--out", str(tmp_path)]) == 2
    assert ">= 1" in capsys.readouterr().err


def test_topology_requires_out(capsys):
    assert main(["topology", "--n", "8", "--d", "3"]) == 2
    capsys.readouterr()


def test_sweep_rejects_empty_and_bad_lists(tmp_path, capsys):
    assert main(["sweep", "--n", ",", "--d", "3", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--n", "8,x", "--d", "3", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--n", "8", "--d", "3", "--seeds", "0", "--out", str(tmp_path)]) == 2
    capsys.readouterr()


def test_scenario_rejects_unknown_name_and_bad_oscl(tmp_path, capsys):
    assert main(["scenario", "usecase9", "--out", str(tmp_path)]) == 2
    assert main(["scenario", "usecase1", "--oscl", "maybe", "--out", str(tmp_path)]) == 2
    assert main(["scenario", "usecase1", "--appends", "0", "--out", str(tmp_path)]) == 2
    capsys.readouterr()


def test_bad_budget_env_is_flag_error(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(BUDGET_ENV, "soon")
    code = main(["sweep", "--n", "8", "--d", "1", "--seeds", "1", "--out", str(tmp_path)])
    assert code == 2
    assert BUDGET_ENV in capsys.readouterr().err


def test_replay_missing_manifest_is_runtime_error(tmp_path, capsys):
    assert main(["replay", str(tmp_path / "nope" / "manifest.json")]) == 1
    capsys.readouterr()


def test_bad_links_file_reports_line(tmp_path, capsys):
    links = tmp_path / "links.txt"
    links.write_text("# ok\nlink A B\nedge A C\n")
    code = main(
        ["scenario", "usecase1", "--links", str(links), "--out", str(tmp_path / "out")]
    )
    assert code == 2
    assert f"{links}:3" in capsys.readouterr().err


# ===== topology outputs =====


def test_topology_writes_csvs_and_manifest(tmp_path, capsys):
    out = tmp_path / "t1"
    code = main(
        ["topology", "--n", "32", "--d", "3", "--seed", "7", "--out", str(out)]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "n=32 d=3 seed=7" in stdout

    series = (out / "series.csv").read_text()
    lines = series.split("\n")
    assert lines[0] == "N,D,seed,pair_index,avg_degree"
    assert lines[1].startswith("32,3,7,32,")
    assert series.endswith("\n") and "\r" not in series

    summary = (out / "summary.csv").read_text()
    head, row, tail = summary.split("\n")
    assert head == "N,D,seed,final_degree,predicted,ratio,saturated"
    fields = row.split(",")
    assert fields[:3] == ["32", "3", "7"]
    assert fields[4] == repr(6.0532946359034066)
    assert fields[6] in ("true", "false")
    assert tail == ""

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "topology"
    assert manifest["seed"] == 7
    assert manifest["config"]["n"] == 32
    assert sorted(manifest["outputs"]) == ["series.csv", "summary.csv"]
    assert manifest["duration_secs"] >= 0
    assert "version" in manifest


def test_topology_same_seed_same_bytes(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["topology", "--n", "16", "--d", "2", "--seed", "3", "--out", str(out)]) == 0
    capsys.readouterr()
    assert _read(a / "series.csv") == _read(b / "series.csv")
    assert _read(a / "summary.csv") == _read(b / "summary.csv")


def test_topology_replay_is_byte_identical(tmp_path, capsys):
    first = tmp_path / "first"
    again = tmp_path / "again"
    assert main(["topology", "--n", "16", "--d", "3", "--seed", "1", "--out", str(first)]) == 0
    assert main(["replay", str(first / "manifest.json"), "--out", str(again)]) == 0
    capsys.readouterr()
    assert _read(first / "series.csv") == _read(again / "series.csv")
    assert _read(first / "summary.csv") == _read(again / "summary.csv")


def test_topology_unsaturated_warns(tmp_path, capsys):
    out = tmp_path / "short"
    assert main(
        ["topology", "--n", "16", "--d", "3", "--pairs", "30", "--out", str(out)]
    ) == 0
    captured = capsys.readouterr()
    assert "saturated=False" in captured.out
    assert "saturation" in captured.err


# ===== sweep outputs =====


def test_sweep_rows_and_spread(tmp_path, capsys):
    out = tmp_path / "sweep"
    code = main(
        ["sweep", "--n", "8,16", "--d", "1,2", "--seeds", "2", "--out", str(out)]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "d=1: spread=" in stdout
    assert "d=2: spread=" in stdout

    lines = (out / "summary.csv").read_text().strip().split("\n")
    assert len(lines) == 1 + 8  # header + 2 sizes x 2 budgets x 2 seeds
    keys = [tuple(map(int, line.split(",")[:3])) for line in lines[1:]]
    assert keys == sorted(keys, key=lambda k: (k[1], k[0], k[2]))

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "sweep"
    assert len(manifest["config"]["jobs"]) == 8


def test_sweep_zero_budget_skips_everything(tmp_path, capsys):
    out = tmp_path / "sweep0"
    code = main(
        [
            "sweep", "--n", "8,16", "--d", "1", "--seeds", "1",
            "--time-budget", "0", "--out", str(out),
        ]
    )
    assert code == 0
    captured = capsys.readouterr()
    assert "skipped" in captured.err
    lines = (out / "summary.csv").read_text().strip().split("\n")
    assert len(lines) == 1  # header only
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["jobs"] == []


def test_budget_env_overrides_flag(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(BUDGET_ENV, "0")
    out = tmp_path / "sweep-env"
    code = main(
        [
            "sweep", "--n", "8", "--d", "1", "--seeds", "1",
            "--time-budget", "1000000", "--out", str(out),
        ]
    )
    assert code == 0
    assert "skipped" in capsys.readouterr().err
    assert json.loads((out / "manifest.json").read_text())["config"]["jobs"] == []


def test_sweep_replay_ignores_budget(tmp_path, capsys):
    first = tmp_path / "first"
    assert main(
        ["sweep", "--n", "8,16", "--d", "2", "--seeds", "2", "--out", str(first)]
    ) == 0
    again = tmp_path / "again"
    # replay must rerun the recorded jobs even though the stored budget
    # would now be exhausted instantly
    manifest = json.loads((first / "manifest.json").read_text())
    manifest["config"]["budget_secs"] = 0.0
    (first / "manifest.json").write_text(json.dumps(manifest))
    assert main(["replay", str(first / "manifest.json"), "--out", str(again)]) == 0
    capsys.readouterr()
    assert _read(first / "summary.csv") == _read(again / "summary.csv")


# ===== scenario outputs =====


def test_scenario_outputs_and_replay(tmp_path, capsys):
    out = tmp_path / "s1"
    code = main(
        ["scenario", "usecase1", "--oscl", "off", "--appends", "3", "--out", str(out)]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "usecase1 oscl=off appends=3" in stdout
    assert "nscl_relayed_notify=3" in stdout
    assert "subscriber_data_received=" in stdout

    messages = (out / "messages.csv").read_text()
    assert messages.startswith("time_ms,src,dst,relayer,msg_type,name\n")
    counters = (out / "counters.csv").read_text()
    assert counters.startswith("node,msg_type,role,count\n")

    again = tmp_path / "s1-again"
    assert main(["replay", str(out / "manifest.json"), "--out", str(again)]) == 0
    capsys.readouterr()
    assert _read(out / "messages.csv") == _read(again / "messages.csv")
    assert _read(out / "counters.csv") == _read(again / "counters.csv")


def test_scenario_with_overlay_prints_summary(tmp_path, capsys):
    out = tmp_path / "s2"
    assert main(["scenario", "usecase2", "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "discovery=distributed" in stdout
    assert "path_hops=3" in stdout
    assert "new_links=0" in stdout
    assert "nscl_relayed_notify=0" in stdout


def test_scenario_links_file_round_trip(tmp_path, capsys):
    links = tmp_path / "links.txt"
    links.write_text(
        "# star through the second gateway\n"
        "link Dscl1 Gscl2 delay_ms=2 capacity=10\n"
        "link Gscl2 Gscl1 delay_ms=2 capacity=10\n"
    )
    out = tmp_path / "custom"
    assert main(
        ["scenario", "usecase2", "--links", str(links), "--out", str(out)]
    ) == 0
    assert "path_hops=2" in capsys.readouterr().out
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["links"] == [
        ["Dscl1", "Gscl2", 2.0, 0.0, 10.0],
        ["Gscl2", "Gscl1", 2.0, 0.0, 10.0],
    ]
    # replay reads links from the manifest, not the file
    links.unlink()
    again = tmp_path / "custom-again"
    assert main(["replay", str(out / "manifest.json"), "--out", str(again)]) == 0
    capsys.readouterr()
    assert _read(out / "messages.csv") == _read(again / "messages.csv")


# ===== module entry point =====


def test_module_is_runnable(tmp_path):
    out = tmp_path / "m"
    proc = subprocess.run(
        [
            sys.executable, "-m", "oscl_sim.cli",
            "topology", "--n", "8", "--d", "2", "--out", str(out),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "summary.csv").exists()


def test_module_usage_error_exit_code():
    proc = subprocess.run(
        [sys.executable, "-m", "oscl_sim.cli", "topology", "--n", "1", "--d", "3", "--out", "/tmp/x"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 2
