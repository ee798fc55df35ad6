import hashlib
from importlib.resources import files
from pathlib import Path

from cpsflow.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, main


def fixture_args() -> list[str]:
    fixture = Path(str(files("cpsflow") / "data" / "fixture"))
    return [
        "--utterances", str(fixture / "utterances.csv"),
        "--phase-log", str(fixture / "phase_log.csv"),
        "--roster", str(fixture / "roster.csv"),
    ]


def tree_digest(root: Path) -> dict[str, str]:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.iterdir())}


def test_analyze_fixture(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["-q", "analyze", *fixture_args(), "--out", str(out)]) == EXIT_OK
    names = {p.name for p in out.iterdir()}
    assert len(names) == 25
    assert {"network_minimal.dot", "network_maximal.dot", "stats.json"} <= names
    assert "engagement.csv" in capsys.readouterr().out


def test_analyze_twice_gives_identical_trees(tmp_path):
    for name, workers in [("one", "1"), ("two", "4")]:
        assert main(["-q", "analyze", *fixture_args(), "--out", str(tmp_path / name), "--workers", workers]) == EXIT_OK
    assert tree_digest(tmp_path / "one") == tree_digest(tmp_path / "two")


def test_analyze_malformed_input(tmp_path, capsys):
    fixture = Path(str(files("cpsflow") / "data" / "fixture"))
    bad = tmp_path / "utterances.csv"
    bad.write_text("student_id,triad_id,timestamp,indicator,text\nS01,T1,2024-03-04T09:00:00Z\n", encoding = "utf-8")
    out = tmp_path / "out"
    status = main([
        "-q", "analyze", "--utterances", str(bad), "--phase-log", str(fixture / "phase_log.csv"),
        "--roster", str(fixture / "roster.csv"), "--out", str(out),
    ])
    assert status == EXIT_INVALID
    assert not out.exists()
    assert "utterances.csv" in capsys.readouterr().err


def test_analyze_non_utf8_input(tmp_path, capsys):
    fixture = Path(str(files("cpsflow") / "data" / "fixture"))
    bad = tmp_path / "utterances.csv"
    bad.write_bytes((fixture / "utterances.csv").read_bytes() + b"S01,T1,2024-03-04T09:30:00Z,PS04,caf\xe9\xff\n")
    out = tmp_path / "out"
    status = main([
        "-q", "analyze", "--utterances", str(bad), "--phase-log", str(fixture / "phase_log.csv"),
        "--roster", str(fixture / "roster.csv"), "--out", str(out),
    ])
    assert status == EXIT_INVALID
    assert not out.exists()
    assert "UTF-8" in capsys.readouterr().err


def test_analyze_invalid_dataset_reports_violations(tmp_path, capsys):
    fixture = Path(str(files("cpsflow") / "data" / "fixture"))
    phase_log = tmp_path / "phase_log.csv"
    phase_log.write_text(
        "student_id,phase,entry_timestamp\n"
        "S01,A1,2024-03-04T09:00:00Z\nS01,A3,2024-03-04T09:10:00Z\nS01,A2,2024-03-04T09:20:00Z\n",
        encoding = "utf-8",
    )
    out = tmp_path / "out"
    status = main([
        "-q", "analyze", "--utterances", str(fixture / "utterances.csv"), "--phase-log", str(phase_log),
        "--roster", str(fixture / "roster.csv"), "--out", str(out),
    ])
    assert status == EXIT_INVALID
    assert not out.exists()
    assert "S01" in capsys.readouterr().err


def test_analyze_missing_file(tmp_path):
    fixture = Path(str(files("cpsflow") / "data" / "fixture"))
    status = main([
        "-q", "analyze", "--utterances", str(tmp_path / "missing.csv"), "--phase-log", str(fixture / "phase_log.csv"),
        "--roster", str(fixture / "roster.csv"), "--out", str(tmp_path / "out"),
    ])
    assert status == EXIT_IO


def test_analyze_bad_options(tmp_path):
    assert main(["-q", "analyze", *fixture_args(), "--out", str(tmp_path), "--alpha", "2"]) == EXIT_INVALID
    assert main(["-q", "analyze", *fixture_args(), "--out", str(tmp_path), "--min-support", "x"]) == EXIT_INVALID
    assert main(["-q", "analyze", *fixture_args(), "--out", str(tmp_path), "--emit", "pdf"]) == EXIT_INVALID


def test_synth_then_analyze(tmp_path, capsys):
    data = tmp_path / "data"
    assert main(["-q", "synth", "--seed", "42", "--students-per-condition", "6", "--out", str(data)]) == EXIT_OK
    assert {p.name for p in data.iterdir()} == {"utterances.csv", "phase_log.csv", "roster.csv"}
    assert "Minimal" in capsys.readouterr().out

    out = tmp_path / "out"
    status = main([
        "-q", "analyze", "--utterances", str(data / "utterances.csv"), "--phase-log", str(data / "phase_log.csv"),
        "--roster", str(data / "roster.csv"), "--out", str(out), "--emit", "json",
    ])
    assert status == EXIT_OK
    assert len(list(out.iterdir())) == 11


def test_synth_is_reproducible(tmp_path):
    for name in ["one", "two"]:
        assert main(["-q", "synth", "--seed", "7", "--students-per-condition", "6", "--out", str(tmp_path / name)]) \
               == EXIT_OK
    assert tree_digest(tmp_path / "one") == tree_digest(tmp_path / "two")


def test_synth_invalid_shape(tmp_path):
    assert main(["-q", "synth", "--students-per-condition", "10", "--out", str(tmp_path)]) == EXIT_INVALID
    assert main(["-q", "synth", "--seed", "-1", "--out", str(tmp_path)]) == EXIT_INVALID


def test_oracles(capsys):
    assert main(["-q", "oracle", "spm", "--trials", "25"]) == EXIT_OK
    assert main(["-q", "oracle", "mwu", "--trials", "10", "--seed", "3"]) == EXIT_OK
    assert main(["-q", "oracle", "binomial", "--trials", "5"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "spm: 25/25 match" in out
    assert "mwu: 10/10 match" in out
    assert "binomial: 5/5 match" in out


def test_kappa(tmp_path, capsys):
    codings = tmp_path / "codings.csv"
    codings.write_text("coder1,coder2\nPS04,PS04\nPS04,S1\nS1,PS04\nS1,S1\n", encoding = "utf-8")
    assert main(["-q", "kappa", "--codings", str(codings)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Kappa" in out
    assert "0.5" in out

    codings.write_text("coder1,coder2\nPS04,PS04,S1\n", encoding = "utf-8")
    assert main(["-q", "kappa", "--codings", str(codings)]) == EXIT_INVALID

    codings.write_text("coder1,coder2\n", encoding = "utf-8")
    assert main(["-q", "kappa", "--codings", str(codings)]) == EXIT_INVALID

    assert main(["-q", "kappa", "--codings", str(tmp_path / "missing.csv")]) == EXIT_IO


def test_kappa_normalizes_codes(tmp_path, capsys):
    codings = tmp_path / "codings.csv"
    codings.write_text("coder1,coder2\nPS4,PS04\nS1,s01\nOT2,OT2\nPS20,ps20\n", encoding = "utf-8")
    assert main(["-q", "kappa", "--codings", str(codings)]) == EXIT_OK
    row = capsys.readouterr().out.splitlines()[-1]
    assert [cell.strip() for cell in row.strip("|").split("|")] == ["4", "1", "1"]

    codings.write_text("coder1,coder2\nPS99,PS99\nOT2,OT2\n", encoding = "utf-8")
    assert main(["-q", "kappa", "--codings", str(codings)]) == EXIT_INVALID
    assert "PS99" in capsys.readouterr().err

    codings.write_text("coder1,coder2\nbanana,banana\n", encoding = "utf-8")
    assert main(["-q", "kappa", "--codings", str(codings)]) == EXIT_INVALID
