import csv
from pathlib import Path

import pytest

from chasebse import bench, cli
from chasebse.report import read_csv

CONFIG = Path(__file__).parents[1] / "configs" / "default.model"


def run(*args):
    return cli.main([str(a) for a in args])


def test_solve_writes_reports(tmp_path, capsys):
    out = tmp_path / "o"
    assert run("solve", "--model", CONFIG, "--ecut", "4.5,5", "--solver", "both",
               "--nev", 8, "--out", out) == 0
    rows = read_csv(out / "report.csv")
    assert [r.solver for r in rows] == ["chase", "kscg", "chase", "kscg"]
    with open(out / "eigenvalues.csv") as f:
        recs = list(csv.DictReader(f))
    assert len(recs) == 4 * 8
    assert "chase" in capsys.readouterr().out


def test_deterministic_solve_is_bitwise_reproducible(tmp_path):
    for name in ("a", "b"):
        assert run("solve", "--ecut", "5", "--solver", "both", "--ranks", 4,
                   "--files", 3, "--deterministic", "--out", tmp_path / name) == 0
    for f in ("report.csv", "eigenvalues.csv", "report.flags.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_partial_convergence_exit_code(tmp_path, monkeypatch):
    real = bench.run_solver

    def partial(*args, **kw):
        res, _ = real(*args, **kw)
        return res, "partial"
    monkeypatch.setattr(bench, "run_solver", partial)
    assert run("solve", "--ecut", "4.5", "--out", tmp_path) == cli.EXIT_PARTIAL


def test_error_exit_code(tmp_path):
    bad = tmp_path / "bad.model"
    bad.write_text("gap = -1\n")
    assert run("solve", "--model", bad, "--out", tmp_path) == cli.EXIT_ERROR
    assert run("solve", "--ecut", "0.5", "--out", tmp_path) == cli.EXIT_ERROR


def test_generate_and_verify(tmp_path, capsys):
    assert run("generate", "--ecut", "4.5", "--files", 3, "--out", tmp_path) == 0
    assert sorted(p.name for p in (tmp_path / "ecut_4.5").iterdir()) == [
        "manifest.txt", "model.cfg", "part_0.bsem", "part_1.bsem", "part_2.bsem"]
    assert run("verify", "--model", tmp_path / "ecut_4.5" / "model.cfg",
               "--ecut", "4.5", "--ranks", "1,4,9", "--solver", "both") == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5 and "FAIL" not in out


def test_verify_rejects_non_square_ranks(capsys):
    assert run("verify", "--ecut", "4.5", "--ranks", "3") == cli.EXIT_ERROR
    assert "ERROR" in capsys.readouterr().out


def test_sweep(tmp_path, capsys):
    assert run("sweep-nex", "--ecut", "6", "--nex", "1,2,5,10,20,40", "--out", tmp_path) == 0
    assert "recommended nex: 5" in capsys.readouterr().out
    assert (tmp_path / "sweep.csv").exists()


def test_scaling(tmp_path):
    assert run("scaling", "--ecut", "4.5", "--ranks", "1,4", "--solver", "both",
               "--reps", 2, "--out", tmp_path) == 0
    with open(tmp_path / "scaling.csv") as f:
        assert len(list(csv.DictReader(f))) == 4
    assert (tmp_path / "report_scaling.svg").exists()


def test_extrapolate_from_series(tmp_path, capsys):
    series = tmp_path / "series.csv"
    series.write_text("inverse_ecut,e_b,state\n"
                      "0.0556,1.24878,1\n0.05,1.25251,1\n0.0455,1.25671,1\n"
                      "0.0556,1.1908,4\n0.05,1.23184,4\n0.0455,1.26287,4\n")
    assert run("extrapolate", "--series", series, "--out", tmp_path / "o") == 0
    text = capsys.readouterr().out
    assert "1.2920" in text and "1.5883" in text
    assert "1.292" in (tmp_path / "o" / "binding.svg").read_text()


def test_extrapolate_from_model(tmp_path):
    assert run("extrapolate", "--ecut", "4.5,4.75,5", "--nev", 6, "--nex", 6,
               "--out", tmp_path) == 0
    assert (tmp_path / "binding.csv").read_text().count("\n") == 7


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
