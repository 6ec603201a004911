import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chasebse import bench, bse
from chasebse.report import emit_report, plot_binding_svg, read_csv, write_csv

SMALL_MODEL = dict(nk=(6, 6, 6), nv=2, nc=2, gap=3.0, valence_width=0.6,
                   conduction_width=1.0, seed=1, exchange_strength=0.05,
                   screened_strength=0.3, coupling_seed=2)


# -- analytics -----------------------------------------------------------------

def test_efficiency_reference_values():
    assert bench.parallel_efficiency(2390.08, 1, 55.92, 64) == pytest.approx(0.668, abs=5e-3)
    assert bench.parallel_efficiency(5515.65, 1, 359.89, 64) == pytest.approx(0.240, abs=5e-3)
    assert bench.parallel_efficiency(3.0, 4, 3.0, 4) == 1.0


def test_speedup_reference_values():
    assert bench.speedup(5515.65, 2390.08) == pytest.approx(2.31, abs=5e-3)
    assert bench.speedup(359.89, 55.92) == pytest.approx(6.44, abs=5e-3)
    assert bench.speedup(7.0, 7.0) == 1.0


@pytest.mark.parametrize("args", [(0, 1, 1, 1), (1, -1, 1, 1), (1, 1, 1, 0)])
def test_efficiency_rejects_nonpositive(args):
    with pytest.raises(ValueError):
        bench.parallel_efficiency(*args)


def test_speedup_rejects_nonpositive():
    with pytest.raises(ValueError):
        bench.speedup(0.0, 1.0)


@settings(max_examples=50)
@given(st.floats(1e-3, 1e4), st.integers(1, 256), st.floats(1e-3, 1e4),
       st.integers(1, 256), st.floats(1e-3, 1e3))
def test_efficiency_scale_invariant(t_ref, p_ref, t, p, lam):
    a = bench.parallel_efficiency(t_ref, p_ref, t, p)
    b = bench.parallel_efficiency(lam * t_ref, p_ref, lam * t, p)
    assert b == pytest.approx(a, rel=1e-12)


@settings(max_examples=50)
@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_speedup_antisymmetric(a, b):
    assert bench.speedup(a, b) * bench.speedup(b, a) == pytest.approx(1.0, abs=1e-12)


def test_interpolate_nex_examples():
    low, high = (10.54, 40), (14.30, 100)
    assert bench.interpolate_nex(11.15, low, high) == 50
    assert bench.interpolate_nex(10.54, low, high) == 40
    with pytest.raises(ValueError):
        bench.interpolate_nex(11.0, (12.0, 40), (12.0, 100))
    with pytest.raises(ValueError):
        bench.interpolate_nex(20.0, low, high)


@settings(max_examples=50)
@given(st.floats(0, 10), st.floats(0.1, 10), st.integers(0, 100),
       st.integers(0, 200), st.lists(st.floats(0, 1), min_size=2, max_size=10))
def test_interpolate_nex_monotone(e_lo, width, n_lo, dn, fracs):
    low, high = (e_lo, n_lo), (e_lo + width, n_lo + dn)
    xs = sorted(min(e_lo + f * width, e_lo + width) for f in fracs)
    vals = [bench.interpolate_nex(x, low, high) for x in xs]
    assert vals == sorted(vals)


# -- experiments ---------------------------------------------------------------

def test_experiment_row_count():
    spec = bench.ExperimentSpec(model=SMALL_MODEL, ecuts=[4.5, 5.0], solver="both",
                                nev=6, nex=6, repetitions=3)
    rows = bench.run_experiment(spec)
    assert len(rows) == 12
    assert {r.status for r in rows} == {"ok"}
    for r in rows:
        assert r.total_s >= sum(getattr(r, f) for f in bench.TIMING_FIELDS) - 1e-6


def test_experiment_dense_fallback_flag():
    spec = bench.ExperimentSpec(model=SMALL_MODEL, ecuts=[4.5], nev=5, nex=50)
    (row,) = bench.run_experiment(spec)
    assert row.status == "dense_fallback"


def test_experiment_failure_recorded(monkeypatch):
    def boom(*args, **kw):
        raise RuntimeError("solver exploded")
    monkeypatch.setattr(bench, "run_solver", boom)
    rows = bench.run_experiment(bench.ExperimentSpec(model=SMALL_MODEL, ecuts=[4.5, 5.0]))
    assert [r.status for r in rows] == ["failed", "failed"]


def test_deterministic_runs_identical(tmp_path):
    spec = dict(model=SMALL_MODEL, ecuts=[5.0], solver="both", nev=6, nex=6,
                ranks=4, files=3, deterministic=True)
    a = bench.run_experiment(bench.ExperimentSpec(output=str(tmp_path / "a.csv"), **spec))
    b = bench.run_experiment(bench.ExperimentSpec(output=str(tmp_path / "b.csv"), **spec))
    for x, y in zip(a, b):
        assert x.matvecs == y.matvecs
        assert np.array_equal(x.eigenvalues, y.eigenvalues)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_spec_validation():
    with pytest.raises(ValueError):
        bench.ExperimentSpec(model=None, ecuts=[5.0], repetitions=0)
    with pytest.raises(ValueError):
        bench.ExperimentSpec(model=None, ecuts=[])


def test_sweep_interior_minimum():
    # too few extra vectors cost iterations, too many cost filtered columns
    spec = bench.ExperimentSpec(model=None, ecuts=[6.0], nev=15, nex=[1, 2, 5, 10, 20, 40])
    res = bench.sweep_nex(spec)
    mv = [p.mean_matvecs for p in res.points]
    assert res.recommended not in (1, 40)
    assert min(mv) == mv[[p.nex for p in res.points].index(res.recommended)]


def test_sweep_needs_three_values():
    with pytest.raises(ValueError):
        bench.sweep_nex(bench.ExperimentSpec(model=None, ecuts=[5.0], nex=[10]))


def test_sweep_tie_goes_to_smaller_nex():
    pts = [bench.SweepPoint(nex, mv, 0, 1.0, 0, 3, 1, 0)
           for nex, mv in [(30, 100.0), (10, 100.0), (20, 150.0)]]
    assert bench.recommend_nex(pts) == 10


def test_sweep_skips_fallbacks_and_failures():
    pts = [bench.SweepPoint(10, 500.0, 0, 1, 0, 3, 1, 0),
           bench.SweepPoint(20, 400.0, 0, 1, 0, 3, 1, 1),
           bench.SweepPoint(90, 0.0, 0, 1, 0, 0, 1, 0, fallbacks=1)]
    assert bench.recommend_nex(pts) == 10
    with pytest.raises(RuntimeError):
        bench.recommend_nex(pts[1:])


def test_scaling_table():
    rows = [bench.ReportRow("kscg", 10, 5.0, p, 1, 1, 1, 1, total_s=t, run=0)
            for p, t in [(1, 8.0), (4, 4.0)]]
    rows += [bench.ReportRow("chase", 10, 5.0, p, 1, 1, 1, 1, total_s=t, run=0)
             for p, t in [(1, 2.0), (4, 1.0)]]
    pts = {(p.solver, p.ranks): p for p in bench.scaling_table(rows)}
    assert pts[("chase", 1)].speedup == 4.0
    assert pts[("chase", 4)].efficiency == 0.5
    assert pts[("kscg", 4)].efficiency == 0.5


# -- reports -------------------------------------------------------------------

def _rows(k):
    return [bench.ReportRow("chase", 100 + i, 5.0 + i / 3, 4, 15, 10, 3 + i, 900 + i,
                            read_s=0.1 * i, total_s=1.0 / (i + 1), run=i)
            for i in range(k)]


def test_csv_line_count_and_round_trip(tmp_path):
    rows = _rows(12)
    rows[3].status = "dense_fallback"
    path = write_csv(rows, tmp_path / "r.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 13 and lines[0] == bench.CSV_HEADER
    back = read_csv(path)
    assert [r.csv_fields() for r in back] == [r.csv_fields() for r in rows]
    assert back[3].status == "dense_fallback"


def test_csv_rejects_empty_rows(tmp_path):
    with pytest.raises(ValueError):
        write_csv([], tmp_path / "r.csv")
    with pytest.raises(ValueError):
        emit_report([], tmp_path)


def test_csv_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        write_csv(_rows(1), blocker / "r.csv")


def test_emit_report_writes_svg(tmp_path):
    rows = _rows(2)
    written = emit_report(rows, tmp_path)
    assert [p.name for p in written] == ["report.csv", "report_scaling.svg"]
    assert written[1].read_text().lstrip().startswith("<?xml")


def test_binding_svg_annotates_intercept(tmp_path):
    s = bse.BindingSeries()
    for x, y in zip((0.0556, 0.05, 0.0455), (1.24878, 1.25251, 1.25671)):
        s.add(x, y, 1)
    bse.extrapolate_binding(s)
    path = plot_binding_svg([s], tmp_path / "b.svg", labels=["dark"])
    assert "1.292" in path.read_text()


def test_binding_study_monotone():
    model, coupling = bse.model_from_config(SMALL_MODEL)
    study = bench.binding_study(model, coupling, [4.5, 4.75, 5.0, 5.25, 5.5],
                                nev=6, nex=6)
    eb = [p[1] for p in study.dark.points]
    assert all(b >= a - 1e-10 for a, b in zip(eb, eb[1:]))
    assert study.dark.fit is not None and not math.isnan(study.dark.fit.intercept)


@pytest.mark.parametrize("old,new,expected", [
    (336.55, 791.16, 0.43), (374.96, 374.26, 1.00), (413.86, 191.00, 2.17),
    (408.63, 97.24, 4.20), (443.46, 78.94, 5.62), (491.44, 40.38, 12.17),
    (451.09, 33.81, 13.34), (450.20, 78.17, 5.76)])
def test_io_speedup_column(old, new, expected):
    assert bench.speedup(old, new) == pytest.approx(expected, abs=5e-3)
