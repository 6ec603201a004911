"""CSV and SVG reports."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bench import CSV_HEADER, ReportRow  # noqa: E402

_INT = {"N", "ranks", "nev", "nex", "iterations", "matvecs", "run"}
_STR = {"solver"}


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def flags_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".flags.csv")


def write_csv(rows, path):
    """Write ``rows`` with the fixed header; statuses go to a sidecar file.

    Floats are written with ``repr`` so they parse back bit for bit.
    """
    if not rows:
        raise ValueError("no rows to report")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER.split(","))
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r.csv_fields()])
    try:
        _atomic_write(path, buf.getvalue())
        flags = "row,status\n" + "".join(
            f"{i},{r.status}\n" for i, r in enumerate(rows))
        _atomic_write(flags_path(path), flags)
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc}") from exc
    return Path(path)


def read_csv(path):
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if ",".join(reader.fieldnames or []) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header")
        rows = []
        for rec in reader:
            kw = {k: (v if k in _STR else int(v) if k in _INT else float(v))
                  for k, v in rec.items()}
            rows.append(ReportRow(**kw))
    fp = flags_path(path)
    if fp.exists():
        with open(fp, newline="") as f:
            for rec in csv.DictReader(f):
                rows[int(rec["row"])].status = rec["status"]
    return rows


def _svg_figure():
    plt.rcParams["svg.fonttype"] = "none"  # keep text searchable
    plt.rcParams["svg.hashsalt"] = "chasebse"
    return plt.subplots(figsize=(6, 4))


def plot_scaling_svg(points, path):
    """Log-log time against ranks, one line per solver."""
    fig, ax = _svg_figure()
    for solver in sorted({p.solver for p in points}):
        sel = sorted((p for p in points if p.solver == solver), key=lambda p: p.ranks)
        ax.errorbar([p.ranks for p in sel], [p.mean_s for p in sel],
                    yerr=[p.std_s for p in sel], marker="o", label=solver)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("logical ranks")
    ax.set_ylabel("time (s)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def plot_binding_svg(series, path, labels=None):
    """E_b against 1/ecut with the fitted line extended to 1/ecut = 0."""
    fig, ax = _svg_figure()
    labels = labels or [f"state {s.points[0][2]}" for s in series]
    for s, label in zip(series, labels):
        x = [p[0] for p in s.points]
        y = [p[1] for p in s.points]
        line = ax.plot(x, y, "o", label=label)[0]
        if s.fit is not None:
            xs = [0.0, max(x)]
            ax.plot(xs, [s.fit.intercept + s.fit.slope * v for v in xs], "--",
                    color=line.get_color())
            ax.annotate(f"{s.fit.intercept:.3f} eV", (0.0, s.fit.intercept),
                        textcoords="offset points", xytext=(5, 5))
    ax.set_xlabel("1/E_cut (1/eV)")
    ax.set_ylabel("E_b (eV)")
    ax.set_xlim(left=0.0)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def emit_report(rows, out_dir, formats=("csv", "svg-lines"), name="report"):
    """Write ``<name>.csv`` and/or ``<name>_scaling.svg`` into ``out_dir``."""
    from .bench import scaling_table

    if not rows:
        raise ValueError("no rows to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        written.append(write_csv(rows, out_dir / f"{name}.csv"))
    if "svg-lines" in formats:
        written.append(plot_scaling_svg(scaling_table(rows),
                                        out_dir / f"{name}_scaling.svg"))
    return written
