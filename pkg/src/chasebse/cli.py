"""Command line entry point: ``chasebse <subcommand> [options]``.

Exit status is 0 on success, 2 when some solve converged only partially
and 1 on error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import bench, bse, linalg, matrix_io
from .report import emit_report, plot_binding_svg, plot_scaling_svg, write_csv

log = logging.getLogger("chasebse")

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _add_common(p, ranks_list=False, nex_list=False):
    p.add_argument("--model", help="model config file (key = value lines)")
    p.add_argument("--ecut", type=_floats, default=[5.0],
                   help="comma-separated BSE energy cutoffs in eV")
    p.add_argument("--solver", choices=("chase", "kscg", "both"), default="chase")
    p.add_argument("--nev", type=int, default=15)
    if nex_list:
        p.add_argument("--nex", type=_ints, default=[5, 10, 20, 40])
    else:
        p.add_argument("--nex", type=int, default=10)
    if ranks_list:
        p.add_argument("--ranks", type=_ints, default=[1, 4, 9, 16])
    else:
        p.add_argument("--ranks", type=int, default=1)
    p.add_argument("--files", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--deterministic", action="store_true",
                   help="fixed reduction order; timing columns written as 0")
    p.add_argument("--serialize-readers", action="store_true",
                   help="allow only one file reader at a time")
    p.add_argument("--out", default="out")


def _spec(args, **over):
    kw = dict(model=args.model, ecuts=args.ecut, solver=args.solver,
              nev=args.nev, nex=args.nex, ranks=args.ranks, files=args.files,
              tol=args.tol, seed=args.seed, repetitions=args.reps,
              deterministic=args.deterministic,
              serialize_readers=args.serialize_readers)
    kw.update(over)
    return bench.ExperimentSpec(**kw)


def _status_code(rows):
    if any(r.status == "failed" for r in rows):
        return EXIT_ERROR
    if any(r.status == "partial" for r in rows):
        return EXIT_PARTIAL
    return EXIT_OK


def _progress(row):
    log.info("%s N=%d ecut=%g nex=%d run=%d: %s, %d iterations, %d matvecs",
             row.solver, row.N, row.ecut, row.nex, row.run, row.status,
             row.iterations, row.matvecs)


def cmd_generate(args):
    model, coupling = _spec(args).load_model()
    out = Path(args.out)
    for ecut in args.ecut:
        basis, H = bench.build_matrix(model, coupling, ecut)
        target = out / f"ecut_{ecut:g}"
        matrix_io.write_striped(H, target, args.files)
        bse.write_model_config(target / "model.cfg", model, coupling)
        print(f"ecut={ecut:g} eV: N={basis.size}, {args.files} file(s) in {target}")
    return EXIT_OK


def cmd_solve(args):
    spec = _spec(args)
    out = Path(args.out)
    rows = bench.run_experiment(spec, progress=_progress)
    write_csv(rows, out / "report.csv")
    with open(out / "eigenvalues.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["solver", "ecut", "nex", "run", "index", "value"])
        for r in rows:
            vals = [] if r.eigenvalues is None else r.eigenvalues
            for i, v in enumerate(vals, 1):
                w.writerow([r.solver, repr(r.ecut), r.nex, r.run, i, repr(float(v))])
    for r in rows:
        lows = "" if r.eigenvalues is None else np.array2string(
            r.eigenvalues[:5], precision=6)
        print(f"{r.solver:5s} N={r.N:5d} ecut={r.ecut:g} {r.status:14s} "
              f"it={r.iterations:3d} matvecs={r.matvecs:6d} lowest={lows}")
    return _status_code(rows)


def cmd_sweep_nex(args):
    res = bench.sweep_nex(_spec(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(res.rows, out / "report.csv")
    with open(out / "sweep.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["nex", "mean_matvecs", "std_matvecs", "mean_s", "std_s",
                    "mean_iterations", "runs", "failures", "fallbacks"])
        for p in res.points:
            w.writerow([p.nex, p.mean_matvecs, p.std_matvecs, p.mean_seconds,
                        p.std_seconds, p.mean_iterations, p.runs, p.failures,
                        p.fallbacks])
    print(f"{'nex':>5} {'matvecs':>12} {'seconds':>16} {'iters':>6}")
    for p in res.points:
        print(f"{p.nex:5d} {p.mean_matvecs:12.1f} "
              f"{p.mean_seconds:8.3f}+-{p.std_seconds:<7.3f} {p.mean_iterations:6.1f}")
    print(f"recommended nex: {res.recommended}")
    return _status_code(res.rows)


def cmd_scaling(args):
    rows = []
    for ranks in args.ranks:
        rows += bench.run_experiment(_spec(args, ranks=ranks), progress=_progress)
    out = Path(args.out)
    emit_report(rows, out, formats=("csv",))
    points = bench.scaling_table(rows)
    if not args.deterministic:
        plot_scaling_svg(points, out / "report_scaling.svg")
    with open(out / "scaling.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["solver", "ranks", "mean_s", "std_s", "speedup", "efficiency"])
        for p in points:
            w.writerow([p.solver, p.ranks, p.mean_s, p.std_s, p.speedup, p.efficiency])
    for p in points:
        print(f"{p.solver:5s} ranks={p.ranks:3d} t={p.mean_s:.3f}+-{p.std_s:.3f}s "
              f"speedup={p.speedup:.2f} efficiency={p.efficiency:.2f}")
    return _status_code(rows)


def _read_series(path):
    series = {}
    with open(path, newline="") as f:
        for rec in csv.DictReader(f):
            state = int(rec.get("state") or 1)
            series.setdefault(state, bse.BindingSeries())
            series[state].points.append(
                (float(rec["inverse_ecut"]), float(rec["e_b"]), state))
    for s in series.values():
        s.points.sort(key=lambda p: -p[0])
    return [series[k] for k in sorted(series)]


def cmd_extrapolate(args):
    window = tuple(args.window) if args.window else None
    if args.series:
        series = _read_series(args.series)
        for s in series:
            bse.extrapolate_binding(s, window)
    else:
        model, coupling = _spec(args).load_model()
        with linalg.deterministic(args.deterministic):
            study = bench.binding_study(model, coupling, args.ecut, nev=args.nev,
                                        nex=args.nex, tol=args.tol, seed=args.seed,
                                        solver="kscg" if args.solver == "kscg" else "chase",
                                        active_index=args.active_index,
                                        window=window)
        series = [study.dark, study.active]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "binding.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["inverse_ecut", "e_b", "state"])
        for s in series:
            w.writerows(s.points)
    plot_binding_svg(series, out / "binding.svg")
    for s in series:
        fit = s.fit
        print(f"state {s.points[0][2]}: E_b(inf) = {fit.intercept:.4f} eV "
              f"(slope {fit.slope:.4f}, r^2 {fit.r_squared:.4f})")
    return EXIT_OK


def cmd_verify(args):
    """I/O identity over rank counts and solver agreement with a dense oracle."""
    ok = True
    model, coupling = _spec(args).load_model()
    ecut = args.ecut[0]
    basis, H = bench.build_matrix(model, coupling, ecut)
    ranks = args.ranks if isinstance(args.ranks, list) else [args.ranks]
    with tempfile.TemporaryDirectory() as tmp:
        matrix_io.write_striped(H, tmp, args.files)
        for r in ranks:
            try:
                G, _ = matrix_io.load_distributed(tmp, r, args.serialize_readers)
                same = np.array_equal(G.view(np.float64), H.view(np.float64))
            except Exception as exc:
                print(f"io ranks={r}: ERROR {exc}")
                ok = False
                continue
            print(f"io ranks={r}: {'PASS' if same else 'FAIL'} (bitwise identity)")
            ok &= same
    exact = np.linalg.eigvalsh(H)[:args.nev]
    solvers = ["chase", "kscg"] if args.solver == "both" else [args.solver]
    for solver in solvers:
        res, status = bench.run_solver(solver, H, args.nev, args.nex, args.tol, args.seed)
        err = float(np.max(np.abs(res.values - exact[:len(res.values)])))
        good = status in ("ok", "dense_fallback") and err <= 1e-8
        print(f"{solver} N={basis.size}: {'PASS' if good else 'FAIL'} "
              f"(max |dlambda| = {err:.2e}, {status})")
        ok &= good
    return EXIT_OK if ok else EXIT_ERROR


def build_parser():
    parser = argparse.ArgumentParser(prog="chasebse", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write striped matrix files per cutoff")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="assemble and solve, write report.csv")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep-nex", help="find the nex minimizing matvecs")
    _add_common(p, nex_list=True)
    p.set_defaults(func=cmd_sweep_nex)

    p = sub.add_parser("scaling", help="time the pipeline over rank counts")
    _add_common(p, ranks_list=True)
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("extrapolate", help="binding energy against 1/ecut")
    _add_common(p)
    p.add_argument("--series", help="CSV with inverse_ecut,e_b[,state] columns")
    p.add_argument("--window", type=_floats, help="lo,hi range of 1/ecut to fit")
    p.add_argument("--active-index", type=int, default=4)
    p.set_defaults(func=cmd_extrapolate)

    p = sub.add_parser("verify", help="I/O identity and dense-oracle checks")
    _add_common(p, ranks_list=True)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        log.error("%s", exc)
        if args.verbose:
            raise
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
