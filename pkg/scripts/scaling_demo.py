"""Time the assemble-and-solve pipeline over logical rank counts.

Ranks are threads in one process, so the numbers show the pipeline's
overheads and message volume rather than real parallel speedup.

Usage: python scripts/scaling_demo.py [--ecut 5.5] [--ranks 1,4,9,16] [--reps 3]
"""
import argparse
from pathlib import Path

from chasebse import bench
from chasebse.report import emit_report, plot_scaling_svg


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default=None)
    ap.add_argument("--ecut", type=float, default=5.5)
    ap.add_argument("--ranks", default="1,4,9,16")
    ap.add_argument("--files", type=int, default=4)
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--out", default="out/scaling")
    args = ap.parse_args()

    rows = []
    for ranks in (int(r) for r in args.ranks.split(",")):
        spec = bench.ExperimentSpec(model=args.model, ecuts=[args.ecut], solver="both",
                                    nev=15, nex=10, ranks=ranks, files=args.files,
                                    repetitions=args.reps)
        rows += bench.run_experiment(spec)
    out = Path(args.out)
    emit_report(rows, out, formats=("csv",))
    points = bench.scaling_table(rows)
    plot_scaling_svg(points, out / "scaling.svg")
    print(f"N = {rows[0].N}")
    print(f"{'solver':>6} {'ranks':>5} {'time (s)':>16} {'vs kscg':>8} {'efficiency':>10}")
    for p in points:
        print(f"{p.solver:>6} {p.ranks:5d} {p.mean_s:8.3f}+-{p.std_s:<6.3f} "
              f"{p.speedup:8.2f} {p.efficiency:10.2f}")
    mean_read = {r: bench.mean_std(x.read_s for x in rows if x.ranks == r)[0]
                 for r in sorted({x.ranks for x in rows})}
    print("mean read time per rank count:",
          ", ".join(f"{r}: {t * 1e3:.1f} ms" for r, t in mean_read.items()))


if __name__ == "__main__":
    main()
