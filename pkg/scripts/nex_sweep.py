"""Sweep nex on one synthetic matrix and report the matvec-optimal value.

Usage: python scripts/nex_sweep.py [--ecut 6.0] [--reps 3] [--out out/nex_sweep]
"""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from chasebse import bench  # noqa: E402
from chasebse.report import write_csv  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default=None)
    ap.add_argument("--ecut", type=float, default=6.0)
    ap.add_argument("--nev", type=int, default=15)
    ap.add_argument("--nex", default="1,2,5,10,15,20,30,40")
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--out", default="out/nex_sweep")
    args = ap.parse_args()

    spec = bench.ExperimentSpec(model=args.model, ecuts=[args.ecut], nev=args.nev,
                                nex=[int(x) for x in args.nex.split(",")],
                                repetitions=args.reps)
    res = bench.sweep_nex(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(res.rows, out / "report.csv")

    nex = [p.nex for p in res.points]
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    a1.plot(nex, [p.mean_matvecs for p in res.points], "o-")
    a1.set_xlabel("nex")
    a1.set_ylabel("matvecs")
    mean = [p.mean_seconds for p in res.points]
    std = [p.std_seconds for p in res.points]
    a2.errorbar(nex, mean, yerr=std, marker="o")
    a2.set_xlabel("nex")
    a2.set_ylabel("time (s)")
    for ax in (a1, a2):
        ax.axvline(res.recommended, color="gray", ls="--")
    fig.tight_layout()
    fig.savefig(out / "nex_sweep.svg")

    for p in res.points:
        print(f"nex={p.nex:3d}  matvecs={p.mean_matvecs:8.1f}  iterations={p.mean_iterations:4.1f}"
              f"  t={p.mean_seconds:.3f}+-{p.std_seconds:.3f}s")
    print(f"recommended nex: {res.recommended}  (reports in {out})")


if __name__ == "__main__":
    main()
