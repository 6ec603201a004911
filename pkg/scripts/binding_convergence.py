"""Binding energy of the lowest and an optically active state versus cutoff.

Solves the synthetic exciton Hamiltonian over a ladder of cutoffs, fits
E_b against 1/ecut over the largest cutoffs and plots the extrapolation.

Usage: python scripts/binding_convergence.py [--ecuts 4.5,4.75,...] [--out out/binding]
"""
import argparse
import time
from pathlib import Path

from chasebse import bench
from chasebse.report import plot_binding_svg


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default=None)
    ap.add_argument("--ecuts", default="4.5,4.75,5.0,5.25,5.5,5.75,6.0")
    ap.add_argument("--fit-last", type=int, default=3,
                    help="number of largest cutoffs in the linear fit")
    ap.add_argument("--solver", choices=("chase", "kscg"), default="chase")
    ap.add_argument("--out", default="out/binding")
    args = ap.parse_args()

    ecuts = sorted(float(x) for x in args.ecuts.split(","))
    model, coupling = bench.ExperimentSpec(model=args.model, ecuts=ecuts).load_model()
    window = (0.0, 1.0 / ecuts[-args.fit_last])
    t0 = time.perf_counter()
    study = bench.binding_study(model, coupling, ecuts, nev=15, nex=10,
                                solver=args.solver, window=window)
    print(f"{'1/ecut':>8} {'N':>5} {'E_b dark':>10} {'E_b active':>11}")
    for (x, dark, _), (_, act, _), n in zip(study.dark.points, study.active.points, study.sizes):
        print(f"{x:8.4f} {n:5d} {dark:10.5f} {act:11.5f}")
    for name, s in (("dark", study.dark), ("active", study.active)):
        print(f"{name:>7} extrapolated: {s.fit.intercept:.4f} eV")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plot_binding_svg([study.dark, study.active], out / "binding.svg",
                     labels=["dark (state 1)", "active (state 4)"])
    print(f"done in {time.perf_counter() - t0:.1f} s; plot in {out / 'binding.svg'}")


if __name__ == "__main__":
    main()
