"""p = 0 OAM spectra at gamma = 2.03 and 3.05, plus weight versus gamma for l = 1, 2, 3."""
import argparse
import os

import numpy as np

from jsmd.analytic import spectrum_vs_gamma
from jsmd.cli import spectrum_csv, sweep_csv, write_atomic


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/spectrum_vs_gamma")
    parser.add_argument("--gammas", type=float, nargs="+", default=[2.03, 3.05])
    parser.add_argument("--plot", action="store_true")
    args = parser.parse_args()

    l_values = list(range(-6, 7))
    curves = spectrum_vs_gamma(l_values, args.gammas)
    inset = spectrum_vs_gamma([1, 2, 3], np.linspace(0.5, 4.0, 71))
    write_atomic(os.path.join(args.out, "spectrum.csv"), spectrum_csv(curves))
    write_atomic(os.path.join(args.out, "spectrum_sweep.csv"), sweep_csv(inset))

    print("l     " + "  ".join(f"g={g:<6g}" for g in args.gammas))
    for c in curves:
        print(f"{c.l:+3d}   " + "  ".join(f"{w:.6f}" for w in c.weights))

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, (ax, inset_ax) = plt.subplots(1, 2, figsize=(10, 4))
        for k, g in enumerate(args.gammas):
            ax.plot(l_values, [c.weights[k] for c in curves], "o-", label=f"gamma = {g}")
        ax.set(xlabel="l", ylabel="weight relative to l = 0")
        ax.legend()
        for c in inset:
            inset_ax.plot(c.gammas, c.weights, label=f"l = {c.l}")
        inset_ax.set(xlabel="gamma", ylabel="weight")
        inset_ax.legend()
        fig.tight_layout()
        fig.savefig(os.path.join(args.out, "spectrum_vs_gamma.png"), dpi=150)


if __name__ == "__main__":
    main()
