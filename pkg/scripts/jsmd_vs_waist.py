"""JSMD matrices for a 2 mm pump and three signal/idler waist diameters.

Writes one CSV per waist and prints the antidiagonal and its participation
ratio. With --plot, also saves a three-panel heat map (needs matplotlib).
"""
import argparse
import os

from jsmd.analytic import jsmd_matrix, participation_ratio
from jsmd.cli import matrix_csv, write_atomic
from jsmd.lg import BeamGeometry

DIAMETERS_MM = (0.72, 1.08, 1.35)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="out/jsmd_vs_waist")
    parser.add_argument("--pump-diameter-mm", type=float, default=2.0)
    parser.add_argument("--l-max", type=int, default=6)
    parser.add_argument("--plot", action="store_true")
    args = parser.parse_args()

    matrices = []
    for d in DIAMETERS_MM:
        g = BeamGeometry(w_p=args.pump_diameter_mm / 2 * 1e-3, w_s=d / 2 * 1e-3,
                         w_i=d / 2 * 1e-3)
        m = jsmd_matrix(g, (-args.l_max, args.l_max))
        matrices.append((d, m))
        write_atomic(os.path.join(args.out, f"jsmd_{d:.2f}mm.csv"), matrix_csv(m))
        diag = " ".join(f"{v:.3f}" for v in m.antidiagonal())
        print(f"w_s = w_i = {d:.2f} mm  gamma = {g.gamma_s:.3f}  "
              f"PR = {participation_ratio(m.antidiagonal()):.3f}\n  {diag}")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, axes = plt.subplots(1, 3, figsize=(12, 4))
        for ax, (d, m) in zip(axes, matrices):
            lo, hi = m.l_values[0], m.l_values[-1]
            im = ax.imshow(m.values, origin="lower", extent=(lo - .5, hi + .5, lo - .5, hi + .5),
                           vmin=0, vmax=1)
            ax.set(title=f"w_s = w_i = {d} mm", xlabel="l_i", ylabel="l_s")
        fig.colorbar(im, ax=axes.tolist())
        fig.savefig(os.path.join(args.out, "jsmd_vs_waist.png"), dpi=150)


if __name__ == "__main__":
    main()
