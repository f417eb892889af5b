"""Compare the closed-form JSMD against direct quadrature over an (l, p, gamma) grid."""
import argparse
import os
import sys
import time

from jsmd.cli import write_atomic
from jsmd.lg import QuadratureConfig
from jsmd.oracle import validate_against_analytic


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--l-max", type=int, default=6)
    parser.add_argument("--p-max", type=int, default=2)
    parser.add_argument("--gammas", type=float, nargs="+", default=[0.5, 1.0, 2.03, 3.05])
    parser.add_argument("--tolerance", type=float, default=1e-6)
    parser.add_argument("--radial-nodes", type=int, default=128)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default="out/validate")
    args = parser.parse_args()

    start = time.perf_counter()
    report = validate_against_analytic(args.l_max, args.p_max, args.gammas, args.tolerance,
                                       QuadratureConfig(radial_nodes=args.radial_nodes),
                                       workers=args.workers)
    elapsed = time.perf_counter() - start
    write_atomic(os.path.join(args.out, "validation.json"), report.to_json())
    worst = max((c for c in report.cells if not c.error), key=lambda c: c.deviation)
    print(f"{len(report.cells)} cells in {elapsed:.2f} s, max deviation "
          f"{report.max_deviation:.3e} at l_s={worst.l_s} p_s={worst.p_s} p_i={worst.p_i} "
          f"gamma={worst.gamma}")
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
