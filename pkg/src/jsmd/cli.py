"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 numeric failure, 4 validation
tolerance failure (the report is still written).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
import tempfile
from datetime import datetime, timezone

import numpy as np

from . import __version__, analytic, oracle, setsim
from .config import ConfigError, RunConfig, load_config_file
from .lg import QuadratureNotConverged

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4

# Reference value quoted for the 2 mm pump / 405 nm / 2 mm BBO setup; it does not
# follow from w_p / sqrt(lambda_p L) with either reading of "2 mm".
QUOTED_THIN_CRYSTAL_FIGURE = 94.8


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x: float) -> str:
    return format(float(x), ".15g")


def matrix_csv(matrix: analytic.JsmdMatrix) -> str:
    buf = io.StringIO()
    buf.write(f"# gamma_s={fmt(matrix.gamma_s)} gamma_i={fmt(matrix.gamma_i)}\n")
    buf.write(f"# p_s={matrix.p_s} p_i={matrix.p_i} normalization={matrix.normalization}\n")
    buf.write(f"# jsmd {__version__} numpy {np.__version__}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["l_s\\l_i"] + [int(l) for l in matrix.l_values])
    for l_s, row in zip(matrix.l_values, matrix.values):
        writer.writerow([int(l_s)] + [fmt(v) for v in row])
    return buf.getvalue()


def read_matrix_csv(text: str):
    """Parse a matrix CSV back into (l_values, values)."""
    rows = [r for r in csv.reader(line for line in text.splitlines() if not line.startswith("#"))]
    l_values = np.array([int(v) for v in rows[0][1:]])
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return l_values, values


def matrix_json(matrix: analytic.JsmdMatrix) -> str:
    doc = {
        "metadata": {"tool_version": __version__, "gamma_s": matrix.gamma_s,
                     "gamma_i": matrix.gamma_i, "p_s": matrix.p_s, "p_i": matrix.p_i,
                     "normalization": matrix.normalization},
        "l_values": [int(l) for l in matrix.l_values],
        "values": matrix.values.tolist(),
    }
    return json.dumps(doc, indent=2) + "\n"


def _emit(args, out_dir: str, stem: str, csv_text=None, json_text=None) -> list:
    written = []
    if csv_text is not None and args.format in ("csv", "both"):
        path = os.path.join(out_dir, stem + ".csv")
        write_atomic(path, csv_text)
        written.append(path)
    if json_text is not None and args.format in ("json", "both"):
        path = os.path.join(out_dir, stem + ".json")
        write_atomic(path, json_text)
        written.append(path)
    return written


def _sidecar(args, out_dir: str, command: str, written: list, extra=None) -> None:
    if args.no_metadata:
        return
    doc = {
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "tool_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": args.config,
        "outputs": [os.path.basename(p) for p in written],
    }
    doc.update(extra or {})
    write_atomic(os.path.join(out_dir, f"{command}.meta.json"), json.dumps(doc, indent=2) + "\n")


def cmd_jsmd(cfg: RunConfig, args) -> int:
    matrix = analytic.jsmd_matrix(cfg.geometry, cfg.l_range, cfg.p_s, cfg.p_i, cfg.normalization)
    written = _emit(args, args.out, "jsmd", matrix_csv(matrix), matrix_json(matrix))
    _sidecar(args, args.out, "jsmd", written)
    print(f"wrote {len(matrix.l_values)}x{len(matrix.l_values)} JSMD "
          f"(gamma_s={matrix.gamma_s:.4g}, gamma_i={matrix.gamma_i:.4g}) to {args.out}")
    return EXIT_OK


def spectrum_csv(curves) -> str:
    buf = io.StringIO()
    buf.write("# weight = (2 g^2 / (1 + 2 g^2))^(2|l|), p_s = p_i = 0, relative to l = 0\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["gamma", "l", "weight"])
    for k in range(len(curves[0].gammas)):
        for c in curves:
            writer.writerow([fmt(c.gammas[k]), c.l, fmt(c.weights[k])])
    return buf.getvalue()


def sweep_csv(curves) -> str:
    buf = io.StringIO()
    buf.write("# columns: weight for each l versus gamma\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["gamma"] + [f"l={c.l}" for c in curves])
    for k, g in enumerate(curves[0].gammas):
        writer.writerow([fmt(g)] + [fmt(c.weights[k]) for c in curves])
    return buf.getvalue()


def _curves_json(curves) -> str:
    return json.dumps({"curves": [{"l": c.l, "gammas": c.gammas.tolist(),
                                   "weights": c.weights.tolist()} for c in curves]},
                      indent=2) + "\n"


def cmd_spectrum(cfg: RunConfig, args) -> int:
    spec = cfg.spectrum
    curves = analytic.spectrum_vs_gamma(spec.l_values, spec.gammas)
    written = _emit(args, args.out, "spectrum", spectrum_csv(curves), _curves_json(curves))
    if spec.sweep is not None:
        start, stop, num = spec.sweep
        sweep = analytic.spectrum_vs_gamma(spec.sweep_l_values, np.linspace(start, stop, num))
        written += _emit(args, args.out, "spectrum_sweep", sweep_csv(sweep), _curves_json(sweep))
    _sidecar(args, args.out, "spectrum", written)
    print(f"wrote spectra for gamma={spec.gammas} to {args.out}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, args) -> int:
    v = cfg.validate
    report = oracle.validate_against_analytic(v.l_max, v.p_max, v.gammas, v.tolerance,
                                              cfg.quadrature, workers=v.workers)
    written = _emit(args, args.out, "validation", report.to_csv(), report.to_json())
    _sidecar(args, args.out, "validate", written)
    verdict = "PASS" if report.passed else "FAIL"
    print(f"validation {verdict}: max deviation {report.max_deviation:.3e} "
          f"(tolerance {v.tolerance:.1e}, {len(report.cells)} cells)")
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_simulate(cfg: RunConfig, args) -> int:
    experiment = cfg.experiment(args.seed)
    est = setsim.estimate_jsmd(experiment, workers=args.workers)
    written = _emit(args, args.out, "simulate", est.to_csv(), est.to_json())
    _sidecar(args, args.out, "simulate", written, {"rng_seed": int(experiment.rng_seed)})
    print(f"simulated {est.normalized.shape[0]}x{est.normalized.shape[1]} SET grid "
          f"(rng_seed={experiment.rng_seed}, coupling={experiment.coupling}) to {args.out}")
    return EXIT_OK


def thin_crystal_report(cfg: RunConfig) -> str:
    g = cfg.geometry
    value = analytic.thin_crystal_figure(g)
    verdict = "valid" if value >= cfg.thin_crystal_threshold else "invalid"
    return "\n".join([
        f"w_p/sqrt(lambda_p L) = {value:.2f}",
        f"threshold = {cfg.thin_crystal_threshold:g}",
        f"thin-crystal approximation: {verdict}",
        f"note: w_p = {g.w_p * 1e3:g} mm radius, lambda_p = {g.lambda_p * 1e9:g} nm, "
        f"L = {g.L * 1e3:g} mm",
        f"note: the commonly quoted figure for the 2 mm pump / 405 nm / 2 mm crystal setup is "
        f"{QUOTED_THIN_CRYSTAL_FIGURE}; the formula gives 70.27 for a 2 mm radius and "
        f"35.14 for a 2 mm diameter, so that value is not reproduced",
    ])


def cmd_thin_crystal(cfg: RunConfig, args) -> int:
    print(thin_crystal_report(cfg))
    return EXIT_OK


COMMANDS = {
    "jsmd": cmd_jsmd,
    "spectrum": cmd_spectrum,
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "thin-crystal": cmd_thin_crystal,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jsmd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"jsmd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="YAML run configuration")
        p.add_argument("--out", metavar="DIR", help="output directory (default: output.dir or .)")
        p.add_argument("--format", choices=("csv", "json", "both"), default=None)
        p.add_argument("--seed", type=int, metavar="U64", help="override simulate.rng_seed")
        p.add_argument("--no-metadata", action="store_true",
                       help="skip the timestamped <command>.meta.json sidecar")
        p.add_argument("--workers", type=int, default=1, help="threads for simulate")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        if args.workers < 1:
            raise ConfigError("--workers", "must be at least 1")
        cfg = load_config_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args.out = args.out or cfg.out_dir or "."
    args.format = args.format or cfg.format
    try:
        return COMMANDS[args.command](cfg, args)
    except (QuadratureNotConverged, analytic.PoleInC, FloatingPointError, OverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
