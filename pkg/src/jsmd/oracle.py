"""Brute-force amplitudes from the thin-crystal triple overlap.

In the thin-crystal limit the two-photon amplitude is, up to a constant and
a per-mode phase, the waist-plane overlap

    C = int E_p(rho) u_s*(rho, phi) u_i*(rho, phi) rho d(rho) d(phi)

with a unit-normalized Gaussian pump E_p. The angular integral is exact
(2 pi when l_s + l_i = 0, else 0); only the radial integral is quadratured.
This module shares no code with :mod:`jsmd.analytic` beyond the index and
geometry types.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import analytic
from .lg import (DEFAULT_QUADRATURE, BeamGeometry, LGIndex, QuadratureConfig,
                 QuadratureNotConverged, gaussian_field, lg_field, mode_overlap)


@dataclass(frozen=True)
class OverlapKernel:
    pump_waist: float
    signal_mode: LGIndex
    signal_waist: float
    idler_mode: LGIndex
    idler_waist: float

    @classmethod
    def from_geometry(cls, geometry: BeamGeometry, signal: LGIndex, idler: LGIndex):
        return cls(geometry.w_p, signal, geometry.w_s, idler, geometry.w_i)


def overlap_amplitude_numeric(kernel: OverlapKernel,
                              quad: QuadratureConfig = DEFAULT_QUADRATURE) -> complex:
    pump = gaussian_field(kernel.pump_waist)
    pair = lg_field(kernel.signal_mode, kernel.signal_waist) * lg_field(
        kernel.idler_mode, kernel.idler_waist)
    # <u_s u_i | E_p> = int (u_s u_i)* E_p
    return mode_overlap(pair, pump, quad)


@dataclass
class ValidationCell:
    l_s: int
    l_i: int
    p_s: int
    p_i: int
    gamma: float
    analytic: float
    numeric: Optional[float]
    deviation: Optional[float]
    error: Optional[str] = None


@dataclass
class ValidationReport:
    l_max: int
    p_max: int
    gammas: list
    tolerance: float
    cells: list = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        devs = [c.deviation for c in self.cells if c.deviation is not None]
        if any(c.error for c in self.cells):
            return math.inf
        return max(devs, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.tolerance

    def to_dict(self) -> dict:
        return {
            "grid": {"l_max": self.l_max, "p_max": self.p_max, "gammas": list(self.gammas)},
            "tolerance": self.tolerance,
            "max_deviation": self.max_deviation,
            "passed": self.passed,
            "cells": [asdict(c) for c in self.cells],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        buf.write(f"# tolerance={self.tolerance!r} max_deviation={self.max_deviation!r} "
                  f"passed={self.passed}\n")
        writer.writerow(["l_s", "l_i", "p_s", "p_i", "gamma", "analytic", "numeric",
                         "deviation", "error"])
        for c in self.cells:
            writer.writerow([c.l_s, c.l_i, c.p_s, c.p_i, _fmt(c.gamma), _fmt(c.analytic),
                             _fmt(c.numeric), _fmt(c.deviation), c.error or ""])
        return buf.getvalue()


def _fmt(x):
    return "" if x is None else format(x, ".15g")


def relative_deviation(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def _numeric_probability(args):
    kernel, quad = args
    try:
        return abs(overlap_amplitude_numeric(kernel, quad)) ** 2, None
    except QuadratureNotConverged as exc:
        return None, str(exc)


def validate_against_analytic(l_max: int, p_max: int, gamma_list: Sequence[float],
                              tolerance: float = 1e-6,
                              quad: QuadratureConfig = DEFAULT_QUADRATURE,
                              pump_waist: float = 1e-3, workers: int = 1) -> ValidationReport:
    """Compare max-normalized |C|^2 from both engines over a full (l_s, l_i, p_s, p_i) grid.

    Normalization is per gamma, over every cell sharing that gamma. Cells are
    ordered lexicographically by (l_s, l_i, p_s, p_i, gamma).
    """
    if l_max < 0 or p_max < 0:
        raise ValueError("l_max and p_max must be non-negative")
    gammas = [float(g) for g in gamma_list]
    if not gammas or any(g <= 0 for g in gammas):
        raise ValueError("gamma_list must be nonempty and positive")
    ls = range(-l_max, l_max + 1)
    ps = range(p_max + 1)
    keys = [(l_s, l_i, p_s, p_i, g) for l_s in ls for l_i in ls for p_s in ps for p_i in ps
            for g in gammas]

    jobs, slots = [], []
    analytic_vals, numeric_vals, errors = {}, {}, {}
    for key in keys:
        l_s, l_i, p_s, p_i, g = key
        geometry = BeamGeometry.from_gammas(pump_waist, g)
        analytic_vals[key] = analytic.amplitude(LGIndex(l_s, p_s), LGIndex(l_i, p_i),
                                                geometry).probability
        if l_s + l_i != 0:
            numeric_vals[key] = 0.0
            continue
        kernel = OverlapKernel.from_geometry(geometry, LGIndex(l_s, p_s), LGIndex(l_i, p_i))
        jobs.append((kernel, quad))
        slots.append(key)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(_numeric_probability, jobs))
    else:
        results = [_numeric_probability(job) for job in jobs]
    for key, (value, err) in zip(slots, results):
        numeric_vals[key] = value
        if err:
            errors[key] = err

    a_max = {g: max(v for k, v in analytic_vals.items() if k[4] == g) for g in gammas}
    n_max = {g: max((v for k, v in numeric_vals.items() if k[4] == g and v is not None),
                    default=0.0) for g in gammas}

    report = ValidationReport(l_max, p_max, gammas, tolerance)
    for key in keys:
        g = key[4]
        a = analytic_vals[key] / a_max[g] if a_max[g] > 0 else 0.0
        n = numeric_vals[key]
        if n is not None and n_max[g] > 0:
            n = n / n_max[g]
        dev = None if n is None else relative_deviation(a, n)
        report.cells.append(ValidationCell(*key, analytic=a, numeric=n, deviation=dev,
                                           error=errors.get(key)))
    return report


def normalized_numeric_matrix(geometry: BeamGeometry, l_range=(-6, 6), p_s: int = 0,
                              p_i: int = 0,
                              quad: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """Max-normalized numeric |C|^2 over (l_s, l_i), rows l_s."""
    lo, hi = l_range
    ls = np.arange(lo, hi + 1)
    grid = np.zeros((len(ls), len(ls)))
    for a, l_s in enumerate(ls):
        for b, l_i in enumerate(ls):
            if l_s + l_i == 0:
                kernel = OverlapKernel.from_geometry(geometry, LGIndex(int(l_s), p_s),
                                                     LGIndex(int(l_i), p_i))
                grid[a, b] = abs(overlap_amplitude_numeric(kernel, quad)) ** 2
    top = grid.max()
    return grid / top if top > 0 else grid
