"""Closed-form joint spatial mode distribution for a Gaussian pump, thin crystal.

The amplitude for signal LG_{p_s}^{l} and idler LG_{p_i}^{-l} is

    A * (1 - gs^2 + gi^2)^{p_s} (1 + gs^2 - gi^2)^{p_i} (-2 gs gi)^{|l|}
      / (1 + gs^2 + gi^2)^{p_s + p_i + |l|}
      * 2F1(-p_i, -p_s; -p_i - p_s - |l|; z)

with z = (1 - (gs^2 + gi^2)^2) / (1 - (gs^2 - gi^2)^2), gs = w_p/w_s and
gi = w_p/w_i. The overall scale is arbitrary; every distribution returned
here is relative and declares its normalization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .lg import BeamGeometry, LGIndex

NORMALIZATIONS = ("global-max", "unit-sum")

#: w_p / sqrt(lambda_p L) at or above this counts as thin-crystal.
THIN_CRYSTAL_THRESHOLD = 10.0


class PoleInC(ValueError):
    """The lower parameter c reaches 0 or a negative integer inside the series."""


@dataclass(frozen=True)
class ModeAmplitude:
    index_s: LGIndex
    index_i: LGIndex
    value: float

    @property
    def probability(self) -> float:
        return self.value * self.value


@dataclass
class JsmdMatrix:
    """|C|^2 over (l_s, l_i) at fixed radial indices; rows are l_s."""

    l_values: np.ndarray
    p_s: int
    p_i: int
    values: np.ndarray
    normalization: str
    gamma_s: float
    gamma_i: float

    def cell(self, l_s: int, l_i: int) -> float:
        lo = int(self.l_values[0])
        return float(self.values[l_s - lo, l_i - lo])

    def antidiagonal(self) -> np.ndarray:
        """Cells with l_i = -l_s, ordered by l_s; zeros where -l_s is off-grid."""
        out = np.zeros(len(self.l_values))
        lookup = {int(l): k for k, l in enumerate(self.l_values)}
        for k, l in enumerate(self.l_values):
            j = lookup.get(-int(l))
            if j is not None:
                out[k] = self.values[k, j]
        return out


@dataclass
class SpectrumCurve:
    l: int
    gammas: np.ndarray
    weights: np.ndarray

    @property
    def samples(self):
        return list(zip(self.gammas.tolist(), self.weights.tolist()))


def hyp2f1_terminating(a: int, b: int, c: float, x: float) -> float:
    """Finite sum of 2F1(a, b; c; x) for non-positive integers a, b.

    The series stops after min(|a|, |b|) + 1 terms. Raises PoleInC if a
    factor c + j (j < min(|a|, |b|)) of the Pochhammer symbol (c)_k is zero.
    """
    if int(a) != a or int(b) != b or a > 0 or b > 0:
        raise ValueError(f"a and b must be non-positive integers, got a={a}, b={b}")
    n_terms = min(-int(a), -int(b))
    for j in range(n_terms):
        if c + j == 0:
            raise PoleInC(f"c={c} makes (c)_k vanish at k={j + 1} within the series")
    total = 1.0
    term = 1.0
    for k in range(n_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * x
        total += term
    return total


def coeff_A(p_s: int, p_i: int, l: int) -> float:
    """(p_s+p_i+|l|)! / sqrt(p_s! p_i! (p_s+|l|)! (p_i+|l|)!), via log-gamma."""
    if p_s < 0 or p_i < 0:
        raise ValueError("radial indices must be non-negative")
    al = abs(l)
    lg = math.lgamma
    log_value = lg(p_s + p_i + al + 1) - 0.5 * (
        lg(p_s + 1) + lg(p_i + 1) + lg(p_s + al + 1) + lg(p_i + al + 1))
    return math.exp(log_value)


def hypergeometric_argument(gamma_s: float, gamma_i: float) -> float:
    s2, i2 = gamma_s ** 2, gamma_i ** 2
    return (1.0 - (s2 + i2) ** 2) / (1.0 - (s2 - i2) ** 2)


def _radial_factor(p_s: int, p_i: int, al: int, gamma_s: float, gamma_i: float) -> float:
    # (1-gs^2+gi^2)^{p_s} (1+gs^2-gi^2)^{p_i} 2F1(...; z)
    s2, i2 = gamma_s ** 2, gamma_i ** 2
    u = 1.0 - s2 + i2
    v = 1.0 + s2 - i2
    c = -(p_s + p_i + al)
    if u * v != 0.0:
        return u ** p_s * v ** p_i * hyp2f1_terminating(-p_i, -p_s, c, hypergeometric_argument(
            gamma_s, gamma_i))
    # z is singular when u v = 0; multiply the prefactor into each series term instead.
    w = 1.0 - (s2 + i2) ** 2
    total = 0.0
    coef = 1.0
    for k in range(min(p_s, p_i) + 1):
        if k:
            coef *= (-p_i + k - 1) * (-p_s + k - 1) / ((c + k - 1) * k)
        total += coef * u ** (p_s - k) * v ** (p_i - k) * w ** k
    return total


def amplitude(index_s: LGIndex, index_i: LGIndex, geometry: BeamGeometry) -> ModeAmplitude:
    """Relative amplitude C for the signal/idler mode pair; zero unless l_s = -l_i."""
    if index_s.l + index_i.l != 0:
        return ModeAmplitude(index_s, index_i, 0.0)
    return ModeAmplitude(index_s, index_i,
                         amplitude_value(index_s.p, index_i.p, index_s.l,
                                         geometry.gamma_s, geometry.gamma_i))


def amplitude_value(p_s: int, p_i: int, l: int, gamma_s: float, gamma_i: float) -> float:
    """Signed amplitude for signal LG_{p_s}^{l}, idler LG_{p_i}^{-l}."""
    al = abs(l)
    denom = 1.0 + gamma_s ** 2 + gamma_i ** 2
    return (coeff_A(p_s, p_i, al)
            * (-2.0 * gamma_s * gamma_i) ** al
            / denom ** (p_s + p_i + al)
            * _radial_factor(p_s, p_i, al, gamma_s, gamma_i))


def probability_p0(l: int, gamma: float) -> float:
    """(2 g^2 / (1 + 2 g^2))^(2|l|): p = 0 weight relative to l = 0."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    g2 = gamma * gamma
    return (2.0 * g2 / (1.0 + 2.0 * g2)) ** (2 * abs(l))


def normalize(values: np.ndarray, normalization: str) -> np.ndarray:
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}, got {normalization!r}")
    values = np.asarray(values, dtype=float)
    ref = values.max() if normalization == "global-max" else values.sum()
    return values / ref if ref > 0 else values.copy()


def jsmd_matrix(geometry: BeamGeometry, l_range: tuple[int, int] = (-6, 6), p_s: int = 0,
                p_i: int = 0, normalization: str = "global-max") -> JsmdMatrix:
    lo, hi = l_range
    if hi < lo:
        raise ValueError(f"l_range is empty: {l_range}")
    if p_s < 0 or p_i < 0:
        raise ValueError("radial indices must be non-negative")
    l_values = np.arange(lo, hi + 1)
    grid = np.zeros((len(l_values), len(l_values)))
    for a, l_s in enumerate(l_values):
        for b, l_i in enumerate(l_values):
            amp = amplitude(LGIndex(int(l_s), p_s), LGIndex(int(l_i), p_i), geometry)
            grid[a, b] = amp.probability
    return JsmdMatrix(l_values, p_s, p_i, normalize(grid, normalization), normalization,
                      geometry.gamma_s, geometry.gamma_i)


def participation_ratio(weights: Iterable[float]) -> float:
    """(sum w)^2 / sum w^2, an effective number of occupied modes."""
    w = np.asarray(list(weights), dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))


def spectrum_vs_gamma(l_list: Sequence[int], gamma_grid: Sequence[float]) -> list[SpectrumCurve]:
    if len(l_list) == 0 or len(gamma_grid) == 0:
        raise ValueError("l_list and gamma_grid must be nonempty")
    gammas = np.asarray(gamma_grid, dtype=float)
    return [SpectrumCurve(int(l), gammas, np.array([probability_p0(l, g) for g in gammas]))
            for l in l_list]


def thin_crystal_figure(geometry: BeamGeometry) -> float:
    """w_p / sqrt(lambda_p L); large values mean the crystal is thin."""
    return geometry.w_p / math.sqrt(geometry.lambda_p * geometry.L)
