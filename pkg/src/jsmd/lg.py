"""Laguerre-Gaussian mode mathematics at the beam waist plane.

All lengths are waist *radii* (1/e^2 field radius) in metres. Fields carry an
optional azimuthal order so overlaps between fields with declared orders can
do the angular integral exactly and only quadrature the radial part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np


class QuadratureNotConverged(RuntimeError):
    """Raised when successive node refinements disagree beyond tolerance."""


@dataclass(frozen=True, order=True)
class LGIndex:
    """Mode label LG_p^l: azimuthal index ``l`` and radial index ``p``."""

    l: int
    p: int = 0

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 0:
            raise ValueError(f"radial index p must be a non-negative integer, got {self.p}")
        if int(self.l) != self.l:
            raise ValueError(f"azimuthal index l must be an integer, got {self.l}")

    def __str__(self):
        return f"LG_{self.p}^{self.l}"


@dataclass(frozen=True)
class BeamGeometry:
    """Pump/signal/idler waist radii, wavelengths and crystal length (metres)."""

    w_p: float
    w_s: float
    w_i: float
    lambda_p: float = 405e-9
    lambda_s: float = 780e-9
    lambda_i: float = 842e-9
    L: float = 2.0e-3

    def __post_init__(self):
        for name in ("w_p", "w_s", "w_i", "lambda_p", "lambda_s", "lambda_i", "L"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a finite positive length, got {value!r}")

    @property
    def gamma_s(self) -> float:
        return self.w_p / self.w_s

    @property
    def gamma_i(self) -> float:
        return self.w_p / self.w_i

    @classmethod
    def from_gammas(cls, w_p: float, gamma_s: float, gamma_i: Optional[float] = None, **kw):
        """Build a geometry from the pump radius and normalized inverse waists."""
        if gamma_i is None:
            gamma_i = gamma_s
        if gamma_s <= 0 or gamma_i <= 0:
            raise ValueError("gamma values must be positive")
        return cls(w_p=w_p, w_s=w_p / gamma_s, w_i=w_p / gamma_i, **kw)

    def scaled(self, factor: float) -> "BeamGeometry":
        """Copy with all three waists multiplied by ``factor``."""
        return BeamGeometry(self.w_p * factor, self.w_s * factor, self.w_i * factor,
                            self.lambda_p, self.lambda_s, self.lambda_i, self.L)


@dataclass(frozen=True)
class QuadratureConfig:
    radial_nodes: int = 128
    truncation_radius_factor: float = 6.0
    azimuthal_nodes: int = 64
    target_rel_tol: float = 1e-9
    # Upper bound on node doubling before giving up.
    max_radial_nodes: int = 4096

    def __post_init__(self):
        if self.radial_nodes < 8:
            raise ValueError("radial_nodes must be >= 8")
        if self.truncation_radius_factor < 4:
            raise ValueError("truncation_radius_factor must be >= 4")
        if self.azimuthal_nodes < 1:
            raise ValueError("azimuthal_nodes must be positive")
        if not 0 < self.target_rel_tol < 1:
            raise ValueError("target_rel_tol must lie in (0, 1)")
        if self.max_radial_nodes < 2 * self.radial_nodes:
            raise ValueError("max_radial_nodes must allow at least one refinement")


DEFAULT_QUADRATURE = QuadratureConfig()


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Complex transverse field at the waist plane.

    A field either declares an azimuthal ``order`` m, in which case
    ``radial(rho)`` is its radial factor and the profile is
    ``radial(rho) * exp(i m phi)``, or it supplies a general
    ``profile_fn(rho, phi)`` and ``order`` is None.
    """

    waist_hint: float
    order: Optional[int] = None
    radial: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    profile_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = field(
        default=None, compare=False)
    # Hard radial cutoff (aperture); the field is zero beyond it.
    support: float = math.inf

    def __post_init__(self):
        if self.order is None and self.profile_fn is None:
            raise ValueError("a field needs either an azimuthal order with a radial factor "
                             "or a general profile")
        if self.order is not None and self.radial is None:
            raise ValueError("a field with an azimuthal order needs a radial factor")

    def __call__(self, rho, phi):
        rho = np.asarray(rho, dtype=float)
        phi = np.asarray(phi, dtype=float)
        if self.order is not None:
            out = self.radial(rho) * np.exp(1j * self.order * phi)
        else:
            out = np.asarray(self.profile_fn(rho, phi), dtype=complex)
        return np.where(rho <= self.support, out, 0.0)

    def conj(self) -> "ScalarField":
        if self.order is not None:
            radial = self.radial
            return ScalarField(self.waist_hint, -self.order, lambda r: np.conj(radial(r)),
                               support=self.support)
        fn = self.profile_fn
        return ScalarField(self.waist_hint, profile_fn=lambda r, ph: np.conj(fn(r, ph)),
                           support=self.support)

    def __mul__(self, other: "ScalarField") -> "ScalarField":
        hint = max(self.waist_hint, other.waist_hint)
        support = min(self.support, other.support)
        if self.order is not None and other.order is not None:
            ra, rb = self.radial, other.radial
            return ScalarField(hint, self.order + other.order, lambda r: ra(r) * rb(r),
                               support=support)
        return ScalarField(hint, profile_fn=lambda r, ph: self(r, ph) * other(r, ph),
                           support=support)

    def with_phase(self, order: int) -> "ScalarField":
        """Multiply by exp(i * order * phi), as an ideal azimuthal phase mask does."""
        if self.order is not None:
            return ScalarField(self.waist_hint, self.order + order, self.radial,
                               support=self.support)
        fn = self.profile_fn
        return ScalarField(self.waist_hint,
                           profile_fn=lambda r, ph: fn(r, ph) * np.exp(1j * order * ph),
                           support=self.support)

    def truncated(self, radius: Optional[float]) -> "ScalarField":
        """Apply a centred hard circular aperture of the given radius."""
        if radius is None:
            return self
        if radius <= 0:
            raise ValueError("aperture radius must be positive")
        return ScalarField(self.waist_hint, self.order, self.radial, self.profile_fn,
                           support=min(self.support, radius))


def assoc_laguerre(p: int, alpha: float, x):
    """Generalized Laguerre polynomial L_p^alpha(x) by three-term recurrence.

    ``x`` may be a scalar or an array; the result has the same shape.
    """
    if p < 0 or int(p) != p:
        raise ValueError(f"degree must be a non-negative integer, got {p}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if p == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - x
    for k in range(1, p):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur if cur.ndim else float(cur)


def lg_norm(index: LGIndex, waist: float) -> float:
    """Amplitude normalization sqrt(2 p! / (pi (p+|l|)!)) / w."""
    al = abs(index.l)
    log_ratio = math.lgamma(index.p + 1) - math.lgamma(index.p + al + 1)
    return math.sqrt(2.0 / math.pi * math.exp(log_ratio)) / waist


def lg_radial(index: LGIndex, waist: float) -> Callable[[np.ndarray], np.ndarray]:
    al = abs(index.l)
    norm = lg_norm(index, waist)
    p = index.p

    def radial(rho):
        x = 2.0 * np.square(rho) / waist ** 2
        return norm * np.sqrt(x) ** al * assoc_laguerre(p, al, x) * np.exp(-x / 2.0)

    return radial


def lg_field(index: LGIndex, waist: float) -> ScalarField:
    """Unit-normalized LG_p^l profile at the waist, phase exp(i l phi), no Gouy term."""
    if not waist > 0:
        raise ValueError(f"waist must be positive, got {waist}")
    return ScalarField(waist, index.l, lg_radial(index, waist))


def gaussian_field(waist: float, normalized: bool = True) -> ScalarField:
    """Fundamental Gaussian exp(-rho^2/w^2), optionally unit-normalized."""
    if not waist > 0:
        raise ValueError(f"waist must be positive, got {waist}")
    norm = math.sqrt(2.0 / math.pi) / waist if normalized else 1.0
    return ScalarField(waist, 0, lambda r: norm * np.exp(-np.square(r) / waist ** 2))


@lru_cache(maxsize=64)
def _legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def radial_integral(fn: Callable[[np.ndarray], np.ndarray], radius: float, n: int):
    """Gauss-Legendre approximation of int_0^radius fn(rho) rho d(rho).

    Returns (value, integral of |fn| rho) so callers can judge cancellation.
    """
    x, w = _legendre(n)
    rho = 0.5 * radius * (x + 1.0)
    vals = fn(rho) * rho
    w = 0.5 * radius * w
    return np.sum(w * vals), np.sum(w * np.abs(vals))


def _planar_integral(fn2d, radius: float, n_rad: int, n_az: int):
    x, w = _legendre(n_rad)
    rho = 0.5 * radius * (x + 1.0)
    wr = 0.5 * radius * w * rho
    # Periodic trapezoid rule in phi is spectrally accurate for smooth integrands.
    phi = 2.0 * math.pi * np.arange(n_az) / n_az
    vals = fn2d(rho[:, None], phi[None, :])
    dphi = 2.0 * math.pi / n_az
    return (np.sum(wr[:, None] * vals) * dphi,
            np.sum(wr[:, None] * np.abs(vals)) * dphi)


def refine_until_converged(evaluate: Callable[[int], tuple], quad: QuadratureConfig,
                           what: str = "overlap"):
    """Double the node count until two successive estimates agree.

    ``evaluate(n)`` returns (value, scale); agreement means
    |v_2n - v_n| <= target_rel_tol * max(|v_2n|, scale).
    """
    n = quad.radial_nodes
    coarse, _ = evaluate(n)
    while 2 * n <= quad.max_radial_nodes:
        n *= 2
        fine, scale = evaluate(n)
        if abs(fine - coarse) <= quad.target_rel_tol * max(abs(fine), scale):
            return fine
        coarse = fine
    raise QuadratureNotConverged(
        f"{what} did not converge to rel tol {quad.target_rel_tol} "
        f"with up to {quad.max_radial_nodes} radial nodes")


def mode_overlap(a: ScalarField, b: ScalarField,
                 quad: QuadratureConfig = DEFAULT_QUADRATURE) -> complex:
    """Inner product <a|b> = int a*(rho, phi) b(rho, phi) rho d(rho) d(phi).

    With declared azimuthal orders on both fields the angular integral is
    done exactly (2 pi or 0). Otherwise a 2-D product rule is used with
    ``quad.azimuthal_nodes`` angles, doubled in step with the radial nodes.
    """
    radius = min(quad.truncation_radius_factor * max(a.waist_hint, b.waist_hint),
                 a.support, b.support)
    if a.order is not None and b.order is not None:
        if a.order != b.order:
            return 0j
        ra, rb = a.radial, b.radial

        def evaluate(n):
            value, scale = radial_integral(lambda r: np.conj(ra(r)) * rb(r), radius, n)
            return 2.0 * math.pi * value, 2.0 * math.pi * scale

        return complex(refine_until_converged(evaluate, quad))

    def evaluate(n):
        n_az = quad.azimuthal_nodes * n // quad.radial_nodes
        return _planar_integral(lambda r, ph: np.conj(a(r, ph)) * b(r, ph), radius, n, n_az)

    return complex(refine_until_converged(evaluate, quad))


def field_power(a: ScalarField, quad: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    return mode_overlap(a, a, quad).real
