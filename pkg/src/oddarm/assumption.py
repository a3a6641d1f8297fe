"""Numerical checks that the optimal odd-arm mass stays away from 0 and 1.

Along the segment kappa(u) = kappa2 + u (kappa1 - kappa2) both relative
entropies to kappa_tilde = kappa(lam_hat) are curvature integrals:

    D(kappa1 || kappa_tilde) = int_{lam_hat}^1 (1 - u) q(u) du
    D(kappa2 || kappa_tilde) = int_0^{lam_hat}  u      q(u) du

with q(u) = dk' H_F(kappa(u)) dk.  The sufficient condition for an upper bound
on lam_hat* is that D1 - r D2 < 0 (r = 1/2) for every pair of parameters; the
r = 2 lower-bound condition is the same statement with the roles swapped.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .expfam import (
    ExponentialFamily,
    GaussianKnownVar,
    GaussianZeroMeanUnknownVar,
    InvalidParameterError,
    Poisson,
)

QUAD_TOL = 1e-9
# root of (1 - x)^2 / 2 = x^2 / 4, the lower end of every analytic window
SUFFICIENT_LOWER = math.sqrt(2.0) / (1.0 + math.sqrt(2.0))
NUMERIC_ONLY = "numeric-only"


class InvalidGridError(InvalidParameterError):
    """A scan point or segment leaves the expectation domain."""


def _segment_ok(family, k1, k2) -> bool:
    pts = np.stack([k1, 0.5 * (k1 + k2), k2])
    return bool(np.all(family._in_expectation(pts)))


def curvature(family: ExponentialFamily, kappa1, kappa2, u):
    """q(u) = dk' H_F(kappa2 + u dk) dk with dk = kappa1 - kappa2."""
    k1, k2 = family.as_param(kappa1), family.as_param(kappa2)
    dk = k1 - k2
    u = np.asarray(u, dtype=float)
    H = family._hessian_dual(k2 + u[..., None] * dk)
    return np.einsum("i,...ij,j->...", dk, H, dk)


def integral_form(family: ExponentialFamily, kappa1, kappa2, lambda_hat: float,
                  r: float = 0.5) -> float:
    """int_{lh}^1 (1-u) q du - r int_0^{lh} u q du by adaptive quadrature."""
    k1, k2 = family.as_param(kappa1), family.as_param(kappa2)
    if not 0.0 <= lambda_hat <= 1.0:
        raise InvalidParameterError(f"lambda_hat must lie in [0, 1], got {lambda_hat}")
    if not _segment_ok(family, k1, k2):
        raise InvalidGridError(f"segment {k1.tolist()} -> {k2.tolist()} leaves the domain")

    def q(u):
        return float(curvature(family, k1, k2, u))

    upper, lower = 0.0, 0.0
    if lambda_hat < 1.0:
        upper, _ = integrate.quad(lambda u: (1.0 - u) * q(u), lambda_hat, 1.0,
                                  epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    if lambda_hat > 0.0:
        lower, _ = integrate.quad(lambda u: u * q(u), 0.0, lambda_hat,
                                  epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    return upper - r * lower


def direct_form(family: ExponentialFamily, kappa1, kappa2, lambda_hat, r: float = 0.5):
    """D(kappa1 || kappa_tilde) - r D(kappa2 || kappa_tilde) from closed-form KL.

    Broadcasts over leading axes of the parameters and over ``lambda_hat``.
    """
    k1, k2 = family.as_param(kappa1), family.as_param(kappa2)
    lh = np.asarray(lambda_hat, dtype=float)[..., None]
    kt = lh * k1 + (1.0 - lh) * k2
    return family._kl_kappa(k1, kt) - r * family._kl_kappa(k2, kt)


def reflected(family: ExponentialFamily, kappa1, kappa2, lambda_hat: float) -> tuple[float, float]:
    """(r=2 form at (k1, k2, lh) / 2, r=1/2 form at (k2, k1, 1 - lh)); they sum to zero."""
    a = 0.5 * integral_form(family, kappa1, kappa2, lambda_hat, r=2.0)
    b = integral_form(family, kappa2, kappa1, 1.0 - lambda_hat, r=0.5)
    return a, b


@dataclass(frozen=True, eq=False)
class ScanSpec:
    """Grid of (kappa1, kappa2) pairs and lambda_hat values to maximise over."""

    family: ExponentialFamily
    kappa1: np.ndarray  # (M, dim)
    kappa2: np.ndarray  # (M, dim)
    lambda_hat_grid: np.ndarray
    r: float = 0.5

    def __post_init__(self):
        k1 = self.family.as_param(self.kappa1)
        k2 = self.family.as_param(self.kappa2)
        k1, k2 = np.atleast_2d(k1), np.atleast_2d(k2)
        lh = np.atleast_1d(np.asarray(self.lambda_hat_grid, dtype=float))
        if k1.shape != k2.shape or len(k1) == 0:
            raise InvalidGridError("kappa grids must be nonempty and of equal shape")
        if lh.size == 0 or np.any((lh <= 0) | (lh > 1)):
            raise InvalidGridError("lambda_hat grid must be nonempty within (0, 1]")
        if np.any(np.all(k1 == k2, axis=-1)):
            raise InvalidGridError("kappa grid contains pairs with kappa1 == kappa2")
        bad = ~(self.family._in_expectation(k1) & self.family._in_expectation(k2))
        if np.any(bad):
            idx = int(np.flatnonzero(bad)[0])
            raise InvalidGridError(f"grid point {idx} outside the expectation domain")
        object.__setattr__(self, "kappa1", k1)
        object.__setattr__(self, "kappa2", k2)
        object.__setattr__(self, "lambda_hat_grid", lh)

    @classmethod
    def from_values(cls, family, values, lambda_hat_grid, r=0.5) -> "ScanSpec":
        """All ordered pairs of distinct grid points ``values`` (each a parameter)."""
        pts = np.asarray(values, dtype=float)
        if family.dim == 1:
            pts = pts.reshape(-1, 1)
        pts = np.atleast_2d(family.as_param(pts))
        a, b = np.meshgrid(np.arange(len(pts)), np.arange(len(pts)), indexing="ij")
        keep = a != b
        return cls(family, pts[a[keep]], pts[b[keep]], lambda_hat_grid, r)


@dataclass(frozen=True)
class ScanRow:
    lambda_hat: float
    max_value: float
    argmax_kappa1: tuple
    argmax_kappa2: tuple


def scan(spec: ScanSpec, method: str = "direct") -> list[ScanRow]:
    """Maximum over the kappa grid of the sufficient-condition expression, per lambda_hat.

    ``method="direct"`` uses closed-form KL (vectorised); ``"quadrature"``
    evaluates :func:`integral_form` point by point.  The two agree to
    quadrature tolerance.
    """
    fam = spec.family
    rows = []
    for lh in spec.lambda_hat_grid:
        if method == "direct":
            vals = direct_form(fam, spec.kappa1, spec.kappa2, lh, spec.r)
        elif method == "quadrature":
            vals = np.array([integral_form(fam, a, b, lh, spec.r)
                             for a, b in zip(spec.kappa1, spec.kappa2)])
        else:
            raise ValueError(f"unknown scan method {method!r}")
        k = int(np.argmax(vals))
        rows.append(ScanRow(float(lh), float(vals[k]),
                            tuple(spec.kappa1[k].tolist()), tuple(spec.kappa2[k].tolist())))
    return rows


def write_scan(rows: list[ScanRow], stream) -> None:
    w = csv.writer(stream)
    w.writerow(["lambda_hat", "max_value", "argmax_kappa1", "argmax_kappa2"])
    for row in rows:
        w.writerow([repr(row.lambda_hat), repr(row.max_value),
                    " ".join(map(repr, row.argmax_kappa1)), " ".join(map(repr, row.argmax_kappa2))])


def analytic_thresholds(family: ExponentialFamily):
    """Window of lambda_hat in which the sufficient condition is known to hold.

    Returns a (low, high) tuple, or ``NUMERIC_ONLY`` for families that need a scan.
    """
    if isinstance(family, Poisson):
        return (0.59, 0.82)
    if isinstance(family, (GaussianKnownVar, GaussianZeroMeanUnknownVar)):
        return (0.59, 1.0)
    return NUMERIC_ONLY


def vector_gaussian_preset(lambda_hat_grid=None) -> ScanSpec:
    """Coarse default grid: means 0..20 and variances 1..21 in unit steps, all pairs."""
    from .expfam import VectorGaussian

    fam = VectorGaussian()
    means = np.arange(0.0, 21.0)
    variances = np.arange(1.0, 22.0)
    pts = np.array([(m, m * m + v) for m, v in itertools.product(means, variances)])
    lh = np.round(np.arange(0.1, 1.0001, 0.1), 10) if lambda_hat_grid is None else lambda_hat_grid
    return ScanSpec.from_values(fam, pts, lh)


def bernoulli_preset(lambda_hat_grid=None) -> ScanSpec:
    from .expfam import Bernoulli

    values = np.round(np.arange(0.05, 0.951, 0.05), 10)
    lh = np.round(np.arange(0.1, 1.0001, 0.1), 10) if lambda_hat_grid is None else lambda_hat_grid
    return ScanSpec.from_values(Bernoulli(), values, lh)


def poisson_preset(lambda_hat_grid=None) -> ScanSpec:
    values = np.round(np.arange(0.5, 10.001, 0.5), 10)
    lh = np.round(np.arange(0.1, 1.0001, 0.1), 10) if lambda_hat_grid is None else lambda_hat_grid
    return ScanSpec.from_values(Poisson(), values, lh)


PRESETS = {
    "bernoulli": bernoulli_preset,
    "poisson": poisson_preset,
    "vector_gaussian": vector_gaussian_preset,
}
