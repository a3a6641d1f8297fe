"""Problem complexity D*, the optimal sampling distribution and the lower bound.

For a configuration with odd arm ``i`` the optimal proportions put mass
``lambda_i`` on the odd arm and split the rest evenly.  The inner minimisation
over the confusing alternative is solved by the moment-matching point

    kappa_tilde = lambda_hat * kappa1 + (1 - lambda_hat) * kappa2,
    lambda_hat  = lambda_i / (lambda_i + (1 - lambda_i) r),   r = (K-2)/(K-1),

which leaves a concave one-dimensional objective ``phi`` in ``lambda_i``.  Its
derivative D(kappa1 || kappa_tilde) - r D(kappa2 || kappa_tilde) is strictly
decreasing, so the maximiser is a root bracketed by [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expfam import ExponentialFamily, InvalidParameterError

PHI_TOL = 1e-10
WIDTH_TOL = 1e-12
_MAX_ITER = 200


class DegenerateConfigurationError(ValueError):
    """Odd and non-odd parameters coincide, so D* = 0 has no maximiser."""


@dataclass(frozen=True, eq=False)
class ArmConfiguration:
    """Ground truth of an episode: which arm is odd and the two parameters.

    Arms are indexed from 0.
    """

    family: ExponentialFamily
    odd_index: int
    eta1: np.ndarray
    eta2: np.ndarray
    K: int

    def __post_init__(self):
        object.__setattr__(self, "eta1", self.family._check_eta(self.eta1))
        object.__setattr__(self, "eta2", self.family._check_eta(self.eta2))
        if self.K < 3:
            raise InvalidParameterError(f"need K >= 3 arms, got {self.K}")
        if not 0 <= self.odd_index < self.K:
            raise InvalidParameterError(f"odd_index {self.odd_index} not in [0, {self.K})")

    @classmethod
    def from_expectation(cls, family, odd_index, kappa1, kappa2, K):
        return cls(family, odd_index, family.eta_of_kappa(kappa1), family.eta_of_kappa(kappa2), K)

    @property
    def kappa1(self) -> np.ndarray:
        return self.family._kappa(self.eta1)

    @property
    def kappa2(self) -> np.ndarray:
        return self.family._kappa(self.eta2)

    def arm_eta(self, arm: int) -> np.ndarray:
        return self.eta1 if arm == self.odd_index else self.eta2

    def relabel(self, odd_index: int) -> "ArmConfiguration":
        return ArmConfiguration(self.family, odd_index, self.eta1, self.eta2, self.K)

    def describe(self) -> dict:
        return {
            "family": self.family.describe(),
            "odd_index": self.odd_index,
            "eta1": self.eta1.tolist(),
            "eta2": self.eta2.tolist(),
            "K": self.K,
        }


@dataclass(frozen=True, eq=False)
class ComplexityResult:
    d_star: float
    lambda_star: np.ndarray
    lambda_hat_star: float
    kappa_tilde: np.ndarray
    eta_tilde: np.ndarray

    @property
    def odd_mass(self) -> float:
        return float(self.lambda_star.max())


def ratio(K: int) -> float:
    """r = (K-2)/(K-1), the weight of the non-odd arms in the alternative."""
    return (K - 2) / (K - 1)


def lambda_hat(lambda_i: float, K: int) -> float:
    r = ratio(K)
    return lambda_i / (lambda_i + (1.0 - lambda_i) * r)


def lambda_from_hat(lam_hat: float, K: int) -> float:
    """Inverse of :func:`lambda_hat`."""
    r = ratio(K)
    return r * lam_hat / (1.0 - lam_hat + r * lam_hat)


def kappa_tilde(lambda_i: float, kappa1, kappa2, K: int) -> np.ndarray:
    lh = lambda_hat(lambda_i, K)
    return lh * np.asarray(kappa1, dtype=float) + (1.0 - lh) * np.asarray(kappa2, dtype=float)


class _Objective:
    """phi and its derivative for fixed (family, kappa1, kappa2, K)."""

    def __init__(self, family, kappa1, kappa2, K):
        self.family = family
        self.k1 = family.as_param(kappa1)
        self.k2 = family.as_param(kappa2)
        self.K = K
        self.r = ratio(K)
        self.F1 = float(family._dual(self.k1))
        self.F2 = float(family._dual(self.k2))

    def divergences(self, lambda_i):
        """(D(kappa1||kappa_tilde), D(kappa2||kappa_tilde), kappa_tilde, eta_tilde)."""
        lh = lambda_i / (lambda_i + (1.0 - lambda_i) * self.r)
        kt = lh * self.k1 + (1.0 - lh) * self.k2
        et = self.family._eta(kt)
        Ft = float(self.family._dual(kt))
        d1 = self.F1 - Ft - float(et @ (self.k1 - kt))
        d2 = self.F2 - Ft - float(et @ (self.k2 - kt))
        return max(d1, 0.0), max(d2, 0.0), kt, et

    def phi(self, lambda_i):
        d1, d2, _, _ = self.divergences(lambda_i)
        return lambda_i * d1 + (1.0 - lambda_i) * self.r * d2

    def derivative(self, lambda_i):
        d1, d2, _, _ = self.divergences(lambda_i)
        return d1 - self.r * d2

    def slope(self, lambda_i):
        """d/d lambda of ``derivative``, from the Hessian of F at kappa_tilde."""
        r = self.r
        denom = lambda_i + (1.0 - lambda_i) * r
        lh = lambda_i / denom
        kt = lh * self.k1 + (1.0 - lh) * self.k2
        H = self.family._hessian_dual(kt)
        dk = self.k1 - self.k2
        g = (self.k1 - kt) - r * (self.k2 - kt)
        dlh = r / denom**2
        return -float(g @ H @ dk) * dlh


def _objective(config: ArmConfiguration) -> _Objective:
    return _Objective(config.family, config.kappa1, config.kappa2, config.K)


def phi(lambda_i: float, config: ArmConfiguration) -> float:
    """Value of the max-min objective at odd-arm mass ``lambda_i``."""
    return _objective(config).phi(lambda_i)


def phi_derivative(lambda_i: float, config: ArmConfiguration) -> float:
    return _objective(config).derivative(lambda_i)


def solve_odd_mass(family: ExponentialFamily, kappa1, kappa2, K: int,
                   x0: float = 0.5) -> tuple[float, _Objective]:
    """Root of the decreasing derivative of phi on (0, 1).

    Bracketing bisection; each iteration first tries a Newton step from the
    analytic slope and falls back to the midpoint when it leaves the bracket.
    Stops when |phi'| < 1e-10 or the bracket is narrower than 1e-12.  ``x0``
    is the first trial point (a warm start when solving a sequence of
    nearby problems).
    """
    obj = _Objective(family, kappa1, kappa2, K)
    if np.array_equal(obj.k1, obj.k2):
        raise DegenerateConfigurationError("kappa1 == kappa2: odd arm indistinguishable")
    lo, hi = 0.0, 1.0
    x = x0 if 0.0 < x0 < 1.0 else 0.5
    for _ in range(_MAX_ITER):
        g = obj.derivative(x)
        if abs(g) < PHI_TOL:
            break
        if g > 0:
            lo = x
        else:
            hi = x
        if hi - lo < WIDTH_TOL:
            x = 0.5 * (lo + hi)
            break
        s = obj.slope(x)
        x_new = x - g / s if s < 0 else math.nan
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        x = x_new
    return x, obj


def solve_lambda_star(config: ArmConfiguration) -> ComplexityResult:
    """D*, lambda*, lambda_hat*, kappa_tilde and eta_tilde for ``config``."""
    if np.array_equal(config.eta1, config.eta2):
        raise DegenerateConfigurationError("eta1 == eta2: odd arm indistinguishable")
    lam, obj = solve_odd_mass(config.family, config.kappa1, config.kappa2, config.K)
    d1, d2, kt, et = obj.divergences(lam)
    lam_vec = np.full(config.K, (1.0 - lam) / (config.K - 1))
    lam_vec[config.odd_index] = lam
    return ComplexityResult(
        d_star=lam * d1 + (1.0 - lam) * obj.r * d2,
        lambda_star=lam_vec,
        lambda_hat_star=lambda_hat(lam, config.K),
        kappa_tilde=kt,
        eta_tilde=et,
    )


def binary_kl(u: float) -> float:
    """d_b(u, 1-u) = u log(u/(1-u)) + (1-u) log((1-u)/u)."""
    if not 0.0 < u < 1.0:
        raise InvalidParameterError(f"binary_kl needs 0 < u < 1, got {u}")
    return (1.0 - 2.0 * u) * math.log((1.0 - u) / u)


def lower_bound(alpha_max: float, d_star: float) -> float:
    """Smallest expected stopping time (and total cost) of any admissible policy."""
    if d_star <= 0:
        raise InvalidParameterError("d_star must be positive")
    return binary_kl(alpha_max) / d_star


def lower_bound_asymptote(log_L: float, d_star: float) -> float:
    """log(L) / D*, the small-alpha form of :func:`lower_bound` with L = 1/alpha."""
    return log_L / d_star
