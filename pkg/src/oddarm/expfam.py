"""Exponential-family numerics for the five supported observation models.

Every family is written in canonical form

    f(x | eta) = h(x) exp(eta . T(x) - A(eta))

and exposes the log-partition ``A``, its convex conjugate ``F``, the gradient
maps between natural (``eta``) and expectation (``kappa``) coordinates,
relative entropy in both coordinate systems, a sampler and the closed-form
log-normalizer of the conjugate prior over ``eta``.

Parameters are numpy arrays whose trailing axis has length ``dim``; leading
axes broadcast, so most methods also work on batches.  Scalar families accept
plain floats.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, expit, gammaln, logit

# Margin used to pull estimated expectation parameters off the domain boundary.
EPS_DOM = 1e-8

_LOG_2PI = math.log(2.0 * math.pi)


class InvalidParameterError(ValueError):
    """Parameter outside the open domain of the family."""


@dataclass(frozen=True)
class HyperParams:
    """Conjugate-prior hyper-parameters: pseudo sufficient statistic and count."""

    tau: np.ndarray
    n0: float

    def __post_init__(self):
        object.__setattr__(self, "tau", np.atleast_1d(np.asarray(self.tau, dtype=float)))
        object.__setattr__(self, "n0", float(self.n0))

    def __eq__(self, other):
        if not isinstance(other, HyperParams):
            return NotImplemented
        return self.n0 == other.n0 and np.array_equal(self.tau, other.tau)

    def __hash__(self):
        return hash((tuple(self.tau.tolist()), self.n0))


class ExponentialFamily(ABC):
    """Common interface; subclasses implement the unchecked ``_`` kernels."""

    name: str = ""
    dim: int = 1
    # Fewest samples per group for which the ML plug-in F(kappa_hat) is finite.
    min_samples: int = 1

    # -- kernels over arrays of shape (..., dim) ----------------------------
    @abstractmethod
    def _log_partition(self, eta): ...

    @abstractmethod
    def _kappa(self, eta): ...

    @abstractmethod
    def _eta(self, kappa): ...

    @abstractmethod
    def _dual(self, kappa): ...

    @abstractmethod
    def _hessian_dual(self, kappa): ...

    @abstractmethod
    def _log_normalizer(self, tau, n0): ...

    @abstractmethod
    def _in_natural(self, eta): ...

    @abstractmethod
    def _in_expectation(self, kappa): ...

    @abstractmethod
    def _proper(self, tau, n0): ...

    @abstractmethod
    def clamp(self, kappa):
        """Project ``kappa`` into the expectation domain with margin EPS_DOM."""

    @abstractmethod
    def sufficient_stats(self, x) -> np.ndarray:
        """T(x) for a 1-d array of observations, shape (len(x), dim)."""

    def sufficient_stat(self, x) -> np.ndarray:
        """T(x) as a length-``dim`` vector."""
        return self.sufficient_stats(np.asarray([x], dtype=float))[0]

    @abstractmethod
    def log_base_measure(self, x) -> float: ...

    @abstractmethod
    def in_support(self, x) -> bool: ...

    @abstractmethod
    def _draw(self, eta: np.ndarray, rng: np.random.Generator, size): ...

    @property
    @abstractmethod
    def default_hyper(self) -> HyperParams: ...

    # -- helpers ------------------------------------------------------------
    def as_param(self, value) -> np.ndarray:
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            arr = arr[None]
        if arr.shape[-1] != self.dim:
            raise InvalidParameterError(
                f"{self.name}: expected trailing dimension {self.dim}, got shape {arr.shape}"
            )
        return arr

    def _check_eta(self, eta):
        eta = self.as_param(eta)
        if not np.all(self._in_natural(eta)):
            raise InvalidParameterError(f"{self.name}: eta={eta.tolist()} outside natural domain")
        return eta

    def _check_kappa(self, kappa):
        kappa = self.as_param(kappa)
        if not np.all(self._in_expectation(kappa)):
            raise InvalidParameterError(
                f"{self.name}: kappa={kappa.tolist()} outside expectation domain"
            )
        return kappa

    def in_natural_domain(self, eta) -> bool:
        return bool(np.all(self._in_natural(self.as_param(eta))))

    def in_expectation_domain(self, kappa) -> bool:
        return bool(np.all(self._in_expectation(self.as_param(kappa))))

    def is_proper(self, hyper: HyperParams) -> bool:
        tau = self.as_param(hyper.tau)
        return bool(np.all(self._proper(tau, np.asarray(hyper.n0, dtype=float))))

    # -- public checked API -------------------------------------------------
    def log_partition(self, eta):
        """A(eta)."""
        return _unwrap(self._log_partition(self._check_eta(eta)))

    def dual(self, kappa):
        """F(kappa) = sup_eta {eta . kappa - A(eta)}."""
        return _unwrap(self._dual(self._check_kappa(kappa)))

    def kappa_of_eta(self, eta) -> np.ndarray:
        return self._kappa(self._check_eta(eta))

    def eta_of_kappa(self, kappa) -> np.ndarray:
        return self._eta(self._check_kappa(kappa))

    def kl(self, eta1, eta2):
        """D(eta1 || eta2) = (eta1 - eta2) . kappa1 - A(eta1) + A(eta2)."""
        eta1, eta2 = self._check_eta(eta1), self._check_eta(eta2)
        k1 = self._kappa(eta1)
        val = np.sum((eta1 - eta2) * k1, axis=-1) - self._log_partition(eta1) + self._log_partition(eta2)
        return _unwrap(np.maximum(val, 0.0))

    def kl_expectation(self, kappa1, kappa2):
        """Relative entropy from expectation parameters."""
        k1, k2 = self._check_kappa(kappa1), self._check_kappa(kappa2)
        return _unwrap(np.maximum(self._kl_kappa(k1, k2), 0.0))

    def _kl_kappa(self, k1, k2):
        return np.sum((k2 - k1) * self._eta(k2), axis=-1) + self._dual(k1) - self._dual(k2)

    def hessian_dual(self, kappa) -> np.ndarray:
        """Hessian of F at ``kappa``, shape (..., dim, dim)."""
        return self._hessian_dual(self._check_kappa(kappa))

    def log_prior_normalizer(self, hyper: HyperParams) -> float:
        """-log H(tau, n0) = log of the integral of exp(tau . eta - n0 A(eta)) over eta."""
        tau = self.as_param(hyper.tau)
        n0 = np.asarray(hyper.n0, dtype=float)
        if not np.all(self._proper(tau, n0)):
            raise InvalidParameterError(
                f"{self.name}: improper prior tau={tau.tolist()}, n0={hyper.n0}"
            )
        return _unwrap(self._log_normalizer(tau, n0))

    def sample(self, eta, rng: np.random.Generator, size=None):
        """Draw observations from f(. | eta)."""
        draws = np.asarray(self._draw(self._check_eta(eta), rng, size), dtype=float)
        return float(draws) if size is None else draws

    def log_density(self, x, eta) -> float:
        eta = self._check_eta(eta)
        if not self.in_support(x):
            return -math.inf
        t = self.sufficient_stat(x)
        return float(self.log_base_measure(x) + t @ eta - self._log_partition(eta))

    def describe(self) -> dict:
        return {"kind": self.name}


def _unwrap(value):
    """Return 0-d results as Python floats, leave batches as arrays."""
    arr = np.asarray(value)
    return float(arr) if arr.ndim == 0 else arr


@dataclass(frozen=True)
class Poisson(ExponentialFamily):
    """Poisson counts: eta = log(rate), T(x) = x, A = exp(eta)."""

    name: str = field(default="poisson", init=False)
    dim: int = field(default=1, init=False)

    def _log_partition(self, eta):
        return np.exp(eta[..., 0])

    def _kappa(self, eta):
        return np.exp(eta)

    def _eta(self, kappa):
        return np.log(kappa)

    def _dual(self, kappa):
        k = kappa[..., 0]
        return k * np.log(k) - k

    def _hessian_dual(self, kappa):
        return (1.0 / kappa)[..., None]

    def _log_normalizer(self, tau, n0):
        t = tau[..., 0]
        return gammaln(t) - t * np.log(n0)

    def _in_natural(self, eta):
        return np.isfinite(eta[..., 0])

    def _in_expectation(self, kappa):
        return kappa[..., 0] > 0

    def _proper(self, tau, n0):
        return (tau[..., 0] > 0) & (n0 > 0)

    def clamp(self, kappa):
        return np.maximum(kappa, EPS_DOM)

    def sufficient_stats(self, x):
        return np.asarray(x, dtype=float)[:, None]

    def log_base_measure(self, x):
        return -math.lgamma(x + 1.0)

    def in_support(self, x):
        return x >= 0 and float(x).is_integer()

    def _draw(self, eta, rng, size):
        return rng.poisson(math.exp(eta[0]), size=size)

    @property
    def default_hyper(self):
        return HyperParams([1.0], 1.0)

    def natural_param(self, rate: float) -> np.ndarray:
        return np.array([math.log(rate)])


@dataclass(frozen=True)
class Bernoulli(ExponentialFamily):
    """Bernoulli trials: eta = logit(p), T(x) = x, A = log(1 + e^eta)."""

    name: str = field(default="bernoulli", init=False)
    dim: int = field(default=1, init=False)

    def _log_partition(self, eta):
        return np.logaddexp(0.0, eta[..., 0])

    def _kappa(self, eta):
        return expit(eta)

    def _eta(self, kappa):
        return logit(kappa)

    def _dual(self, kappa):
        p = kappa[..., 0]
        return p * np.log(p) + (1.0 - p) * np.log1p(-p)

    def _hessian_dual(self, kappa):
        return (1.0 / (kappa * (1.0 - kappa)))[..., None]

    def _log_normalizer(self, tau, n0):
        t = tau[..., 0]
        return betaln(t, n0 - t)

    def _in_natural(self, eta):
        return np.isfinite(eta[..., 0])

    def _in_expectation(self, kappa):
        return (kappa[..., 0] > 0) & (kappa[..., 0] < 1)

    def _proper(self, tau, n0):
        return (tau[..., 0] > 0) & (tau[..., 0] < n0)

    def clamp(self, kappa):
        return np.clip(kappa, EPS_DOM, 1.0 - EPS_DOM)

    def sufficient_stats(self, x):
        return np.asarray(x, dtype=float)[:, None]

    def log_base_measure(self, x):
        return 0.0

    def in_support(self, x):
        return x in (0, 1)

    def _draw(self, eta, rng, size):
        return rng.random(size) < expit(eta[0])

    @property
    def default_hyper(self):
        return HyperParams([1.0], 2.0)

    def natural_param(self, p: float) -> np.ndarray:
        return np.array([math.log(p / (1.0 - p))])


@dataclass(frozen=True)
class GaussianKnownVar(ExponentialFamily):
    """Gaussian with unknown mean and known standard deviation ``sigma``.

    Observations are scaled so that eta = kappa = mean / sigma, T(x) = x / sigma
    and A(eta) = eta^2 / 2.
    """

    sigma: float = 1.0
    name: str = field(default="gaussian_known_var", init=False)
    dim: int = field(default=1, init=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidParameterError(f"sigma must be positive, got {self.sigma}")

    def _log_partition(self, eta):
        return 0.5 * eta[..., 0] ** 2

    def _kappa(self, eta):
        return np.array(eta, dtype=float, copy=True)

    def _eta(self, kappa):
        return np.array(kappa, dtype=float, copy=True)

    def _dual(self, kappa):
        return 0.5 * kappa[..., 0] ** 2

    def _hessian_dual(self, kappa):
        return np.ones(kappa.shape + (1,))

    def _log_normalizer(self, tau, n0):
        t = tau[..., 0]
        return 0.5 * (_LOG_2PI - np.log(n0)) + t**2 / (2.0 * n0)

    def _in_natural(self, eta):
        return np.isfinite(eta[..., 0])

    def _in_expectation(self, kappa):
        return np.isfinite(kappa[..., 0])

    def _proper(self, tau, n0):
        return np.isfinite(tau[..., 0]) & (n0 > 0)

    def clamp(self, kappa):
        return kappa

    def sufficient_stats(self, x):
        return np.asarray(x, dtype=float)[:, None] / self.sigma

    def log_base_measure(self, x):
        z = float(x) / self.sigma
        return -0.5 * z * z - 0.5 * _LOG_2PI - math.log(self.sigma)

    def in_support(self, x):
        return math.isfinite(x)

    def _draw(self, eta, rng, size):
        return rng.normal(eta[0] * self.sigma, self.sigma, size=size)

    @property
    def default_hyper(self):
        return HyperParams([0.0], 1.0)

    def natural_param(self, mean: float) -> np.ndarray:
        return np.array([mean / self.sigma])

    def describe(self):
        return {"kind": self.name, "sigma": self.sigma}


@dataclass(frozen=True)
class GaussianZeroMeanUnknownVar(ExponentialFamily):
    """Zero-mean Gaussian with unknown variance: eta = -1/(2 var), T(x) = x^2."""

    name: str = field(default="gaussian_zero_mean", init=False)
    dim: int = field(default=1, init=False)

    def _log_partition(self, eta):
        return -0.5 * np.log(-2.0 * eta[..., 0])

    def _kappa(self, eta):
        return -0.5 / eta

    def _eta(self, kappa):
        return -0.5 / kappa

    def _dual(self, kappa):
        return -0.5 * (1.0 + np.log(kappa[..., 0]))

    def _hessian_dual(self, kappa):
        return (0.5 / kappa**2)[..., None]

    def _log_normalizer(self, tau, n0):
        t = tau[..., 0]
        a = 0.5 * n0 + 1.0
        return gammaln(a) + 0.5 * n0 * math.log(2.0) - a * np.log(t)

    def _in_natural(self, eta):
        return eta[..., 0] < 0

    def _in_expectation(self, kappa):
        return kappa[..., 0] > 0

    def _proper(self, tau, n0):
        return (tau[..., 0] > 0) & (n0 > 0)

    def clamp(self, kappa):
        return np.maximum(kappa, EPS_DOM)

    def sufficient_stats(self, x):
        return np.asarray(x, dtype=float)[:, None] ** 2

    def log_base_measure(self, x):
        return -0.5 * _LOG_2PI

    def in_support(self, x):
        return math.isfinite(x)

    def _draw(self, eta, rng, size):
        return rng.normal(0.0, math.sqrt(-0.5 / eta[0]), size=size)

    @property
    def default_hyper(self):
        return HyperParams([1.0], 1.0)

    def natural_param(self, variance: float) -> np.ndarray:
        return np.array([-0.5 / variance])


@dataclass(frozen=True)
class VectorGaussian(ExponentialFamily):
    """Gaussian with unknown mean and variance.

    eta = (mean/var, -1/(2 var)), T(x) = (x, x^2), kappa = (mean, mean^2 + var).
    """

    name: str = field(default="vector_gaussian", init=False)
    dim: int = field(default=2, init=False)
    min_samples: int = field(default=2, init=False)

    def _log_partition(self, eta):
        e1, e2 = eta[..., 0], eta[..., 1]
        return -(e1**2) / (4.0 * e2) - 0.5 * np.log(-2.0 * e2)

    def _kappa(self, eta):
        e1, e2 = eta[..., 0], eta[..., 1]
        mean = -e1 / (2.0 * e2)
        var = -0.5 / e2
        return np.stack([mean, mean**2 + var], axis=-1)

    def _eta(self, kappa):
        k1, k2 = kappa[..., 0], kappa[..., 1]
        var = k2 - k1**2
        return np.stack([k1 / var, -0.5 / var], axis=-1)

    def _dual(self, kappa):
        return -0.5 - 0.5 * np.log(kappa[..., 1] - kappa[..., 0] ** 2)

    def _hessian_dual(self, kappa):
        k1, k2 = kappa[..., 0], kappa[..., 1]
        v2 = (k2 - k1**2) ** 2
        out = np.empty(kappa.shape[:-1] + (2, 2))
        out[..., 0, 0] = (k1**2 + k2) / v2
        out[..., 0, 1] = out[..., 1, 0] = -k1 / v2
        out[..., 1, 1] = 0.5 / v2
        return out

    def _log_normalizer(self, tau, n0):
        # normal-gamma integral: Gaussian in eta_1, then Gamma in -eta_2
        b = tau[..., 1] - tau[..., 0] ** 2 / n0
        a = 0.5 * (n0 + 3.0)
        return 0.5 * np.log(4.0 * math.pi / n0) + 0.5 * n0 * math.log(2.0) + gammaln(a) - a * np.log(b)

    def _in_natural(self, eta):
        return np.isfinite(eta[..., 0]) & (eta[..., 1] < 0)

    def _in_expectation(self, kappa):
        return np.isfinite(kappa[..., 0]) & (kappa[..., 1] - kappa[..., 0] ** 2 > 0)

    def _proper(self, tau, n0):
        return (n0 > 0) & (tau[..., 1] - tau[..., 0] ** 2 / np.where(n0 > 0, n0, 1.0) > 0)

    def clamp(self, kappa):
        kappa = np.array(kappa, dtype=float, copy=True)
        floor = kappa[..., 0] ** 2 + EPS_DOM
        kappa[..., 1] = np.maximum(kappa[..., 1], floor)
        return kappa

    def sufficient_stats(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([x, x * x], axis=-1)

    def log_base_measure(self, x):
        return -0.5 * _LOG_2PI

    def in_support(self, x):
        return math.isfinite(x)

    def _draw(self, eta, rng, size):
        e1, e2 = eta
        var = -0.5 / e2
        return rng.normal(e1 * var, math.sqrt(var), size=size)

    @property
    def default_hyper(self):
        return HyperParams([0.0, 1.0], 1.0)

    def natural_param(self, mean: float, variance: float) -> np.ndarray:
        return np.array([mean / variance, -0.5 / variance])


FAMILIES = {
    "poisson": Poisson,
    "bernoulli": Bernoulli,
    "gaussian_known_var": GaussianKnownVar,
    "gaussian_zero_mean": GaussianZeroMeanUnknownVar,
    "vector_gaussian": VectorGaussian,
}


def make_family(kind: str, **constants) -> ExponentialFamily:
    """Build a family from its registry name, e.g. ``make_family("gaussian_known_var", sigma=2)``."""
    try:
        cls = FAMILIES[kind]
    except KeyError:
        raise InvalidParameterError(
            f"unknown family {kind!r}; choose one of {sorted(FAMILIES)}"
        ) from None
    return cls(**constants)
