"""The sluggish modified-GLR test and its analysis variants.

At every step after initialisation the policy finds the hypothesis with the
largest nearest-alternative statistic, stops if it clears
``log((K-1) L)``, and otherwise either repeats the previous arm (probability
``1 - gamma``) or draws a fresh arm from the optimal proportions evaluated at
the plug-in estimates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import glr
from .complexity import DegenerateConfigurationError, solve_odd_mass
from .expfam import ExponentialFamily, HyperParams, InvalidParameterError
from .glr import RunState

DEFAULT_MAX_HORIZON = 10**7


class Variant(enum.Enum):
    STANDARD = "standard"
    STOP_ONLY_AT = "stop_only_at"
    NEVER_STOP = "never_stop"


@dataclass(frozen=True)
class PolicyConfig:
    """Threshold, sluggishness and prior of the policy.

    ``log_L`` stores log(L) so that thresholds such as L = e^250 stay finite.
    ``stop_at`` is the (0-based) permitted decision for ``Variant.STOP_ONLY_AT``.
    """

    log_L: float
    gamma: float = 1.0
    hyper: HyperParams | None = None
    variant: Variant = Variant.STANDARD
    stop_at: int | None = None
    max_horizon: int = DEFAULT_MAX_HORIZON

    def __post_init__(self):
        if not (math.isfinite(self.log_L) and self.log_L >= 0.0):
            raise InvalidParameterError(f"need finite log L >= 0, got {self.log_L}")
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidParameterError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.max_horizon < 1:
            raise InvalidParameterError("max_horizon must be positive")
        if (self.variant is Variant.STOP_ONLY_AT) != (self.stop_at is not None):
            raise InvalidParameterError("stop_at is required exactly for the STOP_ONLY_AT variant")

    @classmethod
    def from_L(cls, L: float, **kwargs) -> "PolicyConfig":
        if not L >= 1.0:
            raise InvalidParameterError(f"need L >= 1, got {L}")
        return cls(log_L=math.log(L), **kwargs)

    def replace(self, **changes) -> "PolicyConfig":
        from dataclasses import replace
        return replace(self, **changes)


def threshold(cfg: PolicyConfig, K: int) -> float:
    """log((K-1) L)."""
    if K < 3:
        raise InvalidParameterError(f"need K >= 3 arms, got {K}")
    return math.log(K - 1) + cfg.log_L


@dataclass(frozen=True)
class Continue:
    arm: int


@dataclass(frozen=True)
class Stop:
    decision: int


Action = Continue | Stop


@dataclass
class SluggishGlrPolicy:
    """Stateful driver of one episode: holds the lambda* cache and last report."""

    family: ExponentialFamily
    K: int
    cfg: PolicyConfig
    hyper: HyperParams = field(init=False)
    last_report: glr.GlrReport | None = field(default=None, init=False)
    _cache_key: tuple | None = field(default=None, init=False, repr=False)
    _cache_mass: float | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.hyper = self.cfg.hyper if self.cfg.hyper is not None else self.family.default_hyper
        if not self.family.is_proper(self.hyper):
            raise InvalidParameterError(f"improper prior {self.hyper} for {self.family.name}")
        if self.cfg.stop_at is not None and not 0 <= self.cfg.stop_at < self.K:
            raise InvalidParameterError(f"stop_at {self.cfg.stop_at} not in [0, {self.K})")
        self.threshold = threshold(self.cfg, self.K)

    def initialising(self, state: RunState) -> bool:
        return bool(state.N.min() < self.family.min_samples)

    def may_stop_at(self, i: int) -> bool:
        v = self.cfg.variant
        if v is Variant.STANDARD:
            return True
        if v is Variant.NEVER_STOP:
            return False
        return i == self.cfg.stop_at

    def odd_mass(self, i: int, kappa1: np.ndarray, kappa2: np.ndarray) -> float | None:
        """lambda*(i) at the plug-in estimates, or None if they coincide."""
        key = (i, kappa1.tobytes(), kappa2.tobytes())
        if key != self._cache_key:
            try:
                warm = self._cache_mass if self._cache_mass is not None else 0.5
                mass, _ = solve_odd_mass(self.family, kappa1, kappa2, self.K, warm)
            except DegenerateConfigurationError:
                mass = None
            self._cache_key, self._cache_mass = key, mass
        return self._cache_mass

    def sample_arm(self, i: int, mass: float | None, rng: np.random.Generator) -> int:
        """Inverse-CDF draw from lambda* (odd mass on ``i``, rest uniform)."""
        u = rng.random()
        if mass is None:
            return min(int(u * self.K), self.K - 1)
        if u < mass:
            return i
        j = min(int((u - mass) / (1.0 - mass) * (self.K - 1)), self.K - 2)
        return j + (j >= i)

    def step(self, state: RunState, rng: np.random.Generator) -> Action:
        if self.initialising(state):
            self.last_report = None
            return Continue(state.n % self.K)
        rep = glr.report(state, self.family, self.hyper)
        self.last_report = rep
        i_star = rep.i_star
        if len(rep.leaders) > 1:
            i_star = int(rep.leaders[rng.integers(len(rep.leaders))])
        if rep.z_min[i_star] >= self.threshold and self.may_stop_at(i_star):
            return Stop(i_star)
        if self.cfg.gamma < 1.0 and rng.random() >= self.cfg.gamma:
            return Continue(state.last_arm)
        k1, k2 = rep.kappa_hat[i_star]
        return Continue(self.sample_arm(i_star, self.odd_mass(i_star, k1, k2), rng))


def step(state: RunState, cfg: PolicyConfig, family: ExponentialFamily,
         rng: np.random.Generator) -> Action:
    """Single stateless decision; builds a throwaway policy (no lambda* cache)."""
    return SluggishGlrPolicy(family, state.K, cfg).step(state, rng)
