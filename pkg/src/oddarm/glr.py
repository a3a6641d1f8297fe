"""Run statistics and the modified generalised likelihood ratio.

The statistic of hypothesis ``i`` against alternative ``j`` is

    Z_ij = log(prior-averaged likelihood under H=i) - log(max likelihood under H=j)

With a conjugate prior both terms are closed form.  Writing ``lnorm(tau, n0)``
for the log-normalizer of the prior, the averaged likelihood contributes

    lnorm(Y_i + tau, N_i + n0) + lnorm(Y - Y_i + tau, n - N_i + n0) - 2 lnorm(tau, n0)

and, by the Fenchel identity, the maximum likelihood contributes
``N_j F(kappa1_hat(j)) + (n - N_j) F(kappa2_hat(j))``.  The base measure h(x)
appears in both and cancels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .expfam import ExponentialFamily, HyperParams, InvalidParameterError


class NotReadyError(RuntimeError):
    """Too few samples for a maximum-likelihood estimate; keep initialising."""


@dataclass
class RunState:
    """Sufficient-statistic accumulators of one episode (arms indexed from 0)."""

    K: int
    dim: int
    n: int = 0
    N: np.ndarray = field(default=None)
    Y: np.ndarray = field(default=None)
    Y_total: np.ndarray = field(default=None)
    last_arm: int | None = None

    def __post_init__(self):
        if self.N is None:
            self.N = np.zeros(self.K, dtype=np.int64)
        if self.Y is None:
            self.Y = np.zeros((self.K, self.dim))
        if self.Y_total is None:
            self.Y_total = np.zeros(self.dim)

    @classmethod
    def empty(cls, K: int, family: ExponentialFamily) -> "RunState":
        return cls(K=K, dim=family.dim)

    def record(self, arm: int, stat: np.ndarray) -> None:
        """Add one observation's sufficient statistic ``stat`` pulled from ``arm``."""
        if not 0 <= arm < self.K:
            raise IndexError(f"arm {arm} outside [0, {self.K})")
        self.n += 1
        self.N[arm] += 1
        self.Y[arm] += stat
        self.Y_total += stat
        self.last_arm = arm

    def copy(self) -> "RunState":
        return RunState(self.K, self.dim, self.n, self.N.copy(), self.Y.copy(),
                        self.Y_total.copy(), self.last_arm)

    def ready(self, family: ExponentialFamily) -> bool:
        m = family.min_samples
        return bool(self.N.min() >= m and self.n - self.N.max() >= m)


def update(state: RunState, arm: int, obs: float, family: ExponentialFamily) -> RunState:
    """Fold observation ``obs`` from ``arm`` into ``state`` (in place) and return it."""
    if not family.in_support(obs):
        raise InvalidParameterError(f"{family.name}: observation {obs!r} outside support")
    state.record(arm, family.sufficient_stat(obs))
    return state


def ml_estimates(state: RunState, j: int, family: ExponentialFamily) -> tuple[np.ndarray, np.ndarray]:
    """Clamped ML expectation parameters (odd, non-odd) under hypothesis ``j``."""
    m = family.min_samples
    Nj = state.N[j]
    rest = state.n - Nj
    if Nj < m or rest < m:
        raise NotReadyError(f"hypothesis {j}: N_j={Nj}, n-N_j={rest}, need {m} each")
    k1 = family.clamp(state.Y[j] / Nj)
    k2 = family.clamp((state.Y_total - state.Y[j]) / rest)
    return k1, k2


def _numerators(state: RunState, family: ExponentialFamily, hyper: HyperParams) -> np.ndarray:
    """Log prior-averaged likelihood for every hypothesis, shape (K,)."""
    tau, n0 = hyper.tau, hyper.n0
    N = state.N.astype(float)
    own = family._log_normalizer(state.Y + tau, N + n0)
    rest = family._log_normalizer(state.Y_total - state.Y + tau, state.n - N + n0)
    base = family._log_normalizer(tau[None, :], np.asarray([n0]))[0]
    return own + rest - 2.0 * base


def _max_log_likelihoods(state: RunState, family: ExponentialFamily):
    """Per-hypothesis max log-likelihood (h(x) dropped) and clamped estimates."""
    N = state.N.astype(float)[:, None]
    rest = state.n - N
    k1 = family.clamp(state.Y / N)
    k2 = family.clamp((state.Y_total - state.Y) / rest)
    ml = N[:, 0] * family._dual(k1) + rest[:, 0] * family._dual(k2)
    return ml, k1, k2


def _check_ready(state: RunState, family: ExponentialFamily) -> None:
    if not state.ready(family):
        m = family.min_samples
        raise NotReadyError(f"every arm needs {m} pulls and {m} pulls elsewhere; N={state.N.tolist()}")


def glr_statistic(state: RunState, i: int, j: int, family: ExponentialFamily,
                  hyper: HyperParams) -> float:
    """Z_ij for a single pair of hypotheses."""
    k1, k2 = ml_estimates(state, j, family)
    tau, n0 = hyper.tau, hyper.n0
    Ni = state.N[i]
    num = (
        family._log_normalizer(state.Y[i] + tau, Ni + n0)
        + family._log_normalizer(state.Y_total - state.Y[i] + tau, state.n - Ni + n0)
        - 2.0 * family._log_normalizer(tau, n0)
    )
    Nj = state.N[j]
    ml = Nj * family._dual(k1) + (state.n - Nj) * family._dual(k2)
    return float(num - ml)


@dataclass(frozen=True, eq=False)
class GlrReport:
    z: np.ndarray          # (K, K), z[i, j] = Z_ij, diagonal NaN
    z_min: np.ndarray      # (K,), Z_i = min over j != i
    i_star: int            # lowest index attaining max Z_i
    leaders: np.ndarray    # every index attaining max Z_i
    kappa_hat: np.ndarray  # (K, 2, dim): clamped (odd, non-odd) estimates under each H=j


def report(state: RunState, family: ExponentialFamily, hyper: HyperParams) -> GlrReport:
    """Full Z matrix, nearest-alternative minima and the leading hypothesis."""
    _check_ready(state, family)
    num = _numerators(state, family, hyper)
    ml, k1, k2 = _max_log_likelihoods(state, family)
    z = num[:, None] - ml[None, :]
    np.fill_diagonal(z, np.inf)
    z_min = z.min(axis=1)
    np.fill_diagonal(z, np.nan)
    best = z_min.max()
    leaders = np.flatnonzero(z_min == best)
    kappa_hat = np.empty((state.K, 2, k1.shape[-1]))
    kappa_hat[:, 0], kappa_hat[:, 1] = k1, k2
    return GlrReport(z, z_min, int(leaders[0]), leaders, kappa_hat)


TRACE_FIELDS = ("step", "arm", "observation", "N", "Y", "Z")


class TraceWriter:
    """Delimited per-step dump: step, arm, observation, N_k, Y_k_d and Z_i_j columns.

    Z columns are left empty until every hypothesis has an ML estimate.
    """

    def __init__(self, stream, K: int, dim: int):
        self._w = csv.writer(stream)
        self.K, self.dim = K, dim
        header = ["step", "arm", "observation"]
        header += [f"N_{k}" for k in range(K)]
        header += [f"Y_{k}_{d}" for k in range(K) for d in range(dim)]
        header += [f"Z_{i}_{j}" for i in range(K) for j in range(K) if i != j]
        self._w.writerow(header)

    def write(self, state: RunState, arm: int, obs: float, rep: GlrReport | None) -> None:
        row = [state.n, arm, repr(float(obs))]
        row += [int(c) for c in state.N]
        row += [repr(float(v)) for v in state.Y.ravel()]
        if rep is None:
            row += [""] * (self.K * (self.K - 1))
        else:
            row += [repr(float(rep.z[i, j])) for i in range(self.K) for j in range(self.K) if i != j]
        self._w.writerow(row)


def read_trace(stream) -> list[dict]:
    """Parse a trace written by :class:`TraceWriter` back into per-step dicts."""
    reader = csv.DictReader(stream)
    rows = []
    for rec in reader:
        K = sum(1 for k in rec if k.startswith("N_"))
        dim = sum(1 for k in rec if k.startswith("Y_0_"))
        z = np.full((K, K), np.nan)
        for i in range(K):
            for j in range(K):
                if i != j and rec[f"Z_{i}_{j}"]:
                    z[i, j] = float(rec[f"Z_{i}_{j}"])
        rows.append({
            "step": int(rec["step"]),
            "arm": int(rec["arm"]),
            "observation": float(rec["observation"]),
            "N": np.array([int(rec[f"N_{k}"]) for k in range(K)]),
            "Y": np.array([[float(rec[f"Y_{k}_{d}"]) for d in range(dim)] for k in range(K)]),
            "Z": z,
        })
    return rows
