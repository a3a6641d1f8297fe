"""Episode driver, switching-cost accounting and Monte-Carlo sweeps."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import glr
from .complexity import ArmConfiguration, lower_bound_asymptote, solve_lambda_star
from .expfam import HyperParams, InvalidParameterError
from .glr import RunState
from .policy import PolicyConfig, SluggishGlrPolicy, Stop, Variant

WORKERS_ENV = "ODDARM_WORKERS"
CSV_HEADER = ("log_L", "gamma", "mean_tau", "mean_cost", "error_rate", "lower_bound", "runs", "seed")
_BUFFER = 256


@dataclass(frozen=True, eq=False)
class SwitchCostMatrix:
    """Cost g(a, a') of pulling a' right after a; zero on the diagonal."""

    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise InvalidParameterError(f"switch costs must be square, got shape {g.shape}")
        if not np.all(np.isfinite(g)) or np.any(g < 0):
            raise InvalidParameterError("switch costs must be finite and nonnegative")
        if np.any(np.diag(g) != 0):
            raise InvalidParameterError("switch cost g(a, a) must be 0")
        object.__setattr__(self, "g", g)

    @classmethod
    def uniform(cls, K: int, cost: float = 1.0) -> "SwitchCostMatrix":
        return cls(cost * (1.0 - np.eye(K)))

    @property
    def K(self) -> int:
        return self.g.shape[0]

    @property
    def g_max(self) -> float:
        return float(self.g.max())


@dataclass(frozen=True)
class EpisodeResult:
    tau: int
    decision: int | None  # None when the horizon was hit
    correct: bool
    switches: int
    switch_cost: float
    total_cost: float

    @property
    def truncated(self) -> bool:
        return self.decision is None


def config_hash(psi: ArmConfiguration, hyper: HyperParams | None = None) -> int:
    """Stable 64-bit digest of the ground truth (and prior) of an experiment."""
    payload = psi.describe()
    if hyper is not None:
        payload["hyper"] = {"tau": hyper.tau.tolist(), "n0": hyper.n0}
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def episode_seed(master_seed: int, cfg_hash: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed & (2**64 - 1), cfg_hash, index])


class _ArmStreams:
    """Independent observation stream per arm, drawn in blocks."""

    def __init__(self, psi: ArmConfiguration, seeds):
        self.family = psi.family
        self.etas = [psi.arm_eta(k) for k in range(psi.K)]
        self.rngs = [np.random.default_rng(s) for s in seeds]
        self.obs = [np.empty(0)] * psi.K
        self.stats = [np.empty((0, psi.family.dim))] * psi.K
        self.pos = [0] * psi.K

    def draw(self, arm: int):
        p = self.pos[arm]
        if p == len(self.obs[arm]):
            x = np.asarray(self.family._draw(self.etas[arm], self.rngs[arm], _BUFFER), dtype=float)
            self.obs[arm], self.stats[arm] = x, self.family.sufficient_stats(x)
            p = 0
        self.pos[arm] = p + 1
        return self.obs[arm][p], self.stats[arm][p]


def run_episode(psi: ArmConfiguration, cfg: PolicyConfig, g: SwitchCostMatrix | None,
                seed, trace=None) -> EpisodeResult:
    """Simulate one episode under ground truth ``psi``.

    ``seed`` is an int or a SeedSequence.  Arm ``k`` draws from its own child
    stream, the policy (tie-breaks, sluggish coin, arm choice) from another.
    ``trace`` may be a text stream receiving the per-step dump.
    """
    family, K = psi.family, psi.K
    g = SwitchCostMatrix.uniform(K) if g is None else g
    if g.K != K:
        raise InvalidParameterError(f"switch-cost matrix is {g.K}x{g.K}, expected K={K}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(K + 1)
    arms = _ArmStreams(psi, children[:K])
    prng = np.random.default_rng(children[K])
    policy = SluggishGlrPolicy(family, K, cfg)
    writer = glr.TraceWriter(trace, K, family.dim) if trace is not None else None
    gm = g.g
    state = RunState.empty(K, family)
    switches, cost = 0, 0.0
    decision = None
    while state.n < cfg.max_horizon:
        action = policy.step(state, prng)
        if isinstance(action, Stop):
            decision = action.decision
            break
        arm, last = action.arm, state.last_arm
        if last is not None and arm != last:
            switches += 1
            cost += gm[last, arm]
        x, t = arms.draw(arm)
        state.record(arm, t)
        if writer is not None:
            rep = glr.report(state, family, policy.hyper) if state.ready(family) else None
            writer.write(state, arm, x, rep)
    tau = state.n
    return EpisodeResult(tau, decision, decision == psi.odd_index, switches, cost, tau + cost)


@dataclass(frozen=True)
class SweepRow:
    log_L: float
    gamma: float
    mean_tau: float
    mean_cost: float
    error_rate: float
    lower_bound: float
    runs: int
    seed: int
    se_tau: float = 0.0
    mean_switches: float = 0.0
    truncated: int = 0

    def csv_row(self) -> list:
        return [repr(getattr(self, name)) for name in CSV_HEADER]


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _episode_task(args):
    psi, cfg, g, ss = args
    return run_episode(psi, cfg, g, ss)


def run_episodes(psi, cfg, g, runs, master_seed, workers=None) -> list[EpisodeResult]:
    if runs < 1:
        raise InvalidParameterError("runs must be >= 1")
    h = config_hash(psi, cfg.hyper)
    tasks = [(psi, cfg, g, episode_seed(master_seed, h, k)) for k in range(runs)]
    workers = default_workers() if workers is None else workers
    if workers <= 1:
        return [_episode_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_episode_task, tasks, chunksize=max(1, runs // (4 * workers))))


def summarize(results: list[EpisodeResult], cfg: PolicyConfig, d_star: float, seed: int) -> SweepRow:
    tau = np.array([r.tau for r in results], dtype=float)
    done = [r for r in results if not r.truncated]
    errors = sum(not r.correct for r in done)
    return SweepRow(
        log_L=cfg.log_L,
        gamma=cfg.gamma,
        mean_tau=float(tau.mean()),
        mean_cost=float(np.mean([r.total_cost for r in results])),
        error_rate=errors / len(done) if done else math.nan,
        lower_bound=lower_bound_asymptote(cfg.log_L, d_star),
        runs=len(results),
        seed=seed,
        se_tau=float(tau.std(ddof=1) / math.sqrt(len(tau))) if len(tau) > 1 else 0.0,
        mean_switches=float(np.mean([r.switches for r in results])),
        truncated=len(results) - len(done),
    )


def run_batch(psi, cfg, g, runs, master_seed, workers=None) -> SweepRow:
    """Aggregate ``runs`` episodes with seeds derived from ``master_seed``.

    Seeds depend on the ground truth and the episode index only, so batches
    at different (L, gamma) see common random observation streams.
    """
    results = run_episodes(psi, cfg, g, runs, master_seed, workers)
    return summarize(results, cfg, solve_lambda_star(psi).d_star, master_seed)


@dataclass
class SweepResult:
    rows: list[SweepRow]
    d_star: float
    config_hash: int
    meta: dict = field(default_factory=dict)

    def row(self, log_L: float, gamma: float) -> SweepRow:
        for r in self.rows:
            if r.log_L == log_L and r.gamma == gamma:
                return r
        raise KeyError((log_L, gamma))

    def write_csv(self, stream) -> None:
        w = csv.writer(stream)
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_row())

    def report(self) -> dict:
        return {
            **self.meta,
            "d_star": self.d_star,
            "config_hash": f"{self.config_hash:016x}",
            "rows": [asdict(r) for r in self.rows],
        }


def sweep(psi: ArmConfiguration, gammas, logL_grid, g: SwitchCostMatrix | None, runs: int,
          master_seed: int, hyper: HyperParams | None = None,
          max_horizon: int | None = None, workers=None, on_row=None) -> SweepResult:
    """Full factorial (log L, gamma) table with the log(L)/D* asymptote column.

    ``on_row`` is called with each finished row so callers can flush partial output.
    """
    gammas, logL_grid = list(gammas), list(logL_grid)
    if not gammas or not logL_grid:
        raise InvalidParameterError("gamma and log L grids must be nonempty")
    d_star = solve_lambda_star(psi).d_star
    extra = {} if max_horizon is None else {"max_horizon": max_horizon}
    rows = []
    for gamma in gammas:
        for log_L in logL_grid:
            cfg = PolicyConfig(log_L=float(log_L), gamma=float(gamma), hyper=hyper, **extra)
            results = run_episodes(psi, cfg, g, runs, master_seed, workers)
            row = summarize(results, cfg, d_star, master_seed)
            rows.append(row)
            if on_row is not None:
                on_row(row)
    meta = {"configuration": psi.describe(), "master_seed": master_seed, "runs": runs}
    return SweepResult(rows, d_star, config_hash(psi, hyper), meta)


def drift_check(psi: ArmConfiguration, cfg: PolicyConfig, n_steps: int, seed) -> float:
    """Z_i(n)/n for the true odd arm after ``n_steps`` of non-stopping play."""
    if n_steps < 10 * psi.K:
        raise InvalidParameterError(f"n_steps must be >= 10K = {10 * psi.K}")
    if cfg.variant is not Variant.NEVER_STOP:
        cfg = cfg.replace(variant=Variant.NEVER_STOP, stop_at=None)
    cfg = cfg.replace(max_horizon=n_steps)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    state = _play(psi, cfg, ss)
    hyper = cfg.hyper if cfg.hyper is not None else psi.family.default_hyper
    rep = glr.report(state, psi.family, hyper)
    return float(rep.z_min[psi.odd_index] / state.n)


def _play(psi, cfg, ss) -> RunState:
    """Run the policy for ``cfg.max_horizon`` steps (it must never stop) and return the state."""
    K = psi.K
    children = ss.spawn(K + 1)
    arms = _ArmStreams(psi, children[:K])
    prng = np.random.default_rng(children[K])
    policy = SluggishGlrPolicy(psi.family, K, cfg)
    state = RunState.empty(K, psi.family)
    while state.n < cfg.max_horizon:
        action = policy.step(state, prng)
        _, t = arms.draw(action.arm)
        state.record(action.arm, t)
    return state
