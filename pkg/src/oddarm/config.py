"""Experiment configuration: YAML files, command-line overrides and figure presets."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import yaml

from .complexity import ArmConfiguration
from .expfam import FAMILIES, HyperParams, InvalidParameterError, make_family
from .sim import SwitchCostMatrix

# Ground truths of the four published experiments, in classical parameters.
FIGURES = {
    1: {"family": {"kind": "gaussian_known_var", "sigma": 1.0}, "K": 8,
        "psi": {"odd_index": 0, "params1": {"mean": 0.0}, "params2": {"mean": 1.0}}},
    2: {"family": {"kind": "gaussian_zero_mean"}, "K": 8,
        "psi": {"odd_index": 0, "params1": {"variance": 25.0}, "params2": {"variance": 1.0}}},
    3: {"family": {"kind": "bernoulli"}, "K": 8,
        "psi": {"odd_index": 0, "params1": {"p": 0.1}, "params2": {"p": 0.8}}},
    4: {"family": {"kind": "vector_gaussian"}, "K": 8,
        "psi": {"odd_index": 0, "params1": {"mean": 0.0, "variance": 2.0},
                "params2": {"mean": 4.0, "variance": 5.0}}},
}

FIGURE_SWEEP = {"gammas": [1.0, 0.5, 0.1], "logL": [0, 50, 100, 150, 200, 250], "runs": 100}

_TOP_KEYS = {"family", "psi", "K", "gammas", "logL", "runs", "switch_cost", "hyper", "seed",
             "output", "max_horizon", "scan"}


class ConfigError(ValueError):
    """Invalid configuration; ``where`` names a file line or a flag."""

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


def _to_python(node, path, lines, source):
    lines[path] = f"{source}:{node.start_mark.line + 1}"
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            out[key] = _to_python(v, path + (key,), lines, source)
            lines[path + (key,)] = f"{source}:{k.start_mark.line + 1}"
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_python(v, path + (i,), lines, source) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def load_yaml(text: str, source: str = "<config>") -> tuple[dict, dict]:
    """Parse YAML into plain data plus a map from key path to ``file:line``."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError(f"malformed YAML ({getattr(exc, 'problem', exc)})", where) from None
    if node is None:
        return {}, {}
    lines: dict = {}
    data = _to_python(node, (), lines, source)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", f"{source}:1")
    return data, lines


@dataclass
class RawConfig:
    """Merged key/value data with the origin of every key for error messages."""

    data: dict = field(default_factory=dict)
    origin: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str) -> "RawConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", path) from None
        data, lines = load_yaml(text, path)
        return cls(data, lines)

    def merge(self, other: dict, origin: str) -> None:
        """Overlay ``other`` (nested dicts merge key by key)."""
        def rec(dst, src, path):
            for k, v in src.items():
                p = path + (k,)
                if isinstance(v, dict) and isinstance(dst.get(k), dict):
                    rec(dst[k], v, p)
                else:
                    dst[k] = v
                self.origin[p] = origin
                for q in [q for q in self.origin if q[:len(p)] == p and len(q) > len(p)]:
                    self.origin[q] = origin
        rec(self.data, other, ())

    def where(self, *path) -> str | None:
        while path:
            if path in self.origin:
                return self.origin[path]
            path = path[:-1]
        return None

    def get(self, *path, default=None):
        node = self.data
        for p in path:
            if not isinstance(node, dict) or p not in node:
                return default
            node = node[p]
        return node


@dataclass
class ExperimentConfig:
    family: object
    psi: ArmConfiguration
    hyper: HyperParams
    gammas: list
    logL: list
    runs: int
    switch_cost: SwitchCostMatrix
    seed: int
    max_horizon: int | None
    output: str | None
    echo: dict

    def digest(self) -> str:
        payload = json.dumps(self.echo, sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _floats(value, what, where):
    try:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be numeric, got {value!r}", where) from None
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what} must be finite", where)
    return arr


def _natural(fam, psi: dict, which: str, raw: RawConfig):
    """Natural parameter of arm group ``which`` ('1' or '2') from any parameterisation."""
    given = [k for k in (f"eta{which}", f"kappa{which}", f"params{which}") if k in psi]
    where = raw.where("psi", given[0]) if given else raw.where("psi")
    if len(given) != 1:
        raise ConfigError(f"give exactly one of eta{which}, kappa{which}, params{which}", where)
    key = given[0]
    value = psi[key]
    try:
        if key.startswith("params"):
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be a mapping of classical parameters", where)
            return fam.natural_param(**{k: float(v) for k, v in value.items()})
        arr = _floats(value, key, where)
        return fam.eta_of_kappa(arr) if key.startswith("kappa") else fam._check_eta(arr)
    except (InvalidParameterError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{key}: {exc}", where) from None


def build(raw: RawConfig) -> ExperimentConfig:
    """Validate merged raw data into an :class:`ExperimentConfig`."""
    for key in raw.data:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown key {key!r}", raw.where(key))

    fam_spec = raw.get("family")
    if isinstance(fam_spec, str):
        fam_spec = {"kind": fam_spec}
    if not isinstance(fam_spec, dict) or "kind" not in fam_spec:
        raise ConfigError("family.kind is required", raw.where("family"))
    kind = fam_spec["kind"]
    if kind not in FAMILIES:
        raise ConfigError(f"unknown family {kind!r}; choose one of {sorted(FAMILIES)}",
                          raw.where("family", "kind"))
    constants = {k: v for k, v in fam_spec.items() if k != "kind"}
    try:
        fam = make_family(kind, **constants)
    except (TypeError, InvalidParameterError) as exc:
        raise ConfigError(f"family constants: {exc}", raw.where("family")) from None

    K = raw.get("K", default=8)
    if not isinstance(K, int) or isinstance(K, bool) or K < 3:
        raise ConfigError(f"K must be an integer >= 3, got {K!r}", raw.where("K"))

    psi_spec = raw.get("psi")
    if not isinstance(psi_spec, dict):
        raise ConfigError("psi (odd_index and both arm parameters) is required", raw.where("psi"))
    odd = psi_spec.get("odd_index", 0)
    if not isinstance(odd, int) or not 0 <= odd < K:
        raise ConfigError(f"psi.odd_index must be an integer in [0, {K})", raw.where("psi", "odd_index"))
    eta1 = _natural(fam, psi_spec, "1", raw)
    eta2 = _natural(fam, psi_spec, "2", raw)
    if np.array_equal(eta1, eta2):
        raise ConfigError("odd and non-odd parameters coincide", raw.where("psi"))
    psi = ArmConfiguration(fam, odd, eta1, eta2, K)

    hyper_spec = raw.get("hyper")
    if hyper_spec is None:
        hyper = fam.default_hyper
    else:
        where = raw.where("hyper")
        if not isinstance(hyper_spec, dict) or set(hyper_spec) != {"tau", "n0"}:
            raise ConfigError("hyper needs exactly tau and n0", where)
        hyper = HyperParams(_floats(hyper_spec["tau"], "hyper.tau", where),
                            float(_floats(hyper_spec["n0"], "hyper.n0", where)[0]))
        if hyper.tau.shape != (fam.dim,) or not fam.is_proper(hyper):
            raise ConfigError(f"improper prior tau={hyper.tau.tolist()}, n0={hyper.n0}", where)

    gammas = _floats(raw.get("gammas", default=[1.0]), "gammas", raw.where("gammas")).tolist()
    if not gammas or any(not 0 < g <= 1 for g in gammas):
        raise ConfigError("gammas must be a nonempty list in (0, 1]", raw.where("gammas"))
    logL = _floats(raw.get("logL", default=[50.0]), "logL", raw.where("logL")).tolist()
    if not logL or any(v < 0 for v in logL):
        raise ConfigError("logL must be a nonempty list of values >= 0", raw.where("logL"))
    runs = raw.get("runs", default=100)
    if not isinstance(runs, int) or runs < 1:
        raise ConfigError(f"runs must be a positive integer, got {runs!r}", raw.where("runs"))
    seed = raw.get("seed", default=0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}", raw.where("seed"))
    horizon = raw.get("max_horizon")
    if horizon is not None and (not isinstance(horizon, int) or horizon < 1):
        raise ConfigError("max_horizon must be a positive integer", raw.where("max_horizon"))

    sc = raw.get("switch_cost", default={"uniform": 1.0})
    where = raw.where("switch_cost")
    try:
        if isinstance(sc, (int, float)):
            g = SwitchCostMatrix.uniform(K, float(sc))
        elif isinstance(sc, dict) and set(sc) == {"uniform"}:
            g = SwitchCostMatrix.uniform(K, float(sc["uniform"]))
        elif isinstance(sc, dict) and set(sc) == {"matrix"}:
            g = SwitchCostMatrix(np.asarray(sc["matrix"], dtype=float))
        else:
            raise ConfigError("switch_cost must be a number, {uniform: c} or {matrix: [[...]]}", where)
    except (InvalidParameterError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"switch_cost: {exc}", where) from None
    if g.K != K:
        raise ConfigError(f"switch_cost matrix must be {K}x{K}", where)

    echo = {
        "family": fam.describe(),
        "K": K,
        "psi": {"odd_index": odd, "eta1": eta1.tolist(), "eta2": eta2.tolist(),
                "kappa1": psi.kappa1.tolist(), "kappa2": psi.kappa2.tolist()},
        "hyper": {"tau": hyper.tau.tolist(), "n0": hyper.n0},
        "gammas": gammas,
        "logL": logL,
        "runs": runs,
        "seed": seed,
        "switch_cost": g.g.tolist(),
    }
    if horizon is not None:
        echo["max_horizon"] = horizon
    for k in ("params1", "params2"):
        if k in psi_spec:
            echo["psi"][k] = psi_spec[k]
    return ExperimentConfig(fam, psi, hyper, gammas, logL, runs, g, seed, horizon,
                            raw.get("output"), echo)


def figure_preset(n: int) -> dict:
    if n not in FIGURES:
        raise ConfigError(f"no figure preset {n}; choose 1-4", "--figure")
    return json.loads(json.dumps({**FIGURES[n], **FIGURE_SWEEP}))
