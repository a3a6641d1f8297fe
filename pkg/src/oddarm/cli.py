"""Command-line front end.

    oddarm complexity --figure 3
    oddarm sweep --figure 1 --gammas 1.0 --logL 0,50 --runs 100 --seed 7
    oddarm drift --figure 3 --n-steps 20000
    oddarm verify-assumption --family bernoulli
    oddarm episode --figure 4 --logL 10 --trace trace.csv

Exit codes: 0 success, 1 runtime failure or interrupt, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import assumption, sim
from .complexity import solve_lambda_star
from .config import ConfigError, RawConfig, build, figure_preset
from .expfam import InvalidParameterError, make_family
from .policy import PolicyConfig, Variant


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML experiment file (flags override it)")
    p.add_argument("--figure", type=int, choices=[1, 2, 3, 4], help="published experiment preset")
    p.add_argument("--family", help="family kind, e.g. bernoulli")
    p.add_argument("--sigma", type=float, help="known standard deviation (gaussian_known_var)")
    p.add_argument("--K", type=int, help="number of arms")
    p.add_argument("--odd-index", type=int, help="0-based index of the odd arm")
    for which in ("1", "2"):
        p.add_argument(f"--kappa{which}", type=_csv_floats, help=f"expectation parameter {which}")
        p.add_argument(f"--eta{which}", type=_csv_floats, help=f"natural parameter {which}")
    p.add_argument("--hyper-tau", type=_csv_floats)
    p.add_argument("--hyper-n0", type=float)
    p.add_argument("--seed", type=int)


def _add_policy_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gammas", type=_csv_floats)
    p.add_argument("--logL", type=_csv_floats)
    p.add_argument("--switch-cost", type=float, help="uniform off-diagonal switching cost")
    p.add_argument("--max-horizon", type=int)


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oddarm", description="Odd-arm identification toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("complexity", help="D*, lambda*, lambda_hat*, kappa_tilde")
    _add_experiment_args(p)

    p = sub.add_parser("sweep", help="Monte-Carlo table over (gamma, log L)")
    _add_experiment_args(p)
    _add_policy_args(p)
    p.add_argument("--runs", type=int)
    p.add_argument("--workers", type=int, help=f"processes (default ${sim.WORKERS_ENV} or 1)")
    p.add_argument("--output", help="CSV path (default stdout)")
    p.add_argument("--report", help="also write a JSON report here")

    p = sub.add_parser("drift", help="Z_i(n)/n under non-stopping play")
    _add_experiment_args(p)
    p.add_argument("--n-steps", type=int, default=20000)
    p.add_argument("--gamma", type=float, default=1.0)

    p = sub.add_parser("verify-assumption", help="scan the sufficient sampling condition")
    p.add_argument("--config", help="YAML with a 'scan' section")
    p.add_argument("--family", required=False, default=None)
    p.add_argument("--values", type=_csv_floats, help="scalar grid of expectation parameters")
    p.add_argument("--lambda-hat", type=_csv_floats)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--method", choices=["direct", "quadrature"], default="direct")
    p.add_argument("--output", help="CSV path (default stdout)")

    p = sub.add_parser("episode", help="one seeded episode")
    _add_experiment_args(p)
    p.add_argument("--logL", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--switch-cost", type=float)
    p.add_argument("--max-horizon", type=int)
    p.add_argument("--trace", help="write the per-step trace CSV here")
    return ap


def _raw_config(args) -> RawConfig:
    raw = RawConfig()
    if getattr(args, "figure", None) is not None:
        raw.merge(figure_preset(args.figure), "--figure")
    if getattr(args, "config", None):
        file_raw = RawConfig.from_file(args.config)
        raw.merge(file_raw.data, args.config)
        raw.origin.update(file_raw.origin)
    flags = {}
    if getattr(args, "family", None):
        raw.data.pop("family", None)
        flags["family"] = {"kind": args.family}
    if getattr(args, "sigma", None) is not None:
        flags.setdefault("family", {})["sigma"] = args.sigma
    if getattr(args, "K", None) is not None:
        flags["K"] = args.K
    psi = {}
    if getattr(args, "odd_index", None) is not None:
        psi["odd_index"] = args.odd_index
    for which in ("1", "2"):
        for kind in ("kappa", "eta"):
            v = getattr(args, f"{kind}{which}", None)
            if v is not None:
                psi[f"{kind}{which}"] = v
    if psi:
        existing = raw.get("psi", default={})
        for which in ("1", "2"):
            if any(k.endswith(which) and k != "odd_index" for k in psi):
                for k in ("kappa", "eta", "params"):
                    existing.pop(f"{k}{which}", None)
        flags["psi"] = psi
    tau, n0 = getattr(args, "hyper_tau", None), getattr(args, "hyper_n0", None)
    if tau is not None or n0 is not None:
        flags["hyper"] = {"tau": tau if tau is not None else raw.get("hyper", "tau"),
                          "n0": n0 if n0 is not None else raw.get("hyper", "n0")}
    for name in ("gammas", "logL", "runs", "seed", "max_horizon", "output"):
        v = getattr(args, name, None)
        if v is not None and not (name == "logL" and not isinstance(v, list)):
            flags[name] = v
    if getattr(args, "switch_cost", None) is not None:
        flags["switch_cost"] = {"uniform": args.switch_cost}
    for name, value in flags.items():
        raw.merge({name: value}, f"--{name.replace('_', '-')}")
    return raw


def _fmt(x) -> str:
    arr = np.asarray(x, dtype=float)
    return repr(float(arr)) if arr.ndim == 0 else "[" + ", ".join(repr(float(v)) for v in arr.ravel()) + "]"


def cmd_complexity(args, out) -> int:
    cfg = build(_raw_config(args))
    res = solve_lambda_star(cfg.psi)
    print(f"D* = {res.d_star:.4f}", file=out)
    print(f"d_star: {res.d_star!r}", file=out)
    print(f"lambda_star: {_fmt(res.lambda_star)}", file=out)
    print(f"lambda_hat_star: {res.lambda_hat_star!r}", file=out)
    print(f"kappa_tilde: {_fmt(res.kappa_tilde)}", file=out)
    print(f"eta_tilde: {_fmt(res.eta_tilde)}", file=out)
    print(f"config: {json.dumps(cfg.echo, sort_keys=True)}", file=out)
    return 0


def cmd_sweep(args, out) -> int:
    cfg = build(_raw_config(args))
    target = open(cfg.output, "w", newline="") if cfg.output else out
    meta = {"config_hash": cfg.digest(), "seed": cfg.seed, "config": cfg.echo}
    print("# " + json.dumps(meta, sort_keys=True), file=sys.stderr)
    w = csv.writer(target)
    w.writerow(sim.CSV_HEADER)
    target.flush()

    def emit(row):
        w.writerow(row.csv_row())
        target.flush()

    try:
        result = sim.sweep(cfg.psi, cfg.gammas, cfg.logL, cfg.switch_cost, cfg.runs, cfg.seed,
                           hyper=cfg.hyper, max_horizon=cfg.max_horizon,
                           workers=args.workers, on_row=emit)
    except KeyboardInterrupt:
        print("interrupted; partial table flushed", file=sys.stderr)
        return 1
    finally:
        if target is not out:
            target.close()
    if args.report:
        with open(args.report, "w") as fh:
            json.dump({**result.report(), **meta}, fh, indent=2)
    return 0


def cmd_drift(args, out) -> int:
    cfg = build(_raw_config(args))
    pc = PolicyConfig(log_L=0.0, gamma=args.gamma, hyper=cfg.hyper, variant=Variant.NEVER_STOP)
    drift = sim.drift_check(cfg.psi, pc, args.n_steps, cfg.seed)
    d_star = solve_lambda_star(cfg.psi).d_star
    print(f"drift: {drift!r}", file=out)
    print(f"d_star: {d_star!r}", file=out)
    print(f"n_steps: {args.n_steps}", file=out)
    return 0


def cmd_verify(args, out) -> int:
    raw = RawConfig.from_file(args.config) if args.config else RawConfig()
    scan_cfg = raw.get("scan", default={}) or {}
    kind = args.family or raw.get("family", "kind") or raw.get("family")
    if not isinstance(kind, str):
        raise ConfigError("--family (or family.kind) is required", raw.where("family") or "--family")
    try:
        fam = make_family(kind)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), raw.where("family") or "--family") from None
    lh = args.lambda_hat or scan_cfg.get("lambda_hat")
    values = args.values or scan_cfg.get("values")
    r = args.r if args.r is not None else scan_cfg.get("r", 0.5)
    where = raw.where("scan") or "--values"
    try:
        if values is not None:
            spec = assumption.ScanSpec.from_values(
                fam, values, lh if lh is not None else np.round(np.arange(0.1, 1.0001, 0.1), 10), r)
        elif kind in assumption.PRESETS:
            spec = assumption.PRESETS[kind](lh)
            if r != spec.r:
                spec = assumption.ScanSpec(fam, spec.kappa1, spec.kappa2, spec.lambda_hat_grid, r)
        else:
            spec = None
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), where) from None
    window = assumption.analytic_thresholds(fam)
    print(f"# analytic window: {window if isinstance(window, str) else list(window)}", file=sys.stderr)
    if spec is None:
        print("# no grid given and no preset for this family", file=sys.stderr)
        return 0
    rows = assumption.scan(spec, method=args.method)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            assumption.write_scan(rows, fh)
    else:
        assumption.write_scan(rows, out)
    return 0


def cmd_episode(args, out) -> int:
    raw = _raw_config(args)
    if args.logL is not None:
        raw.merge({"logL": [args.logL]}, "--logL")
    if args.gamma is not None:
        raw.merge({"gammas": [args.gamma]}, "--gamma")
    cfg = build(raw)
    kwargs = {} if cfg.max_horizon is None else {"max_horizon": cfg.max_horizon}
    pc = PolicyConfig(log_L=cfg.logL[0], gamma=cfg.gammas[0], hyper=cfg.hyper, **kwargs)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            res = sim.run_episode(cfg.psi, pc, cfg.switch_cost, cfg.seed, trace=fh)
    else:
        res = sim.run_episode(cfg.psi, pc, cfg.switch_cost, cfg.seed)
    record = {"tau": res.tau, "decision": res.decision, "correct": res.correct,
              "switches": res.switches, "switch_cost": res.switch_cost,
              "total_cost": res.total_cost, "truncated": res.truncated,
              "seed": cfg.seed, "config_hash": cfg.digest()}
    print(json.dumps(record), file=out)
    return 0


COMMANDS = {
    "complexity": cmd_complexity,
    "sweep": cmd_sweep,
    "drift": cmd_drift,
    "verify-assumption": cmd_verify,
    "episode": cmd_episode,
}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    ap = parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InvalidParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # noqa: BLE001 - report, do not trace back
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
