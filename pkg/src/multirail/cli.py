"""Command-line interface.

Every command reads an optional JSON config (``--config``) whose keys can be
overridden by flags.  Exit codes: 0 success (or ``converges`` for ``check``),
1 negative verdict, 2 usage or config error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import encoding
from .chain import ChainSpec, build_chain, spectrum, transfer_amplitude
from .condition import open_nn_theorem_check, overlap_report
from .convergence import certify
from .exceptions import BudgetExceeded, EigensolverError
from .protocol import Jitter, Schedule, run, sample_success_steps, worker_count
from .scheduler import OptimizerConfig, expected_steps, greedy_optimize, uniform

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# -- config -------------------------------------------------------------------

def load_config(args):
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    chain = dict(cfg.get("chain", {}))
    for key in ("sites", "model"):
        if getattr(args, key, None) is not None:
            chain[key] = getattr(args, key)
    if getattr(args, "periodic", False):
        chain["periodic"] = True
    if chain and "couplings" not in chain and "sites" in chain and chain.get("model") != "custom":
        n_bonds = chain["sites"] if chain.get("periodic") else chain["sites"] - 1
        chain["couplings"] = [getattr(args, "coupling", None) or 1.0] * max(n_bonds, 0)
    if chain:
        cfg["chain"] = chain
    for key in ("tau", "steps", "rails", "excitations", "runs", "seed", "representation",
                "bits"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    output = dict(cfg.get("output", {}))
    if args.out:
        output["path"] = args.out
    if args.format:
        output["format"] = args.format
    cfg["output"] = output
    return cfg


def chain_from(cfg):
    if "chain" not in cfg:
        raise ConfigError("no chain given (config key 'chain' or --sites)")
    return ChainSpec.from_dict(cfg["chain"])


def excitations_from(cfg):
    K = cfg.get("excitations", "auto" if "rails" in cfg else 1)
    if K == "auto":
        if "rails" not in cfg:
            raise ConfigError("excitations 'auto' needs 'rails'")
        return encoding.optimal_K(int(cfg["rails"]))
    K = int(K)
    if "rails" in cfg and K > int(cfg["rails"]):
        raise ConfigError(f"excitations {K} exceed rails {cfg['rails']}")
    if K < 1:
        raise ConfigError("excitations must be >= 1")
    return K


def tau_from(cfg):
    tau = cfg.get("tau", cfg.get("schedule", {}).get("tau"))
    if tau is None:
        raise ConfigError("no measuring interval given (config 'tau' or --tau)")
    return float(tau)


def schedule_from(cfg, s=None, K=1):
    sch = dict(cfg.get("schedule", {}))
    if "steps" in cfg:
        sch["steps"] = cfg["steps"]
    if "tau" in cfg and "intervals" not in sch:
        sch.setdefault("tau", cfg["tau"])
    strategy = sch.get("strategy", "custom" if "intervals" in sch else "uniform")
    if strategy == "custom":
        if "intervals" not in sch:
            raise ConfigError("custom schedule needs 'intervals'")
        base = Schedule(tuple(sch["intervals"]), "custom")
    elif strategy == "uniform":
        if "tau" not in sch:
            raise ConfigError("uniform schedule needs 'tau'")
        base = uniform(float(sch["tau"]), int(sch.get("steps", 1)))
    elif strategy == "optimized":
        base = greedy_optimize(s, K, optimizer_from(sch, s), cfg.get("representation", "auto"))
    else:
        raise ConfigError(f"unknown schedule strategy {strategy!r}")
    jit = sch.get("jitter")
    if jit:
        seed = jit.get("seed", cfg.get("seed"))
        if seed is None:
            raise ConfigError("jitter requires a seed")
        base = Schedule(base.intervals, base.strategy,
                        Jitter(float(jit["width"]), int(seed), jit.get("distribution", "uniform")),
                        base.flagged_steps)
    return base


def optimizer_from(sch, s):
    steps = int(sch.get("steps", 1))
    grid = int(sch.get("grid_points", 256))
    tol = float(sch.get("refine_tolerance", 1e-8))
    if "window" in sch:
        return OptimizerConfig(tuple(sch["window"]), steps, grid, tol)
    return OptimizerConfig.default_for(s, steps, grid, tol)


def emit(cfg, text, suffix=""):
    path = cfg["output"].get("path")
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    p = Path(path)
    if suffix:
        p = p.with_name(p.name + suffix)
    p.write_text(text if text.endswith("\n") else text + "\n")


def fmt(cfg, default):
    f = cfg["output"].get("format", default)
    if f not in ("csv", "json"):
        raise ConfigError(f"unknown output format {f!r}")
    return f


def dumps(obj):
    return json.dumps(obj, indent=2)


def rows_to_csv(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)
                              for x in row))
    return "\n".join(lines) + "\n"


# -- commands -----------------------------------------------------------------

def cmd_chain(cfg):
    spec = chain_from(cfg)
    s = spectrum(build_chain(spec))
    times = cfg.get("times")
    if times is None:
        h = s.reconstruct()
        jmax = float(np.max(np.abs(h - np.diag(np.diag(h))))) or 1.0
        times = np.linspace(0, 2 * spec.sites / jmax, 21)
    times = np.asarray(times, dtype=float)
    amp = np.atleast_1d(transfer_amplitude(s, times))
    report = overlap_report(s)
    if fmt(cfg, "json") == "csv":
        emit(cfg, rows_to_csv(["t", "re", "im", "probability"],
                              [(t, a.real, a.imag, abs(a) ** 2) for t, a in zip(times, amp)]))
    else:
        emit(cfg, dumps({"chain": spec.to_dict(), "eigenvalues": s.eigenvalues.tolist(),
                         "min_overlap": report.min_overlap, "condition_holds": report.holds,
                         "samples": [{"t": float(t), "re": a.real, "im": a.imag,
                                      "probability": abs(a) ** 2}
                                     for t, a in zip(times, amp)]}))
    return EXIT_OK


def cmd_check(cfg):
    spec = chain_from(cfg)
    K = excitations_from(cfg)
    s = spectrum(build_chain(spec))
    cert = certify(s, spec, tau_from(cfg), K)
    nn = None
    if not spec.periodic:
        nn = open_nn_theorem_check(spec, s)
    emit(cfg, dumps({"condition": cert.condition.to_dict(), "nearest_neighbour": nn,
                     "certificate": cert.to_dict()}))
    return EXIT_OK if cert.verdict == "converges" else EXIT_NEGATIVE


def _need_seed(cfg):
    if cfg.get("seed") is None:
        raise ConfigError("Monte Carlo sampling requires a seed (--seed)")
    seed = int(cfg["seed"])
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return seed


def cmd_simulate(cfg):
    spec = chain_from(cfg)
    K = excitations_from(cfg)
    runs = int(cfg.get("runs", 0))
    seed = _need_seed(cfg) if runs > 0 else cfg.get("seed")
    s = spectrum(build_chain(spec))
    schedule = schedule_from(cfg, s, K)
    trace = run(s, K, schedule, cfg.get("representation", "auto"))
    mc = sample_success_steps(trace.p, runs, seed) if runs > 0 else None
    if fmt(cfg, "csv") == "csv":
        emit(cfg, trace.to_csv())
        if mc is not None:
            emit(cfg, mc.to_csv(trace.pi), suffix=".mc.csv")
    else:
        d = trace.to_dict()
        d["schedule"] = schedule.to_dict()
        if mc is not None:
            d["monte_carlo"] = {"seed": mc.seed, "counts": mc.counts.tolist()}
        emit(cfg, dumps(d))
    return EXIT_OK


def cmd_mc(cfg):
    spec = chain_from(cfg)
    K = excitations_from(cfg)
    seed = _need_seed(cfg)
    runs = int(cfg.get("runs", 100_000))
    s = spectrum(build_chain(spec))
    trace = run(s, K, schedule_from(cfg, s, K), cfg.get("representation", "auto"))
    mc = sample_success_steps(trace.p, runs, seed)
    if fmt(cfg, "csv") == "csv":
        emit(cfg, mc.to_csv(trace.pi))
    else:
        emit(cfg, dumps({"seed": seed, "runs": runs, "counts": mc.counts.tolist(),
                         "pi": trace.pi.tolist()}))
    return EXIT_OK


def cmd_optimize(cfg):
    spec = chain_from(cfg)
    K = excitations_from(cfg)
    s = spectrum(build_chain(spec))
    sch = dict(cfg.get("schedule", {}))
    if "steps" in cfg:
        sch["steps"] = cfg["steps"]
    opt = optimizer_from(sch, s)
    schedule = greedy_optimize(s, K, opt, cfg.get("representation", "auto"))
    trace = run(s, K, schedule, cfg.get("representation", "auto"))
    lower, exact = expected_steps(trace)
    P_uniform = [(run(s, K, uniform(t, opt.steps), "auto").P[-1], t) for t in opt.grid()]
    best_P, best_tau = max(P_uniform, key=lambda x: (x[0], -x[1]))
    if fmt(cfg, "json") == "csv":
        emit(cfg, trace.to_csv())
    else:
        emit(cfg, dumps({"schedule": schedule.to_dict(), "P": float(trace.P[-1]),
                         "expected_steps_lower_bound": lower, "expected_steps": exact,
                         "best_uniform": {"tau": float(best_tau), "P": float(best_P)}}))
    return EXIT_OK


def _sweep_point(cfg, axis, value):
    metrics = {}
    if axis == "M":
        M = int(value)
        K = encoding.optimal_K(M)
        return {"optimal_K": K, "rate": encoding.rate(M, K),
                "integer_rate": encoding.integer_rate(M, K)}
    base = chain_from(cfg)
    K = excitations_from(cfg)
    tau = cfg.get("tau")
    steps = int(cfg.get("steps", cfg.get("schedule", {}).get("steps", 1)))
    if axis == "N":
        d = base.to_dict()
        N = int(value)
        J = d["couplings"][0] if d["couplings"] else 1.0
        B = d["onsite"][0] if d["onsite"] else 0.0
        base = ChainSpec.uniform(N, d["model"], J, B, d["periodic"])
    elif axis == "K":
        K = int(value)
    elif axis == "tau":
        tau = float(value)
    if tau is None:
        raise ConfigError("sweep needs 'tau' unless it is the swept axis")
    s = spectrum(build_chain(base))
    cert = certify(s, base, tau, K)
    metrics["rho"] = cert.rho if cert.rho is not None else math.nan
    metrics["rho_full"] = cert.rho_full if cert.rho_full is not None else math.nan
    metrics["min_overlap"] = cert.condition.min_overlap
    metrics["P"] = float(run(s, K, uniform(tau, steps), "auto").P[-1])
    return metrics


def cmd_sweep(cfg):
    sw = cfg.get("sweep") or {}
    axis = sw.get("axis")
    if axis not in ("tau", "N", "K", "M"):
        raise ConfigError(f"sweep axis must be one of tau, N, K, M; got {axis!r}")
    values = sw.get("values")
    if isinstance(values, dict):
        values = np.linspace(values["start"], values["stop"], int(values["num"])).tolist()
    if not values:
        raise ConfigError("sweep axis has no values")
    values = sorted(float(v) if axis == "tau" else int(v) for v in values)
    wanted = sw.get("metrics")
    with ThreadPoolExecutor(worker_count()) as pool:
        results = list(pool.map(lambda v: _sweep_point(cfg, axis, v), values))
    rows = []
    for v, res in zip(values, results):
        for name in sorted(res):
            if wanted is None or name in wanted:
                rows.append((axis, v, name, res[name]))
    if fmt(cfg, "csv") == "csv":
        emit(cfg, rows_to_csv(["axis", "value", "metric", "result"], rows))
    else:
        emit(cfg, dumps([{"axis": a, "value": v, "metric": m, "result": r}
                         for a, v, m, r in rows]))
    return EXIT_OK


def cmd_encode(cfg):
    bits = cfg.get("bits")
    if bits is None:
        raise ConfigError("no bit string given")
    if "rails" not in cfg:
        raise ConfigError("encode needs --rails")
    M = int(cfg["rails"])
    K = excitations_from(cfg)
    subsets = encoding.encode_bits(str(bits), M, K)
    emit(cfg, json.dumps([list(s) for s in subsets]))
    return EXIT_OK


COMMANDS = {"chain": cmd_chain, "check": cmd_check, "simulate": cmd_simulate,
            "optimize": cmd_optimize, "sweep": cmd_sweep, "encode": cmd_encode, "mc": cmd_mc}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--sites", type=int)
    common.add_argument("--model", choices=("heisenberg", "xy", "custom"))
    common.add_argument("--coupling", type=float)
    common.add_argument("--periodic", action="store_true")
    common.add_argument("--tau", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--rails", type=int)
    common.add_argument("--excitations", type=lambda x: x if x == "auto" else int(x))
    common.add_argument("--runs", type=int)
    common.add_argument("--representation", choices=("dense", "product_sum", "auto"))

    parser = argparse.ArgumentParser(prog="multirail", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"chain": "spectrum and transfer amplitude of one chain",
             "check": "overlap condition and convergence certificate",
             "simulate": "protocol trace for a schedule",
             "optimize": "greedy measuring intervals",
             "sweep": "scan tau, N, K or M",
             "encode": "bit string to multi-rail codewords",
             "mc": "Monte Carlo histogram of the success step"}
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        if name == "encode":
            p.add_argument("bits", nargs="?")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"multirail {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EigensolverError, BudgetExceeded, ArithmeticError) as exc:
        print(f"multirail {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
