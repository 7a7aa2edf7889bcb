"""Command-line entry point: train, eval, transfer, compare, report."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..agent.network import NetworkError, load_network
from ..envs.compile import evaluate, write_evaluation_csv
from ..envs.vqe import NoiseModel
from ..replay.storage import BufferFormatError, load_buffer, save_buffer
from .analysis import compare, format_comparison, write_report
from .config import ConfigError, ExperimentConfig, load_config
from .runner import build_env, seed_list, train_run

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4
STRATEGIES = ("uniform", "her", "per", "reaper", "reaper_plus")

log = logging.getLogger("qreplay")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_noise(text: str) -> NoiseModel:
    values = {}
    for part in text.split(","):
        key, sep, val = part.partition("=")
        if not sep or key.strip() not in ("p1", "p2"):
            raise ConfigError(f"noise must look like p1=0.001,p2=0.005, got {text!r}")
        values[key.strip()] = float(val)
    return NoiseModel(values.get("p1", 0.0), values.get("p2", 0.0))


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    return cfg.resolved(desk_scale=args.desk_scale, strategy=args.strategy)


def _seeds(args, cfg) -> list:
    return list(range(args.seeds)) if args.seeds is not None else seed_list(cfg)


def cmd_train(args) -> int:
    cfg = _resolve(args)
    preset = cfg.name or Path(str(args.config)).stem
    buffer = None
    if args.buffer_in:
        probe = build_env(cfg, np.random.default_rng(0), 0)
        buffer = load_buffer(args.buffer_in, state_dim=probe.obs_dim,
                             action_count=probe.n_actions, strategy=cfg.strategy)
    for seed in _seeds(args, cfg):
        run_dir = Path(args.out) / preset / str(seed)
        noise = parse_noise(args.noise) if args.noise else None
        res = train_run(cfg, seed, run_dir, buffer=buffer, noise=noise)
        if args.buffer_out:
            target = Path(args.buffer_out)
            if len(_seeds(args, cfg)) > 1:
                target = target.with_name(f"{target.stem}.s{seed}{target.suffix}")
            save_buffer(res.buffer, target)
        last = res.metrics[-1] if res.metrics else {}
        print(f"{run_dir}: {len(res.metrics)} episodes, {last.get('step', 0)} steps, "
              f"last task metric {last.get('task_metric', float('nan'))}")
    return EXIT_OK


def _greedy(net):
    from ..agent.policy import masked_argmax
    return lambda obs, mask: masked_argmax(net.forward(obs), mask)


def cmd_eval(args) -> int:
    run_dir = Path(args.run)
    snap = run_dir / "config.snapshot"
    try:
        cfg = ExperimentConfig.from_text(snap.read_text())
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {snap}: {exc}") from exc
    net = load_network(run_dir / "net.ckpt")
    rng = np.random.default_rng(args.seed)
    policy = _greedy(net)
    if cfg.kind == "compile":
        from .runner import compile_config
        n = args.n_targets or int(cfg.get("eval", "n_targets", 100))
        tols = cfg.get("eval", "tolerances", [cfg.get("env", "tolerance")])
        report = evaluate(policy, compile_config(cfg), n, tols, rng)
        write_evaluation_csv(report, run_dir / "eval.csv", args.seed)
        for tol, row in report.items():
            print(f"tolerance {tol}: success {row['success_rate']:.4f}, "
                  f"fidelity {row['mean_fidelity']:.4f}, length {row['mean_len']:.2f} ± {row['std_len']:.2f}")
        return EXIT_OK
    env = build_env(cfg, rng, args.seed)
    if net.input_dim != env.obs_dim or net.output_dim != env.n_actions:
        raise ConfigError("checkpoint does not match the run's environment")
    rows = []
    for ep in range(args.episodes):
        obs, done, ret, info = env.reset(), False, 0.0, {}
        while not done:
            obs, r, done, info = env.step(policy(obs, env.legal_mask()))
            ret += r
        row = {"episode": ep, "return": ret, "success": bool(info.get("success", False))}
        if cfg.kind in ("qas", "transfer"):
            row.update(env.end_episode())
        rows.append(row)
    (run_dir / "eval.json").write_text(json.dumps(rows, indent=2))
    print(json.dumps(rows[-1]))
    return EXIT_OK


def cmd_transfer(args) -> int:
    from ..transfer import noise_from_config, run_transfer
    cfg = _resolve(args)
    noise = parse_noise(args.noise) if args.noise else noise_from_config(cfg)
    report = run_transfer(cfg, seeds=_seeds(args, cfg), source_buffer_file=args.source,
                          noise=noise, out_dir=Path(args.out) / (cfg.name or "transfer"))
    print(report.to_json())
    return EXIT_OK


def cmd_compare(args) -> int:
    print(format_comparison(compare(args.runs)))
    return EXIT_OK


def cmd_report(args) -> int:
    write_report(args.runs, args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qreplay", description="Replay-buffer experiments for quantum circuit RL.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", required=True, help="preset name or path to an .ini file")
        sp.add_argument("--seeds", type=int, help="run seeds 0..N-1 (default: from config)")
        sp.add_argument("--desk-scale", action="store_true")
        sp.add_argument("--strategy", choices=STRATEGIES)
        sp.add_argument("--out", default="out")
        sp.add_argument("--noise", help="p1=..,p2=..")

    t = sub.add_parser("train", help="train one config over its seeds")
    common(t)
    t.add_argument("--buffer-in", help="warm-start replay from a buffer file")
    t.add_argument("--buffer-out", help="also write the final buffer here")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="greedy evaluation of a trained run directory")
    e.add_argument("run")
    e.add_argument("--n-targets", type=int)
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--seed", type=int, default=12345)
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("transfer", help="noiseless -> noisy buffer transfer with baseline")
    common(x)
    x.add_argument("--source", help="source buffer file (skips the source runs)")
    x.set_defaults(func=cmd_transfer)

    c = sub.add_parser("compare", help="side-by-side mean ± std of run groups")
    c.add_argument("runs", nargs="+")
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("report", help="write plot-ready CSV or JSON")
    r.add_argument("runs", nargs="+")
    r.add_argument("--output", "-o", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, NetworkError, ValueError) as exc:
        if isinstance(exc, BufferFormatError):
            print(f"io error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
