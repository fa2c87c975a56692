"""Command-line front end: ``wmstat <subcommand> [options]``.

Every option may also be given in a JSON config file (``--config``) whose
keys are the option names with dashes replaced by underscores; explicit
command-line options win over the file.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .codecs import generate_sequence, rederive_bundles
from .detection import GAUSSIAN, MONTE_CARLO, DetectionConfig, detect
from .efficiency import crossover_delta
from .errors import WatermarkError
from .experiments import DEFAULT_SCORES, ExperimentConfig, run_efficiency_sweep, run_tradeoff, run_type1, run_type2, write_curve_csv
from .keyed_randomness import PrngConfig, Scheme, SecretKey, replicate_rng
from .ntp import NtpDistribution, delta_grid, ingest_trace, make_spike
from .pivots import pivot_series
from .scores import parse_score


def _window(value):
    if value is None or str(value).lower() in ("none", "full", "inf"):
        return None
    return int(value)


def _ints(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _scores(text):
    """Split a score list on ``;`` (commas appear inside score arguments)."""
    if isinstance(text, (list, tuple)):
        return [str(s) for s in text]
    return [s.strip() for s in str(text).split(";") if s.strip()]


def _add_experiment_options(p):
    p.add_argument("--scores", type=_scores, default=list(DEFAULT_SCORES), help="';'-separated score specs")
    p.add_argument("--vocab-size", type=int, default=1000)
    p.add_argument("--n-grid", type=_ints, default=[100, 200, 300, 400, 500], help="comma-separated lengths")
    p.add_argument("--replicates", type=int, default=5000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--delta-low", type=float, default=1e-3)
    p.add_argument("--delta-high", type=float, default=0.5)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--key", type=int, default=0)
    p.add_argument("--window-size", type=_window, default=None, help="hash window m, or 'full'")
    p.add_argument("--prompt-length", type=int, default=5)
    p.add_argument("--null-law", choices=["uniform", "spike"], default="uniform")
    p.add_argument("--critical", choices=["auto", GAUSSIAN, MONTE_CARLO], default="auto")
    p.add_argument("--mc-replicates", type=int, default=500)
    p.add_argument("--mc-batches", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", type=Path, required=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wmstat", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, help="JSON file of option defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {}

    g = commands["generate"] = sub.add_parser("generate", help="generate a watermarked token sequence")
    g.add_argument("--scheme", choices=[s.value for s in Scheme], default="gumbel")
    g.add_argument("--key", type=int, default=0)
    g.add_argument("--n", type=int, default=200)
    g.add_argument("--vocab-size", type=int, default=1000)
    g.add_argument("--window-size", type=_window, default=None)
    g.add_argument("--prompt", type=_ints, default=[])
    g.add_argument("--trace", type=Path, help="'full' NTP trace JSON; rows are used in order")
    g.add_argument("--delta-low", type=float, default=1e-3)
    g.add_argument("--delta-high", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0, help="seed for the spike Δ_t draws")
    g.add_argument("--output", type=Path)

    d = commands["detect"] = sub.add_parser("detect", help="test a token sequence for a watermark")
    d.add_argument("--input", type=Path, required=False, help="record JSON written by 'generate'")
    d.add_argument("--key", type=int, default=0)
    d.add_argument("--scores", type=_scores, default=None, help="';'-separated score specs")
    d.add_argument("--alpha", type=float, default=0.05)
    d.add_argument("--mode", choices=[GAUSSIAN, MONTE_CARLO], default=GAUSSIAN)
    d.add_argument("--mc-replicates", type=int, default=500)
    d.add_argument("--mc-batches", type=int, default=10)
    d.add_argument("--seed", type=int, default=0)

    for name, text in (("type1", "Type I error curves"), ("type2", "Type II error curves")):
        commands[name] = sub.add_parser(name, help=text)
        _add_experiment_options(commands[name])

    e = commands["efficiency"] = sub.add_parser("efficiency", help="class-rate curves over a Δ grid")
    e.add_argument("--scores", type=_scores, default=["ars", "log", "ind", "gum_opt"])
    e.add_argument("--grid", type=_floats, default=None, help="comma-separated Δ values")
    e.add_argument("--output", type=Path)

    t = commands["tradeoff"] = sub.add_parser("tradeoff", help="γ(Δ)·R(Δ) trade-off on an NTP trace")
    t.add_argument("--trace", type=Path, required=False)
    t.add_argument("--scores", type=_scores, default=["ars", "log", "gum_opt"])
    t.add_argument("--grid", type=_floats, default=None)
    t.add_argument("--output", type=Path)

    c = commands["crossover"] = sub.add_parser("crossover", help="Δ where two class-rate curves cross")
    c.add_argument("--a", default="ars")
    c.add_argument("--b", default="log")
    c.add_argument("--lo", type=float, default=0.001)
    c.add_argument("--hi", type=float, default=0.99)
    return parser, commands


def parse_args(argv=None) -> argparse.Namespace:
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        conf = json.loads(args.config.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    if not isinstance(conf, dict):
        parser.error("config file must hold a JSON object")
    unknown = set(conf) - (set(vars(args)) - {"command", "config"})
    if unknown:
        parser.error(f"unknown config keys for '{args.command}': {sorted(unknown)}")
    # file values become defaults (argparse applies ``type`` to string
    # defaults), then a second parse lets explicit flags override them
    commands[args.command].set_defaults(**conf)
    return parser.parse_args(argv)


def _emit(obj, output=None):
    text = json.dumps(obj, indent=2)
    if output is None:
        print(text)
    else:
        Path(output).write_text(text + "\n", encoding="utf-8")


def cmd_generate(args):
    cfg = PrngConfig(window_size=args.window_size)
    if args.trace is not None:
        trace = ingest_trace(args.trace)
        if trace.kind != "full" or len(trace) < args.n:
            raise WatermarkError("generate needs a 'full' trace with at least n rows")
        source = list(trace.rows)
    else:
        rng = replicate_rng(args.seed, 0)
        deltas = rng.uniform(args.delta_low, args.delta_high, size=args.n)
        if Scheme.parse(args.scheme) is Scheme.BABY:
            source = [NtpDistribution(np.array([d, 1.0 - d])) for d in deltas]
        else:
            source = [make_spike(d, args.vocab_size) for d in deltas]
    record = generate_sequence(SecretKey.from_int(args.key), cfg, source, args.n, args.scheme, args.prompt)
    _emit(record.to_dict(), args.output)


def cmd_detect(args):
    if args.input is None:
        raise WatermarkError("detect needs --input")
    rec = json.loads(args.input.read_text(encoding="utf-8"))
    scheme = Scheme.parse(rec["scheme"])
    cfg = PrngConfig(window_size=rec.get("window_size"), pad_token=rec.get("pad_token", 0))
    bundles = rederive_bundles(SecretKey.from_int(args.key), cfg, rec["tokens"], scheme, rec["vocab_size"],
                               rec.get("prompt", []))
    series = pivot_series(rec["tokens"], bundles, rec["vocab_size"])
    default = {Scheme.GUMBEL: ["ars"], Scheme.INVERSE: ["dif_neg"], Scheme.BABY: ["baby_id"]}[scheme]
    dcfg = DetectionConfig(args.alpha, args.mode, args.mc_replicates, args.mc_batches, args.seed)
    reports = {s: json.loads(detect(series, parse_score(s), dcfg).to_json()) for s in (args.scores or default)}
    _emit(reports)


def _experiment_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        scores=tuple(args.scores), vocab_size=args.vocab_size, n_grid=tuple(args.n_grid),
        replicates=args.replicates, alpha=args.alpha, delta_low=args.delta_low, delta_high=args.delta_high,
        master_seed=args.master_seed, key=args.key, window_size=args.window_size,
        prompt_length=args.prompt_length, null_law=args.null_law, critical=args.critical,
        mc_replicates=args.mc_replicates, mc_batches=args.mc_batches, workers=args.workers,
    )


def cmd_curves(args):
    run = run_type1 if args.command == "type1" else run_type2
    write_curve_csv(args.output if args.output is not None else sys.stdout, run(_experiment_config(args)))


def cmd_efficiency(args):
    grid = args.grid if args.grid is not None else delta_grid()
    res = run_efficiency_sweep(args.scores, grid, args.output)
    _emit({"crossover_ars_log": res.crossover, "points": len(res.rows), "output": str(args.output)})


def cmd_tradeoff(args):
    if args.trace is None:
        raise WatermarkError("tradeoff needs --trace")
    grid = args.grid if args.grid is not None else np.geomspace(1e-3, 0.5, 60)
    res = run_tradeoff(ingest_trace(args.trace), args.scores, grid, args.output)
    _emit({"argmax_delta": res.argmax, "output": str(args.output)})


def cmd_crossover(args):
    _emit({"a": args.a, "b": args.b, "delta": crossover_delta(parse_score(args.a), parse_score(args.b), (args.lo, args.hi))})


COMMANDS = {
    "generate": cmd_generate,
    "detect": cmd_detect,
    "type1": cmd_curves,
    "type2": cmd_curves,
    "efficiency": cmd_efficiency,
    "tradeoff": cmd_tradeoff,
    "crossover": cmd_crossover,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (WatermarkError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"wmstat {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
