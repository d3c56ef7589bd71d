"""Command-line entry point: gen-data, train, eval, sweep, inspect.

Exit codes: 0 success, 1 usage or config error, 2 I/O error, 3 data or parse error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import pipeline, rl, scene
from .channel import BudgetTooSmall, WireError, describe, hexdump, text_frame_size
from .config import FIELD_NAMES, ConfigError, RunConfig, build_config, load_config_file
from .metrics import REFERENCES, write_records

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 1, 2, 3

logger = logging.getLogger("saigc")
_DEFAULTS = RunConfig()


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for I/O errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _flag(parser, name: str, type_=None, help_: str = "", **kw):
    key = name.lstrip("-").replace("-", "_")
    default = getattr(_DEFAULTS, key, None)
    if isinstance(default, tuple):
        default = ",".join(map(str, default))
    shown = "" if default is None else f" (default: {default})"
    parser.add_argument(name, type=type_, default=argparse.SUPPRESS, help=help_ + shown, **kw)


def _common(parser, out_help: str):
    _flag(parser, "--seed", int, "random seed")
    _flag(parser, "--out", str, out_help)
    parser.add_argument("--config", default=None, help="YAML or JSON file of settings; flags override it")


def _noise_flags(parser):
    _flag(parser, "--p-drop-heading", float, "encoder drops the heading phrase with this probability")
    _flag(parser, "--p-drop-other", float, "encoder drops each other semantic phrase with this probability")
    _flag(parser, "--p-clutter", float, "encoder appends a clutter phrase with this probability")
    _flag(parser, "--p-value-swap", float, "encoder reports a wrong color with this probability")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = _Parser(prog="saigc", description="Prompt-based semantic communication simulator.",
                     formatter_class=fmt, epilog=__doc__.split("\n\n", 1)[1])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="generate a seeded JSONL scene dataset")
    _flag(p, "--train", int, "number of training scenes")
    _flag(p, "--test", int, "number of test scenes")
    _common(p, "dataset path (JSONL)")

    p = sub.add_parser("train", help="train the prompt-edit policy")
    _flag(p, "--data", str, "dataset path")
    _flag(p, "--gamma", float, "discount factor")
    _flag(p, "--lr-actor", float, "actor learning rate")
    _flag(p, "--lr-critic", float, "critic learning rate")
    _flag(p, "--lambda-len", float, "cost per added phrase")
    _flag(p, "--horizon", int, "maximum edits per episode and at inference")
    _flag(p, "--episodes", int, "training episodes")
    _flag(p, "--log", str, "training log CSV (default: <out> with suffix .log.csv)")
    _noise_flags(p)
    _common(p, "policy path (JSON)")

    for name, helptext in (("eval", "score one budget and write per-scene metrics"),
                           ("sweep", "score a list of budgets")):
        p = sub.add_parser(name, help=helptext)
        _flag(p, "--data", str, "dataset path")
        _flag(p, "--policy", str, "policy path (not needed for --mode original)")
        if name == "eval":
            _flag(p, "--budget", int, "payload budget in bytes")
            _flag(p, "--k", str, "comma-separated k values for recall@k")
        else:
            _flag(p, "--budgets", str, "comma-separated ascending budgets in bytes")
        _flag(p, "--mode", str, "original or modified", choices=pipeline.MODES)
        _flag(p, "--reference", str, "raster size the compression ratio is measured against",
              choices=tuple(REFERENCES))
        _noise_flags(p)
        _common(p, "CSV output path")

    p = sub.add_parser("inspect", help="dump and validate a payload file")
    p.add_argument("payload", help="payload file")
    p.add_argument("--json", action="store_true", help="print the parsed fields as JSON")
    return parser


def _resolve(args) -> RunConfig:
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {k: v for k, v in vars(args).items() if k in FIELD_NAMES}
    return build_config(file_values, overrides)


def _need(cfg: RunConfig, *keys: str):
    for key in keys:
        if getattr(cfg, key) is None:
            raise UsageError(f"--{key} is required")


def _load_dataset(path: str) -> scene.Dataset:
    try:
        return scene.read_dataset(path)
    except OSError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _load_policy(path: str):
    try:
        return rl.load_policy(path)
    except OSError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _check_budget(budget: int):
    if budget < text_frame_size(0):
        raise BudgetTooSmall(f"budget {budget} below the {text_frame_size(0)}-byte minimal frame")


def cmd_gen_data(cfg: RunConfig) -> int:
    _need(cfg, "out")
    try:
        dataset = scene.generate_dataset(cfg.train, cfg.test, cfg.seed)
    except ValueError as exc:
        raise ConfigError("train/test", str(exc)) from None
    scene.write_dataset(dataset, cfg.out)
    print(f"wrote {len(dataset)} scenes ({dataset.n_train} train, {len(dataset) - dataset.n_train} test) to {cfg.out}")
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    _need(cfg, "data", "out")
    train_cfg = cfg.training_config()
    noise = cfg.noise_config()
    dataset = _load_dataset(cfg.data)
    if not dataset.train:
        raise DataError(f"{cfg.data}: empty train split")
    policy, critic, log = rl.train([s for _, s in dataset.train], train_cfg, noise)
    config = asdict(train_cfg)
    config["noise"] = asdict(noise)
    rl.save_policy(cfg.out, policy, critic, config)
    log_path = cfg.log or str(Path(cfg.out).with_suffix(".log.csv"))
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(rl.LogRow._fields)
        for row in log:
            writer.writerow([row.episode, repr(row.mean_reward), repr(row.mean_quality)])
    print(f"trained {train_cfg.episodes} episodes; policy -> {cfg.out}; log -> {log_path}")
    return EXIT_OK


def _eval_inputs(cfg: RunConfig):
    _need(cfg, "data", "out")
    if cfg.mode not in pipeline.MODES:
        raise ConfigError("mode", f"must be one of {pipeline.MODES}")
    if cfg.reference not in REFERENCES:
        raise ConfigError("reference", f"must be one of {tuple(REFERENCES)}")
    dataset = _load_dataset(cfg.data)
    if not dataset.test:
        raise DataError(f"{cfg.data}: empty test split")
    policy, horizon = None, cfg.horizon
    if cfg.mode == "modified":
        _need(cfg, "policy")
        policy, _, saved = _load_policy(cfg.policy)
        horizon = int(saved.get("horizon", horizon))
    return dataset, policy, horizon


def cmd_eval(cfg: RunConfig) -> int:
    for k in cfg.k:
        if not 1 <= k <= scene.N_CLASSES:
            raise ConfigError("k", f"k must be in 1..{scene.N_CLASSES}")
    _check_budget(cfg.budget_config().budget_bytes)
    dataset, policy, horizon = _eval_inputs(cfg)
    records = pipeline.evaluate(dataset.test, cfg.mode, policy, cfg.budget, cfg.noise_config(), cfg.seed,
                                horizon, cfg.reference)
    write_records(records, cfg.out)
    summary = pipeline.summarize(records, cfg.k)
    for k in cfg.k:
        print(f"recall@{k}={summary[f'recall@{k}']}")
    print(f"mean_compression_ratio={summary['mean_ratio']}")
    print(f"mean_quality={summary['mean_quality']}")
    return EXIT_OK


SWEEP_HEADER = ("budget", "mean_quality", "mean_ratio", "recall@1", "recall@5")


def cmd_sweep(cfg: RunConfig) -> int:
    budgets = list(cfg.budgets)
    if not budgets or budgets != sorted(budgets):
        raise ConfigError("budgets", "must be a non-empty ascending list")
    for b in budgets:
        _check_budget(b)
    dataset, policy, horizon = _eval_inputs(cfg)
    rows = pipeline.sweep(dataset.test, policy, budgets, cfg.mode, cfg.noise_config(), cfg.seed, horizon,
                          cfg.reference)
    with open(cfg.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([row["budget"]] + [repr(row[k]) for k in SWEEP_HEADER[1:]])
    for row in rows:
        print(f"budget={row['budget']} mean_quality={row['mean_quality']:.6f} recall@1={row['recall@1']}")
    return EXIT_OK


def cmd_inspect(path: str, as_json: bool = False) -> int:
    data = Path(path).read_bytes()
    print(hexdump(data))
    try:
        desc = describe(data)
    except WireError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DATA
    if as_json:
        print(json.dumps(desc, indent=2))
        return EXIT_OK
    print(f"length: {desc['length']} bytes")
    print(f"version: {desc['version']}")
    print(f"flags: 0x{desc['flags']:02x}")
    print(f"phrases ({len(desc['phrases'])}):")
    for phrase in desc["phrases"]:
        print(f"  {phrase}")
    print(f"hints ({len(desc['hints'])}):")
    for x, y, w, h in desc["hints"]:
        print(f"  x={x} y={y} w={w} h={h}")
    print(f"crc32: {desc['crc32']} ok")
    return EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "inspect":
            return cmd_inspect(args.payload, args.json)
        return COMMANDS[args.command](_resolve(args))
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetTooSmall as exc:
        print(f"error: BudgetTooSmall: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
