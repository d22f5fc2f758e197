"""Command-line entry point: ``resmem generate | crossval | train | predict | bench``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .harness import FittedModel, HyperSpace, ModelSpec
from .tasks import TASKS, generate_dataset, load_dataset, save_dataset

log = logging.getLogger("resmem")

TASK_DEFAULTS = {
    "latch": {"max_len": 200, "n_spikes": 3},
    "copy": {"max_payload": 20, "bits": 8},
    "repeat_copy": {"max_payload": 20, "bits": 8, "max_repeats": 3},
}


class CliError(Exception):
    pass


def _positive_int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _model_list(text: str) -> list[str]:
    names = [v.strip() for v in text.split(",") if v.strip()]
    bad = [n for n in names if n not in harness.MODELS]
    if not names or bad:
        raise argparse.ArgumentTypeError(
            f"unknown model(s) {bad or text!r}; valid models: {', '.join(harness.MODELS)}"
        )
    return names


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="resmem", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    cmds = {}

    def add(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", type=Path, help="JSON file of flag values; explicit flags win")
        cmds[name] = p
        return p

    p = add("generate", "write a seeded benchmark dataset")
    p.add_argument("--task", required=True, help=f"one of {', '.join(TASKS[:3])}")
    p.add_argument("--n", type=int, default=200, help="number of sequences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--max-len", type=int, help="latch: longest sequence")
    p.add_argument("--n-spikes", type=int, help="latch: spikes per sequence")
    p.add_argument("--max-payload", type=int, help="copy tasks: longest payload")
    p.add_argument("--bits", type=int, help="copy tasks: bits per payload row")
    p.add_argument("--max-repeats", type=int, help="repeat_copy: most repetitions")
    p.add_argument("--no-markers", action="store_true", help="repeat_copy: single end-token cue only")

    def model_flags(p):
        p.add_argument("--data", type=Path, required=True)
        p.add_argument("--model", default="rmm", choices=harness.MODELS)
        p.add_argument("--trials", type=int, default=10)
        p.add_argument("--inner-folds", type=int, default=3)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--reservoir-size", type=int, default=128)
        p.add_argument("--max-iters", type=int, default=10)

    p = add("crossval", "nested crossvalidation with random search")
    model_flags(p)
    p.add_argument("--folds", type=int, default=20)
    p.add_argument("--out", type=Path, help="results CSV")
    p.add_argument("--summary", type=Path, help="summary JSON (default: next to --out)")

    p = add("train", "random search on the whole dataset, then save the refit model")
    model_flags(p)
    p.add_argument("--model-out", type=Path, required=True)

    p = add("predict", "roll a saved model over a dataset")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--model-file", type=Path, required=True)
    p.add_argument("--index", type=int, help="predict only this sequence")
    p.add_argument("--out", type=Path, help="predictions JSON (default: stdout)")

    p = add("bench", "fit / predict runtimes on the shift sequence")
    p.add_argument("--lengths", type=_positive_int_list, default=[100, 500, 1000, 2000])
    p.add_argument("--model", type=_model_list, default=["esn", "rmm"])
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reservoir-size", type=int, default=128)
    p.add_argument("--out", type=Path, help="runtimes CSV (default: stdout)")
    return parser, cmds


def parse_args(argv=None) -> argparse.Namespace:
    parser, cmds = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        config = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    if not isinstance(config, dict):
        parser.error("config file must hold a JSON object")
    config = {k.replace("-", "_"): v for k, v in config.items()}
    sub = cmds[args.command]
    known = {a.dest for a in sub._actions} | {"space"}
    unknown = set(config) - known
    if unknown:
        parser.error(f"unknown config keys for {args.command}: {sorted(unknown)}")
    # lists in the config for list-valued flags may be given as JSON arrays
    for key in ("lengths", "model"):
        if args.command == "bench" and isinstance(config.get(key), list):
            config[key] = ",".join(map(str, config[key]))
    for key, value in list(config.items()):
        action = next((a for a in sub._actions if a.dest == key), None)
        if action is not None and action.type is not None and isinstance(value, str):
            config[key] = action.type(value)
    sub.set_defaults(**config)
    args = parser.parse_args(argv)
    if not hasattr(args, "space"):
        args.space = None
    return args


def _load(path: Path):
    try:
        samples = load_dataset(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"cannot load dataset {path}: {exc}")
    if not samples:
        raise CliError(f"dataset {path} is empty")
    return samples


def _space(args, task: str) -> HyperSpace:
    space = HyperSpace.for_task(task)
    overrides = getattr(args, "space", None)
    return space.updated(overrides) if overrides else space


def cmd_generate(args) -> None:
    if args.task not in TASK_DEFAULTS:
        raise CliError(f"unknown task {args.task!r}; valid tasks: {', '.join(TASK_DEFAULTS)}")
    if args.n < 1:
        raise CliError("--n must be positive")
    kwargs = {}
    for key in TASK_DEFAULTS[args.task]:
        value = getattr(args, key)
        if value is not None:
            kwargs[key] = value
    if args.task == "repeat_copy" and args.no_markers:
        kwargs["markers"] = False
    samples = generate_dataset(args.task, args.n, args.seed, **kwargs)
    save_dataset(samples, args.out)
    log.info("wrote %d %s sequences to %s", len(samples), args.task, args.out)


def _spec(args) -> ModelSpec:
    return ModelSpec(args.model, args.reservoir_size, args.max_iters)


def cmd_crossval(args) -> None:
    samples = _load(args.data)
    if len(samples) % args.folds:
        raise CliError(f"{len(samples)} sequences cannot be split into {args.folds} equal folds")
    task = samples[0].task
    report = harness.crossvalidate(
        samples, args.folds, _spec(args), _space(args, task),
        args.trials, args.inner_folds, args.seed,
    )
    if args.out is not None:
        with open(args.out, "w", newline="") as f:
            harness.write_results_csv([report], f)
        summary = args.summary or args.out.with_suffix(".json")
        harness.write_summary_json(report, summary)
    elif args.summary is not None:
        harness.write_summary_json(report, args.summary)
    print(f"RMSE: {report.mean:.6g} +- {report.std:.6g}")


def cmd_train(args) -> None:
    samples = _load(args.data)
    rng = harness.substream(args.seed, "search")
    result = harness.select_and_fit(
        samples, _spec(args), _space(args, samples[0].task), args.trials, args.inner_folds, rng,
    )
    result.model.save(args.model_out)
    print(f"inner RMSE: {min(result.scores):.6g}")


def cmd_predict(args) -> None:
    samples = _load(args.data)
    try:
        model = FittedModel.load(args.model_file)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"cannot load model {args.model_file}: {exc}")
    if args.index is not None:
        if not 0 <= args.index < len(samples):
            raise CliError(f"--index must lie in [0, {len(samples)})")
        samples = [samples[args.index]]
    if samples[0].X.shape[1] != model.crj.input_dim:
        raise CliError(
            f"model expects {model.crj.input_dim} input channels, data has {samples[0].X.shape[1]}"
        )
    preds = [model.predict(s.X) for s in samples]
    text = json.dumps([p.tolist() for p in preds]) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
        print(f"RMSE: {harness.rmse([s.Y for s in samples], preds):.6g}")


def cmd_bench(args) -> None:
    rows = []
    for name in args.model:
        spec = ModelSpec(name, args.reservoir_size)
        rows.extend(harness.bench_runtime(args.lengths, spec, args.repeats, args.seed))
    if args.out is None:
        harness.write_runtimes_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", newline="") as f:
            harness.write_runtimes_csv(rows, f)


COMMANDS = {
    "generate": cmd_generate,
    "crossval": cmd_crossval,
    "train": cmd_train,
    "predict": cmd_predict,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        COMMANDS[args.command](args)
    except (CliError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
