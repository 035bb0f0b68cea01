"""Command line interface: generate, train, evaluate, stability, budget.

Every artifact-producing command writes a run manifest next to its
output: the command name, the full flag snapshot, seeds, paths, duration
and tool version, enough to reproduce the run.  Exit codes: 0 success or
PASS, 1 assertion FAIL, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .data import (
    FormatError,
    ModelStamp,
    SourceParams,
    generate_dataset,
    load_dataset,
    load_model,
    save_dataset,
    save_model,
    source_fn,
)
from .data import FAMILIES, _write_json
from .fem import SolverError
from .hybrid import (
    BudgetViolation,
    TrainConfig,
    TrainingDivergedError,
    error_budget,
    evaluate,
    stability_check,
    train,
)
from .mesh import build_hierarchy

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class UsageError(ValueError):
    pass


def _write_manifest(out_path: Path, command: str, config: dict, inputs: list,
                    outputs: list, seeds: dict, started: float) -> None:
    doc = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "duration_seconds": time.time() - started,
        "tool": "hybridfem",
        "version": __version__,
    }
    _write_json(doc, out_path.with_name(out_path.name + ".manifest.json"))


def _parse_hidden(spec: str) -> tuple[int, ...]:
    try:
        depth, width = spec.lower().split("x")
        layers = (int(width),) * int(depth)
    except ValueError as e:
        raise UsageError(f"--hidden expects DEPTHxWIDTH (e.g. 4x512), got {spec!r}") from e
    if not layers or any(w < 1 for w in layers):
        raise UsageError(f"--hidden layers must be positive, got {spec!r}")
    return layers


def _parse_decay(spec: str) -> tuple[float, int]:
    try:
        factor, every = spec.split("@")
        return float(factor), int(every)
    except ValueError as e:
        raise UsageError(f"--decay expects FACTOR@EVERY (e.g. 0.5@100), got {spec!r}") from e


def cmd_generate(args) -> int:
    started = time.time()
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    m = build_hierarchy(args.n0, args.level)
    ds = generate_dataset(m, args.count, args.seed, family=args.family)
    out = Path(args.out)
    save_dataset(ds, out)
    config = {
        "n0": args.n0, "level": args.level, "count": args.count,
        "seed": args.seed, "family": args.family, "out": str(out),
    }
    _write_manifest(out, "generate", config, [], [out], {"seed": args.seed}, started)
    print(
        f"wrote {args.count} samples to {out} "
        f"(H = {m.spacing(0):g}, h = {m.spacing(m.levels):g})"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    started = time.time()
    train_ds = load_dataset(args.data)
    test_ds = load_dataset(args.test) if args.test else None
    factor, every = _parse_decay(args.decay)
    try:
        cfg = TrainConfig(
            epochs=args.epochs,
            lr=args.lr,
            lr_decay_factor=factor,
            lr_decay_every=every,
            batch_size=args.batch_size,
            hidden=_parse_hidden(args.hidden),
            seed=args.seed,
            coarse_input=args.coarse_input,
            standardize=args.standardize,
        )
    except ValueError as e:
        raise UsageError(str(e)) from e
    net, history = train(train_ds, cfg, test_ds)
    out = Path(args.out)
    stamp = ModelStamp(n0=train_ds.n0, level=train_ds.levels, coarse_input=args.coarse_input)
    save_model(net, out, stamp=stamp)
    loss_csv = out.parent / "loss.csv"
    from .report import plot_loss, write_loss_csv

    write_loss_csv(history, loss_csv)
    outputs = [out, loss_csv]
    if not args.no_figures:
        fig = out.parent / "loss.png"
        plot_loss(history, fig)
        outputs.append(fig)
    config = {
        "data": args.data, "test": args.test, "hidden": args.hidden,
        "epochs": args.epochs, "lr": args.lr, "decay": args.decay,
        "batch_size": args.batch_size, "seed": args.seed,
        "coarse_input": args.coarse_input, "standardize": args.standardize,
        "out": str(out), "no_figures": args.no_figures,
    }
    inputs = [args.data] + ([args.test] if args.test else [])
    _write_manifest(out, "train", config, inputs, outputs, {"seed": args.seed}, started)
    final = history[-1]
    print(f"trained {len(history) - 1} epochs: train loss {final[1]:.6e}"
          + (f", test loss {final[2]:.6e}" if final[2] is not None else ""))
    print(f"wrote {out} and {loss_csv}")
    return EXIT_OK


def _load_stamped_model(path: str):
    net, stamp = load_model(path)
    if stamp is None:
        raise UsageError(f"{path}: model carries no mesh stamp; re-train to attach one")
    return net, stamp


def _check_stamp(stamp: ModelStamp, ds, what: str) -> None:
    if (stamp.n0, stamp.level) != (ds.n0, ds.levels):
        raise UsageError(
            f"stamp mismatch: model is for n0={stamp.n0}, level={stamp.level}; "
            f"{what} has n0={ds.n0}, levels={ds.levels}"
        )


def cmd_evaluate(args) -> int:
    started = time.time()
    net, stamp = _load_stamped_model(args.model)
    train_ds = load_dataset(args.train)
    test_ds = load_dataset(args.test)
    _check_stamp(stamp, train_ds, "training set")
    _check_stamp(stamp, test_ds, "test set")
    rows = evaluate(net, train_ds, test_ds, coarse_input=stamp.coarse_input)
    out = Path(args.out)
    from .report import plot_evaluation, write_eval_csv

    write_eval_csv(rows, out)
    outputs = [out]
    if not args.no_figures:
        fig = out.with_suffix(".png")
        plot_evaluation(rows, fig)
        outputs.append(fig)
    config = {
        "model": args.model, "train": args.train, "test": args.test,
        "out": str(out), "no_figures": args.no_figures,
    }
    _write_manifest(out, "evaluate", config, [args.model, args.train, args.test],
                    outputs, {}, started)
    for r in rows:
        print(
            f"{r.split}: err_coarse {r.err_coarse:.6e}  err_fine {r.err_fine:.6e}  "
            f"err_hybrid {r.err_hybrid:.6e}"
        )
    return EXIT_OK


def cmd_stability(args) -> int:
    started = time.time()
    net, stamp = _load_stamped_model(args.model)
    report = stability_check(net, stamp, n_pairs=args.pairs, seed=args.seed,
                             family=args.family)
    if args.out:
        out = Path(args.out)
        _write_json(report, out)
        config = {"model": args.model, "pairs": args.pairs, "seed": args.seed,
                  "family": args.family, "out": str(out)}
        _write_manifest(out, "stability", config, [args.model], [out],
                        {"seed": args.seed}, started)
    else:
        print(_dumps(report))
    print(
        f"{'PASS' if report['pass'] else 'FAIL'}: max ratio {report['max_ratio']:.6e} "
        f"vs c_W {report['c_w']:.6e} over {report['used_pairs']} pairs"
    )
    return EXIT_OK if report["pass"] else EXIT_FAIL


def cmd_budget(args) -> int:
    started = time.time()
    net, stamp = _load_stamped_model(args.model)
    ds = load_dataset(args.data)
    _check_stamp(stamp, ds, "dataset")
    c1, c2, c3, c4 = args.fparams
    params = SourceParams(c1, c2, c3, c4)
    f = source_fn(params, ds.family)
    record = error_budget(f, ds, net, coarse_input=stamp.coarse_input)
    record["fparams"] = list(args.fparams)
    if args.out:
        out = Path(args.out)
        _write_json(record, out)
        config = {"model": args.model, "data": args.data,
                  "fparams": list(args.fparams), "out": str(out)}
        _write_manifest(out, "budget", config, [args.model, args.data], [out],
                        {}, started)
    else:
        print(_dumps(record))
    print(
        f"budget sum {record['sum']:.6e} >= actual {record['actual']:.6e} "
        f"(best training sample {record['selected_index']})"
    )
    return EXIT_OK


def _dumps(doc: dict) -> str:
    from .data import _dump_json

    return _dump_json(doc)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridfem",
        description="Hybrid finite-element / neural-network Poisson solver",
    )
    parser.add_argument("--version", action="version", version=f"hybridfem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample sources and solve coarse+fine problems")
    p.add_argument("--n0", type=int, required=True, help="coarse cells per side")
    p.add_argument("--level", type=int, required=True, help="number of refinements L")
    p.add_argument("--count", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="dataset JSON path")
    p.add_argument("--family", choices=FAMILIES, default="verbatim")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the patch-correction network")
    p.add_argument("--data", required=True, help="training dataset JSON")
    p.add_argument("--test", default=None, help="held-out dataset JSON")
    p.add_argument("--hidden", default="4x512", help="hidden layout DEPTHxWIDTH")
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--decay", default="0.5@100", help="lr decay FACTOR@EVERY")
    p.add_argument("--batch-size", type=int, default=None,
                   help="samples per batch (default: full batch)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--coarse-input", choices=("patch", "global"), default="patch")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="mean errors vs the one-finer reference")
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True, help="evaluation CSV path")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stability", help="empirical Lipschitz audit of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--family", choices=FAMILIES, default="verbatim")
    p.add_argument("--out", default=None, help="stability JSON path (default: stdout)")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("budget", help="four-term error budget for one source")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="training dataset JSON")
    p.add_argument("--fparams", type=float, nargs=4, required=True,
                   metavar=("C1", "C2", "C3", "C4"))
    p.add_argument("--out", default=None, help="budget JSON path (default: stdout)")
    p.set_defaults(func=cmd_budget)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, TrainingDivergedError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BudgetViolation as e:
        print(f"FAIL: {e}", file=sys.stderr)
        return EXIT_FAIL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
