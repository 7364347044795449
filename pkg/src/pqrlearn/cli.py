"""Command-line pipeline: split, count, train, eval, predict.

All stages are deterministic given their flags (one seed drives every random
draw; training itself is randomness-free), so rerunning a pipeline reproduces
its artifacts byte for byte. Outputs are written atomically via temp + rename.

Exit codes: 0 success, 2 configuration/usage errors, 3 I/O and data-format
errors, 4 numeric errors.
"""

from __future__ import annotations

import argparse
import itertools
import math
import os
import random
import sys
import tempfile

from . import io as sparse_io
from .exceptions import ConvergenceError, NumericError, ParseError
from .expansion import build_index_map, expand
from .ftrl import (
    CLASSIFICATION,
    REGRESSION,
    FtrlParams,
    FtrlState,
    evaluate_stream,
    load_model,
    save_model,
    sigmoid,
    train_stream,
)
from .metrics import write_report_csv
from .separation import (
    FeatureCounts,
    load_separation,
    save_counts,
    save_separation,
    select_top_k,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

RATING_RANGE = (1.0, 5.0)


def _atomic(write, path):
    """Run ``write(tmp_path)`` then rename the result into place."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=os.path.basename(path) + ".", dir=directory)
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_fractions(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated fractions, got {text!r}")
    return tuple(float(p) for p in parts)


def _parse_checkpoints(text: str):
    return [int(p) for p in text.split(",") if p]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_split = sub.add_parser("split", help="route lines into train/validation/test files")
    p_split.add_argument("data")
    p_split.add_argument("--fractions", type=_parse_fractions, default=(0.8, 0.1, 0.1),
                         metavar="TRAIN,VALID,TEST")
    p_split.add_argument("--seed", type=int, default=0)
    p_split.add_argument("--train", required=True, metavar="PATH")
    p_split.add_argument("--validation", required=True, metavar="PATH")
    p_split.add_argument("--test", required=True, metavar="PATH")

    p_count = sub.add_parser("count", help="count feature occurrences over a dataset")
    p_count.add_argument("data")
    p_count.add_argument("--output", required=True, metavar="PATH")
    p_count.add_argument("--sample-fraction", type=float, default=1.0)
    p_count.add_argument("--seed", type=int, default=0)

    p_train = sub.add_parser("train", help="train a model with online FTRL-Proximal")
    p_train.add_argument("data")
    p_train.add_argument("--task", choices=[REGRESSION, CLASSIFICATION], required=True)
    p_train.add_argument("--model", required=True, metavar="PATH")
    p_train.add_argument("--sep", metavar="PATH", help="load a saved separation instead of counting")
    p_train.add_argument("--k", type=int, help="high-frequency set size (default: ceil(sqrt(d)))")
    p_train.add_argument("--save-sep", metavar="PATH", help="persist the separation used")
    p_train.add_argument("--alpha", type=float, default=0.1)
    p_train.add_argument("--beta", type=float, default=1.0)
    p_train.add_argument("--l1", type=float, default=1.0)
    p_train.add_argument("--l2", type=float, default=1.0)
    p_train.add_argument("--epochs", type=int, default=1)
    p_train.add_argument("--sample-fraction", type=float, default=1.0,
                         help="fraction of instances used for the counting pass")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--checkpoints", type=_parse_checkpoints, default=[],
                         metavar="T1,T2,...")
    p_train.add_argument("--report", metavar="CSV")
    p_train.add_argument("--clip-ratings", action="store_true",
                         help="clip reported regression predictions to [1, 5]")

    p_eval = sub.add_parser("eval", help="evaluate a saved model")
    p_eval.add_argument("data")
    p_eval.add_argument("--model", required=True, metavar="PATH")
    p_eval.add_argument("--checkpoints", type=_parse_checkpoints, default=[], metavar="T1,T2,...")
    p_eval.add_argument("--report", metavar="CSV")
    p_eval.add_argument("--clip-ratings", action="store_true")

    p_predict = sub.add_parser("predict", help="write one prediction per input line")
    p_predict.add_argument("data")
    p_predict.add_argument("--model", required=True, metavar="PATH")
    p_predict.add_argument("--output", required=True, metavar="PATH")
    p_predict.add_argument("--clip-ratings", action="store_true")
    return parser


def cmd_split(args) -> int:
    train_frac, valid_frac, test_frac = args.fractions
    plan = sparse_io.DatasetSplit(train_frac, valid_frac, test_frac, seed=args.seed)
    counts = sparse_io.split(args.data, plan, args.train, args.validation, args.test)
    print(f"split {sum(counts)} lines: train={counts[0]} validation={counts[1]} test={counts[2]}")
    return EXIT_OK


def _counting_pass(path, sample_fraction: float, seed: int) -> FeatureCounts:
    """Count feature presence, optionally on a seeded instance sample.

    The max feature index is tracked over the full stream regardless of the
    sample, so the inferred dimension always covers the data.
    """
    if not 0.0 < sample_fraction <= 1.0:
        raise ValueError(f"sample fraction {sample_fraction} outside (0, 1]")
    rng = random.Random(seed)
    sample_all = sample_fraction >= 1.0
    counts: dict[int, int] = {}
    total = 0
    max_index = 0
    for instance in sparse_io.stream(path):
        features = instance.features
        if features and features[-1][0] > max_index:
            max_index = features[-1][0]
        if not sample_all and rng.random() >= sample_fraction:
            continue
        total += 1
        for index, _ in features:
            counts[index] = counts.get(index, 0) + 1
    return FeatureCounts(counts=counts, total_instances=total, max_index=max_index)


def cmd_count(args) -> int:
    counts = _counting_pass(args.data, args.sample_fraction, args.seed)
    _atomic(lambda tmp: save_counts(counts, tmp), args.output)
    print(f"counted {len(counts.counts)} distinct features over {counts.total_instances} instances")
    return EXIT_OK


def cmd_train(args) -> int:
    params = FtrlParams(alpha=args.alpha, beta=args.beta, l1=args.l1, l2=args.l2, task=args.task)
    if args.epochs < 1:
        raise ValueError(f"epochs must be at least 1, got {args.epochs}")

    if args.sep is not None:
        if args.k is not None:
            raise ValueError("pass either --sep or --k, not both")
        separation = load_separation(args.sep)
    else:
        counts = _counting_pass(args.data, args.sample_fraction, args.seed)
        d = counts.max_index
        if d == 0:
            raise ValueError("training data has no features; cannot infer dimension")
        k = args.k if args.k is not None else math.isqrt(d - 1) + 1  # ceil(sqrt(d))
        separation = select_top_k(counts, k, d)
    if args.save_sep:
        _atomic(lambda tmp: save_separation(separation, tmp), args.save_sep)

    index_map = build_index_map(separation)
    state = FtrlState(index_map.D, params)
    instances = itertools.chain.from_iterable(
        sparse_io.stream(args.data) for _ in range(args.epochs)
    )
    clip = RATING_RANGE if (args.clip_ratings and args.task == REGRESSION) else None
    state, report = train_stream(state, instances, index_map, checkpoints=args.checkpoints,
                                 clip_range=clip)
    _atomic(lambda tmp: save_model(tmp, state, separation), args.model)
    if args.report:
        _atomic(lambda tmp: write_report_csv(report, tmp), args.report)
    print(report.summary_line())
    return EXIT_OK


def cmd_eval(args) -> int:
    state, _, index_map = load_model(args.model)
    clip = RATING_RANGE if (args.clip_ratings and state.params.task == REGRESSION) else None
    report = evaluate_stream(state, sparse_io.stream(args.data), index_map,
                             checkpoints=args.checkpoints, clip_range=clip)
    if report.count == 0:
        raise ValueError(f"evaluation data {args.data} is empty")
    if args.report:
        _atomic(lambda tmp: write_report_csv(report, tmp), args.report)
    print(report.summary_line())
    return EXIT_OK


def cmd_predict(args) -> int:
    state, _, index_map = load_model(args.model)
    classification = state.params.task == CLASSIFICATION
    clip = args.clip_ratings and not classification

    def write(tmp):
        with open(tmp, "w", encoding="utf-8", newline="\n") as out:
            for instance in sparse_io.stream(args.data):
                margin = state.raw_margin(expand(instance.features, index_map))
                if classification:
                    value = sigmoid(margin)
                elif clip:
                    value = min(max(margin, RATING_RANGE[0]), RATING_RANGE[1])
                else:
                    value = margin
                out.write(f"{value!r}\n")

    _atomic(write, args.output)
    return EXIT_OK


COMMANDS = {
    "split": cmd_split,
    "count": cmd_count,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
