import argparse
import logging
import sys

from ...models.enums import BenchOp, Subcommand
from ...services import bench_service
from ...utils.helpers import parse_shape, shape_label
from ...utils.report import write_bench_results
from ...schemas.model import PRESETS
from ..deps import FORMATTER, add_seed, add_threads, get_model_config

logger = logging.getLogger(__name__)

DEFAULT_SHAPES = [shape_label(s) for s in bench_service.TABLE_SHAPES]


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        Subcommand.BENCH.value,
        help="time upsampling operators and full forward passes",
        formatter_class=FORMATTER,
    )
    parser.add_argument(
        "--op",
        action="append",
        default=None,
        help=f"operator to time, repeatable ({', '.join(op.value for op in BenchOp)}); default all",
    )
    parser.add_argument(
        "--shape",
        action="append",
        default=None,
        help=f"LR input HxWxC, repeatable; default {' '.join(DEFAULT_SHAPES)}",
    )
    parser.add_argument("--alpha", type=int, default=2, help="upsampling factor")
    parser.add_argument("--reps", type=int, default=10, help="timed repetitions (>= 5)")
    parser.add_argument("--forward-config", choices=sorted(PRESETS), default=None, help="also time a full forward pass")
    parser.add_argument("--forward-shape", action="append", default=None, help="HxW for --forward-config, repeatable")
    parser.add_argument("--output", default=None, help="CSV path (default: stdout)")
    add_threads(parser)
    add_seed(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    ops = [bench_service.parse_op(name) for name in (args.op or [op.value for op in BenchOp])]
    shapes = [parse_shape(s, rank=3) for s in (args.shape or DEFAULT_SHAPES)]
    forward_shapes = [parse_shape(s, rank=2) for s in (args.forward_shape or [])]

    results = []
    for shape in shapes:
        for op in ops:
            results.append(bench_service.bench_op(op.value, shape, args.alpha, args.reps, args.threads, args.seed))
    if args.forward_config:
        config = get_model_config(args, attr="forward_config")
        for shape in forward_shapes or [(256, 256)]:
            results.append(bench_service.bench_forward(config, shape, max(args.reps, 5), threads=args.threads, seed=args.seed))

    if args.output:
        write_bench_results(args.output, results)
    else:
        sys.stdout.write(",".join(results[0].CSV_HEADER) + "\n" if results else "")
        for r in results:
            sys.stdout.write(",".join(r.csv_row()) + "\n")
    return 0
