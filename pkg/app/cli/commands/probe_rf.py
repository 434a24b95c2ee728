import argparse

from ...models.enums import Subcommand
from ...models.llpacknet import count_receptive_field
from ..deps import FORMATTER, add_seed


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        Subcommand.PROBE_RF.value,
        help="count the HR receptive field of Pack alpha + one 3x3 convolution",
        formatter_class=FORMATTER,
    )
    parser.add_argument("--alpha", type=int, default=10, help="Pack factor")
    add_seed(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    print(count_receptive_field(args.alpha, seed=args.seed))
    return 0
