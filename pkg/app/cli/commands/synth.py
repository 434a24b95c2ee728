import argparse

from ...core.errors import UsageError
from ...models.enums import BayerPhase, InputKind, Subcommand
from ...schemas.dataset import NoiseModel
from ...services.dataset_service import write_dataset
from ...utils.helpers import parse_factors, parse_shape
from ..deps import FORMATTER, add_seed, add_sensor


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        Subcommand.SYNTH.value,
        help="write a synthetic paired dataset",
        formatter_class=FORMATTER,
    )
    parser.add_argument("--output", required=True, help="dataset directory")
    parser.add_argument("--count", type=int, default=8, help="number of pairs")
    parser.add_argument("--size", default="64x64", help="HxW of every pair")
    parser.add_argument("--kind", choices=[k.value for k in InputKind], default=InputKind.BAYER_RAW.value, help="dark image kind")
    parser.add_argument("--factors", default="50,100,250", help="exposure ratios, cycled over pairs")
    parser.add_argument("--read-sigma", type=float, default=NoiseModel().read_sigma, help="read noise std")
    parser.add_argument("--shot-gain", type=float, default=NoiseModel().shot_gain, help="shot noise variance per unit signal")
    add_sensor(parser)
    add_seed(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    height, width = parse_shape(args.size, rank=2)
    noise = NoiseModel.from_options(read_sigma=args.read_sigma, shot_gain=args.shot_gain)
    manifest = write_dataset(
        args.output,
        args.count,
        height=height,
        width=width,
        factors=parse_factors(args.factors),
        seed=args.seed,
        noise=noise,
        input_kind=InputKind(args.kind),
        phase=BayerPhase(args.phase),
        black=args.black,
        white=args.white,
    )
    print(f"pairs: {manifest.count}")
    return 0
