import argparse
import logging
import time

from ...core.errors import ConfigError
from ...core.tensor import track_allocations
from ...models import llpacknet
from ...models.enums import BayerPhase, Subcommand
from ...models.weights import load_weights
from ...services.dataset_service import read_image, write_rgb
from ...utils.helpers import parse_amplify
from ...utils.report import format_bytes
from ...utils.validators import validate_readable, validate_writable
from ..deps import FORMATTER, add_config, add_sensor, require, get_model_config

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        Subcommand.ENHANCE.value,
        help="restore a dark image with trained weights",
        formatter_class=FORMATTER,
    )
    parser.add_argument("--input", required=True, help="dark image: 16-bit PGM mosaic or PPM")
    parser.add_argument("--weights", required=True, help=".llpk weight file")
    parser.add_argument("--output", required=True, help="restored 8-bit PPM")
    parser.add_argument("--amplify", default="auto", help="'auto' (learned amplifier) or an explicit factor")
    add_config(parser)
    add_sensor(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    require(validate_readable(args.input, "Input image"))
    require(validate_readable(args.weights, "Weights"))
    require(validate_writable(args.output, "Output"))
    amplification = parse_amplify(args.amplify)
    config = get_model_config(args)

    weights = load_weights(args.weights)
    llpacknet.validate_weights(weights, config)
    image, kind = read_image(args.input, args.black, args.white, BayerPhase(args.phase))
    if kind != config.input_kind:
        raise ConfigError(
            f"Input is {kind.value} but config {args.config} expects {config.input_kind.value}"
        )
    llpacknet.check_input(image, config)

    with track_allocations() as stats:
        start = time.perf_counter()
        result = llpacknet.enhance_image(image, weights, config, amplification=amplification)
        latency = time.perf_counter() - start
    write_rgb(args.output, result.output)

    print(f"amplification: {result.amplification:.6g}")
    print(f"latency_s: {latency:.4f}")
    print(f"peak_bytes: {stats.peak_bytes}")
    logger.info(f"Wrote {args.output} ({format_bytes(stats.peak_bytes)} peak)")
    return 0
