"""
Argument helpers shared by the subcommands.
"""
import argparse
from typing import Tuple

from ..core.config import settings
from ..core.errors import UsageError
from ..models.enums import BayerPhase, UpsampleLayout
from ..schemas.model import PRESETS, ModelConfig, get_preset

FORMATTER = argparse.ArgumentDefaultsHelpFormatter


def add_seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="seed for every random draw")


def add_config(parser: argparse.ArgumentParser, default: str = "bayer8", flag: str = "--config") -> None:
    parser.add_argument(flag, choices=sorted(PRESETS), default=default, help="network preset")
    parser.add_argument(
        "--decoder-upsample",
        choices=[layout.value for layout in UpsampleLayout],
        default=UpsampleLayout.UNPACK.value,
        help="depth-to-space layout of the last decoder stage",
    )


def add_sensor(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--black", type=int, default=settings.DEFAULT_BLACK_LEVEL, help="sensor black level (ADU)")
    parser.add_argument("--white", type=int, default=settings.DEFAULT_WHITE_LEVEL, help="sensor white level (ADU)")
    parser.add_argument(
        "--phase",
        choices=[p.value for p in BayerPhase],
        default=BayerPhase.RGGB.value,
        help="colour filter layout of the top-left 2x2 cell",
    )


def add_threads(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="workers for row-partitioned kernels (capped by LLPACK_THREADS)",
    )


def get_model_config(args: argparse.Namespace, attr: str = "config") -> ModelConfig:
    config = get_preset(getattr(args, attr))
    phase = getattr(args, "phase", None)
    return ModelConfig.from_options(**{
        **config.model_dump(),
        "decoder_upsample": getattr(args, "decoder_upsample", None),
        "phase": phase,
    })


def require(check: Tuple[bool, str]) -> None:
    """Turn a validator's (ok, message) into a UsageError."""
    ok, message = check
    if not ok:
        raise UsageError(message)
