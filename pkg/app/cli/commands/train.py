import argparse
import logging
from pathlib import Path

from ...core.errors import FormatError
from ...models import llpacknet
from ...models.enums import Subcommand
from ...models.weights import load_weights, save_weights
from ...schemas.training import AdamConfig, AmplifierTrainConfig, TrainConfig
from ...services import trainer_service
from ...services.dataset_service import load_dataset
from ...services.objective_service import display_psnr
from ...utils.report import write_loss_curve
from ...utils.validators import validate_train_flags
from ..deps import FORMATTER, add_config, add_seed, get_model_config, require

logger = logging.getLogger(__name__)

DEFAULT_CLIP_NORM = 5.0


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        Subcommand.TRAIN.value,
        help="train the network on a paired dataset",
        formatter_class=FORMATTER,
    )
    parser.add_argument("--dataset", required=True, help="dataset directory written by synth")
    parser.add_argument("--output", required=True, help="directory for weights, checkpoints and loss.csv")
    parser.add_argument("--iters", type=int, default=1000, help="optimisation steps of full training")
    parser.add_argument("--checkpoint-every", type=int, default=0, help="checkpoint period (0 = off)")
    parser.add_argument("--lr", type=float, default=1e-4, help="Adam learning rate of full training")
    parser.add_argument("--patch-size", type=int, default=None, help="random aligned crop size (default: whole image)")
    parser.add_argument("--clip", action="store_true", help=f"clip gradients to global norm {DEFAULT_CLIP_NORM}")
    parser.add_argument("--true-factor", action="store_true", help="amplify with the ground-truth exposure ratio")
    parser.add_argument("--resume", default=None, help="checkpoint .llpk to resume from, or 'latest'")
    parser.add_argument("--init", default=None, help="start from these weights instead of a fresh build")
    parser.add_argument("--amplifier-only", action="store_true", help="fit only the amplifier to the exposure ratios")
    parser.add_argument("--amplifier-iters", type=int, default=3000, help="steps for --amplifier-only (replaces --iters)")
    add_config(parser, default="rgb4")
    add_seed(parser)
    parser.set_defaults(handler=run)


def _resume_path(args: argparse.Namespace):
    if args.resume is None:
        return None
    if args.resume == "latest":
        path = trainer_service.latest_checkpoint(args.output)
        if path is None:
            raise FormatError(f"No checkpoint found in {args.output}")
        return path
    return Path(args.resume)


def run(args: argparse.Namespace) -> int:
    config = get_model_config(args)
    require(validate_train_flags(
        args.iters, args.checkpoint_every, args.patch_size, config,
        resume=args.resume, init=args.init, amplifier_only=args.amplifier_only,
        clip=args.clip, true_factor=args.true_factor,
    ))
    output = Path(args.output)
    output.mkdir(parents=True, exist_ok=True)

    if args.amplifier_only:
        pairs = load_dataset(args.dataset)
        weights = load_weights(args.init) if args.init else llpacknet.build(config, args.seed)
        weights = trainer_service.train_amplifier_on_pairs(
            weights, config, pairs,
            AmplifierTrainConfig(iters=args.amplifier_iters, seed=args.seed),
        )
        save_weights(weights, output / "weights.llpk")
        return 0

    train_config = TrainConfig(
        iters=args.iters,
        seed=args.seed,
        checkpoint_every=args.checkpoint_every,
        patch_size=args.patch_size,
        clip_norm=DEFAULT_CLIP_NORM if args.clip else None,
        use_true_factor=args.true_factor,
        adam=AdamConfig(lr=args.lr),
    )
    pairs = load_dataset(args.dataset)
    trainer = trainer_service.Trainer(config, train_config, pairs, output)
    resume = _resume_path(args)
    if resume is not None:
        weights, state = trainer_service.load_checkpoint(resume)
        logger.info(f"Resuming from {resume} at iteration {state.step}")
    else:
        weights = load_weights(args.init) if args.init else llpacknet.build(config, args.seed)
        state = None

    result = trainer.run(weights, state)
    save_weights(result.weights, output / "weights.llpk")
    write_loss_curve(output / "loss.csv", result.records, append=resume is not None)

    score = trainer_service.evaluate_psnr(result.weights, config, pairs, use_true_factor=args.true_factor)
    print(f"iterations: {result.state.step}")
    print(f"train_psnr_db: {display_psnr(score):.3f}")
    return 0
