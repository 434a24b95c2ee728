from pathlib import Path
from typing import Optional, Sequence, Tuple

from ..schemas.model import ModelConfig


def validate_readable(path: Optional[str], what: str) -> Tuple[bool, str]:
    """Check an input file exists before any work starts."""
    if not path:
        return False, f"{what} path is required"
    if not Path(path).is_file():
        return False, f"{what} not found: {path}"
    return True, ""


def validate_writable(path: Optional[str], what: str) -> Tuple[bool, str]:
    if not path:
        return False, f"{what} path is required"
    target = Path(path)
    if target.exists() and target.is_dir():
        return False, f"{what} is a directory: {path}"
    return True, ""


def validate_divisible(dims: Sequence[int], config: ModelConfig) -> Tuple[bool, str]:
    """Spatial dims must be multiples of the network's total downsampling."""
    factor = config.total_factor
    if len(dims) < 2 or dims[0] % factor or dims[1] % factor:
        return False, f"Spatial dims {tuple(dims[:2])} must be divisible by {factor}"
    return True, ""


def validate_train_flags(
    iters: int,
    checkpoint_every: int,
    patch_size: Optional[int],
    config: ModelConfig,
    resume: Optional[str] = None,
    init: Optional[str] = None,
    amplifier_only: bool = False,
    clip: bool = False,
    true_factor: bool = False,
) -> Tuple[bool, str]:
    if iters < 0:
        return False, "--iters must be >= 0"
    if checkpoint_every < 0:
        return False, "--checkpoint-every must be >= 0"
    if patch_size is not None and patch_size % config.total_factor:
        return False, f"--patch-size must be a multiple of {config.total_factor}"
    if resume is not None and init is not None:
        return False, "--resume and --init are mutually exclusive"
    if amplifier_only:
        # the amplifier regression has its own step count and never checkpoints
        ignored = {
            "--resume": resume is not None,
            "--clip": clip,
            "--true-factor": true_factor,
            "--patch-size": patch_size is not None,
            "--checkpoint-every": checkpoint_every > 0,
        }
        conflicts = [flag for flag, given in ignored.items() if given]
        if conflicts:
            return False, f"--amplifier-only cannot be combined with {', '.join(conflicts)}"
    return True, ""
