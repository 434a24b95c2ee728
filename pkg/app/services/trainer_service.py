import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.config import settings
from ..core.errors import ShapeError, TrainingDivergedError
from ..core.optim import AdamState, adam_step, clip_by_global_norm
from ..core.tensor import Tape
from ..models import llpacknet
from ..models.weights import WeightStore, load_weights, save_weights
from ..schemas.model import ModelConfig
from ..schemas.objective import LossRecord
from ..schemas.training import AmplifierTrainConfig, TrainConfig
from . import amplifier_service
from .dataset_service import PairedSample, load_dataset, sample_patch
from .objective_service import FeatureExtractor, GaussianBlur, Objective, psnr

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_CKPT_PATTERN = re.compile(r"_(\d+)\.llpk$")


@dataclass
class TrainResult:
    weights: WeightStore
    state: AdamState
    records: List[LossRecord] = field(default_factory=list)
    checkpoints: List[Path] = field(default_factory=list)


def checkpoint_paths(directory: PathLike, iteration: int) -> Tuple[Path, Path]:
    """(weights, optimizer state) file names for a checkpoint."""
    stem = f"{settings.CHECKPOINT_PREFIX}_{iteration:06d}"
    directory = Path(directory)
    return directory / f"{stem}.llpk", directory / f"{stem}.adam.llpk"


def save_checkpoint(directory: PathLike, iteration: int, weights: WeightStore, state: AdamState) -> Path:
    weights_path, state_path = checkpoint_paths(directory, iteration)
    save_weights(weights, weights_path)
    save_weights(WeightStore(state.to_arrays()), state_path)
    return weights_path


def load_checkpoint(weights_path: PathLike) -> Tuple[WeightStore, AdamState]:
    """Weights plus the optimizer state saved next to them."""
    weights_path = Path(weights_path)
    state_path = weights_path.with_name(weights_path.name[: -len(".llpk")] + ".adam.llpk")
    weights = load_weights(weights_path)
    state = AdamState.from_arrays(load_weights(state_path).arrays())
    return weights, state


def latest_checkpoint(directory: PathLike) -> Optional[Path]:
    best: Optional[Tuple[int, Path]] = None
    for path in Path(directory).glob(f"{settings.CHECKPOINT_PREFIX}_*.llpk"):
        if path.name.endswith(".adam.llpk"):
            continue
        match = _CKPT_PATTERN.search(path.name)
        if match and (best is None or int(match.group(1)) > best[0]):
            best = (int(match.group(1)), path)
    return best[1] if best else None


class Trainer:
    """
    Adam optimisation of the full network over a paired dataset.

    Iteration `it` draws its pair (and patch) from a generator seeded with
    (seed, it), so a resumed run replays the same samples as an uninterrupted one.
    """

    def __init__(
        self,
        model_config: ModelConfig,
        train_config: TrainConfig,
        pairs: Sequence[PairedSample],
        output_dir: Optional[PathLike] = None,
    ):
        if not pairs:
            raise ShapeError("Training needs at least one pair")
        self.model_config = model_config
        self.config = train_config
        self.pairs = list(pairs)
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.objective = Objective(
            train_config.loss,
            FeatureExtractor.seeded(train_config.feature),
            GaussianBlur(train_config.blur),
        )

    def sample(self, iteration: int) -> PairedSample:
        rng = np.random.default_rng([self.config.seed, iteration])
        pair = self.pairs[int(rng.integers(len(self.pairs)))]
        if self.config.patch_size is not None:
            pair = sample_patch(pair, self.config.patch_size, seed=rng)
        return pair

    def step(
        self,
        iteration: int,
        weights: WeightStore,
        state: AdamState,
    ) -> Tuple[WeightStore, AdamState, LossRecord]:
        pair = self.sample(iteration)
        tape = Tape()
        watched = weights.watch(tape)
        amplification = pair.k if self.config.use_true_factor else None
        out = llpacknet.forward(pair.dark, watched, self.model_config, amplification=amplification)
        terms = self.objective.terms(pair.gt, out, watched)
        values = terms.as_dict()
        if not all(math.isfinite(v) for v in values.values()):
            raise TrainingDivergedError(iteration, values)

        tape.backward(terms.total)
        grads = watched.gradients()
        if self.config.clip_norm is not None:
            grads, norm = clip_by_global_norm(grads, self.config.clip_norm)
            if norm > self.config.clip_norm:
                logger.debug(f"iter {iteration}: clipped gradient norm {norm:.4g}")
        params, state = adam_step(weights.arrays(), grads, state, self.config.adam)
        return WeightStore(params), state, terms.to_record(iteration)

    def run(
        self,
        weights: WeightStore,
        state: Optional[AdamState] = None,
    ) -> TrainResult:
        """Train from `state.step` up to `config.iters`."""
        llpacknet.validate_weights(weights, self.model_config)
        state = state or AdamState.zeros(weights.arrays())
        result = TrainResult(weights=weights, state=state)
        every = self.config.checkpoint_every

        for it in range(state.step, self.config.iters):
            weights, state, record = self.step(it, weights, state)
            result.records.append(record)
            if it % self.config.log_every == 0:
                logger.info(
                    f"iter {it}: total={record.total:.5f} l1={record.l1:.5f} "
                    f"feat={record.feat:.5f} smooth={record.smooth:.5f} tv={record.tv:.6f}"
                )
            done = it + 1
            if self.output_dir is not None and every and done % every == 0:
                result.checkpoints.append(save_checkpoint(self.output_dir, done, weights, state))

        result.weights = weights
        result.state = state
        return result


def train(
    config: ModelConfig,
    dataset_dir: PathLike,
    iters: int,
    seed: int = 0,
    checkpoint_every: int = 0,
    output_dir: Optional[PathLike] = None,
    train_config: Optional[TrainConfig] = None,
    resume_from: Optional[PathLike] = None,
) -> TrainResult:
    """
    Build (or resume) and train; returns final weights and the loss curve.

    Raises:
        FormatError: dataset or checkpoint unreadable
        TrainingDivergedError: a loss component became non-finite
    """
    base = train_config or TrainConfig()
    train_config = base.model_copy(update={"iters": iters, "seed": seed, "checkpoint_every": checkpoint_every})
    pairs = load_dataset(dataset_dir)
    trainer = Trainer(config, train_config, pairs, output_dir)
    if resume_from is not None:
        weights, state = load_checkpoint(resume_from)
        logger.info(f"Resuming from {resume_from} at iteration {state.step}")
    else:
        weights, state = llpacknet.build(config, seed), None
    return trainer.run(weights, state)


def evaluate_psnr(
    weights: WeightStore,
    config: ModelConfig,
    pairs: Sequence[PairedSample],
    use_true_factor: bool = True,
) -> float:
    """Mean PSNR of the network output against ground truth."""
    scores = []
    for pair in pairs:
        amplification = pair.k if use_true_factor else None
        out = llpacknet.forward(pair.dark, weights, config, amplification=amplification)
        scores.append(psnr(out, pair.gt))
    return float(np.mean(scores))


def train_amplifier_on_pairs(
    weights: WeightStore,
    config: ModelConfig,
    pairs: Sequence[PairedSample],
    train_config: AmplifierTrainConfig = AmplifierTrainConfig(),
) -> WeightStore:
    """Fit only the amplifier to the pairs' exposure ratios; other weights are untouched."""
    mlp = amplifier_service.train_amplifier(
        [(p.dark, p.k) for p in pairs],
        config,
        train_config,
        initial=amplifier_service.AmplifierMLP.from_weights(weights),
    )
    return weights.replace(mlp.to_arrays())
