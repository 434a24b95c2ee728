import numpy as np
import pytest

from app.core.errors import ShapeError, TrainingDivergedError
from app.models import llpacknet
from app.models.enums import InputKind
from app.schemas.model import get_preset
from app.schemas.objective import LossWeights
from app.schemas.training import AdamConfig, TrainConfig
from app.services import trainer_service
from app.services.dataset_service import load_dataset, write_dataset
from app.services.trainer_service import Trainer, checkpoint_paths, latest_checkpoint, load_checkpoint


class TestCheckpoints:
    def test_paths(self, tmp_path):
        weights, state = checkpoint_paths(tmp_path, 20)
        assert weights.name == "ckpt_000020.llpk"
        assert state.name == "ckpt_000020.adam.llpk"

    def test_latest(self, tmp_path):
        assert latest_checkpoint(tmp_path) is None
        for it in (5, 40, 12):
            for path in checkpoint_paths(tmp_path, it):
                path.write_bytes(b"")
        assert latest_checkpoint(tmp_path).name == "ckpt_000040.llpk"


class TestTrainer:
    def test_zero_iterations_returns_initial_weights(self, tiny_config, rgb_dataset):
        weights = llpacknet.build(tiny_config, seed=0)
        trainer = Trainer(tiny_config, TrainConfig(iters=0), load_dataset(rgb_dataset))
        result = trainer.run(weights)
        assert result.weights == weights
        assert result.records == []
        assert result.state.step == 0

    def test_needs_pairs(self, tiny_config):
        with pytest.raises(ShapeError):
            Trainer(tiny_config, TrainConfig(), [])

    def test_records_one_row_per_iteration(self, tiny_config, rgb_dataset):
        trainer = Trainer(tiny_config, TrainConfig(iters=3, use_true_factor=True), load_dataset(rgb_dataset))
        result = trainer.run(llpacknet.build(tiny_config))
        assert [r.iteration for r in result.records] == [0, 1, 2]
        assert all(np.isfinite(r.total) for r in result.records)
        assert result.state.step == 3
        assert result.weights != llpacknet.build(tiny_config)

    def test_same_seed_same_weights(self, tiny_config, rgb_dataset):
        pairs = load_dataset(rgb_dataset)
        config = TrainConfig(iters=2, seed=4, patch_size=8)
        a = Trainer(tiny_config, config, pairs).run(llpacknet.build(tiny_config, 1))
        b = Trainer(tiny_config, config, pairs).run(llpacknet.build(tiny_config, 1))
        assert a.weights == b.weights
        assert [r.total for r in a.records] == [r.total for r in b.records]

    def test_resume_matches_uninterrupted_run(self, tiny_config, rgb_dataset, tmp_path):
        pairs = load_dataset(rgb_dataset)
        config = TrainConfig(iters=4, checkpoint_every=2, adam=AdamConfig(lr=1e-3))
        full = Trainer(tiny_config, config, pairs, tmp_path / "full").run(llpacknet.build(tiny_config, 2))
        assert [p.name for p in full.checkpoints] == ["ckpt_000002.llpk", "ckpt_000004.llpk"]

        weights, state = load_checkpoint(full.checkpoints[0])
        assert state.step == 2
        resumed = Trainer(tiny_config, config, pairs).run(weights, state)
        assert resumed.weights == full.weights
        assert [r.iteration for r in resumed.records] == [2, 3]
        assert [r.total for r in resumed.records] == [r.total for r in full.records[2:]]

    def test_clipping_keeps_training_finite(self, tiny_config, rgb_dataset):
        config = TrainConfig(iters=2, clip_norm=1e-3, use_true_factor=True)
        result = Trainer(tiny_config, config, load_dataset(rgb_dataset)).run(llpacknet.build(tiny_config))
        assert all(np.isfinite(r.total) for r in result.records)

    def test_non_finite_loss_raises(self, tiny_config, rgb_dataset):
        config = TrainConfig(iters=1, loss=LossWeights(tv=float("inf")))
        with pytest.raises(TrainingDivergedError) as exc:
            Trainer(tiny_config, config, load_dataset(rgb_dataset)).run(llpacknet.build(tiny_config))
        assert exc.value.iteration == 0
        assert "total" in exc.value.components

    def test_rejects_weights_of_other_config(self, tiny_config, rgb_dataset):
        from app.core.errors import WeightError

        trainer = Trainer(tiny_config, TrainConfig(iters=1), load_dataset(rgb_dataset))
        with pytest.raises(WeightError):
            trainer.run(llpacknet.build(get_preset("rgb4")))


class TestTrainFunction:
    def test_train_from_dataset_dir(self, tiny_config, rgb_dataset, tmp_path):
        result = trainer_service.train(tiny_config, rgb_dataset, iters=2, seed=0, checkpoint_every=1, output_dir=tmp_path)
        assert result.state.step == 2
        assert latest_checkpoint(tmp_path).name == "ckpt_000002.llpk"

    def test_resume_from_path(self, tiny_config, rgb_dataset, tmp_path):
        trainer_service.train(tiny_config, rgb_dataset, iters=1, checkpoint_every=1, output_dir=tmp_path)
        resumed = trainer_service.train(
            tiny_config, rgb_dataset, iters=2, resume_from=latest_checkpoint(tmp_path),
        )
        assert [r.iteration for r in resumed.records] == [1]

    def test_amplifier_only_touches_amplifier(self, tiny_config, rgb_dataset):
        from app.schemas.training import AmplifierTrainConfig

        weights = llpacknet.build(tiny_config)
        updated = trainer_service.train_amplifier_on_pairs(
            weights, tiny_config, load_dataset(rgb_dataset), AmplifierTrainConfig(iters=5),
        )
        assert updated.subset("trunk/") == weights.subset("trunk/")
        assert updated.subset("amplifier/") != weights.subset("amplifier/")

    def test_evaluate_psnr(self, tiny_config, rgb_dataset):
        score = trainer_service.evaluate_psnr(llpacknet.build(tiny_config), tiny_config, load_dataset(rgb_dataset))
        assert np.isfinite(score)

    @pytest.mark.slow
    def test_overfits_small_dataset(self, tmp_path):
        root = tmp_path / "overfit"
        write_dataset(root, 8, height=64, width=64, seed=0, input_kind=InputKind.RGB)
        config = get_preset("rgb4")
        pairs = load_dataset(root)
        train_config = TrainConfig(iters=2000, seed=0, use_true_factor=True, adam=AdamConfig(lr=1e-3))
        result = Trainer(config, train_config, pairs).run(llpacknet.build(config, 0))
        totals = np.array([r.total for r in result.records])
        assert totals[450:500].mean() <= 0.9 * totals[:50].mean()
        assert trainer_service.evaluate_psnr(result.weights, config, pairs) > 30.0
