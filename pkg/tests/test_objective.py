import logging
import math

import numpy as np
import pytest

from app.core import tensor as T
from app.core.errors import ShapeError
from app.core.tensor import Tape, Tensor
from app.models.weights import WeightStore
from app.schemas.objective import BlurConfig, FeatureExtractorConfig, LossRecord, LossWeights
from app.services.objective_service import (
    FeatureExtractor, GaussianBlur, Objective, display_psnr, feature_loss, gaussian_1d,
    l1, loss_terms, loss_total, psnr, smoothed_l1, ssim, tv, weight_l1,
)


def _f64(a):
    return Tensor(np.asarray(a, dtype=np.float64), dtype=np.float64)


class TestComponents:
    def test_l1_is_mean_absolute(self):
        assert l1(_f64([[1.0, 2.0]]), _f64([[0.0, 4.0]])).item() == pytest.approx(1.5)

    def test_l1_dims_must_match(self):
        with pytest.raises(ShapeError):
            l1(_f64([1.0]), _f64([1.0, 2.0]))

    def test_tv_constant_is_zero(self):
        assert tv(T.tensor_new((5, 5, 3), 0.7)).item() == 0.0

    def test_tv_ramp(self):
        ramp = _f64(np.array([0.0, 0.1, 0.2, 0.3]).reshape(1, 4, 1))
        assert tv(ramp).item() == pytest.approx(0.075, abs=1e-12)

    def test_tv_matches_float64_oracle(self, rng):
        x = rng.uniform(0, 1, (6, 5, 3))
        expected = (np.abs(np.diff(x, axis=0)).sum() + np.abs(np.diff(x, axis=1)).sum()) / x.size
        assert tv(_f64(x)).item() == pytest.approx(expected, rel=1e-12)

    def test_weight_l1(self):
        store = WeightStore({"a": np.array([1.0, -2.0], dtype=np.float32), "b": np.array([-0.5], dtype=np.float32)})
        assert weight_l1(store).item() == pytest.approx(3.5)
        assert weight_l1(WeightStore()).item() == 0.0


class TestBlur:
    def test_kernel_sums_to_one(self):
        blur = GaussianBlur()
        assert abs(gaussian_1d(11, 3.0).sum() - 1.0) < 1e-7
        assert abs(blur.kernel_2d.sum() - 1.0) < 1e-7

    def test_constant_stays_constant(self):
        out = GaussianBlur()(T.tensor_new((9, 13, 3), 0.25, dtype=np.float64))
        assert np.allclose(out.data, 0.25, atol=1e-12)

    def test_interior_matches_2d_filter(self, rng):
        x = rng.uniform(0, 1, (15, 15, 1))
        blur = GaussianBlur(BlurConfig(size=5, sigma=1.0))
        out = blur(_f64(x)).data
        expected = np.sum(x[5:10, 5:10, 0] * blur.kernel_2d)
        assert out[7, 7, 0] == pytest.approx(expected, rel=1e-10)

    def test_even_size_rejected(self):
        with pytest.raises(Exception):
            BlurConfig(size=4)

    def test_smoothed_l1_ignores_fine_noise_more_than_l1(self, rng):
        a = _f64(np.full((16, 16, 3), 0.5))
        b = _f64(0.5 + rng.choice([-0.1, 0.1], (16, 16, 3)))
        assert smoothed_l1(a, b, GaussianBlur()).item() < l1(a, b).item()


class TestFeatureExtractor:
    def test_pyramid_shapes(self):
        taps = FeatureExtractor.seeded()(T.tensor_new((16, 16, 3), 0.5))
        assert [t.dims for t in taps] == [(8, 8, 16), (4, 4, 32), (2, 2, 64)]

    def test_tiny_input_keeps_resolution_in_late_stages(self, caplog):
        with caplog.at_level(logging.DEBUG, logger="app.services.objective_service"):
            taps = FeatureExtractor.seeded()(T.tensor_new((4, 4, 3), 0.5))
        assert [t.dims[:2] for t in taps] == [(2, 2), (1, 1), (1, 1)]
        assert "too small to pool" in caplog.text

    def test_seeded_is_reproducible(self):
        a = FeatureExtractor.seeded(FeatureExtractorConfig(seed=3)).to_weights()
        b = FeatureExtractor.seeded(FeatureExtractorConfig(seed=3)).to_weights()
        assert a == b

    def test_weights_round_trip(self):
        extractor = FeatureExtractor.seeded()
        again = FeatureExtractor.from_weights(extractor.to_weights())
        x = T.tensor_new((8, 8, 3), 0.3)
        assert np.array_equal(feature_loss(x, x, again).data, feature_loss(x, x, extractor).data)

    def test_zero_extractor_gives_zero_loss(self, rng):
        a = Tensor(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32))
        b = Tensor(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32))
        assert feature_loss(a, b, FeatureExtractor.zeros()).item() == 0.0

    def test_rejects_non_rgb(self):
        with pytest.raises(ShapeError):
            FeatureExtractor.seeded()(T.tensor_new((8, 8, 1), 0.0))

    def test_no_extractor_gradients(self, rng):
        tape = Tape()
        extractor = FeatureExtractor.seeded()
        out = tape.watch(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32))
        gt = T.tensor_new((8, 8, 3), 0.5)
        tape.backward(feature_loss(gt, out, extractor))
        assert all(k.weights.tape is None for k in extractor.kernels)


class TestComposite:
    def test_identical_constant_images_give_zero(self):
        gt = T.tensor_new((16, 16, 3), 0.4)
        params = WeightStore({"w": np.zeros((3, 3), dtype=np.float32)})
        terms = loss_terms(gt, gt, params)
        assert terms.total.item() == 0.0

    def test_total_is_weighted_component_sum(self, rng):
        gt = _f64(rng.uniform(0, 1, (8, 8, 3)))
        out = _f64(rng.uniform(0, 1, (8, 8, 3)))
        params = WeightStore({"w": _f64(rng.standard_normal(10))})
        lam = LossWeights()
        terms = loss_terms(gt, out, params, lam)
        parts = terms.as_dict()
        expected = (lam.l1 * parts["l1"] + lam.feature * parts["feat"] + lam.smooth * parts["smooth"]
                    + lam.tv * parts["tv"] + lam.weight * parts["wl1"])
        assert parts["total"] == pytest.approx(expected, rel=1e-6)

    def test_objective_equals_module_function(self, rng):
        gt = Tensor(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32))
        out = Tensor(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32))
        params = WeightStore({"w": np.ones(2, dtype=np.float32)})
        assert Objective().total(gt, out, params).item() == loss_total(gt, out, params).item()

    def test_gradient_on_toy_pair(self, gradcheck, rng):
        gt = _f64(rng.uniform(0, 1, (4, 4, 3)))
        objective = Objective()

        def fn(out, w):
            return objective.total(gt, out, WeightStore({"w": w}))

        gradcheck(fn, rng.uniform(0, 1, (4, 4, 3)), rng.standard_normal(5))

    def test_record_row(self, rng):
        gt = T.tensor_new((8, 8, 3), 0.2)
        out = Tensor(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32))
        record = loss_terms(gt, out, WeightStore({"w": np.ones(1, dtype=np.float32)})).to_record(7)
        assert LossRecord.CSV_HEADER == ["iter", "total", "l1", "feat", "smooth", "tv", "wl1"]
        row = record.csv_row()
        assert row[0] == "7" and float(row[1]) == pytest.approx(record.total)


class TestMetrics:
    def test_psnr_uniform_offset(self):
        a = _f64(np.full((8, 8, 3), 0.3))
        b = _f64(np.full((8, 8, 3), 0.4))
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-6)

    def test_psnr_identical(self):
        a = T.tensor_new((4, 4, 3), 0.5)
        assert math.isinf(psnr(a, a))
        assert display_psnr(psnr(a, a)) == 99.0

    def test_psnr_is_symmetric(self, rng):
        a = Tensor(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32))
        b = Tensor(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32))
        assert psnr(a, b) == psnr(b, a)

    def test_ssim_identical(self, rng):
        a = Tensor(rng.uniform(0, 1, (16, 16, 3)).astype(np.float32))
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-9)

    def test_ssim_constant_images(self):
        a = _f64(np.full((12, 12, 1), 0.2))
        b = _f64(np.full((12, 12, 1), 0.6))
        c1 = 0.01 ** 2
        expected = (2 * 0.2 * 0.6 + c1) / (0.2 ** 2 + 0.6 ** 2 + c1)
        assert ssim(a, b) == pytest.approx(expected, rel=1e-9)

    def test_ssim_drops_with_noise(self, rng):
        a = Tensor(rng.uniform(0, 1, (24, 24, 3)).astype(np.float32))
        noisy = Tensor(np.clip(a.data + rng.normal(0, 0.2, a.dims), 0, 1).astype(np.float32))
        assert ssim(a, noisy) < 0.9

    def test_ssim_needs_window(self):
        a = T.tensor_new((10, 10, 3), 0.0)
        with pytest.raises(ShapeError):
            ssim(a, a)
