import numpy as np
import pytest

from app.core.errors import ConfigError, ShapeError, WeightError
from app.core.rearrange import unpack_to_pixel_shuffle_permutation
from app.core.tensor import Tape, Tensor
from app.models import llpacknet
from app.models.enums import InputKind, UpsampleLayout
from app.models.weights import WeightStore
from app.schemas.model import ModelConfig, PRESETS, get_preset
from app.services.objective_service import l1


def _raw(config, h, w, seed=0):
    rng = np.random.default_rng(seed)
    return Tensor(rng.uniform(0.0, 0.01, (h, w, config.input_channels)).astype(np.float32))


class TestParameters:
    def test_default_bayer_count(self):
        weights = llpacknet.build(get_preset("bayer8"))
        assert weights.parameter_count() == 880_153
        assert 800_000 <= weights.parameter_count() <= 1_400_000

    def test_build_matches_shapes(self):
        for name, config in PRESETS.items():
            weights = llpacknet.build(config, seed=1)
            assert {n: t.dims for n, t in weights.items()} == llpacknet.parameter_shapes(config), name

    def test_build_is_seeded(self):
        config = get_preset("rgb4")
        assert llpacknet.build(config, 3) == llpacknet.build(config, 3)
        assert llpacknet.build(config, 3) != llpacknet.build(config, 4)

    def test_biases_start_at_zero(self):
        weights = llpacknet.build(get_preset("rgb4"))
        assert np.all(weights["decoder/conv0/bias"].data == 0)

    def test_validate_rejects_missing_and_extra(self):
        config = get_preset("rgb4")
        weights = llpacknet.build(config)
        missing = WeightStore({n: t for n, t in weights.items() if n != "trunk/global_conv/bias"})
        with pytest.raises(WeightError):
            llpacknet.validate_weights(missing, config)
        extra = WeightStore({**dict(weights.items()), "unused": np.zeros(1, dtype=np.float32)})
        with pytest.raises(WeightError):
            llpacknet.validate_weights(extra, config)

    def test_validate_rejects_wrong_config(self):
        with pytest.raises(WeightError):
            llpacknet.validate_weights(llpacknet.build(get_preset("rgb4")), get_preset("rgb8"))

    def test_bad_configs(self):
        with pytest.raises(ConfigError):
            get_preset("nope")
        with pytest.raises(ConfigError):
            ModelConfig.from_options(alpha_inner=5)
        with pytest.raises(ConfigError):
            ModelConfig.from_options(input_kind="rgb", trunk_channels=62)


class TestForward:
    @pytest.mark.parametrize("name,h,w", [("bayer8", 32, 48), ("rgb8", 16, 24), ("rgb4", 8, 12)])
    def test_output_shape_and_range(self, name, h, w):
        config = get_preset(name)
        out = llpacknet.forward(_raw(config, h, w), llpacknet.build(config), config)
        assert out.dims == (h, w, 3)
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_bayer_stage_dims(self):
        config = get_preset("bayer8")
        dims = {}
        llpacknet.forward(_raw(config, 64, 64), llpacknet.build(config), config,
                          hook=lambda stage, t: dims.__setitem__(stage, t.dims))
        assert dims["bayer_split"] == (32, 32, 4)
        assert dims["packed"] == (4, 4, 256)
        assert dims["encoder"] == (4, 4, 60)
        assert dims["trunk"] == (4, 4, 60)
        assert dims["unpack_outer"] == (8, 8, 15)
        assert dims["decoder"] == (8, 8, 192)
        assert dims["output"] == (64, 64, 3)

    @pytest.mark.parametrize("dims", [(40, 32, 1), (32, 32, 3)])
    def test_rejects_bad_input(self, dims):
        config = get_preset("bayer8")
        with pytest.raises(ShapeError):
            llpacknet.forward(Tensor(np.zeros(dims, dtype=np.float32)), llpacknet.build(config), config)

    def test_explicit_factor_matches_scaled_input(self):
        config = get_preset("rgb4")
        weights = llpacknet.build(config)
        raw = _raw(config, 8, 8)
        a = llpacknet.forward(raw, weights, config, amplification=50.0).data
        b = llpacknet.forward(Tensor(raw.data * np.float32(50.0)), weights, config, amplification=1.0).data
        assert np.array_equal(a, b)

    def test_deterministic(self):
        config = get_preset("bayer8")
        weights = llpacknet.build(config)
        raw = _raw(config, 32, 32)
        assert np.array_equal(
            llpacknet.forward(raw, weights, config).data,
            llpacknet.forward(raw, weights, config).data,
        )

    def test_pixel_shuffle_decoder_is_a_channel_permutation(self):
        config = get_preset("rgb4")
        ps_config = config.model_copy(update={"decoder_upsample": UpsampleLayout.PIXEL_SHUFFLE})
        weights = llpacknet.build(config)
        perm = unpack_to_pixel_shuffle_permutation(config.decoder_out_channels, config.alpha_inner, 3)
        ps_weights = weights.replace({
            "decoder/conv0/weight": weights["decoder/conv0/weight"].data[..., perm],
            "decoder/conv0/bias": weights["decoder/conv0/bias"].data[perm],
        })
        raw = _raw(config, 8, 8)
        a = llpacknet.forward(raw, weights, config, amplification=80.0).data
        b = llpacknet.forward(raw, ps_weights, ps_config, amplification=80.0).data
        assert np.allclose(a, b, atol=1e-6)
        unpermuted = llpacknet.forward(raw, weights, ps_config, amplification=80.0).data
        assert not np.allclose(a, unpermuted, atol=1e-6)

    def test_enhance_reports_learned_factor(self):
        config = get_preset("rgb4")
        weights = llpacknet.build(config)
        result = llpacknet.enhance_image(_raw(config, 8, 8), weights, config)
        assert 1.0 <= result.amplification <= 1000.0
        fixed = llpacknet.enhance_image(_raw(config, 8, 8), weights, config, amplification=7.0)
        assert fixed.amplification == 7.0

    def test_gradients_reach_every_parameter(self, tiny_config):
        weights = llpacknet.build(tiny_config, seed=2)
        tape = Tape()
        watched = weights.watch(tape)
        raw = _raw(tiny_config, 8, 8)
        gt = Tensor(np.full((8, 8, 3), 0.5, dtype=np.float32))
        out = llpacknet.forward(raw, watched, tiny_config)
        tape.backward(l1(gt, out))
        grads = watched.gradients()
        assert set(grads) == set(weights.names())
        for name, g in grads.items():
            assert g.shape == weights[name].dims
            assert np.all(np.isfinite(g)), name


class TestReceptiveField:
    @pytest.mark.parametrize("alpha,expected", [(1, 9), (2, 36), (4, 144), (10, 900)])
    def test_count_is_three_alpha_squared(self, alpha, expected):
        assert llpacknet.count_receptive_field(alpha) == expected

    def test_bad_alpha(self):
        with pytest.raises(ShapeError):
            llpacknet.count_receptive_field(0)
