import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.core import tensor as T
from app.core.errors import ShapeError
from app.core.nnops import conv2d, same_kernel
from app.core.rearrange import (
    bayer_split, channel_index, compose_hr_kernel, lr_upsample_conv, pack,
    permute_channels, pixel_shuffle, pixel_unshuffle, reference_upsample_conv_hr,
    unpack, unpack_to_pixel_shuffle_permutation,
)
from app.core.tensor import Tensor
from app.models.enums import BayerPhase, UpsampleLayout
from app.services.dataset_service import mosaic


def _random(shape, seed=0):
    return Tensor(np.random.default_rng(seed).standard_normal(shape).astype(np.float32))


class TestWorkedExample:
    def test_unpack_red_plane(self, worked_example):
        out = unpack(worked_example, 2, group=3)
        assert out.dims == (4, 4, 3)
        assert out.data[:, :, 0].tolist() == [
            [1, 13, 2, 14],
            [25, 37, 26, 38],
            [3, 15, 4, 16],
            [27, 39, 28, 40],
        ]

    def test_unpack_green_and_blue_planes(self, worked_example):
        out = unpack(worked_example, 2, group=3)
        assert out.data[0, :, 1].tolist() == [5, 17, 6, 18]
        assert out.data[0, :, 2].tolist() == [9, 21, 10, 22]
        assert out.data[3, :, 2].tolist() == [35, 47, 36, 48]

    def test_every_value_follows_the_loop(self, worked_example):
        x = worked_example.data
        out = unpack(worked_example, 2, group=3).data
        for i in range(2):
            for j in range(2):
                for row in range(2):
                    for col in range(2):
                        count = (row * 2 + col) * 3
                        assert np.array_equal(out[i * 2 + row, j * 2 + col], x[i, j, count:count + 3])

    def test_pack_inverts(self, worked_example):
        hr = unpack(worked_example, 2, group=3)
        assert np.array_equal(pack(hr, 2, group=3).data, worked_example.data)


class TestPackUnpack:
    @settings(max_examples=200, deadline=None)
    @given(
        alpha=st.sampled_from([1, 2, 4, 8, 16]),
        h=st.integers(1, 3),
        w=st.integers(1, 3),
        group=st.sampled_from([1, 3]),
        n=st.integers(1, 2),
        seed=st.integers(0, 2 ** 16),
    )
    def test_round_trip_is_bit_exact(self, alpha, h, w, group, n, seed):
        x = _random((h * alpha, w * alpha, group * n), seed)
        packed = pack(x, alpha, group)
        assert packed.dims == (h, w, group * n * alpha * alpha)
        assert np.array_equal(unpack(packed, alpha, group).data, x.data)

    def test_alpha_one_is_identity(self):
        x = _random((4, 4, 3))
        assert pack(x, 1) is x
        assert unpack(x, 1) is x

    def test_group_one_packs_channels_independently(self):
        x = _random((4, 4, 2))
        packed = pack(x, 2, group=1).data
        assert np.array_equal(packed[..., 0:4], pack(Tensor(x.data[..., :1]), 2, group=1).data)
        assert np.array_equal(packed[..., 4:8], pack(Tensor(x.data[..., 1:]), 2, group=1).data)

    def test_indivisible_spatial_dims(self):
        with pytest.raises(ShapeError):
            pack(_random((6, 4, 3)), 4)

    def test_indivisible_channels(self):
        with pytest.raises(ShapeError):
            unpack(_random((2, 2, 10)), 2, group=3)

    def test_bad_alpha(self):
        with pytest.raises(ShapeError):
            pack(_random((4, 4, 3)), 0)

    def test_gradients(self, gradcheck, rng):
        weights = Tensor(rng.standard_normal((2, 2, 12)), dtype=np.float64)
        gradcheck(lambda x: T.sum_all(T.mul(pack(x, 2, 3), weights)), rng.standard_normal((4, 4, 3)))
        hr = Tensor(rng.standard_normal((4, 4, 3)), dtype=np.float64)
        gradcheck(lambda x: T.sum_all(T.mul(unpack(x, 2, 3), hr)), rng.standard_normal((2, 2, 12)))


class TestPixelShuffle:
    def test_reads_colour_major_channels(self):
        x = _random((3, 3, 12))
        out = pixel_shuffle(x, 2).data
        for c in range(3):
            for i in range(2):
                for j in range(2):
                    assert np.array_equal(out[i::2, j::2, c], x.data[:, :, c * 4 + i * 2 + j])

    def test_unshuffle_inverts(self):
        x = _random((8, 8, 3))
        assert np.array_equal(pixel_shuffle(pixel_unshuffle(x, 4), 4).data, x.data)

    def test_gradients(self, gradcheck, rng):
        hr = Tensor(rng.standard_normal((4, 4, 2)), dtype=np.float64)
        gradcheck(lambda x: T.sum_all(T.mul(pixel_shuffle(x, 2), hr)), rng.standard_normal((2, 2, 8)))
        lr = Tensor(rng.standard_normal((2, 2, 8)), dtype=np.float64)
        gradcheck(lambda x: T.sum_all(T.mul(pixel_unshuffle(x, 2), lr)), rng.standard_normal((4, 4, 2)))

    @pytest.mark.parametrize("alpha,group", [(2, 3), (4, 3), (8, 3), (2, 5)])
    def test_fixed_permutation_links_layouts(self, alpha, group):
        channels = group * alpha * alpha
        x = _random((2, 3, channels))
        perm = unpack_to_pixel_shuffle_permutation(channels, alpha, group)
        assert sorted(perm.tolist()) == list(range(channels))
        assert np.array_equal(
            pixel_shuffle(permute_channels(x, perm), alpha).data,
            unpack(x, alpha, group).data,
        )

    def test_permute_rejects_non_permutation(self):
        with pytest.raises(ShapeError):
            permute_channels(_random((1, 1, 3)), [0, 0, 1])


class TestChannelDistance:
    def test_index_map_at_alpha_8(self):
        ps_r = channel_index(UpsampleLayout.PIXEL_SHUFFLE, 8, 0, (0, 0))
        ps_b = channel_index(UpsampleLayout.PIXEL_SHUFFLE, 8, 2, (0, 0))
        up_r = channel_index(UpsampleLayout.UNPACK, 8, 0, (0, 0))
        up_b = channel_index(UpsampleLayout.UNPACK, 8, 2, (0, 0))
        assert ps_b - ps_r == 128
        assert up_b - up_r == 2

    @pytest.mark.parametrize("layout", list(UpsampleLayout))
    def test_impulse_lands_where_the_index_map_says(self, layout):
        alpha = 8
        for colour in range(3):
            for offset in [(0, 0), (3, 5), (7, 7)]:
                lr = np.zeros((1, 1, 3 * alpha * alpha), dtype=np.float32)
                lr[0, 0, channel_index(layout, alpha, colour, offset)] = 1.0
                op = pixel_shuffle if layout == UpsampleLayout.PIXEL_SHUFFLE else unpack
                hr = op(Tensor(lr), alpha).data
                assert hr[offset[0], offset[1], colour] == 1.0
                assert hr.sum() == 1.0


class TestSubPixelEquivalence:
    @pytest.mark.parametrize("alpha", [2, 4])
    @pytest.mark.parametrize("seed", range(10))
    def test_lr_path_matches_hr_oracle(self, alpha, seed):
        rng = np.random.default_rng(seed)
        cin = 2
        t_lr = Tensor(rng.standard_normal((8, 8, cin)), dtype=np.float64)
        w_lr = rng.standard_normal((3, 3, cin, 3 * alpha * alpha))
        lr_out = lr_upsample_conv(t_lr, same_kernel(Tensor(w_lr, dtype=np.float64)), alpha, group=3)
        hr_out = reference_upsample_conv_hr(t_lr, compose_hr_kernel(w_lr, alpha), alpha, group=3)
        assert lr_out.dims == (8 * alpha, 8 * alpha, 3)
        assert np.allclose(lr_out.data, hr_out.data, atol=1e-5)

    def test_unit_alpha_is_a_plain_convolution(self):
        rng = np.random.default_rng(11)
        t_lr = Tensor(rng.standard_normal((6, 5, 2)), dtype=np.float64)
        w = rng.standard_normal((3, 3, 2, 3))
        kernel = same_kernel(Tensor(w, dtype=np.float64))
        plain = conv2d(t_lr, kernel).data
        assert np.allclose(lr_upsample_conv(t_lr, kernel, 1, group=3).data, plain, atol=1e-12)
        assert np.allclose(reference_upsample_conv_hr(t_lr, w, 1, group=3).data, plain, atol=1e-12)

    def test_zero_input_gives_zero_output(self):
        w = np.random.default_rng(2).standard_normal((3, 3, 1, 12))
        zeros = Tensor(np.zeros((4, 4, 1)), dtype=np.float64)
        assert not np.any(reference_upsample_conv_hr(zeros, compose_hr_kernel(w, 2), 2).data)

    def test_pixel_shuffle_path_matches_unregrouped_oracle(self):
        rng = np.random.default_rng(7)
        alpha = 2
        t_lr = Tensor(rng.standard_normal((6, 6, 1)), dtype=np.float64)
        w_lr = rng.standard_normal((3, 3, 1, 3 * alpha * alpha))
        perm = unpack_to_pixel_shuffle_permutation(3 * alpha * alpha, alpha, 3)
        kernel = same_kernel(Tensor(w_lr[..., perm], dtype=np.float64))
        ps = lr_upsample_conv(t_lr, kernel, alpha, group=3, layout=UpsampleLayout.PIXEL_SHUFFLE)
        up = lr_upsample_conv(t_lr, same_kernel(Tensor(w_lr, dtype=np.float64)), alpha, group=3)
        assert np.allclose(ps.data, up.data, atol=1e-12)

    def test_compose_rejects_wrong_bank(self):
        with pytest.raises(ShapeError):
            compose_hr_kernel(np.zeros((3, 3, 1, 10)), 2)
        with pytest.raises(ShapeError):
            compose_hr_kernel(np.zeros((2, 2, 1, 12)), 2)


class TestBayerSplit:
    def test_single_cell_is_read_in_raster_order(self):
        raw = T.tensor_new((2, 2, 1), [1.0, 2.0, 3.0, 4.0])
        assert bayer_split(raw).data.reshape(-1).tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_first_plane_takes_even_rows_and_columns(self):
        raw = T.tensor_new((4, 4, 1), np.arange(16.0))
        planes = bayer_split(raw).data
        assert planes[..., 0].tolist() == [[0.0, 2.0], [8.0, 10.0]]
        assert planes[..., 3].tolist() == [[5.0, 7.0], [13.0, 15.0]]

    def test_constant_mosaic_gives_constant_planes(self):
        planes = bayer_split(T.tensor_new((4, 6, 1), 0.25)).data
        assert np.all(planes == 0.25)

    @pytest.mark.parametrize("phase", list(BayerPhase))
    def test_planes_come_out_r_g_g_b(self, phase):
        rgb = np.empty((4, 6, 3), dtype=np.float32)
        rgb[..., 0], rgb[..., 1], rgb[..., 2] = 0.1, 0.5, 0.9
        planes = bayer_split(mosaic(Tensor(rgb), phase), phase).data
        assert planes.shape == (2, 3, 4)
        assert np.allclose(planes[..., 0], 0.1)
        assert np.allclose(planes[..., 1:3], 0.5)
        assert np.allclose(planes[..., 3], 0.9)

    def test_rejects_colour_input(self):
        with pytest.raises(ShapeError):
            bayer_split(_random((4, 4, 3)))

    def test_rejects_odd_dims(self):
        with pytest.raises(ShapeError):
            bayer_split(_random((5, 4, 1)))
