import numpy as np
import pytest

from app.core.errors import ShapeError
from app.core.optim import AdamState, adam_step, clip_by_global_norm, global_norm
from app.models.weights import WeightStore, load_weights, save_weights
from app.schemas.training import AdamConfig


class TestAdam:
    def test_first_step(self):
        params = {"theta": np.array([1.0])}
        new, state = adam_step(params, {"theta": np.array([1.0])}, AdamState.zeros(params))
        assert new["theta"][0] == pytest.approx(1.0 - 1e-4, abs=1e-9)
        assert state.step == 1

    def test_inputs_are_not_mutated(self):
        params = {"w": np.array([2.0, 3.0])}
        state = AdamState.zeros(params)
        adam_step(params, {"w": np.array([1.0, 1.0])}, state)
        assert params["w"].tolist() == [2.0, 3.0]
        assert state.step == 0

    def test_empty_state_is_initialised(self):
        params = {"w": np.zeros(3)}
        _, state = adam_step(params, {"w": np.ones(3)}, AdamState())
        assert set(state.m) == {"w"}

    def test_converges_on_quadratic(self):
        target = np.array([0.5, -1.5, 2.0])
        params = {"x": np.zeros(3)}
        state = AdamState.zeros(params)
        for _ in range(3000):
            params, state = adam_step(params, {"x": 2 * (params["x"] - target)}, state, AdamConfig(lr=1e-2))
        assert np.allclose(params["x"], target, atol=5e-3)

    def test_misaligned_gradients(self):
        params = {"a": np.zeros(2)}
        with pytest.raises(ShapeError):
            adam_step(params, {"b": np.zeros(2)}, AdamState.zeros(params))
        with pytest.raises(ShapeError):
            adam_step(params, {"a": np.zeros(3)}, AdamState.zeros(params))

    def test_state_arrays_round_trip(self):
        params = {"enc/w": np.ones((2, 2), dtype=np.float32)}
        _, state = adam_step(params, {"enc/w": np.full((2, 2), 0.5, dtype=np.float32)}, AdamState.zeros(params))
        arrays = state.to_arrays()
        assert set(arrays) == {"m/enc/w", "v/enc/w", "step"}
        back = AdamState.from_arrays(arrays)
        assert back.step == 1
        assert np.array_equal(back.m["enc/w"], state.m["enc/w"])

    def test_large_step_survives_checkpoint(self, tmp_path):
        state = AdamState(m={"w": np.zeros(2, dtype=np.float32)}, v={"w": np.zeros(2, dtype=np.float32)}, step=(1 << 24) + 1)
        path = tmp_path / "state.llpk"
        save_weights(WeightStore(state.to_arrays()), path)
        assert AdamState.from_arrays(load_weights(path).arrays()).step == (1 << 24) + 1

    def test_state_needs_step(self):
        with pytest.raises(ShapeError):
            AdamState.from_arrays({"m/w": np.zeros(1), "v/w": np.zeros(1)})


class TestClipping:
    def test_scales_down_large_norm(self):
        grads = {"a": np.array([6.0]), "b": np.array([8.0])}
        clipped, norm = clip_by_global_norm(grads, 5.0)
        assert norm == pytest.approx(10.0)
        assert global_norm(clipped) == pytest.approx(5.0)
        assert clipped["a"][0] == pytest.approx(3.0)

    def test_leaves_small_norm(self):
        grads = {"a": np.array([0.3, 0.4])}
        clipped, norm = clip_by_global_norm(grads, 5.0)
        assert norm == pytest.approx(0.5)
        assert np.array_equal(clipped["a"], grads["a"])
