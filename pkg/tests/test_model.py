import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixtgformer.ablation import AXES
from mixtgformer.config import ModelConfig
from mixtgformer.errors import DimensionError
from mixtgformer.gradcheck import full_model_check, tiny_model_config
from mixtgformer.model import (REFERENCE_PARAMS, closed_form_param_count, forward, init_params,
                               normalize_input, reference_shape_config, predict)
from mixtgformer.params import init_linear, param_count
from mixtgformer.skeleton import human36m_topology, synth_sequence

SMALL = ModelConfig(frames=4, joints=17, dim=16, motion_dim=8, layers=1, heads=2)


def inputs(config, batch, seed=0):
    topo = human36m_topology()
    xs = [synth_sequence(seed + i, topo, config.frames, noise_std=2.0)[0].values
          for i in range(batch)]
    return np.stack(xs)


def test_forward_shape_and_motion_range():
    params = init_params(SMALL)
    debug = {}
    out = forward(inputs(SMALL, 2), params, SMALL, debug=debug)
    assert out.shape == (2, 4, 17, 3)
    assert np.all(np.abs(debug["motion"]) < 1)


def test_batching_is_independent():
    params = init_params(SMALL)
    x = inputs(SMALL, 2)
    both = predict(x, params, SMALL)
    one = np.concatenate([predict(x[i:i + 1], params, SMALL) for i in range(2)])
    assert np.max(np.abs(both - one)) < 1e-12


def test_forward_rejects_wrong_shape():
    with pytest.raises(DimensionError):
        forward(np.zeros((1, 5, 17, 3)), init_params(SMALL), SMALL)


def test_normalize_input_range():
    x = np.array([[0.0, 0.0, 0.3], [1000.0, 1000.0, 1.0]])
    np.testing.assert_array_equal(normalize_input(x, SMALL), [[-1.0, -1.0, 0.3], [1.0, 1.0, 1.0]])


def test_raw_input_toggle():
    raw = SMALL.replace(normalize_input=False)
    params = init_params(raw)
    x = inputs(raw, 1)
    debug_raw, debug_norm = {}, {}
    forward(x, params, raw, debug=debug_raw)
    forward(x, params, SMALL, debug=debug_norm)
    assert not np.allclose(debug_raw["motion"], debug_norm["motion"])
    x_norm = normalize_input(x, SMALL)
    np.testing.assert_allclose(predict(x_norm, params, raw), predict(x, params, SMALL),
                               rtol=0, atol=1e-9)


@pytest.mark.parametrize("mode", ["spatial", "temporal", "both"])
def test_embedding_modes(mode):
    config = SMALL.replace(embedding_mode=mode)
    p = init_params(config)
    assert (p.spatial_pos is not None) == (mode in ("spatial", "both"))
    assert (p.temporal_pos is not None) == (mode in ("temporal", "both"))
    assert predict(inputs(config, 1), p, config).shape == (1, 4, 17, 3)


def test_init_is_deterministic():
    a = init_params(SMALL).named_tensors()
    b = init_params(SMALL).named_tensors()
    assert all(na == nb and np.array_equal(ta.data, tb.data) for (na, ta), (nb, tb) in zip(a, b))


def test_param_count_of_single_linear(rng):
    assert param_count(init_linear(rng, 7, 5)) == 7 * 5 + 5


def test_param_count_tiny_enumeration():
    config = ModelConfig(dim=8, layers=1, joints=3, frames=2, heads=2, neighbors=2,
                         motion_dim=4, se_reduction=2)
    params = init_params(config)
    enumerated = sum(int(np.prod(t.shape)) for _, t in params.named_tensors())
    assert enumerated == param_count(params) == closed_form_param_count(config)


def test_param_count_closed_form_on_random_configs():
    rng = np.random.default_rng(2024)
    for _ in range(10):
        heads = int(rng.choice([1, 2, 4]))
        reduction = int(rng.choice([1, 2, 4]))
        frames = int(rng.integers(1, 6))
        config = ModelConfig(
            frames=frames, joints=int(rng.integers(2, 18)), dim=4 * int(rng.integers(1, 5)),
            motion_dim=int(rng.integers(1, 20)), layers=int(rng.integers(1, 4)), heads=heads,
            neighbors=int(rng.integers(1, frames + 1)), mlp_ratio=int(rng.integers(1, 5)),
            se_reduction=reduction,
            **{axis: str(rng.choice(values)) for axis, values in AXES.items()})
        assert param_count(init_params(config)) == closed_form_param_count(config), config


def test_param_count_increases_with_depth():
    counts = [closed_form_param_count(SMALL.replace(layers=n)) for n in range(1, 6)]
    assert all(a < b for a, b in zip(counts, counts[1:]))


def test_reference_shape_lands_near_target_count():
    config = reference_shape_config()
    assert (config.layers, config.frames, config.joints) == (16, 243, 17)
    n = closed_form_param_count(config)
    assert abs(n - 16e6) <= 1e6
    assert abs(n - REFERENCE_PARAMS) < 0.05 * REFERENCE_PARAMS


@settings(max_examples=8)
@given(st.sampled_from(list(AXES["stream_order"])), st.sampled_from(list(AXES["se_position"])))
def test_full_model_gradient_under_toggles(order, position):
    config = tiny_model_config().replace(stream_order=order, se_position=position)
    err, _ = full_model_check(config, max_coords=3)
    assert err < 1e-4
