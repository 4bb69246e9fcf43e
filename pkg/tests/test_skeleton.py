import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from mixtgformer.errors import ConfigError, DimensionError, FormatError
from mixtgformer.skeleton import (MTGF_HEADER, CameraModel, PoseSequence, SkeletonTopology,
                                  adjacency_matrix, chain_topology, decode_sequence,
                                  encode_sequence, flip_horizontal, human36m_topology,
                                  load_sequence, normalized_adjacency, project, save_sequence,
                                  synth_sequence)

H36M = human36m_topology()


def power_iteration(M, iters=2000, seed=0):
    v = np.random.default_rng(seed).normal(size=M.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = M @ v
        lam = np.linalg.norm(w) / np.linalg.norm(v)
        v = w / np.linalg.norm(w)
    return lam


def test_h36m_tree_shape():
    assert len(H36M.edges) == H36M.joint_count - 1 == 16
    degree = adjacency_matrix(H36M).sum(axis=1)
    assert degree[H36M.root_index] == 3
    parents = H36M.parents()
    assert parents[H36M.root_index] == -1
    assert all(p >= 0 for i, p in enumerate(parents) if i != H36M.root_index)


def test_topology_rejects_non_tree():
    with pytest.raises(ConfigError):
        SkeletonTopology(3, ((0, 1), (0, 1)))
    with pytest.raises(ConfigError):
        SkeletonTopology(3, ((0, 1),))


def test_normalized_adjacency_small_cases():
    assert np.array_equal(normalized_adjacency(chain_topology(1)).data, [[1.0]])
    np.testing.assert_allclose(normalized_adjacency(chain_topology(2)).data,
                               [[0.5, 0.5], [0.5, 0.5]], rtol=0, atol=1e-15)


def test_normalized_adjacency_matches_matrix_oracle():
    for topo in (chain_topology(3), chain_topology(6), H36M):
        A = adjacency_matrix(topo) + np.eye(topo.joint_count)
        D = np.diag(A.sum(axis=1))
        ref = scipy.linalg.fractional_matrix_power(D, -0.5) @ A @ \
            scipy.linalg.fractional_matrix_power(D, -0.5)
        np.testing.assert_allclose(normalized_adjacency(topo).data, ref, rtol=0, atol=1e-14)


def test_three_node_path_entries():
    a = normalized_adjacency(chain_topology(3)).data
    np.testing.assert_allclose(a[0, 0], 0.5)
    np.testing.assert_allclose(a[1, 1], 1 / 3)
    np.testing.assert_allclose(a[0, 1], 1 / np.sqrt(6))


def test_normalized_adjacency_symmetric_and_bounded():
    a = normalized_adjacency(H36M).data
    assert np.max(np.abs(a - a.T)) < 1e-14
    assert power_iteration(a) <= 1 + 1e-10


def test_synth_is_deterministic():
    a2, a3 = synth_sequence(7, H36M, 12)
    b2, b3 = synth_sequence(7, H36M, 12)
    assert encode_sequence(a2) == encode_sequence(b2)
    assert encode_sequence(a3) == encode_sequence(b3)
    c2, _ = synth_sequence(8, H36M, 12)
    assert not np.array_equal(a2.values, c2.values)


def test_synth_noise_free_reprojection():
    cam = CameraModel()
    x2d, gt = synth_sequence(3, H36M, 20, cam, noise_std=0.0)
    assert np.array_equal(project(gt.values, cam), x2d.values[..., :2])
    assert np.all(x2d.values[..., 2] == 1.0)


def test_synth_noise_changes_confidence():
    x2d, _ = synth_sequence(3, H36M, 20, noise_std=5.0)
    conf = x2d.values[..., 2]
    assert np.all((conf > 0) & (conf <= 1)) and conf.min() < 1.0


def test_synth_bone_lengths_constant():
    _, gt = synth_sequence(11, H36M, 50)
    for a, b in H36M.edges:
        length = np.linalg.norm(gt.values[:, a] - gt.values[:, b], axis=-1)
        assert np.ptp(length) < 1e-9


def test_flip_is_involution():
    x2d, gt = synth_sequence(2, H36M, 10)
    assert np.array_equal(flip_horizontal(flip_horizontal(gt, H36M), H36M).values, gt.values)
    back = flip_horizontal(flip_horizontal(x2d, H36M), H36M).values
    assert np.max(np.abs(back - x2d.values)) < 1e-9


def test_flip_midline_and_lr_swap():
    _, gt = synth_sequence(2, H36M, 4)
    f = flip_horizontal(gt, H36M).values
    for j in (0, 7, 8, 9, 10):
        np.testing.assert_array_equal(np.abs(f[:, j, 0]), np.abs(gt.values[:, j, 0]))
    l_wrist, r_wrist = H36M.names.index("l_wrist"), H36M.names.index("r_wrist")
    np.testing.assert_array_equal(f[:, r_wrist, 1:], gt.values[:, l_wrist, 1:])
    np.testing.assert_array_equal(f[:, r_wrist, 0], -gt.values[:, l_wrist, 0])


def test_flip_commutes_with_projection():
    cam = CameraModel()
    x2d, gt = synth_sequence(5, H36M, 6, cam)
    fx = flip_horizontal(x2d, H36M, cam.image_width).values[..., :2]
    np.testing.assert_allclose(project(flip_horizontal(gt, H36M).values, cam), fx,
                               rtol=0, atol=1e-9)


def test_pose_sequence_validation():
    with pytest.raises(DimensionError):
        PoseSequence("gt3d", np.zeros((2, 3)))
    with pytest.raises(ValueError):
        PoseSequence("gt3d", np.full((1, 2, 3), np.nan))
    with pytest.raises(ValueError):
        PoseSequence("input2d", np.full((1, 2, 3), 2.0))


@given(st.sampled_from(["input2d", "gt3d", "pred3d"]), st.integers(1, 6), st.integers(1, 5),
       st.integers(0, 2 ** 32 - 1))
def test_mtgf_roundtrip_bitwise(kind, T, J, seed):
    values = np.random.default_rng(seed).uniform(0, 1, (T, J, 3))
    values[0, 0, 0] = -0.0
    seq = PoseSequence(kind, values)
    back = decode_sequence(encode_sequence(seq))
    assert back.kind == kind
    assert back.values.tobytes() == seq.values.tobytes()


@given(st.integers(0, 20 + 2 * 3 * 3 * 8 - 1))
def test_mtgf_truncation_detected(cut):
    buf = encode_sequence(PoseSequence("gt3d", np.ones((2, 3, 3))))
    with pytest.raises(FormatError):
        decode_sequence(buf[:cut])


def test_mtgf_header_layout(tmp_path):
    _, gt = synth_sequence(0, H36M, 243)
    path = tmp_path / "a.mtgf"
    save_sequence(path, gt)
    raw = path.read_bytes()
    assert MTGF_HEADER.size == 20
    assert len(raw) == 20 + 243 * 17 * 3 * 8
    assert raw[:4] == b"MTGF"
    assert load_sequence(path).values.tobytes() == gt.values.tobytes()


def test_mtgf_rejects_bad_magic_and_trailing_bytes():
    buf = encode_sequence(PoseSequence("gt3d", np.ones((1, 1, 3))))
    with pytest.raises(FormatError, match="magic"):
        decode_sequence(b"XXXX" + buf[4:])
    with pytest.raises(FormatError, match="trailing") as info:
        decode_sequence(buf + b"\0")
    assert info.value.offset == len(buf)
