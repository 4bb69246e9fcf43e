"""Skeleton topology, graph adjacency, synthetic motion and the MTGF file format."""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, FormatError
from .tensor import Tensor

KINDS = ("input2d", "gt3d", "pred3d")

MTGF_MAGIC = b"MTGF"
MTGF_VERSION = 1
MTGF_HEADER = struct.Struct("<4sIIII")  # magic, version, kind, T, J


@dataclass(frozen=True)
class SkeletonTopology:
    joint_count: int
    edges: tuple
    root_index: int = 0
    lr_pairs: tuple = ()
    names: tuple = ()

    def __post_init__(self):
        J = self.joint_count
        if J < 1:
            raise ConfigError("a skeleton needs at least one joint")
        if len(self.edges) != J - 1:
            raise ConfigError(f"a tree on {J} joints has {J - 1} edges, got {len(self.edges)}")
        flat = [i for e in self.edges for i in e] + [i for p in self.lr_pairs for i in p]
        if any(not 0 <= i < J for i in flat) or not 0 <= self.root_index < J:
            raise ConfigError("joint index out of range")
        # connectivity: with J - 1 edges, connected implies acyclic
        reach = {self.root_index}
        grown = True
        while grown:
            grown = False
            for a, b in self.edges:
                if (a in reach) != (b in reach):
                    reach.update((a, b))
                    grown = True
        if len(reach) != J:
            raise ConfigError("skeleton edges do not span all joints")
        paired = [i for p in self.lr_pairs for i in p]
        if len(paired) != len(set(paired)):
            raise ConfigError("left/right pairs overlap")

    def parents(self):
        """Parent index per joint (-1 for the root), following edges from the root."""
        parent = [-1] * self.joint_count
        frontier, seen = [self.root_index], {self.root_index}
        while frontier:
            j = frontier.pop()
            for a, b in self.edges:
                for u, v in ((a, b), (b, a)):
                    if u == j and v not in seen:
                        parent[v] = j
                        seen.add(v)
                        frontier.append(v)
        return parent

    def flip_permutation(self):
        perm = np.arange(self.joint_count)
        for left, right in self.lr_pairs:
            perm[left], perm[right] = right, left
        return perm


H36M_NAMES = (
    "pelvis", "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee", "l_ankle",
    "spine", "thorax", "neck", "head",
    "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist",
)

H36M_EDGES = (
    (0, 1), (1, 2), (2, 3),
    (0, 4), (4, 5), (5, 6),
    (0, 7), (7, 8), (8, 9), (9, 10),
    (8, 11), (11, 12), (12, 13),
    (8, 14), (14, 15), (15, 16),
)

H36M_LR_PAIRS = ((4, 1), (5, 2), (6, 3), (11, 14), (12, 15), (13, 16))

# Rest-pose bone offsets in mm, body frame (x = subject's left, y = up, z = forward).
H36M_OFFSETS = np.array([
    [0.0, 0.0, 0.0],
    [-130.0, 0.0, 0.0], [0.0, -450.0, 0.0], [0.0, -440.0, 0.0],
    [130.0, 0.0, 0.0], [0.0, -450.0, 0.0], [0.0, -440.0, 0.0],
    [0.0, 230.0, 0.0], [0.0, 250.0, 0.0], [0.0, 110.0, 20.0], [0.0, 120.0, 0.0],
    [150.0, 0.0, 0.0], [0.0, -280.0, 0.0], [0.0, -250.0, 0.0],
    [-150.0, 0.0, 0.0], [0.0, -280.0, 0.0], [0.0, -250.0, 0.0],
])


def human36m_topology():
    return SkeletonTopology(17, H36M_EDGES, 0, H36M_LR_PAIRS, H36M_NAMES)


def chain_topology(joint_count):
    """A path graph rooted at joint 0, used for small test skeletons."""
    edges = tuple((i, i + 1) for i in range(joint_count - 1))
    return SkeletonTopology(joint_count, edges, 0, ())


def adjacency_matrix(topo):
    A = np.zeros((topo.joint_count, topo.joint_count))
    for a, b in topo.edges:
        A[a, b] = A[b, a] = 1.0
    return A


def normalized_adjacency(topo):
    """Symmetric normalisation D^-1/2 (A + I) D^-1/2 of the skeleton graph."""
    A = adjacency_matrix(topo) + np.eye(topo.joint_count)
    d = 1.0 / np.sqrt(A.sum(axis=1))
    return Tensor(d[:, None] * A * d[None, :])


# --------------------------------------------------------------------------
# pose sequences


@dataclass
class PoseSequence:
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown sequence kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3 or self.values.shape[2] != 3 or 0 in self.values.shape:
            raise DimensionError(f"pose sequence must be T x J x 3, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("pose sequence contains non-finite values")
        if self.kind == "input2d":
            conf = self.values[..., 2]
            if conf.min() < 0.0 or conf.max() > 1.0:
                raise ValueError("confidence channel must lie in [0, 1]")

    @property
    def frames(self):
        return self.values.shape[0]

    @property
    def joints(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class CameraModel:
    focal: float = 1000.0
    cx: float = 500.0
    cy: float = 500.0
    depth_offset: float = 5000.0

    def __post_init__(self):
        if self.focal <= 0:
            raise ConfigError("focal length must be positive")

    @property
    def image_width(self):
        return 2.0 * self.cx

    @property
    def image_height(self):
        return 2.0 * self.cy


def project(points, cam):
    """Pinhole projection of camera-space points (..., 3) to pixels (..., 2)."""
    z = points[..., 2]
    u = cam.focal * points[..., 0] / z + cam.cx
    v = cam.focal * points[..., 1] / z + cam.cy
    return np.stack([u, v], axis=-1)


def _rotation(angles):
    """Rotation matrices Rz @ Ry @ Rx from (..., 3) Euler angles."""
    ax, ay, az = angles[..., 0], angles[..., 1], angles[..., 2]
    ca, sa = np.cos(ax), np.sin(ax)
    cb, sb = np.cos(ay), np.sin(ay)
    cc, sc = np.cos(az), np.sin(az)
    R = np.empty(angles.shape[:-1] + (3, 3))
    R[..., 0, 0] = cc * cb
    R[..., 0, 1] = cc * sb * sa - sc * ca
    R[..., 0, 2] = cc * sb * ca + sc * sa
    R[..., 1, 0] = sc * cb
    R[..., 1, 1] = sc * sb * sa + cc * ca
    R[..., 1, 2] = sc * sb * ca - cc * sa
    R[..., 2, 0] = -sb
    R[..., 2, 1] = cb * sa
    R[..., 2, 2] = cb * ca
    return R


def _rest_offsets(topo):
    if topo.joint_count == 17 and topo.edges == H36M_EDGES:
        return H36M_OFFSETS
    # generic skeletons: unit-ish bones stacked downward from the root
    offsets = np.zeros((topo.joint_count, 3))
    offsets[1:, 1] = -200.0
    return offsets


def forward_kinematics(topo, local_angles, root_pos, root_angles, offsets=None):
    """Joint positions (T, J, 3) in body frame from per-joint local rotations.

    Bone lengths equal the rest offset norms by construction, since each
    bone is an orthogonal transform of its offset.
    """
    offsets = _rest_offsets(topo) if offsets is None else offsets
    parent = topo.parents()
    T, J = local_angles.shape[:2]
    local = _rotation(local_angles)
    glob = np.empty((T, J, 3, 3))
    pos = np.empty((T, J, 3))
    r = topo.root_index
    glob[:, r] = _rotation(root_angles) @ local[:, r]
    pos[:, r] = root_pos
    order = [r]
    for j in order:
        for c in range(J):
            if parent[c] == j:
                order.append(c)
                pos[:, c] = pos[:, j] + np.einsum("tab,b->ta", glob[:, j], offsets[c])
                glob[:, c] = glob[:, j] @ local[:, c]
    return pos


def synth_sequence(seed, topo, T, cam=CameraModel(), noise_std=0.0, fps=50.0):
    """Deterministic synthetic (input2d, gt3d) pair.

    Each joint follows a sinusoidal local-rotation trajectory with
    seed-drawn amplitude, frequency and phase; the root sways and yaws.
    The 3D ground truth is in camera space (mm, y down); the 2D input is its
    pinhole projection plus Gaussian pixel noise, with confidence
    ``exp(-|noise|)``.
    """
    if T < 1:
        raise ConfigError("a sequence needs at least one frame")
    rng = np.random.default_rng(seed)
    J = topo.joint_count
    t = np.arange(T)[:, None, None] / fps
    amp = rng.uniform(0.0, 0.35, size=(1, J, 3))
    freq = rng.uniform(0.3, 1.5, size=(1, J, 3))
    phase = rng.uniform(0.0, 2 * np.pi, size=(1, J, 3))
    local = amp * np.sin(2 * np.pi * freq * t + phase)

    root_amp = rng.uniform(0.0, 150.0, size=3)
    root_freq = rng.uniform(0.1, 0.6, size=3)
    root_phase = rng.uniform(0.0, 2 * np.pi, size=3)
    tt = t[:, 0, :]
    root_pos = root_amp * np.sin(2 * np.pi * root_freq * tt + root_phase)
    yaw0 = rng.uniform(-np.pi, np.pi)
    yaw_amp = rng.uniform(0.0, 0.5)
    root_angles = np.zeros((T, 3))
    root_angles[:, 1] = yaw0 + yaw_amp * np.sin(2 * np.pi * root_freq[0] * tt[:, 0])

    body = forward_kinematics(topo, local, root_pos, root_angles)
    gt = np.stack([body[..., 0], -body[..., 1], body[..., 2] + cam.depth_offset], axis=-1)

    noise = rng.standard_normal(size=(T, J, 2)) * noise_std
    uv = project(gt, cam) + noise
    conf = np.clip(np.exp(-np.linalg.norm(noise, axis=-1)), 0.0, 1.0)
    x2d = np.concatenate([uv, conf[..., None]], axis=-1)
    return PoseSequence("input2d", x2d), PoseSequence("gt3d", gt)


def flip_values(values, topo, kind, image_width=1000.0):
    """Horizontally mirror (..., J, 3) values and swap left/right joints.

    3D values are mirrored in the camera's x = 0 plane, which is the same
    reflection as u -> W - u in the image when the principal point sits at
    the image centre. Negation makes the 3D flip an exact involution; the 2D
    one can be off by an ulp for u < W/2.
    """
    out = np.array(values, dtype=np.float64)
    if kind == "input2d":
        out[..., 0] = image_width - out[..., 0]
    else:
        out[..., 0] = -out[..., 0]
    return out[..., topo.flip_permutation(), :]


def flip_horizontal(seq, topo, image_width=1000.0):
    """Mirror a sequence: 2D about the image centre, 3D about the camera x = 0 plane."""
    return PoseSequence(seq.kind, flip_values(seq.values, topo, seq.kind, image_width))


# --------------------------------------------------------------------------
# MTGF container


def encode_sequence(seq):
    T, J, _ = seq.values.shape
    header = MTGF_HEADER.pack(MTGF_MAGIC, MTGF_VERSION, KINDS.index(seq.kind), T, J)
    return header + seq.values.astype("<f8").tobytes()


def decode_sequence(buf):
    if len(buf) < MTGF_HEADER.size:
        raise FormatError("truncated MTGF header", len(buf))
    magic, version, kind, T, J = MTGF_HEADER.unpack_from(buf, 0)
    if magic != MTGF_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != MTGF_VERSION:
        raise FormatError(f"unsupported MTGF version {version}", 4)
    if kind >= len(KINDS):
        raise FormatError(f"unknown kind tag {kind}", 8)
    if T == 0 or J == 0:
        raise FormatError("empty sequence dimensions", 12)
    expected = MTGF_HEADER.size + T * J * 3 * 8
    if len(buf) < expected:
        raise FormatError(f"truncated payload: need {expected} bytes, have {len(buf)}", len(buf))
    if len(buf) > expected:
        raise FormatError("trailing bytes after payload", expected)
    values = np.frombuffer(buf, dtype="<f8", offset=MTGF_HEADER.size).reshape(T, J, 3)
    return PoseSequence(KINDS[kind], values.astype(np.float64))


def save_sequence(path, seq):
    Path(path).write_bytes(encode_sequence(seq))


def load_sequence(path):
    return decode_sequence(Path(path).read_bytes())
