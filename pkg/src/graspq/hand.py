"""Articulated 21-landmark right-hand model.

Forward kinematics maps a 48-value pose vector (root axis-angle followed
by 15 joint axis-angles, each applied in its parent segment's frame) plus
a wrist translation onto landmark positions, and capsule proxies are
derived from the landmarks for contact queries.

Pose vector layout (matches the common parametric-hand convention so
dataset pose vectors pass through verbatim):

    theta[0:3]    root rotation (axis-angle)
    theta[3:48]   joint triples in tree order:
                  index (mcp, pip, dip), middle, little, ring,
                  thumb (cmc, mcp, ip)

Shape is a skeletal substitute for blend-shape vectors: one global scale,
15 per-segment length scales (listed finger order: index, middle, ring,
little, thumb), five fingertip-capsule radii and a palm capsule radius.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import InvalidInputError
from .geometry import rotation_matrix_from_axis_angle

FINGERS = ("index", "middle", "ring", "little", "thumb")

CHAINS = {
    "index": ("index_mcp", "index_pip", "index_dip", "index_tip"),
    "middle": ("middle_mcp", "middle_pip", "middle_dip", "middle_tip"),
    "ring": ("ring_mcp", "ring_pip", "ring_dip", "ring_tip"),
    "little": ("little_mcp", "little_pip", "little_dip", "little_tip"),
    "thumb": ("thumb_cmc", "thumb_mcp", "thumb_ip", "thumb_tip"),
}

LANDMARK_NAMES = ("wrist",) + tuple(n for f in FINGERS for n in CHAINS[f])

# joint triples in theta follow the parametric-hand tree order
THETA_FINGER_ORDER = ("index", "middle", "little", "ring", "thumb")

# segment scale entries follow listing order: 3 per finger, index..thumb
SEGMENT_NAMES = tuple(
    (CHAINS[f][k], CHAINS[f][k + 1]) for f in FINGERS for k in range(3)
)


@dataclass(frozen=True)
class RestSkeleton:
    """Rest offsets (child minus parent, canonical frame) and parent map."""

    offsets: dict
    parents: dict

    def __post_init__(self):
        missing = set(LANDMARK_NAMES) - set(self.offsets)
        if missing:
            raise InvalidInputError(f"rest skeleton missing landmarks: {sorted(missing)}")


_DEFAULT_SKELETON = None


def load_rest_skeleton(path=None) -> RestSkeleton:
    """Load a rest-skeleton JSON file; defaults to the bundled table."""
    global _DEFAULT_SKELETON
    if path is None:
        if _DEFAULT_SKELETON is None:
            raw = resources.files("graspq").joinpath("data/rest_skeleton.json").read_text()
            _DEFAULT_SKELETON = _parse_skeleton(json.loads(raw))
        return _DEFAULT_SKELETON
    with open(path, "r", encoding="utf-8") as fh:
        return _parse_skeleton(json.load(fh))


def _parse_skeleton(doc) -> RestSkeleton:
    offsets = {k: np.asarray(v, dtype=float) for k, v in doc["offsets"].items()}
    return RestSkeleton(offsets=offsets, parents=dict(doc["parents"]))


@dataclass(frozen=True)
class HandShape:
    global_scale: float = 1.0
    segment_scales: np.ndarray = field(default_factory=lambda: np.ones(15))
    finger_radii: np.ndarray = field(
        default_factory=lambda: np.array([0.008, 0.008, 0.008, 0.008, 0.010])
    )
    palm_radius: float = 0.012

    def __post_init__(self):
        seg = np.asarray(self.segment_scales, dtype=float)
        rad = np.asarray(self.finger_radii, dtype=float)
        if seg.shape != (15,):
            raise InvalidInputError("segment_scales must have 15 entries")
        if rad.shape != (5,):
            raise InvalidInputError("finger_radii must have 5 entries")
        if self.global_scale <= 0 or np.any(seg <= 0):
            raise InvalidInputError("scales must be positive")
        if np.any((rad <= 0) | (rad >= 0.05)) or not 0 < self.palm_radius < 0.05:
            raise InvalidInputError("capsule radii must lie in (0, 0.05) m")
        object.__setattr__(self, "segment_scales", seg)
        object.__setattr__(self, "finger_radii", rad)

    def segment_scale(self, child_name: str) -> float:
        for i, (_, child) in enumerate(SEGMENT_NAMES):
            if child == child_name:
                return float(self.segment_scales[i])
        return 1.0  # wrist-to-mcp offsets carry only the global scale


@dataclass(frozen=True)
class HandPose:
    theta: np.ndarray  # 48 values: root axis-angle + 15 joint axis-angles
    wrist_translation: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        trans = np.asarray(self.wrist_translation, dtype=float)
        if theta.shape != (48,):
            raise InvalidInputError(f"pose vector must have 48 values, got {theta.size}")
        if trans.shape != (3,):
            raise InvalidInputError("wrist translation must be a 3-vector")
        mags = np.linalg.norm(theta.reshape(16, 3), axis=1)
        if np.any(mags >= np.pi + 1e-6):
            raise InvalidInputError("axis-angle magnitude exceeds pi")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "wrist_translation", trans)

    @staticmethod
    def rest(translation=(0.0, 0.0, 0.0)) -> "HandPose":
        return HandPose(np.zeros(48), np.asarray(translation, dtype=float))

    def joint_rotvec(self, finger: str, k: int) -> np.ndarray:
        """Axis-angle triple for joint k (0..2) of a finger chain."""
        block = THETA_FINGER_ORDER.index(finger)
        i = 3 + 9 * block + 3 * k
        return self.theta[i : i + 3]


@dataclass(frozen=True)
class HandLandmarks:
    positions: np.ndarray  # (21, 3), ordered as LANDMARK_NAMES

    def __getitem__(self, name: str) -> np.ndarray:
        return self.positions[LANDMARK_NAMES.index(name)]

    def bone_length(self, child: str, parent: str) -> float:
        return float(np.linalg.norm(self[child] - self[parent]))


def forward_kinematics(
    shape: HandShape, pose: HandPose, skeleton: RestSkeleton | None = None
) -> HandLandmarks:
    """Landmark positions for a posed, shaped hand.

    Rotations compose root-to-tip; the zero pose with identity root
    reproduces the (scaled) rest skeleton exactly.
    """
    skel = skeleton or load_rest_skeleton()
    g = shape.global_scale
    root = rotation_matrix_from_axis_angle(pose.theta[:3])
    t = pose.wrist_translation

    out = np.empty((21, 3))
    out[0] = t  # wrist
    for finger in FINGERS:
        chain = CHAINS[finger]
        rot = root
        p = t + rot @ (skel.offsets[chain[0]] * g)
        out[LANDMARK_NAMES.index(chain[0])] = p
        for k in range(3):
            rot = rot @ rotation_matrix_from_axis_angle(pose.joint_rotvec(finger, k))
            child = chain[k + 1]
            p = p + rot @ (skel.offsets[child] * shape.segment_scale(child) * g)
            out[LANDMARK_NAMES.index(child)] = p
    return HandLandmarks(out)


@dataclass(frozen=True)
class Capsule:
    a: np.ndarray
    b: np.ndarray
    radius: float
    label: str


# (label, endpoint a, endpoint b, radius source); palm radius is "palm"
_PROXY_TOPOLOGY = (
    [("palm." + f, "wrist", CHAINS[f][0], "palm") for f in FINGERS]
    + [("knuckle", "index_mcp", "little_mcp", "palm")]
    + [
        (f"{f}.{seg}", CHAINS[f][k], CHAINS[f][k + 1], f)
        for f in ("index", "middle", "ring", "little")
        for k, seg in ((0, "proximal"), (1, "middle"), (2, "distal"))
    ]
    + [("thumb.proximal", "thumb_mcp", "thumb_ip", "thumb")]
    + [("thumb.distal", "thumb_ip", "thumb_tip", "thumb")]
)

PROXY_LABELS = tuple(entry[0] for entry in _PROXY_TOPOLOGY)


def build_hand_proxies(landmarks: HandLandmarks, shape: HandShape) -> list:
    """Capsule set covering the hand: 14 phalanges, 5 palm struts, 1 knuckle bar."""
    capsules = []
    for label, a_name, b_name, rad_src in _PROXY_TOPOLOGY:
        if rad_src == "palm":
            r = shape.palm_radius
        else:
            r = float(shape.finger_radii[FINGERS.index(rad_src)])
        capsules.append(Capsule(landmarks[a_name], landmarks[b_name], r, label))
    return capsules
