"""Synthetic evaluation suite with analytically scheduled contact onsets.

Builds six sequences (two subjects, two objects) in which the index and
middle fingertips close onto the top face of a block while the thumb
presses the bottom face between their columns, a three-contact pinch that
is force-closed under the default friction settings. Every frame's
fingertip-to-surface gap follows a designed schedule whose values skip
the (0, tolerance] band, so the ground-truth onset (gap <= 0) and the
detector's onset (gap <= tolerance with a rank-6 wrench space) land on
the same frame.

The generator is deterministic: repeated runs write byte-identical files.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .contacts import ContactParams, capsule_gaps
from .geometry import (
    Pose,
    PosedMesh,
    TriangleMesh,
    build_accelerator,
    quat_from_axis_angle,
    quat_multiply,
    rotation_matrix_from_axis_angle,
    save_mesh,
)
from .hand import (
    CHAINS,
    FINGERS,
    Capsule,
    HandPose,
    HandShape,
    build_hand_proxies,
    forward_kinematics,
    load_rest_skeleton,
)

# designed fingertip gap schedules, meters; values skip the (0, delta] band
PRE_GAPS = [0.038, 0.030, 0.022, 0.015, 0.009, 0.006]
HOLD_GAPS = [-0.001, -0.0015, -0.002, -0.002, -0.002, -0.0015, -0.001]
RELEASE_GAPS = [0.006, 0.012, 0.020, 0.030, 0.038]

DELTA = ContactParams().tolerance
CLEARANCE_MARGIN = 0.0015  # pre-onset frames stay this far outside delta
PRESS_MARGIN = 0.0005  # grasp frames penetrate at least this far

RING_LITTLE_CURL = np.deg2rad(20.0)
THUMB_REST_ANGLE = np.arctan2(0.6, 0.8)  # rest thumb direction in the palm plane
THUMB_STAGE_ANGLE = np.deg2rad(94.0)  # swung across the palm, clear of the object

SUBJECTS = {"subject_a": 1.0, "subject_b": 1.05}

THETA_BLOCKS = {"index": 0, "middle": 1, "little": 2, "ring": 3, "thumb": 4}


def _box_mesh(x0, x1, y0, y1, z0, z1) -> TriangleMesh:
    v = np.array(
        [
            [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
            [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
        ]
    )
    quads = [
        (0, 3, 2, 1),  # bottom, -z outward
        (4, 5, 6, 7),  # top
        (0, 1, 5, 4),  # -y
        (2, 3, 7, 6),  # +y
        (1, 2, 6, 5),  # +x
        (3, 0, 4, 7),  # -x
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append((a, b, c))
        tris.append((a, c, d))
    return TriangleMesh(v, np.asarray(tris, dtype=np.int32))


def _chamfered_bar_mesh(x0, x1, y0, y1, z0, z1, chamfer) -> TriangleMesh:
    """Prism along x whose cross-section is a box with 45-degree top chamfers."""
    zc = z1 - chamfer
    loop = [
        (y0, z0), (y1, z0), (y1, zc), (y1 - chamfer, z1), (y0 + chamfer, z1), (y0, zc),
    ]
    n = len(loop)
    v = np.array([[x0, y, z] for y, z in loop] + [[x1, y, z] for y, z in loop])
    tris = []
    for k in range(1, n - 1):  # end caps
        tris.append((0, k + 1, k))
        tris.append((n, n + k, n + k + 1))
    for k in range(n):  # side walls
        a, b = k, (k + 1) % n
        tris.append((a, b, n + b))
        tris.append((a, n + b, n + a))
    return TriangleMesh(v, np.asarray(tris, dtype=np.int32))


OBJECTS = {
    "block": lambda: _box_mesh(-0.02, 0.06, 0.030, 0.090, 0.024, 0.054),
    "bar": lambda: _chamfered_bar_mesh(-0.02, 0.06, 0.028, 0.088, 0.022, 0.050, 0.005),
}
OBJECT_BOTTOM = {"block": 0.024, "bar": 0.022}


def _rotvec_between(u, v) -> np.ndarray:
    """Minimum rotation vector taking unit u onto unit v."""
    axis = np.cross(u, v)
    s = np.linalg.norm(axis)
    c = float(np.dot(u, v))
    if s < 1e-12:
        return np.zeros(3)
    return axis / s * np.arctan2(s, c)


def _rotvec_from_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    s = np.linalg.norm(q[1:])
    if s < 1e-12:
        return np.zeros(3)
    return q[1:] / s * 2.0 * np.arctan2(s, q[0])


class _GraspScript:
    """Deterministic articulation script for one (subject, object) pair.

    Index and middle curl all three joints by a shared flexion angle; the
    thumb follows a three-phase path (adduct across the palm at z = 0,
    slide the straight chain under the object, bend to lift the tip). The
    script solves each phase parameter against a fingertip gap target by
    bisection over cached, piecewise-monotone gap samples.
    """

    def __init__(self, shape: HandShape, mesh: TriangleMesh, bottom_z: float):
        self.shape = shape
        self.skeleton = load_rest_skeleton()
        self.posed = PosedMesh(mesh, build_accelerator(mesh), Pose.identity())
        g = shape.global_scale
        self.cmc = self.skeleton.offsets["thumb_cmc"] * g
        self.l1 = np.linalg.norm(self.skeleton.offsets["thumb_mcp"]) * g
        self.l2 = (
            np.linalg.norm(self.skeleton.offsets["thumb_ip"])
            + np.linalg.norm(self.skeleton.offsets["thumb_tip"])
        ) * g
        self.thumb_rest_dir = np.array([0.8, 0.6, 0.0])

        # fingertip contact columns define where the thumb presses from below
        phi_idx = self._solve("index", -0.002, np.deg2rad(76.0))
        phi_mid = self._solve("middle", -0.002, np.deg2rad(76.0))
        tip_idx = self._tip_point("index", phi_idx)
        tip_mid = self._tip_point("middle", phi_mid)
        self.thumb_xy = 0.5 * (tip_idx[:2] + tip_mid[:2])
        r_thumb = float(shape.finger_radii[FINGERS.index("thumb")])
        self.thumb_z_final = bottom_z - r_thumb + 0.0035  # overshoot past the deepest scheduled press

    # ---- articulation pieces

    def _finger_theta(self, theta: np.ndarray, finger: str, phi: float) -> None:
        base = 3 + 9 * THETA_BLOCKS[finger]
        for joint in range(3):
            theta[base + 3 * joint : base + 3 * joint + 3] = (phi, 0.0, 0.0)

    def _thumb_theta(self, theta: np.ndarray, u: float) -> None:
        cmc_rv, mcp_rv = self._thumb_joints(u)
        base = 3 + 9 * THETA_BLOCKS["thumb"]
        theta[base : base + 3] = cmc_rv
        theta[base + 3 : base + 6] = mcp_rv

    def _thumb_joints(self, u: float):
        if u <= 1.0:
            swing = u * (THUMB_STAGE_ANGLE - THUMB_REST_ANGLE)
            return np.array([0.0, 0.0, swing]), np.zeros(3)
        reach = self.l1 + self.l2
        stage = self.cmc + reach * np.array(
            [np.cos(THUMB_STAGE_ANGLE), np.sin(THUMB_STAGE_ANGLE), 0.0]
        )
        final_xy = np.array([self.thumb_xy[0], self.thumb_xy[1], 0.0])
        if u <= 2.0:
            target = stage + (u - 1.0) * (final_xy - stage)
        else:
            target = final_xy + np.array([0.0, 0.0, (u - 2.0) * self.thumb_z_final])
        return self._thumb_ik(target)

    def _thumb_ik(self, target):
        chord = target - self.cmc
        c = float(np.linalg.norm(chord))
        c = min(max(c, abs(self.l1 - self.l2) + 1e-9), self.l1 + self.l2 - 1e-12)
        d = chord / np.linalg.norm(chord)
        cos_beta = (self.l1**2 + c**2 - self.l2**2) / (2.0 * self.l1 * c)
        beta = float(np.arccos(np.clip(cos_beta, -1.0, 1.0)))
        bend_axis = np.cross([0.0, 0.0, 1.0], d)
        bn = np.linalg.norm(bend_axis)
        bend_axis = bend_axis / bn if bn > 1e-12 else np.array([1.0, 0.0, 0.0])
        # rot(z cross d, +beta) tilts d toward -z: elbow below the palm
        link1_dir = rotation_matrix_from_axis_angle(beta * bend_axis) @ d
        elbow = self.cmc + self.l1 * link1_dir
        link2_dir = target - elbow
        link2_dir = link2_dir / np.linalg.norm(link2_dir)
        cmc_rv = _rotvec_between(self.thumb_rest_dir, link1_dir)
        r1 = rotation_matrix_from_axis_angle(cmc_rv)
        mcp_rv = _rotvec_between(self.thumb_rest_dir, r1.T @ link2_dir)
        return cmc_rv, mcp_rv

    def theta(self, phi_index: float, phi_middle: float, thumb_u: float) -> np.ndarray:
        theta = np.zeros(48)
        self._finger_theta(theta, "index", phi_index)
        self._finger_theta(theta, "middle", phi_middle)
        self._finger_theta(theta, "ring", RING_LITTLE_CURL)
        self._finger_theta(theta, "little", RING_LITTLE_CURL)
        self._thumb_theta(theta, thumb_u)
        return theta

    # ---- gap evaluation (single distal capsule: cheap enough to bisect on)

    def _distal_capsule(self, finger: str, value: float) -> Capsule:
        theta = np.zeros(48)
        if finger == "thumb":
            self._thumb_theta(theta, value)
        else:
            self._finger_theta(theta, finger, value)
        lm = forward_kinematics(self.shape, HandPose(theta, np.zeros(3)), self.skeleton)
        chain = CHAINS[finger]
        radius = float(self.shape.finger_radii[FINGERS.index(finger)])
        return Capsule(lm[chain[2]], lm[chain[3]], radius, f"{finger}.distal")

    def _tip_point(self, finger: str, value: float):
        theta = np.zeros(48)
        self._finger_theta(theta, finger, value)
        lm = forward_kinematics(self.shape, HandPose(theta, np.zeros(3)), self.skeleton)
        return lm[CHAINS[finger][3]]

    def _gap(self, finger: str, value: float) -> float:
        return float(capsule_gaps([self._distal_capsule(finger, value)], self.posed)[0])

    def _solve(self, finger: str, target: float, upper: float) -> float:
        """Smallest parameter at which the fingertip gap reaches target."""
        key = (finger, upper)
        cache = getattr(self, "_grids", None)
        if cache is None:
            cache = self._grids = {}
        if key not in cache:
            grid = np.linspace(0.0, upper, 97)
            cache[key] = (grid, np.array([self._gap(finger, v) for v in grid]))
        grid, gaps = cache[key]
        if gaps[0] <= target:
            return 0.0
        for k in range(1, len(grid)):
            if gaps[k] <= target:
                lo, hi = grid[k - 1], grid[k]
                for _ in range(44):
                    mid = 0.5 * (lo + hi)
                    if self._gap(finger, mid) > target:
                        lo = mid
                    else:
                        hi = mid
                return 0.5 * (lo + hi)
        if target >= gaps.min():
            return float(grid[int(np.argmin(gaps))])
        raise RuntimeError(f"{finger}: gap target {target} unreachable")

    def solve_frame(self, gap_target: float) -> np.ndarray:
        phi_i = self._solve("index", gap_target, np.deg2rad(76.0))
        phi_m = self._solve("middle", gap_target, np.deg2rad(76.0))
        # pre-onset thumb targets above its start gap clamp to the rest pose
        thumb_u = self._solve("thumb", gap_target, 3.0)
        return self.theta(phi_i, phi_m, thumb_u)

    def check_frame(self, theta: np.ndarray, gap_target: float) -> None:
        """Design guards: clearance before onset, firm contact during it."""
        lm = forward_kinematics(self.shape, HandPose(theta, np.zeros(3)), self.skeleton)
        proxies = build_hand_proxies(lm, self.shape)
        gaps = capsule_gaps(proxies, self.posed)
        labels = [c.label for c in proxies]
        if gap_target > DELTA:
            if gaps.min() <= DELTA + CLEARANCE_MARGIN:
                raise RuntimeError(
                    "pre-onset clearance violated: %s at %.4f m"
                    % (labels[int(np.argmin(gaps))], gaps.min())
                )
        if gap_target <= 0.0:
            designed = [labels.index(f"{f}.distal") for f in ("index", "middle", "thumb")]
            worst = max(gaps[i] for i in designed)
            if worst > -PRESS_MARGIN:
                raise RuntimeError("designed contact not pressing (gap %.5f m)" % worst)


def _world_pose(seq_index: int) -> Pose:
    """Per-sequence rigid placement exercising nontrivial world frames."""
    placements = [
        (np.zeros(3), np.zeros(3)),
        (np.array([0.0, 0.0, np.pi / 6]), np.array([0.25, -0.1, 0.05])),
        (np.array([0.2, 0.0, 0.0]), np.array([-0.1, 0.3, 0.02])),
        (np.array([0.0, -0.25, 0.1]), np.array([0.05, 0.05, -0.2])),
        (np.array([0.1, 0.1, -0.3]), np.array([0.4, 0.0, 0.1])),
        (np.array([-0.15, 0.2, 0.05]), np.array([0.0, -0.3, 0.15])),
    ]
    rotvec, trans = placements[seq_index % len(placements)]
    return Pose.from_axis_angle(rotvec, trans)


@dataclass
class SequenceSpec:
    sequence_id: str
    subject_id: str
    object_id: str
    extra_pre_frames: int


SUITE = [
    SequenceSpec("s01_a_block", "subject_a", "block", 0),
    SequenceSpec("s02_a_bar", "subject_a", "bar", 0),
    SequenceSpec("s03_b_block", "subject_b", "block", 0),
    SequenceSpec("s04_b_bar", "subject_b", "bar", 0),
    SequenceSpec("s05_a_block", "subject_a", "block", 2),
    SequenceSpec("s06_b_bar", "subject_b", "bar", 2),
]


def _gap_schedule(extra_pre: int):
    pre = [0.044, 0.041][:extra_pre] + PRE_GAPS
    return pre + HOLD_GAPS + RELEASE_GAPS, len(pre)


def generate_suite(out_dir, verify: bool = True) -> dict:
    """Write meshes, sequence files and a manifest; returns the manifest."""
    out_dir = Path(out_dir)
    (out_dir / "meshes").mkdir(parents=True, exist_ok=True)

    meshes = {}
    for object_id, builder in OBJECTS.items():
        meshes[object_id] = builder()
        save_mesh(meshes[object_id], out_dir / "meshes" / f"{object_id}.obj")

    scripts = {}
    manifest = {"sequences": []}
    for i, spec in enumerate(SUITE):
        key = (spec.subject_id, spec.object_id)
        if key not in scripts:
            scripts[key] = _GraspScript(
                HandShape(global_scale=SUBJECTS[spec.subject_id]),
                meshes[spec.object_id],
                OBJECT_BOTTOM[spec.object_id],
            )
        script = scripts[key]
        schedule, onset = _gap_schedule(spec.extra_pre_frames)
        world = _world_pose(i)
        frames = []
        for f_idx, gap in enumerate(schedule):
            theta = script.solve_frame(gap)
            if verify:
                script.check_frame(theta, gap)
            theta_world = theta.copy()
            root_q = quat_multiply(world.rotation, quat_from_axis_angle(theta[0:3]))
            theta_world[0:3] = _rotvec_from_quat(root_q)
            frames.append(
                {
                    "index": f_idx,
                    "hand_pose": [round(float(v), 12) for v in theta_world],
                    "hand_trans": [round(float(v), 12) for v in world.translation],
                    "object_pose": {
                        "rotation": [round(float(v), 12) for v in world.rotation],
                        "translation": [round(float(v), 12) for v in world.translation],
                    },
                    "gt_contact": bool(gap <= 0.0),
                }
            )
        doc = {
            "sequence_id": spec.sequence_id,
            "subject_id": spec.subject_id,
            "object_id": spec.object_id,
            "object_mesh": f"meshes/{spec.object_id}.obj",
            "hand_shape": {
                "global_scale": SUBJECTS[spec.subject_id],
                "segment_scales": [1.0] * 15,
                "finger_radii": [float(r) for r in HandShape().finger_radii],
            },
            "frames": frames,
        }
        seq_path = out_dir / f"{spec.sequence_id}.json"
        seq_path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
        manifest["sequences"].append(
            {
                "sequence_id": spec.sequence_id,
                "subject_id": spec.subject_id,
                "object_id": spec.object_id,
                "path": seq_path.name,
                "onset_frame": onset,
                "grasp_frames": [k for k, g in enumerate(schedule) if g <= 0.0],
                "expected_offset": 0,
            }
        )
    (out_dir / "suite_manifest.json").write_text(
        json.dumps(manifest, indent=1), encoding="utf-8"
    )
    return manifest


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m graspq.synthetic OUT_DIR", file=sys.stderr)
        return 1
    manifest = generate_suite(argv[0])
    print("wrote %d sequences to %s" % (len(manifest["sequences"]), argv[0]))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
