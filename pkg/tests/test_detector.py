import numpy as np
import pytest

from graspq.contacts import ContactParams
from graspq.detector import FrameInput, MeshRegistry, decide, evaluate_frame
from graspq.errors import ConfigurationError
from graspq.evaluation import load_sequence
from graspq.geometry import Pose
from graspq.hand import HandPose, HandShape
from graspq.wrench import QualityMetrics

from conftest import make_unit_cube


@pytest.fixture(scope="module")
def cube_registry():
    registry = MeshRegistry()
    registry.register("cube", make_unit_cube())
    return registry


def far_frame() -> FrameInput:
    return FrameInput(
        HandShape(),
        HandPose.rest(),
        "cube",
        Pose(np.array([1.0, 0, 0, 0]), np.array([1.0, 0.0, 0.0])),
    )


class TestDecide:
    def test_sentinel_is_negative(self):
        assert decide(QualityMetrics(-1.0, 0.0, 0)) is False

    def test_volume_branch(self):
        assert decide(QualityMetrics(0.0, 0.02, 3)) is True

    def test_epsilon_branch(self):
        assert decide(QualityMetrics(0.05, 0.0, 3)) is True

    def test_boundary_zero_is_negative(self):
        assert decide(QualityMetrics(0.0, 0.0, 1)) is False

    def test_thresholds(self):
        m = QualityMetrics(0.04, 0.01, 3)
        assert decide(m) is True
        assert decide(m, tau_epsilon=0.05, tau_volume=0.02) is False


class TestEvaluateFrame:
    def test_far_object_sentinel(self, cube_registry):
        decision = evaluate_frame(far_frame(), ContactParams(), cube_registry)
        assert decision.metrics.epsilon == -1.0
        assert decision.metrics.volume == 0.0
        assert decision.in_contact is False
        assert decision.contact_count == 0

    def test_unknown_mesh_id(self, cube_registry):
        frame = FrameInput(HandShape(), HandPose.rest(), "missing", Pose.identity())
        with pytest.raises(ConfigurationError):
            evaluate_frame(frame, ContactParams(), cube_registry)

    def test_single_fingertip_on_plate_scores_zero(self):
        # index curled below the palm plane onto a large plate: one contact,
        # wrench rank < 6, so both metrics vanish yet contact_count >= 1
        from graspq.geometry import TriangleMesh

        plate = TriangleMesh(
            np.array(
                [[-1, -1, 0], [1, -1, 0], [1, 1, 0], [-1, 1, 0],
                 [-1, -1, -0.02], [1, -1, -0.02], [1, 1, -0.02], [-1, 1, -0.02]],
                dtype=float,
            ),
            np.asarray(
                [(0, 1, 2), (0, 2, 3), (6, 5, 4), (7, 6, 4),
                 (4, 5, 1), (4, 1, 0), (5, 6, 2), (5, 2, 1),
                 (6, 7, 3), (6, 3, 2), (7, 4, 0), (7, 0, 3)],
                dtype=np.int32,
            ),
        )
        registry = MeshRegistry()
        registry.register("plate", plate)
        theta = np.zeros(48)
        theta[3:12] = np.tile([-0.7, 0.0, 0.0], 3)  # index bends backwards
        # plate top just touching the curled index tip
        tip_z = -0.0702
        frame = FrameInput(
            HandShape(),
            HandPose(theta, np.zeros(3)),
            "plate",
            Pose(np.array([1.0, 0, 0, 0]), np.array([0.0, 0.0, tip_z - 0.0075])),
        )
        decision = evaluate_frame(frame, ContactParams(), registry)
        assert decision.contact_count >= 1
        assert decision.metrics.epsilon == 0.0
        assert decision.metrics.volume == 0.0
        assert decision.in_contact is False

    def test_sentinel_exclusivity(self, cube_registry, suite_dir, suite_manifest):
        # epsilon == -1 exactly when no contacts
        seq = load_sequence(suite_dir / suite_manifest["sequences"][0]["path"])
        registry = MeshRegistry()
        registry.register_file(seq.object_id, seq.mesh_path)
        for fr in seq.frames:
            d = evaluate_frame(
                FrameInput(seq.hand_shape, fr.hand_pose, seq.object_id, fr.object_pose),
                ContactParams(),
                registry,
            )
            assert (d.metrics.epsilon == -1.0) == (d.contact_count == 0)

    def test_grasp_frame_force_closure(self, suite_dir, suite_manifest):
        entry = suite_manifest["sequences"][0]
        seq = load_sequence(suite_dir / entry["path"])
        registry = MeshRegistry()
        registry.register_file(seq.object_id, seq.mesh_path)
        grasp = seq.frames[entry["grasp_frames"][1]]
        decision = evaluate_frame(
            FrameInput(seq.hand_shape, grasp.hand_pose, seq.object_id, grasp.object_pose),
            ContactParams(),
            registry,
        )
        assert decision.metrics.epsilon > 0.0
        assert decision.metrics.volume > 0.0
        assert decision.in_contact is True
        assert decision.contact_count >= 3

    def test_world_frame_invariance(self, suite_dir, suite_manifest):
        entry = suite_manifest["sequences"][0]
        seq = load_sequence(suite_dir / entry["path"])
        registry = MeshRegistry()
        registry.register_file(seq.object_id, seq.mesh_path)
        frame = seq.frames[entry["grasp_frames"][0]]
        base = evaluate_frame(
            FrameInput(seq.hand_shape, frame.hand_pose, seq.object_id, frame.object_pose),
            ContactParams(),
            registry,
        )
        world = Pose.from_axis_angle([0.3, -0.7, 0.2], [0.5, 1.0, -0.3])
        q_root = world.compose(Pose(_rotvec_to_quat(frame.hand_pose.theta[:3]), frame.hand_pose.wrist_translation))
        theta2 = frame.hand_pose.theta.copy()
        theta2[:3] = _quat_to_rotvec(q_root.rotation)
        moved = evaluate_frame(
            FrameInput(
                seq.hand_shape,
                HandPose(theta2, q_root.translation),
                seq.object_id,
                world.compose(frame.object_pose),
            ),
            ContactParams(),
            registry,
        )
        assert abs(base.metrics.epsilon - moved.metrics.epsilon) < 1e-6
        assert abs(base.metrics.volume - moved.metrics.volume) < 1e-6 * max(1.0, base.metrics.volume)
        assert base.in_contact == moved.in_contact

    def test_determinism(self, cube_registry):
        frame = FrameInput(
            HandShape(),
            HandPose.rest(),
            "cube",
            Pose(np.array([1.0, 0, 0, 0]), np.array([0.05, 0.04, 0.02])),
        )
        a = evaluate_frame(frame, ContactParams(), cube_registry)
        b = evaluate_frame(frame, ContactParams(), cube_registry)
        assert a.metrics.epsilon == b.metrics.epsilon
        assert a.metrics.volume == b.metrics.volume
        assert a.contact_count == b.contact_count


def _rotvec_to_quat(rotvec):
    from graspq.geometry import quat_from_axis_angle

    return quat_from_axis_angle(rotvec)


def _quat_to_rotvec(q):
    from graspq.synthetic import _rotvec_from_quat

    return _rotvec_from_quat(q)
