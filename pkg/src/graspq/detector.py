"""Per-frame contact decision pipeline.

Poses the hand and the object, extracts contacts, builds the grasp wrench
space and applies the detection rule: contact is declared when either
quality metric exceeds its threshold (both default to zero). A frame with
no contacts reports the sentinel metrics (-1.0, 0.0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contacts import Contact, ContactParams, ContactSet, extract_contacts
from .errors import ConfigurationError
from .geometry import Pose, PosedMesh, ProximityAccelerator, TriangleMesh, build_accelerator, load_mesh
from .hand import HandPose, HandShape, build_hand_proxies, forward_kinematics
from .wrench import QualityMetrics, convex_hull_6d, primitive_wrenches


@dataclass(frozen=True)
class RegisteredMesh:
    """Mesh plus the per-object precomputations reused across frames."""

    mesh: TriangleMesh
    accel: ProximityAccelerator
    center_of_mass: np.ndarray  # area-weighted surface centroid
    max_radius: float  # farthest vertex from the center of mass

    @staticmethod
    def build(mesh: TriangleMesh) -> "RegisteredMesh":
        com = mesh.surface_centroid()
        return RegisteredMesh(
            mesh=mesh,
            accel=build_accelerator(mesh),
            center_of_mass=com,
            max_radius=mesh.max_radius_about(com),
        )


class MeshRegistry:
    """Immutable-after-startup lookup of object meshes by id."""

    def __init__(self):
        self._meshes: dict = {}

    def register(self, object_id: str, mesh: TriangleMesh) -> RegisteredMesh:
        entry = RegisteredMesh.build(mesh)
        self._meshes[object_id] = entry
        return entry

    def register_file(self, object_id: str, path, scale: float = 1.0) -> RegisteredMesh:
        return self.register(object_id, load_mesh(path, scale=scale))

    def get(self, object_id: str) -> RegisteredMesh:
        try:
            return self._meshes[object_id]
        except KeyError:
            raise ConfigurationError(f"unknown mesh id {object_id!r}") from None

    def __contains__(self, object_id: str) -> bool:
        return object_id in self._meshes

    def ids(self):
        return sorted(self._meshes)


@dataclass(frozen=True)
class FrameInput:
    hand_shape: HandShape
    hand_pose: HandPose
    object_mesh_id: str
    object_pose: Pose


@dataclass(frozen=True)
class ContactDecision:
    metrics: QualityMetrics
    in_contact: bool
    contact_count: int


def decide(metrics: QualityMetrics, tau_epsilon: float = 0.0, tau_volume: float = 0.0) -> bool:
    """Detection rule: either quality measure above its threshold."""
    return metrics.epsilon > tau_epsilon or metrics.volume > tau_volume


def evaluate_frame(
    frame: FrameInput,
    params: ContactParams,
    registry: MeshRegistry,
    torque_scale: float | None = None,
    tau_epsilon: float = 0.0,
    tau_volume: float = 0.0,
    skeleton=None,
) -> ContactDecision:
    """Full pipeline for one frame.

    `torque_scale` overrides the default lambda = 1 / max_radius. The
    returned decision carries the metrics, so callers can re-threshold
    without re-evaluating.
    """
    entry = registry.get(frame.object_mesh_id)
    landmarks = forward_kinematics(frame.hand_shape, frame.hand_pose, skeleton)
    proxies = build_hand_proxies(landmarks, frame.hand_shape)
    posed = PosedMesh(entry.mesh, entry.accel, frame.object_pose)
    contacts = extract_contacts(proxies, posed, params)
    contacts = ContactSet(contacts.contacts, frame.object_mesh_id)
    if len(contacts) == 0:
        metrics = QualityMetrics.no_contact()
        return ContactDecision(metrics, False, 0)
    lam = torque_scale if torque_scale is not None else 1.0 / entry.max_radius
    # the wrench space is built in the object's local frame so the friction
    # cone discretization is rigidly attached to the object; epsilon and
    # volume are isometry invariants, making the result world-frame
    # independent
    inv = frame.object_pose.inverse()
    local = ContactSet(
        [
            Contact(inv.apply(c.point), inv.rotate(c.normal), c.depth, c.source)
            for c in contacts
        ],
        frame.object_mesh_id,
    )
    wrenches = primitive_wrenches(local, params, entry.center_of_mass, lam)
    hull = convex_hull_6d(wrenches)
    metrics = QualityMetrics.from_hull(hull, len(contacts))
    return ContactDecision(
        metrics, decide(metrics, tau_epsilon, tau_volume), len(contacts)
    )
