"""graspq: hand-object contact detection from grasp wrench-space metrics."""

__version__ = "0.1.0"

from ._kernels import backend_name
from .contacts import Contact, ContactParams, ContactSet, discretize_friction_cone, extract_contacts
from .detector import ContactDecision, FrameInput, MeshRegistry, decide, evaluate_frame
from .geometry import Pose, PosedMesh, TriangleMesh, build_accelerator, closest_point_on_mesh, load_mesh, save_mesh
from .hand import HandPose, HandShape, build_hand_proxies, forward_kinematics
from .wrench import (
    QualityMetrics,
    WrenchHull,
    brute_force_hull,
    convex_hull_6d,
    epsilon_metric,
    primitive_wrenches,
    volume_metric,
)

__all__ = [
    "backend_name",
    "Contact",
    "ContactParams",
    "ContactSet",
    "discretize_friction_cone",
    "extract_contacts",
    "ContactDecision",
    "FrameInput",
    "MeshRegistry",
    "decide",
    "evaluate_frame",
    "Pose",
    "PosedMesh",
    "TriangleMesh",
    "build_accelerator",
    "closest_point_on_mesh",
    "load_mesh",
    "save_mesh",
    "HandPose",
    "HandShape",
    "build_hand_proxies",
    "forward_kinematics",
    "QualityMetrics",
    "WrenchHull",
    "brute_force_hull",
    "convex_hull_6d",
    "epsilon_metric",
    "primitive_wrenches",
    "volume_metric",
    "__version__",
]
