"""Rigid-body math, triangle meshes and accelerated proximity queries.

Conventions: units are meters, quaternions are (w, x, y, z), triangle
winding is counter-clockwise seen from outside (standard OBJ), and all
structures are immutable after construction so concurrent reads are safe.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidInputError, ParseError

DEGENERATE_AREA = 1e-12  # triangles below this area are dropped at load


# ---------------------------------------------------------------------------
# quaternions


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-8:
        raise InvalidInputError("quaternion has (near) zero norm")
    return q / n


def quat_multiply(q1, q2):
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_axis_angle(rotvec):
    """Quaternion for a rotation vector (axis * angle, radians)."""
    rotvec = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(rotvec)
    if angle < 1e-12:
        return np.array([1.0, 0.5 * rotvec[0], 0.5 * rotvec[1], 0.5 * rotvec[2]])
    axis = rotvec / angle
    half = 0.5 * angle
    s = np.sin(half)
    return np.array([np.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def rotation_matrix_from_axis_angle(rotvec):
    """Rodrigues rotation matrix for a rotation vector."""
    rotvec = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(rotvec)
    if angle < 1e-8:
        # first-order form is exact to ~angle^2
        rx, ry, rz = rotvec
        return np.array([[1.0, -rz, ry], [rz, 1.0, -rx], [-ry, rx, 1.0]])
    axis = rotvec / angle
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


@dataclass(frozen=True)
class Pose:
    """Rigid placement: rotation (unit quaternion, wxyz) + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = quat_normalize(self.rotation)
        t = np.asarray(self.translation, dtype=float)
        if t.shape != (3,):
            raise InvalidInputError("translation must be a 3-vector")
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @staticmethod
    def from_axis_angle(rotvec, translation) -> "Pose":
        return Pose(quat_from_axis_angle(rotvec), translation)

    @property
    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def apply(self, points):
        """R @ p + t for one point or an (n, 3) array of points."""
        points = np.asarray(points, dtype=float)
        return points @ self.matrix.T + self.translation

    def rotate(self, vectors):
        vectors = np.asarray(vectors, dtype=float)
        return vectors @ self.matrix.T

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply `other` first, then `self`."""
        return Pose(
            quat_multiply(self.rotation, other.rotation),
            self.apply(other.translation),
        )

    def inverse(self) -> "Pose":
        qinv = self.rotation * np.array([1.0, -1.0, -1.0, -1.0])
        return Pose(qinv, -(quat_to_matrix(qinv) @ self.translation))


def apply_pose(pose: Pose, point):
    return pose.apply(point)


# ---------------------------------------------------------------------------
# triangle meshes


def _triangle_data(vertices, triangles):
    tri_verts = vertices[triangles]  # (T, 3, 3)
    cross = np.cross(
        tri_verts[:, 1] - tri_verts[:, 0], tri_verts[:, 2] - tri_verts[:, 0]
    )
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    return tri_verts, cross, areas


@dataclass(frozen=True)
class TriangleMesh:
    """Immutable triangle soup with derived outward normals."""

    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int32
    normals: np.ndarray = field(init=False)
    tri_vertices: np.ndarray = field(init=False)
    areas: np.ndarray = field(init=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int32))
        if v.ndim != 2 or v.shape[1] != 3:
            raise InvalidInputError("vertices must be (V, 3)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise InvalidInputError("triangles must be (T, 3)")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise InvalidInputError("triangle index out of range")
        tri_verts, cross, areas = _triangle_data(v, t)
        if np.any(areas <= DEGENERATE_AREA):
            raise InvalidInputError(
                "degenerate triangle present; filter before constructing"
            )
        norms = cross / (2.0 * areas)[:, None] if len(t) else cross.reshape(0, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "normals", np.ascontiguousarray(norms))
        object.__setattr__(self, "tri_vertices", np.ascontiguousarray(tri_verts))
        object.__setattr__(self, "areas", areas)

    def __len__(self) -> int:
        return len(self.triangles)

    def transformed(self, pose: Pose) -> "TriangleMesh":
        return TriangleMesh(pose.apply(self.vertices), self.triangles)

    def surface_centroid(self) -> np.ndarray:
        """Area-weighted centroid of the surface (uniform shell density)."""
        centers = self.tri_vertices.mean(axis=1)
        return np.average(centers, axis=0, weights=self.areas)

    def max_radius_about(self, center) -> float:
        return float(np.linalg.norm(self.vertices - np.asarray(center), axis=1).max())


def load_mesh(path, scale: float = 1.0) -> TriangleMesh:
    """Load an ASCII OBJ file (v/f records, quads fan-triangulated).

    `scale` multiplies vertex coordinates at ingestion, e.g. 0.001 for
    millimeter assets. Degenerate faces are dropped with a warning.
    """
    vertices = []
    faces = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise IOError(f"cannot open mesh file {path!r}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ParseError("vertex needs 3 coordinates", f"{path}:{lineno}")
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError as exc:
                    raise ParseError(str(exc), f"{path}:{lineno}") from exc
            elif tag == "f":
                if len(parts) < 4:
                    raise ParseError("face needs at least 3 indices", f"{path}:{lineno}")
                idx = []
                for token in parts[1:]:
                    head = token.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise ParseError(
                            f"bad face index {token!r}", f"{path}:{lineno}"
                        ) from exc
                    if i < 1:
                        raise ParseError(
                            f"face index must be 1-based, got {i}", f"{path}:{lineno}"
                        )
                    idx.append(i - 1)
                for k in range(1, len(idx) - 1):  # fan triangulation
                    faces.append((idx[0], idx[k], idx[k + 1]))
            # vn / vt / usemtl / o / g / s records are ignored
    if not vertices:
        raise ParseError("no vertices found", path)
    v = np.asarray(vertices, dtype=np.float64) * float(scale)
    t = np.asarray(faces, dtype=np.int32).reshape(-1, 3)
    if t.size and t.max() >= len(v):
        raise ParseError("face references missing vertex", path)
    _, _, areas = _triangle_data(v, t)
    keep = areas > DEGENERATE_AREA
    dropped = int((~keep).sum())
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} degenerate face(s)", stacklevel=2)
        t = t[keep]
    return TriangleMesh(v, t)


def save_mesh(mesh: TriangleMesh, path) -> None:
    """Write an ASCII OBJ file (inverse of load_mesh for v/f data)."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write("v %.17g %.17g %.17g\n" % (v[0], v[1], v[2]))
        for t in mesh.triangles:
            fh.write("f %d %d %d\n" % (t[0] + 1, t[1] + 1, t[2] + 1))


# ---------------------------------------------------------------------------
# bounding-volume hierarchy


@dataclass(frozen=True)
class ProximityAccelerator:
    """Axis-aligned BVH over mesh triangles, stored as flat arrays.

    Internal nodes have left/right >= 0; leaves have left = right = -1 and
    reference `count` triangles starting at `start` in `order` (a
    permutation of the original triangle indices).
    """

    bb_min: np.ndarray
    bb_max: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    leaf_size: int


def build_accelerator(mesh: TriangleMesh, leaf_size: int = 8) -> ProximityAccelerator:
    if len(mesh) == 0:
        raise InvalidInputError("cannot build accelerator over an empty mesh")
    tri_verts = mesh.tri_vertices
    tri_min = tri_verts.min(axis=1)
    tri_max = tri_verts.max(axis=1)
    centers = 0.5 * (tri_min + tri_max)

    bb_min, bb_max, left, right, start, count = [], [], [], [], [], []
    order = []

    def add_node(idx):
        node = len(bb_min)
        bb_min.append(tri_min[idx].min(axis=0))
        bb_max.append(tri_max[idx].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(-1)
        count.append(0)
        return node

    # iterative median-split build; stack holds (node, triangle index array)
    root_idx = np.arange(len(mesh))
    stack = [(add_node(root_idx), root_idx)]
    while stack:
        node, idx = stack.pop()
        if len(idx) <= leaf_size:
            start[node] = len(order)
            count[node] = len(idx)
            order.extend(idx.tolist())
            continue
        extent = tri_max[idx].max(axis=0) - tri_min[idx].min(axis=0)
        axis = int(np.argmax(extent))
        sorted_idx = idx[np.argsort(centers[idx, axis], kind="stable")]
        half = len(sorted_idx) // 2
        left_idx, right_idx = sorted_idx[:half], sorted_idx[half:]
        left[node] = add_node(left_idx)
        right[node] = add_node(right_idx)
        stack.append((right[node], right_idx))
        stack.append((left[node], left_idx))

    return ProximityAccelerator(
        bb_min=np.ascontiguousarray(np.asarray(bb_min, dtype=np.float64)),
        bb_max=np.ascontiguousarray(np.asarray(bb_max, dtype=np.float64)),
        left=np.ascontiguousarray(np.asarray(left, dtype=np.int32)),
        right=np.ascontiguousarray(np.asarray(right, dtype=np.int32)),
        start=np.ascontiguousarray(np.asarray(start, dtype=np.int32)),
        count=np.ascontiguousarray(np.asarray(count, dtype=np.int32)),
        order=np.ascontiguousarray(np.asarray(order, dtype=np.int32)),
        leaf_size=leaf_size,
    )


def closest_points_on_mesh(queries, mesh: TriangleMesh, accel: ProximityAccelerator):
    """Closest surface points for a batch of queries.

    Returns (points (Q,3), distances (Q,), triangle indices (Q,)).
    Equidistant triangles are broken toward the lowest triangle index and
    the reported normal is that triangle's face normal.
    """
    if len(mesh) == 0:
        raise InvalidInputError("empty mesh")
    queries = np.ascontiguousarray(np.atleast_2d(np.asarray(queries, dtype=np.float64)))
    return _kernels.bvh_closest_points(
        mesh.tri_vertices,
        accel.bb_min,
        accel.bb_max,
        accel.left,
        accel.right,
        accel.start,
        accel.count,
        accel.order,
        queries,
    )


def closest_point_on_mesh(query, mesh: TriangleMesh, accel: ProximityAccelerator):
    """Single-query convenience wrapper: (point, distance, normal)."""
    pts, dists, tris = closest_points_on_mesh(np.asarray(query, dtype=float), mesh, accel)
    tri = int(tris[0])
    return pts[0], float(dists[0]), mesh.normals[tri]


def brute_force_closest_points(queries, mesh: TriangleMesh):
    """Exhaustive per-triangle search; test oracle for the BVH path."""
    if len(mesh) == 0:
        raise InvalidInputError("empty mesh")
    queries = np.ascontiguousarray(np.atleast_2d(np.asarray(queries, dtype=np.float64)))
    return _kernels.brute_closest_points(mesh.tri_vertices, queries)


@dataclass(frozen=True)
class PosedMesh:
    """A mesh placed in the world by a rigid pose.

    Proximity queries transform into the mesh's local frame so the
    accelerator built once per object is reused for every frame.
    """

    mesh: TriangleMesh
    accel: ProximityAccelerator
    pose: Pose

    def closest_points(self, world_queries):
        local = self.pose.inverse().apply(world_queries)
        pts, dists, tris = closest_points_on_mesh(local, self.mesh, self.accel)
        return self.pose.apply(pts), dists, tris

    def world_normal(self, tri_index: int):
        return self.pose.rotate(self.mesh.normals[tri_index])
