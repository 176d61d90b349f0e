"""Hand-object contact extraction and friction-cone discretization.

Each hand capsule contributes at most one contact: the mesh feature
nearest to the capsule axis (coarse axis sampling refined by a
golden-section search). Contacts within the deduplication radius are
merged keeping the deepest one. Penetrating contacts (negative depth) are
kept; mocap pose noise routinely causes interpenetration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .geometry import PosedMesh

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
AXIS_SAMPLES = 9
REFINE_ITERATIONS = 20


@dataclass(frozen=True)
class ContactParams:
    tolerance: float = 0.003  # max surface separation still counted (m)
    dedup_radius: float = 0.008
    mu: float = 0.8
    cone_edges: int = 8

    def __post_init__(self):
        if self.tolerance <= 0:
            raise InvalidInputError("tolerance must be positive")
        if self.dedup_radius < 0:
            raise InvalidInputError("dedup_radius must be non-negative")
        if self.mu < 0:
            raise InvalidInputError("friction coefficient must be non-negative")
        if self.cone_edges < 3:
            raise InvalidInputError("cone discretization needs at least 3 edges")


@dataclass(frozen=True)
class Contact:
    point: np.ndarray  # on the object surface, world frame
    normal: np.ndarray  # object outward unit normal
    depth: float  # separation if >= 0, penetration if < 0
    source: str  # proxy capsule label


@dataclass(frozen=True)
class ContactSet:
    contacts: list
    object_id: str = ""

    def __len__(self) -> int:
        return len(self.contacts)

    def __iter__(self):
        return iter(self.contacts)

    def points(self) -> np.ndarray:
        if not self.contacts:
            return np.zeros((0, 3))
        return np.array([c.point for c in self.contacts])


def tangent_basis(normal):
    """Deterministic orthonormal (t1, t2) spanning the plane normal to n.

    Pivots on the smallest-magnitude component of n so the basis is
    reproducible and never degenerate.
    """
    n = np.asarray(normal, dtype=float)
    k = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[k] = 1.0
    t1 = e - n[k] * n
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return t1, t2


def discretize_friction_cone(normal, mu: float, m: int) -> np.ndarray:
    """m unit force directions on the boundary of a Coulomb cone about n.

    Every edge satisfies edge . n = 1/sqrt(1 + mu^2); mu = 0 collapses the
    cone to the normal itself.
    """
    n = np.asarray(normal, dtype=float)
    norm = np.linalg.norm(n)
    if norm < 1e-12:
        raise InvalidInputError("cone axis must be a nonzero vector")
    if m < 3:
        raise InvalidInputError("cone discretization needs at least 3 edges")
    n = n / norm
    t1, t2 = tangent_basis(n)
    angles = 2.0 * np.pi * np.arange(m) / m
    edges = n[None, :] + mu * (
        np.cos(angles)[:, None] * t1[None, :] + np.sin(angles)[:, None] * t2[None, :]
    )
    return edges / math.sqrt(1.0 + mu * mu)


@dataclass
class _CapsuleQuery:
    """Running best-distance state for one capsule's axis search."""

    axis_a: np.ndarray
    axis_dir: np.ndarray
    radius: float
    label: str
    best_dist: float = math.inf
    best_point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    best_tri: int = -1

    def point_at(self, t: float) -> np.ndarray:
        return self.axis_a + t * self.axis_dir

    def update(self, dist: float, point: np.ndarray, tri: int) -> None:
        if dist < self.best_dist:
            self.best_dist = dist
            self.best_point = point
            self.best_tri = tri


def _batch_eval(states, ts, posed: PosedMesh):
    queries = np.array([s.point_at(t) for s, t in zip(states, ts)])
    pts, dists, tris = posed.closest_points(queries)
    for s, d, p, tri in zip(states, dists, pts, tris):
        s.update(float(d), p, int(tri))
    return dists


def _best_per_capsule(proxies, posed: PosedMesh) -> list:
    """Minimum axis-to-mesh distance state for every capsule."""
    states = [
        _CapsuleQuery(np.asarray(c.a, dtype=float), np.asarray(c.b, dtype=float) - c.a, c.radius, c.label)
        for c in proxies
    ]

    # coarse axis sampling
    sample_ts = np.linspace(0.0, 1.0, AXIS_SAMPLES)
    sample_d = np.empty((len(states), AXIS_SAMPLES))
    for j, t in enumerate(sample_ts):
        sample_d[:, j] = _batch_eval(states, [t] * len(states), posed)

    # golden-section refinement around the best sample
    best_j = sample_d.argmin(axis=1)
    step = 1.0 / (AXIS_SAMPLES - 1)
    lo = np.clip(sample_ts[best_j] - step, 0.0, 1.0)
    hi = np.clip(sample_ts[best_j] + step, 0.0, 1.0)
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1 = np.asarray(_batch_eval(states, x1, posed), dtype=float).copy()
    f2 = np.asarray(_batch_eval(states, x2, posed), dtype=float).copy()
    for _ in range(REFINE_ITERATIONS):
        shrink_hi = f1 < f2
        hi = np.where(shrink_hi, x2, hi)
        lo = np.where(shrink_hi, lo, x1)
        x1_new = np.where(shrink_hi, hi - _INVPHI * (hi - lo), x2)
        x2_new = np.where(shrink_hi, x1, lo + _INVPHI * (hi - lo))
        evals = np.where(shrink_hi, x1_new, x2_new)
        fe = np.asarray(_batch_eval(states, evals, posed), dtype=float)
        f1, f2 = np.where(shrink_hi, fe, f2), np.where(shrink_hi, f1, fe)
        x1, x2 = x1_new, x2_new
    return states


def capsule_gaps(proxies, posed: PosedMesh) -> np.ndarray:
    """Surface separation per capsule (negative = penetration), in proxy order."""
    if not proxies:
        return np.zeros(0)
    states = _best_per_capsule(proxies, posed)
    return np.array([s.best_dist - s.radius for s in states])


def extract_contacts(proxies, posed: PosedMesh, params: ContactParams) -> ContactSet:
    """Contacts between hand capsules and a posed object mesh.

    Emits a contact for a capsule when its surface is within
    params.tolerance of the mesh; merge order and therefore the result is
    deterministic in capsule label order.
    """
    if not proxies:
        return ContactSet([], "")
    states = _best_per_capsule(proxies, posed)

    candidates = []
    for s in states:
        depth = s.best_dist - s.radius
        if depth <= params.tolerance:
            candidates.append(
                Contact(
                    point=s.best_point,
                    normal=posed.world_normal(s.best_tri),
                    depth=float(depth),
                    source=s.label,
                )
            )

    # dedup: deepest contact wins, ties resolved by capsule order
    order = {s.label: i for i, s in enumerate(states)}
    candidates.sort(key=lambda c: (c.depth, order[c.source]))
    kept = []
    for cand in candidates:
        if all(
            np.linalg.norm(cand.point - k.point) >= params.dedup_radius for k in kept
        ):
            kept.append(cand)
    kept.sort(key=lambda c: order[c.source])
    return ContactSet(kept, "")
