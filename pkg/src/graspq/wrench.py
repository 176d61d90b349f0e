"""Grasp wrench space construction and quality metrics.

Primitive wrenches stack one row per friction-cone edge per contact:
w = (f, lam * (p - c) x f) with unit force f, contact point p, torque
center c and torque scale lam (1/meters). The two quality numbers are

  epsilon: radius of the largest origin-centered ball inside the convex
           hull of the wrenches (worst-case resistible disturbance), and
  volume:  the 6-D hull volume (average-case quality).

A frame without contacts reports the sentinel pair (-1.0, 0.0).

The hull is an incremental beneath-beyond construction with a
farthest-point initial simplex. Near-degenerate insertions (a point
within 1e-10 of a facet plane) are resolved by joggling a working copy of
that point; reported planes and volumes are always recomputed from the
original coordinates.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .contacts import ContactParams, ContactSet, discretize_friction_cone
from . import _kernels
from ._kernels import fit_planes_batch, orient_away
from .errors import InvalidInputError, NumericalError, ParseError

DIM = 6
JOGGLE_EPS = 1e-10  # on-plane tolerance that triggers (and sizes) the joggle
RANK_RTOL = 1e-9  # singular-value ratio below which points are not full-dim
BRUTE_MAX_POINTS = 25

SENTINEL_EPSILON = -1.0
SENTINEL_VOLUME = 0.0


# ---------------------------------------------------------------------------
# wrench construction


def primitive_wrenches(
    contacts: ContactSet, params: ContactParams, torque_center, lam: float
) -> np.ndarray:
    """(n_contacts * cone_edges, 6) primitive wrench rows.

    Forces push into the object, i.e. each cone is built about the negated
    outward surface normal.
    """
    if lam <= 0:
        raise InvalidInputError("torque scale lambda must be positive")
    center = np.asarray(torque_center, dtype=float)
    rows = []
    for contact in contacts:
        edges = discretize_friction_cone(-contact.normal, params.mu, params.cone_edges)
        arm = contact.point - center
        torques = lam * np.cross(np.broadcast_to(arm, edges.shape), edges)
        rows.append(np.hstack([edges, torques]))
    if not rows:
        return np.zeros((0, DIM))
    return np.vstack(rows)


# ---------------------------------------------------------------------------
# hull result type


@dataclass(frozen=True)
class WrenchHull:
    points: np.ndarray  # input wrenches (n, 6)
    normals: np.ndarray  # outward unit facet normals (F, 6)
    offsets: np.ndarray  # facet plane offsets, n . x <= b inside (F,)
    facet_vertices: np.ndarray  # (F, 6) input point indices per facet
    volume: float
    full_dimensional: bool
    interior_point: np.ndarray = field(default_factory=lambda: np.zeros(DIM))

    @property
    def facet_count(self) -> int:
        return len(self.offsets)

    def contains(self, x, tol: float = 1e-9) -> bool:
        if not self.full_dimensional:
            return False
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.normals @ x - self.offsets <= tol))


def _degenerate_hull(points: np.ndarray) -> WrenchHull:
    interior = points.mean(axis=0) if len(points) else np.zeros(DIM)
    return WrenchHull(
        points=points,
        normals=np.zeros((0, DIM)),
        offsets=np.zeros(0),
        facet_vertices=np.zeros((0, DIM), dtype=np.int32),
        volume=0.0,
        full_dimensional=False,
        interior_point=interior,
    )


def epsilon_metric(hull: WrenchHull) -> float:
    """Largest origin-centered ball radius, 0 unless the origin is strictly
    inside a full-dimensional hull."""
    if not hull.full_dimensional or hull.facet_count == 0:
        return 0.0
    return max(float(hull.offsets.min()), 0.0)


def volume_metric(hull: WrenchHull) -> float:
    return float(hull.volume)


@dataclass(frozen=True)
class QualityMetrics:
    epsilon: float
    volume: float
    contact_count: int

    @staticmethod
    def no_contact() -> "QualityMetrics":
        return QualityMetrics(SENTINEL_EPSILON, SENTINEL_VOLUME, 0)

    @staticmethod
    def from_hull(hull: WrenchHull, contact_count: int) -> "QualityMetrics":
        return QualityMetrics(epsilon_metric(hull), volume_metric(hull), contact_count)


# ---------------------------------------------------------------------------
# incremental hull


def _initial_simplex(w: np.ndarray) -> list:
    """Seven affinely independent point indices, grown farthest-first."""
    verts = [int(np.argmin(w[:, 0]))]
    basis = np.zeros((0, DIM))
    p0 = w[verts[0]]
    for _ in range(DIM):
        rel = w - p0
        if len(basis):
            rel = rel - (rel @ basis.T) @ basis
        dist = np.linalg.norm(rel, axis=1)
        dist[verts] = -1.0
        j = int(np.argmax(dist))
        if dist[j] <= 1e-12:
            return []
        verts.append(j)
        basis = np.vstack([basis, rel[j] / np.linalg.norm(rel[j])])
    return verts


def _splitmix64(seed: int) -> np.ndarray:
    """Six deterministic uniforms in [-1, 1) from an integer seed."""
    z = np.uint64(seed) + np.uint64(0x9E3779B97F4A7C15) * np.arange(1, DIM + 1, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) / 2.0**52 - 1.0


def convex_hull_6d(points) -> WrenchHull:
    """Facets, volume and interior of the convex hull of 6-D points.

    Inputs whose affine rank is below 6 yield a degenerate hull (volume 0,
    no facets). Results are deterministic for identical inputs. The
    insertion loop runs on the selected kernel backend; facet planes are
    reported on the original (un-joggled) coordinates. Inputs so
    degenerate that per-point joggling stalls are retried with a global
    joggle of the working copy.
    """
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    if x.size and x.shape[1] != DIM:
        raise InvalidInputError("points must be 6-dimensional")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("points must be finite")
    n = len(x)
    if n < DIM + 1:
        return _degenerate_hull(x)
    centered = x - x.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[DIM - 1] <= RANK_RTOL * sv[0]:
        return _degenerate_hull(x)

    scale = max(1.0, float(np.abs(x).max()))
    for global_retry in range(5):
        w = x.copy()
        joggled_points: list = []
        if global_retry:
            magnitude = 1e-8 * scale * 10.0 ** (global_retry - 1)
            for i in range(n):
                w[i] += _splitmix64(7_777_777 * global_retry + i) * magnitude
            joggled_points.extend(range(n))
        try:
            return _build_hull(x, w, scale, joggled_points)
        except (ArithmeticError, NumericalError):
            if global_retry == 4:
                raise NumericalError(
                    "hull construction failed after global joggle retries"
                )
    raise NumericalError("unreachable")


def _build_hull(x: np.ndarray, w: np.ndarray, scale: float, joggled_points: list) -> WrenchHull:
    n = len(x)
    tol = 1e-9 * scale

    simplex = _initial_simplex(w)
    if not simplex:
        return _degenerate_hull(x)
    simplex_arr = np.asarray(simplex, dtype=np.int32)
    c_init = np.ascontiguousarray(w[simplex_arr].mean(axis=0))

    cap = max(4096, 192 * n)
    verts = np.zeros((cap, DIM), dtype=np.int32)
    normals = np.zeros((cap, DIM))
    offsets = np.zeros(cap)
    neighbors = np.full((cap, DIM), -1, dtype=np.int32)
    alive = np.zeros(cap, dtype=np.uint8)

    init_rows = np.sort(
        np.array([[v for v in simplex if v != drop] for drop in simplex], dtype=np.int32),
        axis=1,
    )
    f_n, f_b, ok = fit_planes_batch(w[init_rows], tol)
    if not np.all(ok):
        return _degenerate_hull(x)
    f_n, f_b = orient_away(f_n, f_b, c_init)
    n_facets = DIM + 1
    verts[:n_facets] = init_rows
    normals[:n_facets] = f_n
    offsets[:n_facets] = f_b
    alive[:n_facets] = 1
    # facet i drops simplex[i]; across the ridge missing simplex[j] lies facet j
    for i in range(n_facets):
        for j in range(n_facets):
            if i != j:
                slot = int(np.searchsorted(init_rows[i], simplex_arr[j]))
                neighbors[i, slot] = j

    point_facet = np.full(n, -1, dtype=np.int32)
    point_dist = np.zeros(n)
    rest = np.setdiff1d(np.arange(n), simplex_arr)
    if len(rest):
        d0 = w[rest] @ normals[:n_facets].T - offsets[:n_facets]
        best = d0.argmax(axis=1)
        best_d = d0[np.arange(len(rest)), best]
        outside = best_d > JOGGLE_EPS
        point_facet[rest] = np.where(outside, best.astype(np.int32), -1)
        point_dist[rest] = np.where(outside, best_d, 0.0)

    while True:
        status, n_facets = _kernels.hull_build(
            w, x, verts, normals, offsets, neighbors, alive, n_facets,
            point_facet, point_dist, c_init, tol, joggled_points,
        )
        if status == 0:
            break
        # facet store full: double every array and resume
        cap *= 2
        verts = _grown(verts, cap)
        normals = _grown(normals, cap)
        offsets = _grown(offsets, cap)
        neighbors = _grown(neighbors, cap, fill=-1)
        alive = _grown(alive, cap)

    # report facets; recompute planes on the original coordinates for each
    # facet that touches a joggled point
    alive_ids = np.flatnonzero(alive[:n_facets])
    vert_rows = verts[alive_ids]
    interior = x.mean(axis=0)
    facet_pts = x[vert_rows]
    r_normals = normals[alive_ids].copy()
    r_offsets = offsets[alive_ids].copy()
    if joggled_points:
        touched = np.flatnonzero(
            np.isin(vert_rows, np.unique(joggled_points)).any(axis=1)
        )
        if len(touched):
            fit_tol = max(tol, 1e-7 * scale)
            new_n = np.ascontiguousarray(r_normals[touched])
            new_b = np.ascontiguousarray(r_offsets[touched])
            flags = _kernels.refit_planes6(
                np.ascontiguousarray(facet_pts[touched]), new_n, new_b, interior, fit_tol
            )
            if flags.any():
                # direct solve failed (plane through the origin or worse):
                # retry with the SVD-capable fit
                bad = np.flatnonzero(flags)
                f_n, f_b, ok = fit_planes_batch(facet_pts[touched][bad], fit_tol)
                f_n, f_b = orient_away(f_n, f_b, interior)
                new_n[bad[ok]] = f_n[ok]
                new_b[bad[ok]] = f_b[ok]
            # a nearly degenerate facet admits many planes within the fit
            # residual; accept a refit only if it still supports the whole
            # point set, otherwise keep the working-coordinate plane (which
            # differs by at most the joggle magnitude)
            viol = (new_n @ x.T - new_b[:, None]).max(axis=1)
            good = viol <= 10.0 * tol
            r_normals[touched[good]] = new_n[good]
            r_offsets[touched[good]] = new_b[good]
        # joggle drift can leave residual working planes slightly off the
        # original points: snap every offset to the exact support value,
        # which leaves true facet planes untouched and restores exact
        # containment
        supports = (r_normals @ x.T).max(axis=1)
        r_offsets = np.maximum(r_offsets, supports)
    r_normals, r_offsets = orient_away(r_normals, r_offsets, interior)
    volume = float(_kernels.det6_abs_sum(facet_pts - interior) / math.factorial(DIM))
    return WrenchHull(
        points=x,
        normals=r_normals,
        offsets=r_offsets,
        facet_vertices=vert_rows.copy(),
        volume=volume,
        full_dimensional=True,
        interior_point=interior,
    )


def _grown(arr: np.ndarray, cap: int, fill=0) -> np.ndarray:
    fresh = np.full((cap,) + arr.shape[1:], fill, dtype=arr.dtype)
    fresh[: len(arr)] = arr
    return fresh


# ---------------------------------------------------------------------------
# brute-force oracle


def _simplex_facet_volume(pts: np.ndarray) -> float:
    """(d-1)-volume of a simplex of d points embedded in R^d."""
    edges = pts[1:] - pts[0]
    gram = edges @ edges.T
    det = float(np.linalg.det(gram))
    return math.sqrt(max(det, 0.0)) / math.factorial(len(pts) - 1)


def _brute(points: np.ndarray, d: int):
    """Recursive hull by supporting-hyperplane enumeration.

    Returns (normals, offsets, vertex frozensets, volume) for points of
    full affine rank d; the recursion handles facets with more than d
    coplanar vertices.
    """
    n = len(points)
    if d == 1:
        lo, hi = float(points.min()), float(points.max())
        return (
            np.array([[1.0], [-1.0]]),
            np.array([hi, -lo]),
            [frozenset([int(points.argmax())]), frozenset([int(points.argmin())])],
            hi - lo,
        )
    scale = max(1.0, float(np.abs(points).max()))
    tol = 1e-9 * scale
    combos = np.array(list(itertools.combinations(range(n), d)), dtype=int)
    normals = np.empty((len(combos), d))
    offsets = np.empty(len(combos))
    valid = np.empty(len(combos), dtype=bool)
    chunk = 65536
    for s in range(0, len(combos), chunk):
        sub = points[combos[s : s + chunk]]
        normals[s : s + chunk], offsets[s : s + chunk], valid[s : s + chunk] = (
            fit_planes_batch(sub, tol)
        )

    dists = points @ normals.T - offsets  # (n, S)
    support_pos = valid & (dists.max(axis=0) <= tol)
    support_neg = valid & (dists.min(axis=0) >= -tol)

    seen = {}
    order = []
    for s in np.flatnonzero(support_pos | support_neg):
        flip = not support_pos[s]
        n_s = -normals[s] if flip else normals[s]
        b_s = -offsets[s] if flip else offsets[s]
        on_plane = frozenset(np.flatnonzero(np.abs(dists[:, s]) <= tol).tolist())
        if on_plane not in seen:
            seen[on_plane] = (n_s, b_s)
            order.append(on_plane)

    centroid = points.mean(axis=0)
    volume = 0.0
    out_n, out_b, out_v = [], [], []
    for vset in order:
        n_s, b_s = seen[vset]
        out_n.append(n_s)
        out_b.append(b_s)
        out_v.append(vset)
        height = b_s - float(n_s @ centroid)
        members = points[sorted(vset)]
        if len(vset) == d:
            area = _simplex_facet_volume(members)
        else:
            center = members.mean(axis=0)
            _, _, vt = np.linalg.svd(members - center)
            coords = (members - center) @ vt[: d - 1].T
            _, _, _, area = _brute(coords, d - 1)
        volume += height * area / d
    return np.array(out_n), np.array(out_b), out_v, volume


def brute_force_hull(points) -> WrenchHull:
    """Subset-enumeration hull; independent oracle for convex_hull_6d.

    Cost grows as C(n, 6): inputs are capped at 25 points.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if len(x) > BRUTE_MAX_POINTS:
        raise InvalidInputError(f"brute-force hull capped at {BRUTE_MAX_POINTS} points")
    if x.size and x.shape[1] != DIM:
        raise InvalidInputError("points must be 6-dimensional")
    if len(x) < DIM + 1:
        return _degenerate_hull(x)
    centered = x - x.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[DIM - 1] <= RANK_RTOL * sv[0]:
        return _degenerate_hull(x)
    normals, offsets, vsets, volume = _brute(x, DIM)
    width = max(len(v) for v in vsets)
    vert_rows = np.full((len(vsets), width), -1, dtype=np.int32)
    for i, v in enumerate(vsets):
        vert_rows[i, : len(v)] = sorted(v)
    return WrenchHull(
        points=x,
        normals=normals,
        offsets=offsets,
        facet_vertices=vert_rows,
        volume=float(volume),
        full_dimensional=True,
        interior_point=x.mean(axis=0),
    )


# ---------------------------------------------------------------------------
# debug wrench files

WRENCH_HEADER = ("fx", "fy", "fz", "tx", "ty", "tz")


def write_wrenches(path, wrenches: np.ndarray) -> None:
    wrenches = np.atleast_2d(np.asarray(wrenches, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(WRENCH_HEADER)
        for row in wrenches:
            writer.writerow(["%.17g" % v for v in row])


def read_wrenches(path) -> np.ndarray:
    rows = []
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise IOError(f"cannot open wrench file {path!r}: {exc}") from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if lineno == 1 and row[0].strip().lower() in ("fx", "#fx"):
                continue
            if len(row) != DIM:
                raise ParseError(f"expected 6 columns, got {len(row)}", f"{path}:{lineno}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ParseError(str(exc), f"{path}:{lineno}") from exc
    if not rows:
        raise ParseError("no wrench rows found", str(path))
    return np.asarray(rows, dtype=float)
