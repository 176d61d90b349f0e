import math

import numpy as np
import pytest

from graspq.contacts import (
    ContactParams,
    capsule_gaps,
    discretize_friction_cone,
    extract_contacts,
    tangent_basis,
)
from graspq.errors import InvalidInputError
from graspq.geometry import Pose, PosedMesh, TriangleMesh, build_accelerator
from graspq.hand import Capsule


def flat_grid(n=8, size=0.5) -> TriangleMesh:
    """Triangulated square grid in the z=0 plane, normals +z."""
    xs = np.linspace(-size, size, n + 1)
    verts = np.array([[x, y, 0.0] for y in xs for x in xs])
    tris = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b = a + 1
            c = a + n + 2
            d = a + n + 1
            tris.append((a, b, c))
            tris.append((a, c, d))
    return TriangleMesh(verts, np.asarray(tris, dtype=np.int32))


@pytest.fixture(scope="module")
def grid():
    mesh = flat_grid()
    return PosedMesh(mesh, build_accelerator(mesh), Pose.identity())


class TestFrictionCone:
    def test_zero_mu_collapses_to_normal(self):
        n = np.array([0.0, 0.0, 1.0])
        edges = discretize_friction_cone(n, 0.0, 6)
        assert np.abs(edges - n).max() < 1e-15

    def test_closed_form_four_edges(self):
        edges = discretize_friction_cone([0.0, 0.0, 1.0], 1.0, 4)
        s = 1.0 / math.sqrt(2.0)
        expect = np.array([[s, 0, s], [0, s, s], [-s, 0, s], [0, -s, s]])
        assert np.abs(edges - expect).max() < 1e-12

    def test_axis_dot_product_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            mu = rng.uniform(0.0, 2.0)
            m = int(rng.integers(3, 16))
            edges = discretize_friction_cone(n, mu, m)
            dots = edges @ n
            assert np.abs(dots - 1.0 / math.sqrt(1.0 + mu * mu)).max() < 1e-12
            assert np.abs(np.linalg.norm(edges, axis=1) - 1.0).max() < 1e-12

    def test_edges_sum_parallel_to_axis(self):
        rng = np.random.default_rng(1)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        edges = discretize_friction_cone(n, 0.7, 8)
        total = edges.sum(axis=0)
        cross = np.cross(total, n)
        assert np.linalg.norm(cross) < 1e-9

    def test_edges_on_cone_boundary(self):
        n = np.array([1.0, 2.0, -0.5])
        n /= np.linalg.norm(n)
        mu = 0.8
        edges = discretize_friction_cone(n, mu, 12)
        angles = np.arccos(np.clip(edges @ n, -1, 1))
        assert np.abs(angles - math.atan(mu)).max() < 1e-9

    def test_zero_normal_rejected(self):
        with pytest.raises(InvalidInputError):
            discretize_friction_cone([0.0, 0.0, 0.0], 0.5, 8)

    def test_too_few_edges_rejected(self):
        with pytest.raises(InvalidInputError):
            discretize_friction_cone([0.0, 0.0, 1.0], 0.5, 2)

    def test_tangent_basis_orthonormal(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            t1, t2 = tangent_basis(n)
            for v in (t1, t2):
                assert abs(np.linalg.norm(v) - 1.0) < 1e-12
                assert abs(v @ n) < 1e-12
            assert abs(t1 @ t2) < 1e-12


class TestExtractContacts:
    def test_far_capsule_yields_empty_set(self, grid):
        cap = Capsule(np.array([0.0, 0, 0.1]), np.array([0.0, 0, 0.2]), 0.01, "far")
        out = extract_contacts([cap], grid, ContactParams())
        assert len(out) == 0

    def test_tangent_sphere_contact(self, grid):
        r = 0.01
        center = np.array([0.0123, -0.0345, r])
        cap = Capsule(center, center, r, "tip")
        out = extract_contacts([cap], grid, ContactParams())
        assert len(out) == 1
        c = out.contacts[0]
        assert abs(c.depth) < 1e-6
        assert np.allclose(c.normal, [0, 0, 1], atol=1e-9)
        assert np.abs(c.point - [center[0], center[1], 0.0]).max() < 1e-6
        assert c.source == "tip"

    def test_duplicate_contacts_merged(self, grid):
        r = 0.01
        center = np.array([0.0, 0.0, r])
        a = Capsule(center, center, r, "a")
        b = Capsule(center + [0.001, 0, 0], center + [0.001, 0, 0], r, "b")
        out = extract_contacts([a, b], grid, ContactParams())
        assert len(out) == 1

    def test_deepest_contact_wins_merge(self, grid):
        shallow = Capsule(np.array([0.0, 0, 0.012]), np.array([0.0, 0, 0.012]), 0.01, "s")
        deep = Capsule(np.array([0.002, 0, 0.008]), np.array([0.002, 0, 0.008]), 0.01, "d")
        out = extract_contacts([shallow, deep], grid, ContactParams())
        assert len(out) == 1
        assert out.contacts[0].source == "d"

    def test_penetrating_contact_kept(self, grid):
        cap = Capsule(np.array([0.0, 0, 0.004]), np.array([0.0, 0, 0.004]), 0.01, "pen")
        out = extract_contacts([cap], grid, ContactParams())
        assert len(out) == 1
        assert out.contacts[0].depth == pytest.approx(-0.006, abs=1e-6)

    def test_tolerance_monotonicity(self, grid):
        rng = np.random.default_rng(3)
        caps = [
            Capsule(p, p + d * 0.02, 0.008, f"c{i}")
            for i, (p, d) in enumerate(
                zip(rng.uniform(-0.2, 0.2, (12, 3)) * [1, 1, 0.15],
                    rng.normal(size=(12, 3)))
            )
        ]
        small = extract_contacts(caps, grid, ContactParams(tolerance=0.002, dedup_radius=0.0))
        large = extract_contacts(caps, grid, ContactParams(tolerance=0.02, dedup_radius=0.0))
        small_sources = {c.source for c in small}
        large_sources = {c.source for c in large}
        assert small_sources <= large_sources
        for c in small:
            match = [k for k in large if k.source == c.source][0]
            assert np.allclose(c.point, match.point)

    def test_depth_never_exceeds_tolerance(self, grid):
        rng = np.random.default_rng(4)
        params = ContactParams()
        caps = [
            Capsule(p, p + rng.normal(size=3) * 0.03, 0.008, f"c{i}")
            for i, p in enumerate(rng.uniform(-0.3, 0.3, (20, 3)) * [1, 1, 0.1])
        ]
        out = extract_contacts(caps, grid, params)
        for c in out:
            assert c.depth <= params.tolerance + 1e-9
            assert abs(np.linalg.norm(c.normal) - 1.0) < 1e-9
            # contact point lies on the object surface
            _, dist, _ = grid.closest_points(c.point[None])
            assert dist[0] < 1e-9

    def test_dedup_radius_respected(self, grid):
        rng = np.random.default_rng(5)
        params = ContactParams()
        caps = [
            Capsule(p, p, 0.01, f"c{i}")
            for i, p in enumerate(
                np.column_stack(
                    [rng.uniform(-0.05, 0.05, 30), rng.uniform(-0.05, 0.05, 30),
                     np.full(30, 0.008)]
                )
            )
        ]
        out = extract_contacts(caps, grid, params)
        pts = out.points()
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                assert np.linalg.norm(pts[i] - pts[j]) >= params.dedup_radius - 1e-12

    def test_rigid_equivariance(self):
        mesh = flat_grid(4, 0.3)
        pose = Pose.identity()
        posed = PosedMesh(mesh, build_accelerator(mesh), pose)
        caps = [
            Capsule(np.array([0.01, 0.02, 0.012]), np.array([0.06, -0.03, 0.015]), 0.008, "a"),
            Capsule(np.array([-0.08, 0.0, 0.009]), np.array([-0.02, 0.04, 0.009]), 0.008, "b"),
        ]
        base = extract_contacts(caps, posed, ContactParams())
        world = Pose.from_axis_angle([0.4, -0.2, 0.9], [0.3, -1.0, 0.25])
        moved = PosedMesh(mesh, posed.accel, world.compose(pose))
        caps_moved = [
            Capsule(world.apply(c.a), world.apply(c.b), c.radius, c.label) for c in caps
        ]
        rotated = extract_contacts(caps_moved, moved, ContactParams())
        assert len(base) == len(rotated)
        for c0, c1 in zip(base, rotated):
            assert np.abs(world.apply(c0.point) - c1.point).max() < 1e-9
            assert np.abs(world.rotate(c0.normal) - c1.normal).max() < 1e-9
            assert abs(c0.depth - c1.depth) < 1e-9

    def test_capsule_gaps_matches_contacts(self, grid):
        caps = [
            Capsule(np.array([0.0, 0, 0.05]), np.array([0.0, 0, 0.08]), 0.01, "far"),
            Capsule(np.array([0.0, 0, 0.012]), np.array([0.0, 0, 0.012]), 0.01, "near"),
        ]
        gaps = capsule_gaps(caps, grid)
        assert gaps[0] == pytest.approx(0.04, abs=1e-6)
        assert gaps[1] == pytest.approx(0.002, abs=1e-6)


class TestParams:
    def test_invalid_params_rejected(self):
        with pytest.raises(InvalidInputError):
            ContactParams(tolerance=0.0)
        with pytest.raises(InvalidInputError):
            ContactParams(dedup_radius=-0.001)
        with pytest.raises(InvalidInputError):
            ContactParams(mu=-0.1)
        with pytest.raises(InvalidInputError):
            ContactParams(cone_edges=2)
