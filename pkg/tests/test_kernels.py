"""Backend equivalence: the compiled kernels must match the pure ones."""

import math

import numpy as np
import pytest

import graspq._kernels as kernels
from graspq.geometry import build_accelerator
from graspq.wrench import brute_force_hull, convex_hull_6d, epsilon_metric

from conftest import make_random_soup

native = pytest.importorskip("graspq._kernels.native")
pure = kernels.get_backend("pure")


def _bvh_args(mesh, accel, queries):
    return (
        mesh.tri_vertices,
        accel.bb_min,
        accel.bb_max,
        accel.left,
        accel.right,
        accel.start,
        accel.count,
        accel.order,
        np.ascontiguousarray(queries),
    )


def test_brute_closest_points_match():
    mesh = make_random_soup(21)
    queries = np.random.default_rng(2).normal(size=(60, 3))
    p_n, d_n, t_n = native.brute_closest_points(mesh.tri_vertices, queries)
    p_p, d_p, t_p = pure.brute_closest_points(mesh.tri_vertices, queries)
    assert np.array_equal(t_n, t_p)
    assert np.abs(d_n - d_p).max() < 1e-12
    assert np.abs(p_n - p_p).max() < 1e-12


def test_bvh_closest_points_match():
    mesh = make_random_soup(22)
    accel = build_accelerator(mesh, leaf_size=4)
    queries = np.random.default_rng(3).normal(size=(80, 3)) * 1.4
    out_n = native.bvh_closest_points(*_bvh_args(mesh, accel, queries))
    out_p = pure.bvh_closest_points(*_bvh_args(mesh, accel, queries))
    assert np.array_equal(out_n[2], out_p[2])
    assert np.abs(out_n[1] - out_p[1]).max() < 1e-12


def test_det6_matches_numpy():
    mats = np.random.default_rng(4).normal(size=(50, 6, 6))
    expect = float(np.abs(np.linalg.det(mats)).sum())
    assert math.isclose(native.det6_abs_sum(mats), expect, rel_tol=1e-12)
    assert math.isclose(pure.det6_abs_sum(mats), expect, rel_tol=1e-12)


def test_hull_backends_agree(monkeypatch):
    rng = np.random.default_rng(5)
    cases = [rng.normal(size=(int(rng.integers(8, 26)), 6)) for _ in range(8)]
    cases.append(np.vstack([np.eye(6), -np.eye(6)]))  # degenerate-heavy input

    results = {}
    for name in ("native", "pure"):
        impl = kernels.get_backend(name)
        monkeypatch.setattr(kernels, "hull_build", impl.hull_build)
        monkeypatch.setattr(kernels, "det6_abs_sum", impl.det6_abs_sum)
        monkeypatch.setattr(kernels, "refit_planes6", impl.refit_planes6)
        results[name] = [
            (h.facet_count, h.volume, epsilon_metric(h), h.full_dimensional)
            for h in (convex_hull_6d(c) for c in cases)
        ]
    for (fc_n, v_n, e_n, fd_n), (fc_p, v_p, e_p, fd_p) in zip(
        results["native"], results["pure"]
    ):
        assert fd_n == fd_p
        assert fc_n == fc_p
        assert math.isclose(v_n, v_p, rel_tol=1e-9, abs_tol=1e-12)
        assert math.isclose(e_n, e_p, rel_tol=1e-9, abs_tol=1e-9)


def test_pure_hull_matches_brute_oracle(monkeypatch):
    impl = kernels.get_backend("pure")
    monkeypatch.setattr(kernels, "hull_build", impl.hull_build)
    monkeypatch.setattr(kernels, "det6_abs_sum", impl.det6_abs_sum)
    monkeypatch.setattr(kernels, "refit_planes6", impl.refit_planes6)
    rng = np.random.default_rng(6)
    for _ in range(5):
        pts = rng.normal(size=(int(rng.integers(8, 20)), 6))
        h = convex_hull_6d(pts)
        hb = brute_force_hull(pts)
        assert math.isclose(h.volume, hb.volume, rel_tol=1e-9)
        assert abs(epsilon_metric(h) - epsilon_metric(hb)) < 1e-9
