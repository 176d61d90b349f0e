"""Backend benchmark: compiled kernels vs the pure numpy fallback.

Run:  python benchmarks/bench_kernels.py [repeats]

Covers the three hot paths (triangle proximity, BVH queries, 6-D hull)
plus an end-to-end frame evaluation. The full-pipeline rows re-execute
this script in a subprocess with GRASPQ_PURE=1 so the import-time backend
selection is exercised exactly as users hit it.
"""

import json
import os
import subprocess
import sys
import time

import numpy as np

import graspq._kernels as kernels
from graspq.contacts import ContactParams, discretize_friction_cone
from graspq.geometry import TriangleMesh, build_accelerator


def timeit(fn, repeats: int) -> float:
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def random_soup(seed: int, n_vertices=400, n_triangles=2000) -> TriangleMesh:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n_vertices, 3)) * 0.08
    t = []
    while len(t) < n_triangles:
        tri = rng.integers(0, n_vertices, size=3)
        if len(set(tri.tolist())) == 3:
            t.append(tri)
    t = np.asarray(t, dtype=np.int32)
    tv = v[t]
    areas = 0.5 * np.linalg.norm(np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0]), axis=1)
    return TriangleMesh(v, t[areas > 1e-12])


def wrench_cloud(seed: int, contacts=12) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(contacts):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        p = rng.normal(size=3) * 0.05
        e = discretize_friction_cone(n, 0.8, 8)
        rows.append(np.hstack([e, 12.0 * np.cross(np.broadcast_to(p, e.shape), e)]))
    return np.vstack(rows)


def bench_kernels(repeats: int):
    mesh = random_soup(1)
    accel = build_accelerator(mesh)
    queries = np.ascontiguousarray(np.random.default_rng(2).normal(size=(200, 3)) * 0.1)
    bvh_args = (
        mesh.tri_vertices, accel.bb_min, accel.bb_max, accel.left, accel.right,
        accel.start, accel.count, accel.order, queries,
    )
    cloud = wrench_cloud(3)

    rows = []
    for name in ("native", "pure"):
        try:
            impl = kernels.get_backend(name)
        except (ImportError, ValueError):
            continue
        rows.append(
            (
                name,
                timeit(lambda: impl.brute_closest_points(mesh.tri_vertices, queries[:50]), repeats),
                timeit(lambda: impl.bvh_closest_points(*bvh_args), repeats),
                timeit(lambda: _hull_with(impl, cloud), max(1, repeats // 2)),
            )
        )
    return rows


def _hull_with(impl, cloud):
    # route the hull through a specific backend without reimporting
    from graspq import wrench

    saved = (kernels.hull_build, kernels.det6_abs_sum, kernels.refit_planes6)
    kernels.hull_build = impl.hull_build
    kernels.det6_abs_sum = impl.det6_abs_sum
    kernels.refit_planes6 = impl.refit_planes6
    try:
        return wrench.convex_hull_6d(cloud)
    finally:
        kernels.hull_build, kernels.det6_abs_sum, kernels.refit_planes6 = saved


def bench_frame() -> float:
    """Median evaluate_frame time for a dense synthetic grasp, current backend."""
    from graspq.contacts import ContactParams
    from graspq.detector import FrameInput, MeshRegistry, evaluate_frame
    from graspq.geometry import Pose
    from graspq.hand import HandPose, HandShape

    rng_mesh = random_soup(4, n_vertices=300, n_triangles=1200)
    # scale the soup into a graspable blob in front of the palm
    mesh = TriangleMesh(rng_mesh.vertices * 0.5 + [0.0, 0.09, 0.02], rng_mesh.triangles)
    registry = MeshRegistry()
    registry.register("blob", mesh)
    theta = np.zeros(48)
    for block in range(4):
        for joint in range(3):
            theta[3 + 9 * block + 3 * joint] = 0.9
    frame = FrameInput(HandShape(), HandPose(theta, np.zeros(3)), "blob", Pose.identity())
    params = ContactParams()
    evaluate_frame(frame, params, registry)
    times = []
    for _ in range(5):
        t0 = time.perf_counter()
        decision = evaluate_frame(frame, params, registry)
        times.append(time.perf_counter() - t0)
    return sorted(times)[2] * 1000.0, decision.contact_count


def main() -> int:
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 5
    if os.environ.get("_GRASPQ_BENCH_CHILD"):
        ms, contacts = bench_frame()
        print(json.dumps({"ms": ms, "contacts": contacts}))
        return 0

    print(f"active backend: {kernels.backend_name()}")
    print()
    print("%-8s %18s %18s %18s" % ("backend", "brute tri (ms)", "bvh 200q (ms)", "hull 96pt (ms)"))
    for name, t_brute, t_bvh, t_hull in bench_kernels(repeats):
        print("%-8s %18.2f %18.2f %18.2f" % (name, t_brute, t_bvh, t_hull))

    print()
    print("end-to-end evaluate_frame (subprocess per backend):")
    for name, env_val in (("native", "0"), ("pure", "1")):
        env = dict(os.environ, GRASPQ_PURE=env_val, _GRASPQ_BENCH_CHILD="1")
        proc = subprocess.run(
            [sys.executable, __file__], env=env, capture_output=True, text=True
        )
        if proc.returncode == 0:
            out = json.loads(proc.stdout.strip().splitlines()[-1])
            print("%-8s %10.1f ms  (%d contacts)" % (name, out["ms"], out["contacts"]))
        else:
            print("%-8s failed: %s" % (name, proc.stderr.strip()[:200]))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
