import json
from pathlib import Path

import numpy as np
import pytest

from graspq.geometry import TriangleMesh, build_accelerator
from graspq.synthetic import generate_suite


@pytest.fixture(scope="session")
def suite_dir(tmp_path_factory) -> Path:
    """Bundled synthetic evaluation suite, generated once per session."""
    out = tmp_path_factory.mktemp("suite")
    generate_suite(out)
    return out


@pytest.fixture(scope="session")
def suite_manifest(suite_dir) -> dict:
    return json.loads((suite_dir / "suite_manifest.json").read_text())


def make_unit_cube() -> TriangleMesh:
    v = np.array(
        [
            [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
        ],
        dtype=float,
    )
    quads = [
        (0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4),
        (2, 3, 7, 6), (1, 2, 6, 5), (3, 0, 4, 7),
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append((a, b, c))
        tris.append((a, c, d))
    return TriangleMesh(v, np.asarray(tris, dtype=np.int32))


def make_random_soup(seed: int, n_vertices: int = 120, n_triangles: int = 240) -> TriangleMesh:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n_vertices, 3))
    t = []
    while len(t) < n_triangles:
        tri = rng.integers(0, n_vertices, size=3)
        if len(set(tri.tolist())) == 3:
            t.append(tri)
    t = np.asarray(t, dtype=np.int32)
    tv = v[t]
    areas = 0.5 * np.linalg.norm(np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0]), axis=1)
    return TriangleMesh(v, t[areas > 1e-9])


@pytest.fixture(scope="session")
def cube_mesh():
    mesh = make_unit_cube()
    return mesh, build_accelerator(mesh)
