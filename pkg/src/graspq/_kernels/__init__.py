"""Kernel backend selection.

Prefers the compiled extension (graspq._kernels.native) and falls back to
the pure numpy implementation. Set GRASPQ_PURE=1 to force the fallback,
e.g. for the backend benchmark.
"""

import os

from . import pure as _pure

if os.environ.get("GRASPQ_PURE", "").strip() not in ("", "0"):
    _impl = _pure
else:
    try:
        from . import native as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pure

brute_closest_points = _impl.brute_closest_points
bvh_closest_points = _impl.bvh_closest_points
hull_build = _impl.hull_build
det6_abs_sum = _impl.det6_abs_sum
refit_planes6 = _impl.refit_planes6
BACKEND_NAME = _impl.BACKEND_NAME

# numerics shared by both backends and by the hull oracles
fit_planes_batch = _pure.fit_planes_batch
orient_away = _pure.orient_away


def backend_name() -> str:
    return BACKEND_NAME


def get_backend(name: str):
    """Explicit backend lookup ('pure' or 'native'); used by benchmarks."""
    if name == "pure":
        return _pure
    if name == "native":
        from . import native  # type: ignore[attr-defined]

        return native
    raise ValueError(f"unknown backend {name!r}")
