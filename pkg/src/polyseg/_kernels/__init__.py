"""Backend dispatch for the hot geometry kernels.

The jitted backend is used when numba imports cleanly; setting the environment
variable ``POLYSEG_NO_NUMBA=1`` (checked once at import) forces the pure-numpy
fallback. ``polyseg.bench`` times the two side by side.
"""

import os

import numpy as np

from . import numpy_impl

_FORCED_OFF = os.environ.get("POLYSEG_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

if not _FORCED_OFF:
    try:
        from . import numba_impl as _impl
        BACKEND = "numba"
    except ImportError:
        _impl = numpy_impl
        BACKEND = "numpy"
else:
    _impl = numpy_impl
    BACKEND = "numpy"

fill_polygon = _impl.fill_polygon
paint_polygon = _impl.paint_polygon
points_in_polygon = _impl.points_in_polygon
first_hit_along_line = _impl.first_hit_along_line


def available_backends():
    """Names of importable backends, jitted one first when present."""
    names = []
    try:
        from . import numba_impl  # noqa: F401
        names.append("numba")
    except ImportError:
        pass
    names.append("numpy")
    return names


def get_impl(name):
    """Fetch a backend module by name ("numba" or "numpy")."""
    if name == "numpy":
        return numpy_impl
    if name == "numba":
        from . import numba_impl
        return numba_impl
    raise ValueError(f"unknown kernel backend: {name!r}")


def warmup():
    """Run each kernel once on tiny inputs (triggers JIT compilation)."""
    vx = np.array([0.0, 3.0, 3.0, 0.0])
    vy = np.array([0.0, 0.0, 3.0, 3.0])
    fill_polygon(vx, vy, 4, 4)
    labels = np.zeros((4, 4), dtype=np.uint16)
    paint_polygon(labels, vx, vy, 1, False)
    paint_polygon(labels, vx, vy, 2, True)
    points_in_polygon(np.array([1.0]), np.array([1.0]), vx, vy)
    first_hit_along_line(np.ones((4, 4), dtype=np.uint8), 0, 0, 3, 3)
