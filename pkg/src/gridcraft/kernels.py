"""Kernel selection: compiled extension if built, pure-Python fallback otherwise.

Set ``GRIDCRAFT_PURE=1`` to force the fallback (used by the parity tests and
the kernel benchmark). ``IMPL`` names the active implementation.
"""

import os

from gridcraft import _kernels_py

if os.environ.get("GRIDCRAFT_PURE") == "1":
    _impl = _kernels_py
    IMPL = "python"
else:
    try:
        from gridcraft import _kernels as _impl  # type: ignore[no-redef]
        IMPL = "cython"
    except ImportError:
        _impl = _kernels_py
        IMPL = "python"

render_frame = _impl.render_frame
lidar_scan = _impl.lidar_scan
bfs_dist = _impl.bfs_dist
