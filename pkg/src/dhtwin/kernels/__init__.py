"""Numerical core with backend selection.

The compiled Cython kernels are used when the extension was built; otherwise
the pure-Python reference implementation is selected. Both expose the same
functions and the same arithmetic. Set DHTWIN_KERNELS=python|cython to force
a backend (cython raises if the extension is missing).
"""

import os

from . import _ref

_forced = os.environ.get("DHTWIN_KERNELS", "").strip().lower()

if _forced == "python":
    _impl = _ref
elif _forced == "cython":
    from . import _fast as _impl
else:
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = _ref

BACKEND = _impl.BACKEND_NAME
advance_tree = _impl.advance_tree
tank_step = _impl.tank_step

reference = _ref
