"""Rollout kernel selection.

The compiled extension is used when it imports; otherwise, or when
``HANABI_SEARCH_PURE=1`` is set, the pure-Python reference runs instead.
Both return identical scores for identical inputs.
"""

import os

from . import _pykernels

BACKEND = "python"
simple_rollouts = _pykernels.simple_rollouts

if os.environ.get("HANABI_SEARCH_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:  # extension not built
        _kernels = None
    if _kernels is not None:
        simple_rollouts = _kernels.simple_rollouts
        BACKEND = "cython"

python_rollouts = _pykernels.simple_rollouts
