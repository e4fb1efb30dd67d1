"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
twins run. Set ``LINPESS_KERNELS=python`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("LINPESS_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

uniforms = _impl.uniforms
sample_paths = _impl.sample_paths
gram_rhs = _impl.gram_rhs
simplex_game = _impl.simplex_game

SLOT_NOISE_A = _kernels_py.SLOT_NOISE_A
SLOT_NOISE_B = _kernels_py.SLOT_NOISE_B

__all__ = ["BACKEND", "uniforms", "sample_paths", "gram_rhs", "simplex_game"]
