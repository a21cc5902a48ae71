"""Backend selection for the hot kernels.

The compiled extension is used when it imports; ``SWL_PURE_PYTHON=1`` forces
the numpy fallback.
"""
import os

if os.environ.get("SWL_PURE_PYTHON") == "1":
    from . import _core_py as core
else:
    try:
        from . import _core as core
    except ImportError:  # extension not built
        from . import _core_py as core

from . import _core_py as python_core

BACKEND = core.BACKEND

__all__ = ["core", "python_core", "BACKEND"]
