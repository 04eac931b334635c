"""Backend selection for the Bellman backup kernel.

The compiled extension is used when it imports; ``TESTSCHED_BACKEND=python``
forces the pure-Python fallback and ``TESTSCHED_BACKEND=compiled`` makes a
missing extension an error.
"""

import os

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

_BACKENDS = {"python": _pykernel}
if _ckernel is not None:
    _BACKENDS["compiled"] = _ckernel


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Return ``(name, module)`` for the requested or default backend."""
    name = name or os.environ.get("TESTSCHED_BACKEND") or ("compiled" if _ckernel is not None else "python")
    if name not in _BACKENDS:
        raise RuntimeError(f"kernel backend {name!r} is not available (have {available_backends()})")
    return name, _BACKENDS[name]

