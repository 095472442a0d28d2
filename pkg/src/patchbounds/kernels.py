"""Backend selection for the spectral weight kernels.

The compiled extension is used when importable.  Set
``PATCHBOUNDS_BACKEND=python`` to force the numpy path, or ``cython`` to fail
loudly if the extension is missing.
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled


def available():
    return sorted(_BACKENDS)


def get(name=None):
    """Return the kernel module for ``name`` (``None``/``"auto"`` picks the fastest)."""
    name = name or os.environ.get("PATCHBOUNDS_BACKEND", "auto")
    if name == "auto":
        return _BACKENDS.get("cython", _kernels_py)
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {available()}") from None


active = get()
