"""Backend selection for the hot loops.

The compiled extension is used when it imports; ``BAKERLAB_PURE=1`` forces
the numpy fallback.  Both backends expose ``net_counts`` and ``classify``.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"numpy": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels

if _ckernels is not None and os.environ.get("BAKERLAB_PURE", "") in ("", "0"):
    BACKEND = "compiled"
else:
    BACKEND = "numpy"


def get(name=None):
    """Return the kernel module ``name`` (default: the selected backend)."""
    name = BACKEND if name is None else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available; have {sorted(BACKENDS)}") from None
