"""Selection between the compiled Lohner kernel and the numpy fallback.

The compiled module is used when it imports, unless the environment
variable ``HETPROOF_PURE`` is set to a non-empty value other than ``0``.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _pure_requested():
    v = os.environ.get("HETPROOF_PURE", "")
    return v not in ("", "0")


def available():
    out = ["python"]
    if _ckernels is not None:
        out.insert(0, "compiled")
    return out


def default_name():
    if _ckernels is not None and not _pure_requested():
        return "compiled"
    return "python"


def get(name=None):
    name = name or default_name()
    if name == "compiled":
        if _ckernels is None:
            raise ImportError("compiled kernel is not built")
        return _ckernels
    if name == "python":
        return _pykernels
    raise ValueError(f"unknown kernel backend {name!r}")
