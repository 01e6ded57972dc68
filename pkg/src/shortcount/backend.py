"""Kernel backend selection: compiled extension when built, pure Python otherwise.

The environment variable SHORTCOUNT_BACKEND forces the choice at import time
("compiled" or "pure"); `use()` switches it at runtime, which the benchmark
uses to compare both on the same workload.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

_forced = os.environ.get("SHORTCOUNT_BACKEND", "").strip().lower()
if _forced == "pure":
    _active = _pykernels
elif _forced == "compiled":
    if _ckernels is None:
        raise ImportError(
            "SHORTCOUNT_BACKEND=compiled but shortcount._ckernels is not built; "
            "reinstall without SHORTCOUNT_PURE_ONLY or unset SHORTCOUNT_BACKEND"
        )
    _active = _ckernels
elif _forced not in ("", "auto"):
    raise ImportError(f"unknown SHORTCOUNT_BACKEND value: {_forced!r}")
else:
    _active = _ckernels if _ckernels is not None else _pykernels


def kernels():
    """The active kernel module."""
    return _active


def has_compiled() -> bool:
    return _ckernels is not None


def backend_name() -> str:
    return "compiled" if _active is _ckernels else "pure"


def use(name: str):
    """Select a backend by name ("compiled", "pure", or "auto")."""
    global _active
    if name == "pure":
        _active = _pykernels
    elif name == "compiled":
        if _ckernels is None:
            raise ValueError("compiled backend unavailable: extension not built")
        _active = _ckernels
    elif name == "auto":
        _active = _ckernels if _ckernels is not None else _pykernels
    else:
        raise ValueError(f"unknown backend: {name!r}")
    return _active
