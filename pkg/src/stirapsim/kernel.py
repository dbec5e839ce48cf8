"""Propagator backend selection.

The compiled Cython kernel is used when the extension was built; otherwise
the pure-Python implementation takes over (identical algorithm, much
slower).  ``STIRAPSIM_KERNEL=python`` or ``=compiled`` forces a backend.
"""

from __future__ import annotations

import os
import warnings

from . import _kernel_py

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

_FORCED = os.environ.get("STIRAPSIM_KERNEL", "auto").strip().lower()


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _compiled is not None else ("python",)


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (default: best available)."""
    name = (name or _FORCED).strip().lower()
    if name in ("", "auto"):
        return _compiled if _compiled is not None else _kernel_py
    if name == "python":
        return _kernel_py
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError(
                "compiled kernel requested but the stirapsim._kernel extension "
                "is not built (pip install -e . --no-build-isolation)"
            )
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


BACKEND = get_backend().BACKEND_NAME

if BACKEND != "compiled" and _FORCED in ("", "auto"):
    warnings.warn(
        "stirapsim is running on the pure-Python kernel; parameter scans will "
        "be slow. Build the extension with: pip install -e . --no-build-isolation",
        RuntimeWarning,
        stacklevel=2,
    )
