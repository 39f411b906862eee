"""Selection between the compiled sweep kernel and its pure-Python twin.

``GGE_SPECTRA_BACKEND=python`` forces the fallback even when the extension is
built.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

__all__ = ["available_backends", "get_backend", "default_backend"]


def available_backends() -> tuple:
    return ("compiled", "python") if _compiled is not None else ("python",)


def default_backend() -> str:
    env = os.environ.get("GGE_SPECTRA_BACKEND", "").strip().lower()
    if env in ("python", "py"):
        return "python"
    return "compiled" if _compiled is not None else "python"


def get_backend(name: str | None = None):
    """Module exposing ``sweeps`` and ``total_energy``."""
    name = name or default_backend()
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("the compiled kernel is not built; reinstall with Cython available")
        return _compiled
    if name == "python":
        return _kernels_py
    raise ValueError(f"unknown backend {name!r}")
