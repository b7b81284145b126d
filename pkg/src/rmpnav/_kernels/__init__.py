"""Kernel backend registry.

Two interchangeable backends implement the hot kernels (scene distance,
grid interpolation, sphere tracing, per-ray policy reduction): a compiled
extension and a pure-NumPy fallback. The compiled one is selected at import
when available; ``RMPNAV_BACKEND=numpy|compiled`` overrides, and callers may
switch explicitly for comparisons.
"""

from __future__ import annotations

import os
import warnings

from . import npkern

_backends = {"numpy": npkern}

try:
    from . import ckern

    _backends["compiled"] = ckern
except ImportError:  # extension not built; fall back
    ckern = None

_env = os.environ.get("RMPNAV_BACKEND", "").strip().lower()
if _env and _env not in ("auto",) and _env not in _backends:
    warnings.warn(f"RMPNAV_BACKEND={_env!r} unavailable, using auto selection")
    _env = ""

_default_name = (_env if _env and _env != "auto"
                 else ("compiled" if "compiled" in _backends else "numpy"))


def available_backends() -> list[str]:
    return sorted(_backends)


def get_backend(name: str | None = None):
    """Return a backend module by name (default: the active one)."""
    if name is None:
        return _backends[_default_name]
    try:
        return _backends[name]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; available: {available_backends()}"
        ) from None


def default_backend_name() -> str:
    return _default_name


def set_default_backend(name: str) -> None:
    global _default_name
    if name not in _backends:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _default_name = name
