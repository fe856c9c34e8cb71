"""Kernel backend selection.

The package ships a compiled extension (`motioncond.kernels._core`) for the
hot inner loops and a NumPy reference implementation with the same API.
The compiled backend is used when importable; set MOTIONCOND_KERNELS to
"reference" or "compiled" to force one (forcing "compiled" raises if the
extension is missing). `benchmarks/bench_kernels.py` compares the two.
"""

from __future__ import annotations

import os

from . import reference

_choice = os.environ.get("MOTIONCOND_KERNELS", "auto").lower()

if _choice == "reference":
    _impl = reference
elif _choice == "compiled":
    from . import _core as _impl  # noqa: F401  (ImportError is the intended failure)
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = reference

bilinear_map = _impl.bilinear_map
backward_warp = _impl.backward_warp
idw_densify = _impl.idw_densify
block_match = _impl.block_match


def backend_name() -> str:
    """Name of the active backend: "compiled" or "reference"."""
    return "reference" if _impl is reference else "compiled"


def get_backend(name: str):
    """Return a specific backend module ("reference" or "compiled") by name."""
    if name == "reference":
        return reference
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown kernel backend: {name!r}")
