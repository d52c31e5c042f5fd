"""Kernel backend selection.

The compiled Cython extension (``crosshate.kernels._core``) is preferred
when importable; otherwise the NumPy reference implementation is used. Set
``CROSSHATE_PURE_PYTHON=1`` to force the fallback. Both backends share one
signature set and are parity-tested against each other.
"""

from __future__ import annotations

import os

from . import reference

if os.environ.get("CROSSHATE_PURE_PYTHON"):
    _impl = reference
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = reference

BACKEND = _impl.NAME

sliding_windows = _impl.sliding_windows
accumulate_windows = _impl.accumulate_windows
masked_max_forward = _impl.masked_max_forward
masked_max_backward = _impl.masked_max_backward
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward

KERNEL_NAMES = (
    "sliding_windows",
    "accumulate_windows",
    "masked_max_forward",
    "masked_max_backward",
    "lstm_forward",
    "lstm_backward",
)


def available_backends() -> dict[str, object]:
    """All importable backends keyed by name (for parity tests and benchmarks)."""
    backends: dict[str, object] = {reference.NAME: reference}
    try:
        from . import _core

        backends[_core.NAME] = _core
    except ImportError:
        pass
    return backends
