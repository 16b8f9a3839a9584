"""Hot rendering kernels with a compiled core and a NumPy fallback.

The compiled extension is preferred when importable; both backends are
bit-compatible, so the choice only affects speed. `benchmarks/bench_kernels.py`
compares them.
"""

from __future__ import annotations

from types import ModuleType

from . import _numpy

try:
    from . import _native
except ImportError:  # extension not built
    _native = None

DEFAULT: ModuleType = _native if _native is not None else _numpy
BACKEND: str = DEFAULT.NAME


def available() -> dict[str, ModuleType]:
    """All importable backends, keyed by name."""
    backends = {_numpy.NAME: _numpy}
    if _native is not None:
        backends[_native.NAME] = _native
    return backends


def get(name: str | None = None) -> ModuleType:
    """Look up a backend by name; None selects the default."""
    if name is None:
        return DEFAULT
    try:
        return available()[name]
    except KeyError:
        raise ValueError(
            f"unknown kernel backend {name!r}; available: {sorted(available())}"
        ) from None
