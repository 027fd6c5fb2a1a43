"""Backend selection for the chain kernels.

Prefers the compiled extension, falls back to the pure-Python twin.  Both
expose the same functions with bit-identical results; ``BACKEND`` records
which one is live, and ``set_backend`` exists so the benchmark and the
equivalence tests can pin one explicitly.
"""
from __future__ import annotations

from . import _kernels_py

try:
    from . import _kernels  # type: ignore[attr-defined]

    _DEFAULT = "compiled"
except ImportError:
    _kernels = None  # type: ignore[assignment]
    _DEFAULT = "python"

BACKEND = _DEFAULT


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _kernels is not None else ("python",)


def set_backend(name: str) -> None:
    global BACKEND, chain_poly
    if name not in available_backends():
        raise ValueError(
            f"backend '{name}' not available here; choose from {available_backends()}"
        )
    BACKEND = name
    chain_poly = _kernels.chain_poly if name == "compiled" else _kernels_py.chain_poly


chain_poly = _kernels.chain_poly if _DEFAULT == "compiled" else _kernels_py.chain_poly
