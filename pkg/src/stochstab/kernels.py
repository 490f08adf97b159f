"""Backend selection for the orbit kernels.

The compiled extension is used when it imports; setting ``STOCHSTAB_PURE=1``
forces the numpy fallback.  Both backends take the same arguments.
"""
import os

import numpy as np

from . import _pykernels

_ext = None
if os.environ.get("STOCHSTAB_PURE", "") != "1":
    try:
        from . import _kernels as _ext
    except ImportError:
        _ext = None

BACKEND = "cython" if _ext is not None else "python"
BACKENDS = ("cython", "python") if _ext is not None else ("python",)


def _resolve(backend):
    backend = backend or BACKEND
    if backend not in BACKENDS:
        raise ValueError(f"backend {backend!r} unavailable; have {BACKENDS}")
    return backend


def _domain_arrays(domain):
    lows = np.ascontiguousarray(domain.lows, dtype=np.float64)
    lengths = np.ascontiguousarray(domain.lengths, dtype=np.float64)
    periodic = np.ascontiguousarray(domain.periodic, dtype=np.uint8)
    return lows, lengths, periodic


def iterate(system, x0, noise, backend=None) -> np.ndarray:
    """Orbit states ``(m, n + 1, D)`` for start points ``(m, D)`` and embedded noise ``(m, n, D)``."""
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    if _resolve(backend) == "python":
        return _pykernels.iterate(system, x0, noise)
    return _ext.iterate(system.code, np.ascontiguousarray(system.kernel_params, dtype=np.float64),
                        x0, noise, *_domain_arrays(system.domain))


def occupation(system, x0, noise, bins, counts, skip=0, backend=None) -> np.ndarray:
    """Add the visits of ``x_skip .. x_{n-1}`` to the flat ``counts`` array; return ``x_n``."""
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    bins = np.ascontiguousarray(bins, dtype=np.int64)
    if _resolve(backend) == "python":
        return _pykernels.occupation(system, x0, noise, bins, skip, counts)
    return _ext.occupation(system.code, np.ascontiguousarray(system.kernel_params, dtype=np.float64),
                           x0, noise, *_domain_arrays(system.domain), bins, int(skip), counts)
