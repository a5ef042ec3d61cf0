"""Hot numeric kernels with a compiled core and a pure-numpy fallback.

The compiled extension (``vimp.kernels._fast``, Cython) is preferred
when it was built; otherwise the numpy reference implementation is
used.  Set ``VIMP_PURE_PYTHON=1`` to force the fallback.  Both backends
are bit-identical by contract (see tests/test_kernels_parity.py) and
``benchmarks/bench_kernels.py`` compares their speed.
"""

import os

from . import _ref

if os.environ.get("VIMP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _ref
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _ref

BACKEND = _impl.BACKEND

sad_search = _impl.sad_search
quant_cost = _impl.quant_cost
quantize_blocks = _impl.quantize_blocks
splat_forward = _impl.splat_forward

__all__ = [
    "BACKEND",
    "sad_search",
    "quant_cost",
    "quantize_blocks",
    "splat_forward",
]
