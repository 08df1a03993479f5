"""Sparse backup kernels with an optional compiled fast path.

The numpy implementations in ``_numpy`` are the reference and the
fallback.  When the Cython extension is importable it replaces the hot
functions; set ``PREFMDP_KERNELS=numpy`` to force the fallback.  The two
backends implement the same operations in the same order and agree to
within a few ulps per backup; each is deterministic on its own.
"""

import os

from . import _numpy
from ._numpy import sa_values

BACKEND = "numpy"
vi_sweep = _numpy.vi_sweep
greedy_sa = _numpy.greedy_sa
policy_sweep = _numpy.policy_sweep

if os.environ.get("PREFMDP_KERNELS", "").lower() not in ("numpy", "python"):
    try:
        from . import _speedups

        vi_sweep = _speedups.vi_sweep
        greedy_sa = _speedups.greedy_sa
        policy_sweep = _speedups.policy_sweep
        BACKEND = "cython"
    except ImportError:
        pass

__all__ = ["BACKEND", "greedy_sa", "policy_sweep", "sa_values", "vi_sweep"]
