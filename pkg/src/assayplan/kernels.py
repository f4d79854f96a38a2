"""Backend selection for the belief hot kernels.

Tries the compiled Cython extension first and falls back to the numpy
implementation.  ``ASSAYPLAN_FORCE_PY=1`` forces the fallback (used by the
backend-equivalence tests and the benchmark script).
"""

import os

if os.environ.get("ASSAYPLAN_FORCE_PY") == "1":
    from assayplan import _kernels_py as _impl
else:
    try:
        from assayplan import _kernels_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from assayplan import _kernels_py as _impl

BACKEND = _impl.BACKEND
distance_accumulate = _impl.distance_accumulate
weights_from_distances = _impl.weights_from_distances
target_stats = _impl.target_stats
sample_index = _impl.sample_index
