"""Kernel backend selection.

The compiled extension is preferred; the pure-numpy fallback is used
when it is missing or when the environment variable JOINTCT_PURE_PYTHON
is set to a non-empty value.  ``benchmarks/bench_kernels.py`` compares
the two.
"""

import os

if os.environ.get("JOINTCT_PURE_PYTHON"):
    from . import _pure as _impl
else:
    try:
        from . import _core as _impl
    except ImportError:
        from . import _pure as _impl

BACKEND = _impl.BACKEND
trace_arc = _impl.trace_arc
line_chords = _impl.line_chords
