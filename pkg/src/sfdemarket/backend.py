"""Stepping-backend selection: compiled kernel when built, numpy otherwise.

``BACKEND`` names the active implementation and is recorded in every
output manifest. Set ``SFDEMARKET_BACKEND=numpy`` to force the fallback
(useful for benchmarking and debugging); anything else, or an unbuilt
extension, resolves automatically.
"""

from __future__ import annotations

import os

from . import _reference

eval_nodes = _reference.eval_nodes

if os.environ.get("SFDEMARKET_BACKEND", "").lower() == "numpy":
    simulate_chunk = _reference.simulate_chunk
    BACKEND = "numpy"
else:
    try:
        from . import _native

        simulate_chunk = _native.simulate_chunk
        BACKEND = "native"
    except ImportError:
        simulate_chunk = _reference.simulate_chunk
        BACKEND = "numpy"
