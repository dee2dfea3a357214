"""Pick the compiled kernels when available, else the numpy fallback.

Set ``AQUANNR_PURE=1`` to force the fallback (used by the tests and the
kernel benchmark to exercise both paths).
"""

import os

from . import _fallback

fallback = _fallback
compiled = None

if os.environ.get("AQUANNR_PURE", "") not in ("", "0"):
    kernels = _fallback
else:
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        kernels = _fallback
    else:
        kernels = compiled

COMPILED = kernels is not _fallback
