"""Hot per-frame kernels: 3x3 blur, 3x3 morphology, projective warp.

The compiled Cython backend is picked at import time when available; the
NumPy fallback is selected otherwise, or when ``AGVLAB_PURE=1`` is set.
Both produce identical output.
"""

import os

if os.environ.get("AGVLAB_PURE") == "1":
    from agvlab.kernels._pure import BACKEND, blur3, morph3, warp_bilinear
else:
    try:
        from agvlab.kernels._core import BACKEND, blur3, morph3, warp_bilinear
    except ImportError:  # extension not built
        from agvlab.kernels._pure import BACKEND, blur3, morph3, warp_bilinear

__all__ = ["BACKEND", "blur3", "morph3", "warp_bilinear"]
