"""Word-kernel selector: compiled extension if importable, else pure Python.

Set CHAINTORQUE_PURE=1 to force the pure-Python kernels (used by the
benchmark and as an escape hatch on platforms without a C compiler).
"""

import os

if os.environ.get("CHAINTORQUE_PURE") == "1":
    from chaintorque._convolve_py import GroupConvolver
    from chaintorque._wordops_py import (
        IMPLEMENTATION,
        apply_images,
        invert_word,
        mul_words,
        reduce_word,
    )
else:
    try:
        from chaintorque._speedups import (
            IMPLEMENTATION,
            GroupConvolver,
            apply_images,
            invert_word,
            mul_words,
            reduce_word,
        )
    except ImportError:
        from chaintorque._convolve_py import GroupConvolver
        from chaintorque._wordops_py import (
            IMPLEMENTATION,
            apply_images,
            invert_word,
            mul_words,
            reduce_word,
        )

__all__ = [
    "IMPLEMENTATION",
    "GroupConvolver",
    "apply_images",
    "invert_word",
    "mul_words",
    "reduce_word",
]
