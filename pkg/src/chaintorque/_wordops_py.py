"""Pure-Python word kernels.

Words are tuples of nonzero ints: letter ``i > 0`` is the i-th generator,
``-i`` its inverse.  Every function returns a freely reduced tuple.  The
compiled twin of this module is ``chaintorque._speedups``; keep the two in
lockstep.
"""

IMPLEMENTATION = "python"


def reduce_word(letters):
    """Freely reduce a letter sequence."""
    out = []
    push = out.append
    pop = out.pop
    for x in letters:
        if out and out[-1] == -x:
            pop()
        else:
            push(x)
    return tuple(out)


def mul_words(a, b):
    """Product of two already-reduced words (cancellation at the seam only)."""
    i = len(a)
    j = 0
    nb = len(b)
    while i > 0 and j < nb and a[i - 1] == -b[j]:
        i -= 1
        j += 1
    return a[:i] + b[j:]


def invert_word(a):
    """Inverse of a reduced word."""
    return tuple(-x for x in reversed(a))


def apply_images(images, inverses, w):
    """Substitute generator images into ``w`` and reduce.

    ``images[i-1]`` is the (reduced) image of generator ``i``; ``inverses``
    caches their inverses (same indexing).
    """
    out = []
    pop = out.pop
    for x in w:
        piece = images[x - 1] if x > 0 else inverses[-x - 1]
        for y in piece:
            if out and out[-1] == -y:
                pop()
            else:
                out.append(y)
    return tuple(out)
