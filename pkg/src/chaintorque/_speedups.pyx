# cython: boundscheck=False, wraparound=False, language_level=3
"""Compiled word kernels; behavioural twin of chaintorque._wordops_py.

Words are tuples of nonzero Python ints with values that fit in a C long
(generator counts are tiny in practice).  Letters are staged into C buffers,
reduced there, and rebuilt as tuples.  GroupConvolver is the group-ring
convolution kernel (twin: chaintorque._convolve_py).
"""

from cpython.tuple cimport PyTuple_GET_ITEM, PyTuple_GET_SIZE, PyTuple_New, PyTuple_SET_ITEM
from cpython.ref cimport Py_INCREF
from libc.stdlib cimport free, malloc

IMPLEMENTATION = "cython"

M_BITS = 12
M_OFFSET = 2048


cdef inline tuple _from_buffer(long* buf, Py_ssize_t n):
    cdef tuple out = PyTuple_New(n)
    cdef Py_ssize_t i
    cdef object v
    for i in range(n):
        v = buf[i]
        Py_INCREF(v)
        PyTuple_SET_ITEM(out, i, v)
    return out


def reduce_word(letters):
    """Freely reduce a letter sequence."""
    cdef tuple t = tuple(letters)
    cdef Py_ssize_t n = PyTuple_GET_SIZE(t)
    if n == 0:
        return ()
    cdef long* buf = <long*> malloc(n * sizeof(long))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t top = 0
    cdef Py_ssize_t i
    cdef long x
    try:
        for i in range(n):
            x = <object> PyTuple_GET_ITEM(t, i)
            if top > 0 and buf[top - 1] == -x:
                top -= 1
            else:
                buf[top] = x
                top += 1
        return _from_buffer(buf, top)
    finally:
        free(buf)


def mul_words(tuple a, tuple b):
    """Product of two already-reduced words (cancellation at the seam only)."""
    cdef Py_ssize_t na = PyTuple_GET_SIZE(a)
    cdef Py_ssize_t nb = PyTuple_GET_SIZE(b)
    cdef Py_ssize_t i = na
    cdef Py_ssize_t j = 0
    cdef long xa, xb
    while i > 0 and j < nb:
        xa = <object> PyTuple_GET_ITEM(a, i - 1)
        xb = <object> PyTuple_GET_ITEM(b, j)
        if xa != -xb:
            break
        i -= 1
        j += 1
    if j == 0:
        if i == na:
            if nb == 0:
                return a
            if na == 0:
                return b
            return a + b
        return a[:i] + b
    if i == 0:
        return b[j:]
    return a[:i] + b[j:]


def invert_word(tuple a):
    """Inverse of a reduced word."""
    cdef Py_ssize_t n = PyTuple_GET_SIZE(a)
    cdef tuple out = PyTuple_New(n)
    cdef Py_ssize_t i
    cdef long x
    cdef object v
    for i in range(n):
        x = <object> PyTuple_GET_ITEM(a, n - 1 - i)
        v = -x
        Py_INCREF(v)
        PyTuple_SET_ITEM(out, i, v)
    return out


def apply_images(tuple images, tuple inverses, tuple w):
    """Substitute generator images into ``w`` and reduce."""
    cdef Py_ssize_t nw = PyTuple_GET_SIZE(w)
    if nw == 0:
        return ()
    # total output length is bounded by the sum of piece lengths
    cdef Py_ssize_t cap = 0
    cdef Py_ssize_t i, k, np
    cdef long x, y
    cdef tuple piece
    for i in range(nw):
        x = <object> PyTuple_GET_ITEM(w, i)
        piece = <tuple> PyTuple_GET_ITEM(images, x - 1) if x > 0 \
            else <tuple> PyTuple_GET_ITEM(inverses, -x - 1)
        cap += PyTuple_GET_SIZE(piece)
    if cap == 0:
        return ()
    cdef long* buf = <long*> malloc(cap * sizeof(long))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t top = 0
    try:
        for i in range(nw):
            x = <object> PyTuple_GET_ITEM(w, i)
            piece = <tuple> PyTuple_GET_ITEM(images, x - 1) if x > 0 \
                else <tuple> PyTuple_GET_ITEM(inverses, -x - 1)
            np = PyTuple_GET_SIZE(piece)
            for k in range(np):
                y = <object> PyTuple_GET_ITEM(piece, k)
                if top > 0 and buf[top - 1] == -y:
                    top -= 1
                else:
                    buf[top] = y
                    top += 1
        return _from_buffer(buf, top)
    finally:
        free(buf)


cdef tuple _mul_tuples(tuple a, tuple b):
    cdef Py_ssize_t na = PyTuple_GET_SIZE(a)
    cdef Py_ssize_t nb = PyTuple_GET_SIZE(b)
    cdef Py_ssize_t i = na
    cdef Py_ssize_t j = 0
    cdef long xa, xb
    while i > 0 and j < nb:
        xa = <object> PyTuple_GET_ITEM(a, i - 1)
        xb = <object> PyTuple_GET_ITEM(b, j)
        if xa != -xb:
            break
        i -= 1
        j += 1
    return a[:i] + b[j:]


cdef class GroupConvolver:
    """Group-ring convolution over w * t^m normal forms.

    Elements are packed int keys (word_id << 12) | (m + 2048); word products
    and monodromy twists are memoized on interned word ids.  ``images`` is
    None for contexts without a twist (Z, free groups); ``cap`` bounds the
    word length of retained products (None = exact).
    """

    cdef public list word_list
    cdef dict word_index
    cdef dict mul_cache
    cdef dict twist_cache
    cdef object images, image_invs, inv_images, inv_invs
    cdef long cap, working_cap
    cdef public bint truncated
    cdef bint has_cap, has_twist

    def __init__(self, images=None, inv_images=None, cap=None, working_cap=None):
        self.word_list = [()]
        self.word_index = {(): 0}
        self.mul_cache = {}
        self.twist_cache = {}
        self.has_twist = images is not None
        if self.has_twist:
            self.images = tuple(images)
            self.image_invs = tuple(
                tuple(-x for x in reversed(w)) for w in self.images
            )
            if inv_images is None:
                self.inv_images = None
                self.inv_invs = None
            else:
                self.inv_images = tuple(inv_images)
                self.inv_invs = tuple(
                    tuple(-x for x in reversed(w)) for w in self.inv_images
                )
        self.has_cap = cap is not None
        self.cap = cap if cap is not None else 0
        self.working_cap = working_cap if working_cap is not None else 0
        self.truncated = False

    cpdef long intern(self, w):
        cdef object idx = self.word_index.get(w)
        if idx is not None:
            return <long> idx
        cdef long n = len(self.word_list)
        self.word_list.append(w)
        self.word_index[w] = n
        return n

    def pack(self, w, long m):
        return (self.intern(w) << 12) | (m + 2048)

    def unpack(self, long key):
        return self.word_list[key >> 12], (key & 4095) - 2048

    cdef long _twist(self, long wid, long e) except -2:
        """Word id of Phi^e applied to word wid; -1 when capped away."""
        if e == 0 or not self.has_twist:
            return wid
        cdef long key = ((e + 2048) << 34) | wid
        cdef object hit = self.twist_cache.get(key)
        if hit is not None:
            return <long> hit
        cdef long step = 1 if e > 0 else -1
        cdef long prev = self._twist(wid, e - step)
        cdef long result
        cdef tuple w, piece
        cdef list out
        cdef Py_ssize_t i, k, np
        cdef long x, y
        if prev < 0:
            result = -1
        else:
            w = <tuple> self.word_list[prev]
            if step > 0:
                if self.images is None:
                    raise ValueError("twist without images")
                ims, invs = self.images, self.image_invs
            else:
                if self.inv_images is None:
                    raise ValueError(
                        "negative twist needs inverse images"
                    )
                ims, invs = self.inv_images, self.inv_invs
            out = []
            for i in range(PyTuple_GET_SIZE(w)):
                x = <object> PyTuple_GET_ITEM(w, i)
                piece = <tuple> (ims[x - 1] if x > 0 else invs[-x - 1])
                np = PyTuple_GET_SIZE(piece)
                for k in range(np):
                    y = <object> PyTuple_GET_ITEM(piece, k)
                    if out and out[len(out) - 1] == -y:
                        out.pop()
                    else:
                        out.append(y)
            if self.has_cap and len(out) > self.working_cap:
                result = -1
            else:
                result = self.intern(tuple(out))
        self.twist_cache[key] = result
        return result

    cdef long _mul(self, long ida, long idb) except -2:
        if ida == 0:
            return idb
        if idb == 0:
            return ida
        cdef long key = (ida << 34) | idb
        cdef object hit = self.mul_cache.get(key)
        if hit is not None:
            return <long> hit
        cdef tuple w = _mul_tuples(
            <tuple> self.word_list[ida], <tuple> self.word_list[idb]
        )
        cdef long result
        if self.has_cap and PyTuple_GET_SIZE(w) > self.cap:
            result = -1
        else:
            result = self.intern(w)
        self.mul_cache[key] = result
        return result

    def convolve(self, dict acc, dict a, dict b, max_m=None):
        """acc += a * b over packed keys; coefficients are Python numbers."""
        cdef long ka, kb, wa, wb, ma, mb, m, tw, wid, key
        cdef long mcap = -1
        cdef bint has_mcap = max_m is not None
        if has_mcap:
            mcap = max_m
        cdef object ca, cb, cur, prod
        for ka, ca in a.items():
            wa = ka >> 12
            ma = (ka & 4095) - 2048
            for kb, cb in b.items():
                mb = (kb & 4095) - 2048
                m = ma + mb
                if has_mcap and (m > mcap or m < -mcap):
                    continue
                wb = kb >> 12
                tw = self._twist(wb, -ma) if self.has_twist else wb
                if tw < 0:
                    self.truncated = True
                    continue
                wid = self._mul(wa, tw)
                if wid < 0:
                    self.truncated = True
                    continue
                key = (wid << 12) | (m + 2048)
                prod = ca * cb
                cur = acc.get(key)
                if cur is None:
                    acc[key] = prod
                else:
                    cur = cur + prod
                    if cur:
                        acc[key] = cur
                    else:
                        del acc[key]
        return acc

    def dot(self, dict a, dict b):
        """Pointwise coefficient dot product (for half-power odd traces)."""
        cdef object total = 0
        cdef long k
        cdef object c, d
        if len(a) > len(b):
            a, b = b, a
        for k, c in a.items():
            d = b.get(k)
            if d is not None:
                total = total + c * d
        return total

    def sum_squares(self, dict a):
        cdef object total = 0
        cdef object c
        for c in a.values():
            total = total + c * c
        return total
