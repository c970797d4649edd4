"""Pure-Python group-ring convolution kernel; twin of the compiled
GroupConvolver in chaintorque._speedups.

Elements are packed int keys (word_id << 12) | (m + 2048) over an interned
word table; word products and monodromy twists are memoized on word ids.
"""

from chaintorque._wordops_py import apply_images, invert_word, mul_words

M_BITS = 12
M_OFFSET = 2048


class GroupConvolver:
    def __init__(self, images=None, inv_images=None, cap=None, working_cap=None):
        self.word_list = [()]
        self.word_index = {(): 0}
        self.mul_cache = {}
        self.twist_cache = {}
        self.images = tuple(images) if images is not None else None
        self.image_invs = (
            tuple(invert_word(w) for w in self.images) if images is not None else None
        )
        if images is not None and inv_images is not None:
            self.inv_images = tuple(inv_images)
            self.inv_invs = tuple(invert_word(w) for w in self.inv_images)
        else:
            self.inv_images = None
            self.inv_invs = None
        self.cap = cap
        self.working_cap = working_cap
        self.truncated = False

    def intern(self, w):
        idx = self.word_index.get(w)
        if idx is None:
            idx = len(self.word_list)
            self.word_list.append(w)
            self.word_index[w] = idx
        return idx

    def pack(self, w, m):
        return (self.intern(w) << 12) | (m + 2048)

    def unpack(self, key):
        return self.word_list[key >> 12], (key & 4095) - 2048

    def _twist(self, wid, e):
        if e == 0 or self.images is None:
            return wid
        key = ((e + 2048) << 34) | wid
        hit = self.twist_cache.get(key)
        if hit is not None:
            return hit
        step = 1 if e > 0 else -1
        prev = self._twist(wid, e - step)
        if prev < 0:
            result = -1
        else:
            if step > 0:
                ims, invs = self.images, self.image_invs
            else:
                if self.inv_images is None:
                    raise ValueError("negative twist needs inverse images")
                ims, invs = self.inv_images, self.inv_invs
            w = apply_images(ims, invs, self.word_list[prev])
            if self.cap is not None and len(w) > self.working_cap:
                result = -1
            else:
                result = self.intern(w)
        self.twist_cache[key] = result
        return result

    def _mul(self, ida, idb):
        if ida == 0:
            return idb
        if idb == 0:
            return ida
        key = (ida << 34) | idb
        hit = self.mul_cache.get(key)
        if hit is not None:
            return hit
        w = mul_words(self.word_list[ida], self.word_list[idb])
        if self.cap is not None and len(w) > self.cap:
            result = -1
        else:
            result = self.intern(w)
        self.mul_cache[key] = result
        return result

    def convolve(self, acc, a, b, max_m=None):
        has_twist = self.images is not None
        twist = self._twist
        mul = self._mul
        get = acc.get
        for ka, ca in a.items():
            wa = ka >> 12
            ma = (ka & 4095) - 2048
            for kb, cb in b.items():
                m = ma + (kb & 4095) - 2048
                if max_m is not None and (m > max_m or m < -max_m):
                    continue
                wb = kb >> 12
                tw = twist(wb, -ma) if has_twist else wb
                if tw < 0:
                    self.truncated = True
                    continue
                wid = mul(wa, tw)
                if wid < 0:
                    self.truncated = True
                    continue
                key = (wid << 12) | (m + 2048)
                cur = get(key)
                if cur is None:
                    acc[key] = ca * cb
                else:
                    cur = cur + ca * cb
                    if cur:
                        acc[key] = cur
                    else:
                        del acc[key]
        return acc

    def dot(self, a, b):
        if len(a) > len(b):
            a, b = b, a
        total = 0
        bget = b.get
        for k, c in a.items():
            d = bget(k)
            if d is not None:
                total += c * d
        return total

    def sum_squares(self, a):
        total = 0
        for c in a.values():
            total += c * c
        return total
