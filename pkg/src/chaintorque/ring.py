"""Exact rational group-ring arithmetic over Z = <t>, a free group, or a
free-by-cyclic group F x| <t>.

Free-by-cyclic elements are kept in the normal form w * t^m with the
defining relation t^-1 x t = Phi(x), so t^m w' = Phi^-m(w') t^m; moving a
word left past t^m applies inverse images for m > 0 and Phi for m < 0.
"""

from fractions import Fraction

from chaintorque import words
from chaintorque.words import IDENTITY, FreeEndomorphism, MissingInverseError


class ContextMismatchError(ValueError):
    pass


class IntegersContext:
    """The infinite cyclic group <t>; elements are exponents."""

    kind = "integers"
    identity = 0

    def mul(self, a, b):
        return a + b

    def inv(self, a):
        return -a

    def t_degree(self, a):
        return a

    def word_size(self, a):
        return 0

    def format(self, a, names=None):
        if a == 0:
            return "e"
        return "t" if a == 1 else f"t^{a}"

    def __eq__(self, other):
        return isinstance(other, IntegersContext)

    def __hash__(self):
        return hash("integers")


class FreeContext:
    """A free group of the given rank; elements are reduced words."""

    kind = "free"
    identity = IDENTITY

    def __init__(self, rank, names=None):
        self.rank = rank
        self.names = tuple(names) if names else words.default_names(rank)

    def mul(self, a, b):
        return words.multiply(a, b)

    def inv(self, a):
        return words.invert(a)

    def t_degree(self, a):
        return None

    def word_size(self, a):
        return len(a)

    def format(self, a, names=None):
        return words.word_to_text(a, names or self.names)

    def __eq__(self, other):
        return isinstance(other, FreeContext) and other.rank == self.rank

    def __hash__(self):
        return hash(("free", self.rank))


class FreeByCyclicContext:
    """F x|_Phi <t> in normal form (w, m) = w t^m; Phi must come with
    inverse images (negative t-shifts need them)."""

    kind = "fbc"

    def __init__(self, phi: FreeEndomorphism, names=None):
        if not phi.has_inverse:
            raise MissingInverseError(
                "free-by-cyclic arithmetic needs inverse images for the "
                "monodromy (supply 'invimages' lines)"
            )
        self.phi = phi
        self.rank = phi.rank
        self.names = tuple(names) if names else words.default_names(phi.rank)
        self.identity = (IDENTITY, 0)
        self._twist_cache = {(0, IDENTITY): IDENTITY}

    def twist(self, w, m):
        """Phi^m(w), cached."""
        key = (m, w)
        cached = self._twist_cache.get(key)
        if cached is None and key not in self._twist_cache:
            cached = self.phi.apply_power(w, m)
            self._twist_cache[key] = cached
        return cached

    def twist_capped(self, w, m, cap):
        """Phi^m(w) or None once any iterate exceeds the working cap."""
        key = (m, w, cap)
        if key in self._twist_cache:
            return self._twist_cache[key]
        step = 1 if m >= 0 else -1
        cur = w
        for _ in range(abs(m)):
            cur = self.phi.apply(cur) if step > 0 else self.phi.apply_inverse(cur)
            if len(cur) > cap:
                cur = None
                break
        self._twist_cache[key] = cur
        return cur

    def mul(self, a, b):
        (w1, m1), (w2, m2) = a, b
        return (words.multiply(w1, self.twist(w2, -m1)), m1 + m2)

    def inv(self, a):
        w, m = a
        return (self.twist(words.invert(w), m), -m)

    def t_degree(self, a):
        return a[1]

    def word_size(self, a):
        return len(a[0])

    def format(self, a, names=None):
        w, m = a
        parts = []
        if w:
            parts.append(words.word_to_text(w, names or self.names))
        if m:
            parts.append("t" if m == 1 else f"t^{m}")
        return " ".join(parts) if parts else "e"

    def __eq__(self, other):
        return isinstance(other, FreeByCyclicContext) and other.phi == self.phi

    def __hash__(self):
        return hash(("fbc", self.phi.images))


def _check_context(a, b):
    if a.context != b.context:
        raise ContextMismatchError("ring elements from different contexts")


class RingElement:
    """Finitely supported map group element -> nonzero Fraction."""

    __slots__ = ("context", "terms")

    def __init__(self, context, terms=None):
        self.context = context
        self.terms = {}
        if terms:
            for g, c in terms.items():
                c = c if isinstance(c, Fraction) else Fraction(c)
                if c:
                    self.terms[g] = c

    @classmethod
    def zero(cls, context):
        return cls(context)

    @classmethod
    def scalar(cls, context, c):
        return cls(context, {context.identity: c})

    @classmethod
    def of(cls, context, g, c=1):
        return cls(context, {g: c})

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        return (
            isinstance(other, RingElement)
            and self.context == other.context
            and self.terms == other.terms
        )

    def __add__(self, other):
        _check_context(self, other)
        out = dict(self.terms)
        for g, c in other.terms.items():
            s = out.get(g, 0) + c
            if s:
                out[g] = s
            else:
                out.pop(g, None)
        el = RingElement.__new__(RingElement)
        el.context, el.terms = self.context, out
        return el

    def __neg__(self):
        el = RingElement.__new__(RingElement)
        el.context = self.context
        el.terms = {g: -c for g, c in self.terms.items()}
        return el

    def __sub__(self, other):
        return self + (-other)

    def scale(self, q):
        q = q if isinstance(q, Fraction) else Fraction(q)
        if not q:
            return RingElement.zero(self.context)
        el = RingElement.__new__(RingElement)
        el.context = self.context
        el.terms = {g: c * q for g, c in self.terms.items()}
        return el

    def mul(self, other):
        """Bilinear convolution with the context's group law."""
        _check_context(self, other)
        ctx = self.context
        out = {}
        for g1, c1 in self.terms.items():
            for g2, c2 in other.terms.items():
                g = ctx.mul(g1, g2)
                s = out.get(g, 0) + c1 * c2
                if s:
                    out[g] = s
                else:
                    out.pop(g, None)
        el = RingElement.__new__(RingElement)
        el.context, el.terms = ctx, out
        return el

    __mul__ = mul

    def involution(self):
        """sum c_g g  ->  sum c_g g^-1 (rational coefficients)."""
        ctx = self.context
        el = RingElement.__new__(RingElement)
        el.context = ctx
        el.terms = {ctx.inv(g): c for g, c in self.terms.items()}
        return el

    def identity_coefficient(self):
        return self.terms.get(self.context.identity, Fraction(0))

    def l1_mass(self):
        return sum((abs(c) for c in self.terms.values()), Fraction(0))

    def format(self, names=None):
        if not self.terms:
            return "0"
        parts = []
        for g, c in sorted(self.terms.items(), key=lambda kv: repr(kv[0])):
            parts.append(f"{c}*{self.context.format(g, names)}")
        return " + ".join(parts)

    def __repr__(self):
        return f"RingElement({self.format()})"


def ring_mul(a, b, ctx=None):
    if ctx is not None and (a.context != ctx or b.context != ctx):
        raise ContextMismatchError("element context differs from the given one")
    return a.mul(b)


class RingMatrix:
    """Rectangular matrix of ring elements over a shared context."""

    __slots__ = ("context", "entries")

    def __init__(self, context, entries):
        self.context = context
        self.entries = [list(row) for row in entries]
        width = {len(row) for row in self.entries}
        if len(width) > 1:
            raise ValueError("ragged matrix")
        for row in self.entries:
            for el in row:
                if el.context != context:
                    raise ContextMismatchError("entry context differs")

    @classmethod
    def identity(cls, context, n):
        return cls(
            context,
            [
                [
                    RingElement.scalar(context, 1 if i == j else 0)
                    for j in range(n)
                ]
                for i in range(n)
            ],
        )

    @classmethod
    def zero(cls, context, rows, cols):
        return cls(
            context,
            [[RingElement.zero(context) for _ in range(cols)] for _ in range(rows)],
        )

    @property
    def rows(self):
        return len(self.entries)

    @property
    def cols(self):
        return len(self.entries[0]) if self.entries else 0

    def __eq__(self, other):
        return (
            isinstance(other, RingMatrix)
            and self.context == other.context
            and self.entries == other.entries
        )

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __add__(self, other):
        _check_context(self, other)
        return RingMatrix(
            self.context,
            [
                [a + b for a, b in zip(r1, r2)]
                for r1, r2 in zip(self.entries, other.entries)
            ],
        )

    def __sub__(self, other):
        _check_context(self, other)
        return RingMatrix(
            self.context,
            [
                [a - b for a, b in zip(r1, r2)]
                for r1, r2 in zip(self.entries, other.entries)
            ],
        )

    def scale(self, q):
        return RingMatrix(
            self.context, [[el.scale(q) for el in row] for row in self.entries]
        )

    def mul(self, other):
        _check_context(self, other)
        if self.cols != other.rows:
            raise ValueError("matrix dimension mismatch")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = RingElement.zero(self.context)
                for k in range(self.cols):
                    a = self.entries[i][k]
                    b = other.entries[k][j]
                    if a and b:
                        acc = acc + a.mul(b)
                row.append(acc)
            out.append(row)
        return RingMatrix(self.context, out)

    __mul__ = mul

    def power(self, k):
        if self.rows != self.cols:
            raise ValueError("powers need a square matrix")
        result = RingMatrix.identity(self.context, self.rows)
        for _ in range(k):
            result = result.mul(self)
        return result


def adjoint(M):
    """Transpose with entrywise involution."""
    out = [
        [M.entries[i][j].involution() for i in range(M.rows)]
        for j in range(M.cols)
    ]
    return RingMatrix(M.context, out)


def trace(M):
    """Sum of identity-element coefficients along the diagonal."""
    if M.rows != M.cols:
        raise ValueError("trace needs a square matrix")
    return sum(
        (M.entries[i][i].identity_coefficient() for i in range(M.rows)),
        Fraction(0),
    )


def norm_upper_bound(M):
    """Row bound: max over rows of the summed entrywise l1 masses."""
    if not M.entries:
        return Fraction(0)
    return max(
        sum((el.l1_mass() for el in row), Fraction(0)) for row in M.entries
    )


def operator_norm_bound(M):
    """max(row bound, column bound); dominates the Schur-test norm bound
    sqrt(row * col) for the right-multiplication operator."""
    return max(norm_upper_bound(M), norm_upper_bound(adjoint(M)))


def moments(M, kmax):
    """Exact tr(M^k) for 0 <= k <= kmax (moment 0 is the dimension)."""
    if M.rows != M.cols:
        raise ValueError("moments need a square matrix")
    out = [Fraction(M.rows)]
    power = RingMatrix.identity(M.context, M.rows)
    for _ in range(kmax):
        power = power.mul(M)
        out.append(trace(power))
    return out


# --- .rm matrix files --------------------------------------------------------

def parse_ring_matrix(text, gm_loader=None):
    """Parse the .rm format.

    Header: ``context z`` | ``context free <n>`` | ``context fbc <gm-file>``;
    entries: ``entry <i> <j> <coeff> <word tokens> [t^<m>]`` (1-based).
    """
    ctx = None
    names = None
    entries = {}
    max_i = max_j = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "context":
            if len(fields) < 2:
                raise ValueError(f"line {lineno}: incomplete context")
            kind = fields[1]
            if kind == "z":
                ctx = IntegersContext()
            elif kind == "free":
                ctx = FreeContext(int(fields[2]))
                names = ctx.names
            elif kind == "fbc":
                if gm_loader is None:
                    raise ValueError(f"line {lineno}: fbc context needs a loader")
                gm = gm_loader(fields[2])
                from chaintorque.graphs import induced_automorphism

                phi = induced_automorphism(gm)
                ctx = FreeByCyclicContext(phi, names=gm.graph.generator_names)
                names = ctx.names
            else:
                raise ValueError(f"line {lineno}: unknown context {kind!r}")
        elif fields[0] == "entry":
            if ctx is None:
                raise ValueError(f"line {lineno}: entry before context")
            if len(fields) < 5:
                raise ValueError(
                    f"line {lineno}: entry wants i j coeff word [t^m]"
                )
            i, j = int(fields[1]), int(fields[2])
            coeff = Fraction(fields[3])
            tokens = fields[4:]
            tshift = 0
            if ctx.kind != "free" and tokens and _is_t_token(tokens[-1]):
                tshift = _t_exponent(tokens[-1])
                tokens = tokens[:-1]
            if ctx.kind == "integers":
                if any(t != "e" for t in tokens):
                    raise ValueError(f"line {lineno}: z context admits only t powers")
                elem = tshift
            else:
                w = words.word_from_text(" ".join(tokens) if tokens else "e", names)
                elem = w if ctx.kind == "free" else (w, tshift)
            key = (i - 1, j - 1)
            entries[key] = entries.get(key, RingElement.zero(ctx)) + RingElement.of(
                ctx, elem, coeff
            )
            max_i, max_j = max(max_i, i), max(max_j, j)
        else:
            raise ValueError(f"line {lineno}: unknown directive {fields[0]!r}")
    if ctx is None:
        raise ValueError("no context line")
    matrix = RingMatrix.zero(ctx, max_i, max_j)
    for (i, j), el in entries.items():
        matrix.entries[i][j] = el
    return matrix


def _is_t_token(token):
    return token == "t" or token.startswith("t^")


def _t_exponent(token):
    return 1 if token == "t" else int(token[2:])
