"""Reduced words in a finitely generated free group and endomorphisms.

A word is a tuple of nonzero ints (letter ``i`` = i-th generator, ``-i`` its
inverse), always freely reduced; the empty tuple is the identity.  Generators
are numbered 1..n internally; a name table maps user strings like ``x1`` to
indices.  All values are immutable and all operations pure.
"""

from dataclasses import dataclass, field

from chaintorque._wordops import apply_images, invert_word, mul_words, reduce_word

IDENTITY = ()


class MalformedWordError(ValueError):
    pass


class RankMismatchError(ValueError):
    pass


class MissingInverseError(ValueError):
    """An operation needed the inverse automorphism but no inverse images
    were supplied (they are user input, never computed)."""


def check_word(w, rank):
    """Validate letter indices against ``rank``; returns ``w``."""
    for x in w:
        if x == 0 or abs(x) > rank:
            raise MalformedWordError(f"letter {x} out of range for rank {rank}")
    return w


def reduce(raw, rank=None):
    """Freely reduce a raw letter sequence into a word.

    Idempotent and length-nonincreasing; raises MalformedWordError on a
    zero letter or an index above ``rank`` (when given).
    """
    raw = tuple(raw)
    if rank is not None:
        check_word(raw, rank)
    elif any(x == 0 for x in raw):
        raise MalformedWordError("letter 0 is not a generator")
    return reduce_word(raw)


def multiply(a, b):
    """Reduced product of two reduced words."""
    return mul_words(a, b)


def invert(a):
    return invert_word(a)


def conjugate(a, g):
    """g^-1 a g."""
    return mul_words(mul_words(invert_word(g), a), g)


def letter_key(x):
    # +i sorts before -i; indices ascending
    return (abs(x), 0 if x > 0 else 1)


def word_key(w):
    """Canonical order: length, then lexicographic on (index, sign)."""
    return (len(w), tuple(letter_key(x) for x in w))


def ball_enumerate(rank, radius):
    """Yield each reduced word of length <= radius exactly once, in
    length-then-lexicographic order."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    letters = sorted(
        [i for i in range(1, rank + 1)] + [-i for i in range(1, rank + 1)],
        key=letter_key,
    )
    layer = [IDENTITY]
    yield IDENTITY
    for _ in range(radius):
        nxt = []
        for w in layer:
            last = w[-1] if w else 0
            for x in letters:
                if x != -last:
                    nxt.append(w + (x,))
        # per-layer sort keeps the global length-then-lex order
        nxt.sort(key=word_key)
        for w in nxt:
            yield w
        layer = nxt


def ball_size(rank, radius):
    """Closed form 1 + sum_{l=1..r} 2n(2n-1)^(l-1)."""
    if radius == 0 or rank == 0:
        return 1
    total = 1
    for length in range(1, radius + 1):
        total += 2 * rank * (2 * rank - 1) ** (length - 1)
    return total


@dataclass(frozen=True)
class FreeEndomorphism:
    """Generator-image map on the rank-n free group.

    ``inverse_images`` is user-supplied when the endomorphism is known to be
    an automorphism; operations needing the inverse fail without it.
    """

    rank: int
    images: tuple
    inverse_images: tuple = None
    _image_inverses: tuple = field(init=False, repr=False, compare=False, default=None)
    _inverse_inverses: tuple = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.rank <= 0:
            raise ValueError("rank must be positive")
        if len(self.images) != self.rank:
            raise RankMismatchError(
                f"{len(self.images)} images for rank {self.rank}"
            )
        images = tuple(reduce(w, self.rank) for w in self.images)
        object.__setattr__(self, "images", images)
        object.__setattr__(
            self, "_image_inverses", tuple(invert_word(w) for w in images)
        )
        if self.inverse_images is not None:
            inv = tuple(reduce(w, self.rank) for w in self.inverse_images)
            if len(inv) != self.rank:
                raise RankMismatchError("inverse image count != rank")
            object.__setattr__(self, "inverse_images", inv)
            object.__setattr__(
                self, "_inverse_inverses", tuple(invert_word(w) for w in inv)
            )
            for i in range(1, self.rank + 1):
                there_back = apply_images(images, self._image_inverses, inv[i - 1])
                back_there = apply_images(inv, self._inverse_inverses, images[i - 1])
                if there_back != (i,) or back_there != (i,):
                    raise ValueError(
                        f"inverse images do not invert the endomorphism on x{i}"
                    )

    @property
    def has_inverse(self):
        return self.inverse_images is not None

    def apply(self, w):
        """Image of a word; a homomorphism."""
        check_word(w, self.rank)
        return apply_images(self.images, self._image_inverses, w)

    def apply_inverse(self, w):
        if self.inverse_images is None:
            raise MissingInverseError(
                "inverse images not supplied (add an 'invimages' section)"
            )
        check_word(w, self.rank)
        return apply_images(self.inverse_images, self._inverse_inverses, w)

    def apply_power(self, w, m):
        """Phi^m(w) for any integer m (negative powers need inverse images)."""
        if m >= 0:
            for _ in range(m):
                w = self.apply(w)
        else:
            for _ in range(-m):
                w = self.apply_inverse(w)
        return w

    def inverse(self):
        """The inverse automorphism as a FreeEndomorphism."""
        if self.inverse_images is None:
            raise MissingInverseError("inverse images not supplied")
        return FreeEndomorphism(self.rank, self.inverse_images, self.images)

    def compose(self, other):
        """self after other: (self.compose(other))(w) = self(other(w))."""
        if self.rank != other.rank:
            raise RankMismatchError("composing endomorphisms of different rank")
        images = tuple(self.apply(w) for w in other.images)
        inverse_images = None
        if self.inverse_images is not None and other.inverse_images is not None:
            inverse_images = tuple(
                other.apply_inverse(w) for w in self.inverse_images
            )
        return FreeEndomorphism(self.rank, images, inverse_images)

    @classmethod
    def identity(cls, rank):
        gens = tuple((i,) for i in range(1, rank + 1))
        return cls(rank, gens, gens)


def apply_endo(phi, w):
    """Image of ``w`` under the endomorphism."""
    return phi.apply(w)


# --- text syntax -----------------------------------------------------------
#
# Words are whitespace-separated tokens: a generator name, or a name with an
# integer power suffix like x1^-1 or x2^3; the bare token "e" is the identity.

def default_names(rank):
    return tuple(f"x{i}" for i in range(1, rank + 1))


def word_from_text(text, names):
    """Parse the whitespace-separated word syntax against a name table."""
    index = {name: i + 1 for i, name in enumerate(names)}
    letters = []
    for token in text.split():
        if token == "e":
            continue
        name, _, power = token.partition("^")
        if name not in index:
            raise MalformedWordError(f"unknown generator {name!r}")
        try:
            exp = int(power) if power else 1
        except ValueError:
            raise MalformedWordError(f"bad exponent in token {token!r}") from None
        i = index[name]
        letters.extend([i if exp > 0 else -i] * abs(exp))
    return reduce_word(tuple(letters))


def word_to_text(w, names=None):
    """Format a word; run-length collapses powers (x1 x1 -> x1^2)."""
    if not w:
        return "e"
    if names is None:
        names = default_names(max(abs(x) for x in w))
    parts = []
    run_letter, run_len = w[0], 1
    for x in w[1:]:
        if x == run_letter:
            run_len += 1
        else:
            parts.append(_format_run(run_letter, run_len, names))
            run_letter, run_len = x, 1
    parts.append(_format_run(run_letter, run_len, names))
    return " ".join(parts)


def _format_run(letter, count, names):
    name = names[abs(letter) - 1]
    exp = count if letter > 0 else -count
    return name if exp == 1 else f"{name}^{exp}"
