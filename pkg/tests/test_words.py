import pytest
from hypothesis import given, strategies as st

from chaintorque import words
from chaintorque.words import (
    FreeEndomorphism,
    MalformedWordError,
    MissingInverseError,
    ball_enumerate,
    ball_size,
    multiply,
    reduce,
)


def w(*letters):
    return tuple(letters)


letters_st = st.integers(min_value=-3, max_value=3).filter(lambda x: x != 0)
raw_words_st = st.lists(letters_st, max_size=12).map(tuple)
words_st = raw_words_st.map(reduce)


class TestReduce:
    def test_identity_cancellation(self):
        assert reduce(w(1, -1)) == ()

    def test_single_cancellation(self):
        assert reduce(w(1, 2, -2, 3)) == w(1, 3)

    def test_nested_conjugate(self):
        # x2^-1 (x2 x1 x2^-1) x2 -> x1
        assert reduce(w(-2, 2, 1, -2, 2)) == w(1)

    def test_rank_check(self):
        with pytest.raises(MalformedWordError):
            reduce(w(1, 4), rank=3)
        with pytest.raises(MalformedWordError):
            reduce(w(0,))

    @given(raw_words_st)
    def test_idempotent_and_shorter(self, raw):
        reduced = reduce(raw)
        assert reduce(reduced) == reduced
        assert len(reduced) <= len(raw)


class TestMultiply:
    def test_seam_cancellation(self):
        assert multiply(w(1, 2), w(-2, 3)) == w(1, 3)

    def test_identity(self):
        assert multiply(w(1, 2), ()) == w(1, 2)
        assert multiply((), w(1, 2)) == w(1, 2)

    def test_inverse(self):
        assert multiply(w(1, 2), w(-2, -1)) == ()

    @given(words_st, words_st, words_st)
    def test_associative(self, a, b, c):
        assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))

    @given(words_st)
    def test_inverse_law(self, a):
        assert multiply(a, words.invert(a)) == ()


PHI = FreeEndomorphism(
    3,
    (w(2), w(3), w(1, 2)),
    (w(3, -1), w(1), w(2)),
)


class TestApplyEndo:
    def test_worked_map_image(self):
        # x3 x1 -> (x1 x2)(x2) = x1 x2^2
        assert PHI.apply(w(3, 1)) == w(1, 2, 2)

    def test_empty(self):
        assert PHI.apply(()) == ()

    def test_inverse_images_round_trip(self):
        for i in (1, 2, 3):
            assert PHI.apply(PHI.apply_inverse(w(i))) == w(i)
            assert PHI.apply_inverse(PHI.apply(w(i))) == w(i)

    def test_bad_inverse_rejected(self):
        with pytest.raises(ValueError):
            FreeEndomorphism(2, (w(1), w(2)), (w(2), w(1)))

    def test_missing_inverse_error(self):
        phi = FreeEndomorphism(2, (w(1, 2), w(1)))
        with pytest.raises(MissingInverseError):
            phi.apply_inverse(w(1))

    @given(words_st, words_st)
    def test_homomorphism(self, a, b):
        assert PHI.apply(multiply(a, b)) == multiply(PHI.apply(a), PHI.apply(b))

    @given(words_st)
    def test_respects_inversion(self, a):
        assert PHI.apply(words.invert(a)) == words.invert(PHI.apply(a))

    def test_compose(self):
        phi2 = PHI.compose(PHI)
        for i in (1, 2, 3):
            assert phi2.apply(w(i)) == PHI.apply(PHI.apply(w(i)))
        assert phi2.has_inverse


class TestBallEnumerate:
    def test_radius_zero(self):
        assert list(ball_enumerate(2, 0)) == [()]

    def test_radius_one(self):
        assert list(ball_enumerate(2, 1)) == [(), w(1), w(-1), w(2), w(-2)]

    def test_radius_two_count(self):
        assert len(list(ball_enumerate(2, 2))) == 17

    @pytest.mark.parametrize("rank,radius", [(1, 5), (2, 4), (3, 3)])
    def test_count_matches_closed_form(self, rank, radius):
        listed = list(ball_enumerate(rank, radius))
        assert len(listed) == ball_size(rank, radius)
        assert len(set(listed)) == len(listed)

    def test_order_is_length_then_lex(self):
        listed = list(ball_enumerate(2, 3))
        assert listed == sorted(listed, key=words.word_key)


class TestTextSyntax:
    def test_round_trip(self):
        names = ("x1", "x2", "x3")
        word = words.word_from_text("x1 x2^-1 x1^2", names)
        assert word == w(1, -2, 1, 1)
        assert words.word_from_text(words.word_to_text(word, names), names) == word

    def test_identity_token(self):
        assert words.word_from_text("e", ("x1",)) == ()

    def test_unknown_generator(self):
        with pytest.raises(MalformedWordError):
            words.word_from_text("y1", ("x1",))
