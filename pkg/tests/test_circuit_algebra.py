import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slhflow.circuit_algebra import (
    Arity,
    ArityError,
    ComponentRef,
    Concat,
    Feedback,
    Identity,
    Perm,
    Series,
    TermSyntaxError,
    arity,
    components,
    parse_term,
    pretty_print,
)

FIG3 = {"A": (1, 1), "B": (2, 3), "C": (3, 2), "D": (2, 2)}
EQ1 = "A ⊞ [(I_2 ⊞ [D]_{1→2}) ◁ B ◁ C]_{3→3}"


def fig3_term():
    A, B, C, D = (ComponentRef(n, *FIG3[n]) for n in "ABCD")
    inner = Series(Concat(Identity(2), Feedback(D, 1, 2)), Series(B, C))
    return Concat(A, Feedback(inner, 3, 3))


def test_arity_examples():
    assert arity(Identity(2)) == Arity(2, 2)
    a, b = ComponentRef("A", 1, 1), ComponentRef("B", 2, 2)
    assert arity(Concat(b, a)) == Arity(3, 3)
    assert arity(fig3_term()) == Arity(3, 3)


def test_arity_errors():
    with pytest.raises(ArityError):
        Series(ComponentRef("B", 2, 2), ComponentRef("A", 1, 1))
    with pytest.raises(ArityError):
        Feedback(ComponentRef("X", 3, 3), 4, 1)
    with pytest.raises(ArityError):
        Perm((1, 1))


def test_eq1_print_and_parse():
    assert pretty_print(fig3_term()) == EQ1
    assert parse_term(EQ1, FIG3) == fig3_term()


def test_small_prints():
    x = ComponentRef("X", 2, 2)
    assert pretty_print(Identity(3)) == "I_3"
    t = Series(Perm((2, 1)), x)
    assert pretty_print(t) == "P_{(2,1)} ◁ X"
    assert parse_term(pretty_print(t), {"X": (2, 2)}) == t


def test_parse_examples_and_errors():
    assert parse_term("I_2 ⊞ I_3", {}) == Concat(Identity(2), Identity(3))
    with pytest.raises(ArityError):
        parse_term("[X]_{4→1}", {"X": (3, 3)})
    with pytest.raises(TermSyntaxError):
        parse_term("X ◁", {"X": (1, 1)})
    with pytest.raises(TermSyntaxError):
        parse_term("Y", {"X": (1, 1)})


def test_ascii_aliases():
    t = fig3_term()
    text = pretty_print(t, ascii=True)
    assert text == "A [+] fb{3,3}((I_2 [+] fb{1,2}(D)) <| B <| C)"
    assert parse_term(text, FIG3) == t
    assert parse_term("[X]_{1->1}", {"X": (1, 1)}) == Feedback(ComponentRef("X", 1, 1), 1, 1)


def test_components_order():
    assert [c.instance for c in components(fig3_term())] == ["A", "D", "B", "C"]


# --- random terms ---------------------------------------------------------

NAMES = {"A": (1, 1), "B": (2, 2), "C": (1, 2), "E": (3, 1)}


@st.composite
def terms(draw, depth=3):
    if depth == 0 or draw(st.integers(0, 3)) == 0:
        kind = draw(st.sampled_from(["ref", "ref", "id", "perm"]))
        if kind == "ref":
            n = draw(st.sampled_from(sorted(NAMES)))
            return ComponentRef(n, *NAMES[n])
        if kind == "id":
            return Identity(draw(st.integers(1, 3)))
        return Perm(tuple(draw(st.permutations(range(1, draw(st.integers(1, 4)) + 1)))))
    kind = draw(st.sampled_from(["series", "concat", "feedback"]))
    a = draw(terms(depth - 1))
    if kind == "concat":
        return Concat(a, draw(terms(depth - 1)))
    if kind == "feedback":
        if a.n_in == 0 or a.n_out == 0:
            return a
        return Feedback(a, draw(st.integers(1, a.n_out)), draw(st.integers(1, a.n_in)))
    # pad the left factor so the interface matches
    b = draw(terms(depth - 1))
    if b.n_in < a.n_out:
        b = Concat(b, Identity(a.n_out - b.n_in))
    elif b.n_in > a.n_out:
        a = Concat(a, Identity(b.n_in - a.n_out))
    return Series(b, a)


@settings(max_examples=200)
@given(terms())
def test_print_parse_roundtrip(t):
    for ascii in (False, True):
        text = pretty_print(t, ascii=ascii)
        back = parse_term(text, NAMES)
        assert pretty_print(back, ascii=ascii) == text
        assert arity(back) == arity(t)


@settings(max_examples=100)
@given(terms(), terms())
def test_arity_algebra(a, b):
    assert arity(Concat(a, b)) == arity(a) + arity(b)
    if a.n_in and a.n_out:
        assert arity(Feedback(a, 1, 1)) == arity(a) - Arity(1, 1)
    if a.n_out == b.n_in:
        assert arity(Series(b, a)) == Arity(a.n_in, b.n_out)
    else:
        with pytest.raises(ArityError):
            Series(b, a)
