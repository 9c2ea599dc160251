"""Term-algebra unit tests: normalization, composition, cuts, formatting."""

import random

import pytest

from bbpda.terms import (
    EMPTY_TUP,
    NIL,
    RecConst,
    RecConstDef,
    RecSel,
    Selection,
    Seq,
    StackWord,
    Tup,
    compose,
    cut_constant,
    cut_process,
    expand_stack_word,
    format_term,
    identity_def,
    is_simple,
    ln,
    select,
    stack_word,
    standard_cont,
    term_height,
    term_size,
    validate_rec_const,
)

STATES = ("p", "q")


def random_simple(rng: random.Random, depth: int = 3):
    roll = rng.random()
    if depth == 0 or roll < 0.25:
        return Selection(rng.randint(1, 3)) if rng.random() < 0.7 else NIL
    return Seq(
        rng.choice(STATES),
        rng.choice(("X", "Y")),
        Tup(tuple(random_simple(rng, depth - 1) for _ in range(rng.randint(1, 3)))),
    )


def random_tup(rng: random.Random, depth: int = 2) -> Tup:
    return Tup(tuple(random_simple(rng, depth) for _ in range(rng.randint(1, 3))))


def test_select_normalizes():
    const = Tup((Selection(2), NIL, Seq("p", "X", EMPTY_TUP)))
    assert select(1, const) == Selection(2)
    assert select(2, const) == NIL
    assert select(3, const) == Seq("p", "X", EMPTY_TUP)
    assert select(4, const) == Selection(4)


def test_select_on_rec_const_collapses_identity_entries():
    defn = RecConstDef("V", (Selection(1), Seq("p", "X", EMPTY_TUP)))
    assert select(1, RecConst(defn)) == NIL
    assert select(2, RecConst(defn)) == RecSel(defn, 2)
    assert select(3, RecConst(defn)) == Selection(3)


def test_selection_indices_positive():
    with pytest.raises(ValueError):
        Selection(0)


def test_compose_nil_and_rec_absorb():
    const = Tup((Selection(1),))
    assert compose(NIL, const) == NIL
    defn = RecConstDef("V", (Seq("p", "X", EMPTY_TUP),))
    assert compose(RecSel(defn, 1), const) == RecSel(defn, 1)
    assert compose(RecConst(defn), const) == RecConst(defn)


def closed_tup(rng: random.Random, depth: int = 2) -> Tup:
    """An arity-3 tuple covering every index random_simple may dangle."""
    return Tup(tuple(random_simple(rng, depth) for _ in range(3)))


def test_compose_associative_random():
    # associativity holds when dangling indices stay within the arities
    rng = random.Random("assoc")
    for _ in range(300):
        t = random_simple(rng)
        c = closed_tup(rng)
        d = closed_tup(rng)
        assert compose(compose(t, c), d) == compose(t, compose(c, d))


def test_composition_preserves_normal_form():
    # composing two normalized terms yields a term the constructors accept
    rng = random.Random("norm")
    for _ in range(200):
        t = compose(random_simple(rng), random_tup(rng))
        # rebuilding from the printed form must be stable (idempotence)
        assert compose(t, standard_cont(5)) == compose(
            compose(t, standard_cont(5)), standard_cont(5)
        )


def test_ln_and_is_simple():
    t = Seq("p", "X", Tup((Selection(3), NIL)))
    assert ln(t) == frozenset({3})
    assert is_simple(t)
    defn = RecConstDef("V", (Seq("p", "X", EMPTY_TUP),))
    assert not is_simple(RecSel(defn, 1))


def test_size_and_height():
    t = Seq("p", "X", Tup((Seq("q", "Y", EMPTY_TUP), Selection(1))))
    assert term_size(t) == 2
    assert term_height(t) == 2


def test_cut_process_round_trip_random():
    rng = random.Random("cut")
    for _ in range(300):
        t = random_simple(rng, depth=4)
        for depth in range(1, term_height(t) + 1):
            prefix, residual = cut_process(t, depth)
            assert compose(prefix, residual) == t
            assert term_height(prefix) <= depth


def test_cut_constant_round_trip_random():
    rng = random.Random("cutc")
    for _ in range(200):
        c = random_tup(rng, depth=3)
        for depth in range(1, 4):
            prefix, residual = cut_constant(c, depth)
            assert compose(prefix, residual) == c


def test_cut_rejects_rec_consts():
    defn = RecConstDef("V", (Seq("p", "X", EMPTY_TUP),))
    with pytest.raises(ValueError):
        cut_process(RecSel(defn, 1), 1)


def test_stack_word_normalization():
    cont = standard_cont(2)
    assert stack_word(STATES, "q", (), cont) == Selection(2)
    one = stack_word(STATES, "p", ("X",), cont)
    assert isinstance(one, Seq) and one.cont == cont
    two = stack_word(STATES, "p", ("X", "Y"), cont)
    assert isinstance(two, StackWord)
    assert expand_stack_word(two) == Seq(
        "p",
        "X",
        Tup(
            tuple(
                Seq(s, "Y", Tup((Selection(1), Selection(2)))) for s in STATES
            )
        ),
    )


def test_stack_word_with_empty_continuation():
    one = stack_word(STATES, "p", ("X",), EMPTY_TUP)
    assert one == Seq("p", "X", standard_cont(2))


def test_expand_stack_word_agrees_with_compact_equality():
    rng = random.Random("sw")
    for _ in range(100):
        word = tuple(rng.choice(("X", "Y")) for _ in range(rng.randint(2, 4)))
        t = stack_word(STATES, rng.choice(STATES), word, standard_cont(2))
        assert term_height(expand_stack_word(t)) == term_height(t)
        assert term_size(expand_stack_word(t)) == term_size(t)


def test_validate_rec_const():
    assert validate_rec_const(identity_def(3)) == []
    good = RecConstDef("V", (Seq("p", "X", EMPTY_TUP), Selection(2)))
    assert validate_rec_const(good) == []
    escaping = RecConstDef("W", (Selection(5),))
    assert validate_rec_const(escaping) != []
    wrong_index = RecConstDef("U", (Selection(1), Selection(1)))
    assert validate_rec_const(wrong_index) != []


def test_format_term_is_injective_on_samples():
    rng = random.Random("fmt")
    seen = {}
    for _ in range(500):
        t = random_simple(rng)
        text = format_term(t)
        assert seen.setdefault(text, t) == t
