"""Term algebra for pushdown processes.

Processes are immutable trees built from nil, selection indices, sequential
heads ``p X C`` and recursive-constant selections; constants are tuples of
processes or named recursive constants.  All constructors normalize eagerly,
so structural equality of the Python objects coincides with grammar equality
of normalized terms.

Standard-automaton configurations ``p alpha`` keep their stack word in a
compact :class:`StackWord` node instead of the exponential tuple expansion;
:func:`expand_stack_word` recovers the explicit form when needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Union

__all__ = [
    "NIL",
    "Nil",
    "Selection",
    "Seq",
    "RecSel",
    "StackWord",
    "Tup",
    "RecConst",
    "RecConstDef",
    "Process",
    "Constant",
    "Term",
    "EMPTY_TUP",
    "select",
    "compose",
    "ln",
    "is_simple",
    "term_size",
    "term_height",
    "cut_process",
    "cut_constant",
    "validate_rec_const",
    "identity_def",
    "standard_cont",
    "expand_stack_word",
    "format_term",
    "subterms",
]


@dataclass(frozen=True)
class Nil:
    """The nil process: no transitions, not accepting."""

    def __repr__(self) -> str:
        return "Nil"


NIL = Nil()


@dataclass(frozen=True)
class Selection:
    """A dangling selection index (an accepting process)."""

    index: int

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError("selection indices are positive")
        object.__setattr__(self, "_hash", hash((Selection, self.index)))

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True)
class RecConstDef:
    """A recursive constant definition ``V = (P1, ..., Pn) V``.

    Equality and hashing are name-based: two definitions with identical
    bodies but different names denote distinct constants.
    """

    name: str
    body: tuple = field(compare=False)

    @property
    def arity(self) -> int:
        return len(self.body)

    def __hash__(self) -> int:
        return hash((self.name, len(self.body)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RecConstDef):
            return NotImplemented
        return self.name == other.name and len(self.body) == len(other.body)


@dataclass(frozen=True)
class RecConst:
    """A reference to a named recursive constant."""

    defn: RecConstDef

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash((RecConst, self.defn)))

    def __hash__(self) -> int:
        return self._hash

    @property
    def arity(self) -> int:
        return self.defn.arity


@dataclass(frozen=True)
class RecSel:
    """The irreducible composition ``V(i)`` with ``i`` within arity.

    Only survives normalization when the defining body at ``i`` is not the
    selection ``i`` itself (that case collapses to nil).
    """

    defn: RecConstDef
    index: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash((RecSel, self.defn, self.index)))

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True)
class Tup:
    """An n-ary tuple constant."""

    entries: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash((Tup, self.entries)))

    def __hash__(self) -> int:
        return self._hash

    @property
    def arity(self) -> int:
        return len(self.entries)


EMPTY_TUP = Tup(())


@dataclass(frozen=True)
class Seq:
    """A sequential process ``p X C``: state, stack symbol, continuation."""

    state: str
    symbol: str
    cont: "Constant"

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash((Seq, self.state, self.symbol, self.cont)))

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True)
class StackWord:
    """Compact form of the standard configuration ``p alpha C``.

    ``states`` fixes the state order of the owning system so the node can be
    expanded without further context.  The word is kept at length >= 2; the
    constructor function :func:`stack_word` normalizes shorter words into
    ``Seq``/selection form.
    """

    states: tuple
    state: str
    word: tuple
    cont: "Constant"

    def __post_init__(self) -> None:
        # states is omitted from the hash: it is a wide tuple shared by all
        # configurations of one system, so it adds cost but no discrimination
        object.__setattr__(
            self,
            "_hash",
            hash((StackWord, self.state, self.word, self.cont)),
        )

    def __hash__(self) -> int:
        return self._hash


Process = Union[Nil, Selection, Seq, RecSel, StackWord]
Constant = Union[Tup, RecConst]
Term = Union[Process, Constant]


def select(index: int, const: Constant) -> Process:
    """Grammar-normal form of the composition ``index . const``."""
    if isinstance(const, Tup):
        if index <= const.arity:
            return const.entries[index - 1]
        return Selection(index)
    if isinstance(const, RecConst):
        if index > const.arity:
            return Selection(index)
        if const.defn.body[index - 1] == Selection(index):
            return NIL
        return RecSel(const.defn, index)
    raise TypeError(f"not a constant: {const!r}")


def compose(term: Term, const: Constant) -> Term:
    """Generalized composition ``term . const`` in grammar-normal form."""
    if isinstance(term, Nil):
        return NIL
    if isinstance(term, Selection):
        return select(term.index, const)
    if isinstance(term, Seq):
        return Seq(term.state, term.symbol, compose(term.cont, const))
    if isinstance(term, RecSel):
        return term
    if isinstance(term, StackWord):
        return StackWord(term.states, term.state, term.word, compose(term.cont, const))
    if isinstance(term, Tup):
        return Tup(tuple(compose(e, const) for e in term.entries))
    if isinstance(term, RecConst):
        return term
    raise TypeError(f"not a term: {term!r}")


def stack_word(states: tuple, state: str, word: tuple, cont: Constant) -> Process:
    """Build the standard configuration ``state word cont``, normalized."""
    if not word:
        return select(states.index(state) + 1, cont)
    if len(word) == 1:
        if isinstance(cont, Tup) and cont.arity == 0:
            inner: Constant = standard_cont(len(states))
        else:
            entries = tuple(select(i, cont) for i in range(1, len(states) + 1))
            if isinstance(cont, Tup) and cont.entries == entries:
                inner = cont
            else:
                inner = Tup(entries)
        return Seq(state, word[0], inner)
    return StackWord(states, state, word, cont)


@lru_cache(maxsize=None)
def standard_cont(q: int) -> Tup:
    """The identity continuation ``(1, ..., q)`` of the standard embedding."""
    return Tup(tuple(Selection(i) for i in range(1, q + 1)))


def expand_stack_word(term: StackWord) -> Process:
    """The explicit tuple expansion of a compact standard configuration."""
    states, word, cont = term.states, term.word, term.cont

    def expand(state: str, rest: tuple) -> Process:
        if not rest:
            return select(states.index(state) + 1, cont)
        entries = Tup(tuple(expand(s, rest[1:]) for s in states))
        return Seq(state, rest[0], entries)

    return expand(term.state, word)


def ln(term: Term) -> frozenset:
    """The set of dangling selection indices of a process or constant."""
    if isinstance(term, Nil):
        return frozenset()
    if isinstance(term, Selection):
        return frozenset((term.index,))
    if isinstance(term, Seq):
        return ln(term.cont)
    if isinstance(term, (RecSel, RecConst)):
        return frozenset()
    if isinstance(term, StackWord):
        out: frozenset = frozenset()
        for i in range(1, len(term.states) + 1):
            out |= ln(select(i, term.cont))
        return out
    if isinstance(term, Tup):
        out = frozenset()
        for e in term.entries:
            out |= ln(e)
        return out
    raise TypeError(f"not a term: {term!r}")


def is_simple(term: Term) -> bool:
    """True when the term contains no recursive-constant occurrence."""
    if isinstance(term, (Nil, Selection)):
        return True
    if isinstance(term, Seq):
        return is_simple(term.cont)
    if isinstance(term, (RecSel, RecConst)):
        return False
    if isinstance(term, StackWord):
        return is_simple(term.cont)
    if isinstance(term, Tup):
        return all(is_simple(e) for e in term.entries)
    raise TypeError(f"not a term: {term!r}")


def term_size(term: Term) -> int:
    """Number of sequential nodes (stack content count)."""
    if isinstance(term, Seq):
        return 1 + term_size(term.cont)
    if isinstance(term, Tup):
        return sum(term_size(e) for e in term.entries)
    if isinstance(term, StackWord):
        return term_size(expand_stack_word(term))
    return 0


def term_height(term: Term) -> int:
    """Sequential nesting depth."""
    if isinstance(term, Seq):
        return 1 + term_height(term.cont)
    if isinstance(term, Tup):
        return max((term_height(e) for e in term.entries), default=0)
    if isinstance(term, StackWord):
        return len(term.word) + term_height(term.cont)
    return 0


def subterms(term: Term) -> Iterator[Term]:
    """All subterms, preorder."""
    yield term
    if isinstance(term, Seq):
        yield from subterms(term.cont)
    elif isinstance(term, Tup):
        for e in term.entries:
            yield from subterms(e)
    elif isinstance(term, StackWord):
        yield from subterms(term.cont)


def _explicit(term: Process) -> Process:
    if isinstance(term, StackWord):
        return expand_stack_word(term)
    return term


def cut_process(term: Process, depth: int):
    """Split a simple process at the given sequential-nesting depth.

    Returns ``(prefix, residual)`` with ``compose(prefix, residual) == term``.
    Subterms rooted at exactly ``depth`` are severed into the residual tuple
    (left to right); their positions get fresh selection indices placed above
    the dangling indices that remain in the prefix, with identity padding
    entries keeping those original indices intact.
    """
    if not is_simple(term):
        raise ValueError("cut is defined on simple terms only")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    term = _explicit(term)
    if term_height(term) <= depth:
        return term, EMPTY_TUP
    prefix, severed, base = _cut_entries((term,), depth)
    residual = Tup(tuple(Selection(i) for i in range(1, base + 1)) + tuple(severed))
    return prefix.entries[0], residual


def cut_constant(const: Tup, depth: int):
    """Split every entry of a simple tuple at ``depth`` with a shared residual."""
    if not is_simple(const):
        raise ValueError("cut is defined on simple constants only")
    if all(term_height(e) <= depth for e in const.entries):
        return const, EMPTY_TUP
    prefix, severed, base = _cut_entries(const.entries, depth)
    residual = Tup(tuple(Selection(i) for i in range(1, base + 1)) + tuple(severed))
    return prefix, residual


def _cut_entries(entries: tuple, depth: int):
    """Shared cut machinery: sever subterms at ``depth`` across all entries.

    First pass records which original dangling indices stay in the prefix,
    so fresh indices can be placed above them; the second pass substitutes.
    """
    kept: set = set()
    count = 0

    def scan(t: Process, d: int) -> None:
        nonlocal count
        t = _explicit(t)
        if d == depth:
            count += 1
            return
        if isinstance(t, Seq):
            assert isinstance(t.cont, Tup)
            for e in t.cont.entries:
                scan(e, d + 1)
        elif isinstance(t, Selection):
            kept.add(t.index)

    for e in entries:
        scan(e, 0)
    base = max(kept, default=0)
    severed: list = []

    def build(t: Process, d: int) -> Process:
        t = _explicit(t)
        if d == depth:
            severed.append(t)
            return Selection(base + len(severed))
        if isinstance(t, Seq):
            assert isinstance(t.cont, Tup)
            return Seq(t.state, t.symbol, Tup(tuple(build(e, d + 1) for e in t.cont.entries)))
        return t

    prefix = Tup(tuple(build(e, 0) for e in entries))
    return prefix, severed, base


def validate_rec_const(defn: RecConstDef) -> list:
    """Check the side conditions of a recursive constant definition.

    Returns a list of violation strings; empty means the definition is
    well-formed.
    """
    violations = []
    n = defn.arity
    for i, body in enumerate(defn.body, start=1):
        if not is_simple(body):
            violations.append(f"entry {i}: body is not simple")
            continue
        escaping = sorted(j for j in ln(body) if j > n)
        if escaping:
            violations.append(f"entry {i}: selection indices {escaping} escape [1..{n}]")
        if isinstance(body, Selection) and body.index != i:
            violations.append(f"entry {i}: selection body must equal own index")
    return violations


def identity_def(n: int, name: str = "I") -> RecConstDef:
    """The identity recursive constant ``I = (1, ..., n) I``."""
    return RecConstDef(name, tuple(Selection(i) for i in range(1, n + 1)))


@lru_cache(maxsize=1 << 16)
def format_term(term: Term) -> str:
    """Canonical textual form; parse/print round-trips bit-exactly."""
    if isinstance(term, Nil):
        return "0"
    if isinstance(term, Selection):
        return str(term.index)
    if isinstance(term, Seq):
        return f"{term.state} {term.symbol} {format_term(term.cont)}"
    if isinstance(term, RecSel):
        return f"{term.defn.name}({term.index})"
    if isinstance(term, RecConst):
        return term.defn.name
    if isinstance(term, Tup):
        return "(" + ", ".join(format_term(e) for e in term.entries) + ")"
    if isinstance(term, StackWord):
        inner = " ".join(term.word)
        if term.cont == standard_cont(len(term.states)):
            return f"{term.state} {inner}"
        return f"{term.state} {inner} {format_term(term.cont)}"
    raise TypeError(f"not a term: {term!r}")


def term_key(term: Term) -> str:
    """Deterministic sort key used for canonical iteration orders."""
    return format_term(term)
