"""Polarised propositional syntax: atoms, literals, formulae, clauses.

Everything here is immutable, hashable and totally ordered by a structural
key, so values can live in sets, serve as memo keys and render in a stable
canonical order. Negation is involutive both on literals and on formulae
(De Morgan duals swap polarity).
"""

from __future__ import annotations

import enum
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union


class _Structural:
    """Base for immutable nodes: cached hash, key-based equality and order."""

    __slots__ = ("_key", "_hash")

    def _init_key(self, key: tuple) -> None:
        object.__setattr__(self, "_key", key)
        object.__setattr__(self, "_hash", hash(key))

    def sort_key(self) -> tuple:
        return self._key

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, _Structural):
            return NotImplemented
        return self._hash == other._hash and self._key == other._key

    def __lt__(self, other: "_Structural") -> bool:
        return self._key < other._key

    def __le__(self, other: "_Structural") -> bool:
        return self._key <= other._key

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError(f"{type(self).__name__} is immutable")


# ---------------------------------------------------------------------------
# Atoms


class GroundTerm(_Structural):
    """A variable-free term: a function symbol applied to subterms."""

    __slots__ = ("symbol", "args")

    def __init__(self, symbol: str, args: Iterable["GroundTerm"] = ()):
        args = tuple(args)
        object.__setattr__(self, "symbol", symbol)
        object.__setattr__(self, "args", args)
        self._init_key(("t", symbol, tuple(a._key for a in args)))

    def subterms(self) -> set:
        out = {self}
        for a in self.args:
            out |= a.subterms()
        return out

    def __repr__(self) -> str:
        if not self.args:
            return self.symbol
        return f"{self.symbol}({', '.join(map(repr, self.args))})"


class PropVar(_Structural):
    """A propositional variable."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)
        self._init_key((0, name))

    def __repr__(self) -> str:
        return self.name


REL_GT = ">"
REL_GE = ">="
REL_EQ = "="
_RELS = (REL_GT, REL_GE, REL_EQ)


class LinConstraint(_Structural):
    """A linear-rational constraint ``sum(coeff * var) rel bound``.

    Zero coefficients are dropped on construction; coefficients and the
    bound are exact rationals.
    """

    __slots__ = ("coeffs", "bound", "rel")

    def __init__(self, coeffs: Mapping[str, Union[int, Fraction]],
                 bound: Union[int, Fraction], rel: str):
        if rel not in _RELS:
            raise ValueError(f"unknown relation {rel!r}")
        items = tuple(sorted((v, Fraction(c)) for v, c in coeffs.items()
                             if Fraction(c) != 0))
        object.__setattr__(self, "coeffs", items)
        object.__setattr__(self, "bound", Fraction(bound))
        object.__setattr__(self, "rel", rel)
        self._init_key((1, items, self.bound, rel))

    def coeff_map(self) -> dict:
        return dict(self.coeffs)

    def __repr__(self) -> str:
        if not self.coeffs:
            lhs = "0"
        else:
            parts = []
            for var, c in self.coeffs:
                if c == 1:
                    parts.append(var)
                elif c == -1:
                    parts.append(f"-{var}")
                else:
                    parts.append(f"{c}*{var}")
            lhs = " + ".join(parts).replace("+ -", "- ")
        return f"{lhs} {self.rel} {self.bound}"


class EufEq(_Structural):
    """An equation between two ground terms."""

    __slots__ = ("lhs", "rhs")

    def __init__(self, lhs: GroundTerm, rhs: GroundTerm):
        object.__setattr__(self, "lhs", lhs)
        object.__setattr__(self, "rhs", rhs)
        self._init_key((2, lhs._key, rhs._key))

    def __repr__(self) -> str:
        return f"{self.lhs!r} = {self.rhs!r}"


Atom = Union[PropVar, LinConstraint, EufEq]


# ---------------------------------------------------------------------------
# Literals


class Literal(_Structural):
    """A signed atom; ``sign=False`` is the negation of the atom."""

    __slots__ = ("atom", "sign", "_neg")

    def __init__(self, atom: Atom, sign: bool = True):
        object.__setattr__(self, "atom", atom)
        object.__setattr__(self, "sign", sign)
        object.__setattr__(self, "_neg", None)
        # positive literals sort before their negations
        self._init_key((atom._key, 0 if sign else 1))

    def negate(self) -> "Literal":
        neg = self._neg
        if neg is None:
            neg = Literal(self.atom, not self.sign)
            object.__setattr__(neg, "_neg", self)
            object.__setattr__(self, "_neg", neg)
        return neg

    def __repr__(self) -> str:
        return repr(self.atom) if self.sign else f"¬({self.atom!r})"


def prop(name: str, sign: bool = True) -> Literal:
    return Literal(PropVar(name), sign)


# ---------------------------------------------------------------------------
# Formulae


class Formula(_Structural):
    __slots__ = ("size", "literals", "_neg")

    def _finish(self, key: tuple, size: int, literals: frozenset) -> None:
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "literals", literals)
        object.__setattr__(self, "_neg", None)
        self._init_key(key)


class Lit(Formula):
    __slots__ = ("literal",)

    def __init__(self, literal: Literal):
        object.__setattr__(self, "literal", literal)
        self._finish((0, literal._key), 1, frozenset((literal,)))

    def __repr__(self) -> str:
        return repr(self.literal)


class _Binary(Formula):
    __slots__ = ("left", "right")
    _rank = -1
    _sym = "?"

    def __init__(self, left: Formula, right: Formula):
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        self._finish((self._rank, left._key, right._key),
                     1 + left.size + right.size,
                     left.literals | right.literals)

    def __repr__(self) -> str:
        return f"({self.left!r} {self._sym} {self.right!r})"


class AndPos(_Binary):
    __slots__ = ()
    _rank, _sym = 1, "∧⁺"


class OrPos(_Binary):
    __slots__ = ()
    _rank, _sym = 2, "∨⁺"


class AndNeg(_Binary):
    __slots__ = ()
    _rank, _sym = 5, "∧⁻"


class OrNeg(_Binary):
    __slots__ = ()
    _rank, _sym = 6, "∨⁻"


class _Const(Formula):
    __slots__ = ()
    _rank = -1
    _sym = "?"

    def __init__(self):
        self._finish((self._rank,), 1, frozenset())

    def __repr__(self) -> str:
        return self._sym


class TruePos(_Const):
    __slots__ = ()
    _rank, _sym = 3, "⊤⁺"


class FalsePos(_Const):
    __slots__ = ()
    _rank, _sym = 4, "⊥⁺"


class TrueNeg(_Const):
    __slots__ = ()
    _rank, _sym = 7, "⊤⁻"


class FalseNeg(_Const):
    __slots__ = ()
    _rank, _sym = 8, "⊥⁻"


TOP_POS = TruePos()
BOT_POS = FalsePos()
TOP_NEG = TrueNeg()
BOT_NEG = FalseNeg()


def negate_formula(a: Formula) -> Formula:
    """De Morgan dual; involutive and size-preserving."""
    neg = a._neg
    if neg is not None:
        return neg
    if isinstance(a, Lit):
        neg = Lit(a.literal.negate())
    elif isinstance(a, AndPos):
        neg = OrNeg(negate_formula(a.left), negate_formula(a.right))
    elif isinstance(a, OrPos):
        neg = AndNeg(negate_formula(a.left), negate_formula(a.right))
    elif isinstance(a, AndNeg):
        neg = OrPos(negate_formula(a.left), negate_formula(a.right))
    elif isinstance(a, OrNeg):
        neg = AndPos(negate_formula(a.left), negate_formula(a.right))
    elif isinstance(a, TruePos):
        neg = BOT_NEG
    elif isinstance(a, FalsePos):
        neg = TOP_NEG
    elif isinstance(a, TrueNeg):
        neg = BOT_POS
    elif isinstance(a, FalseNeg):
        neg = TOP_POS
    else:
        raise TypeError(f"not a formula: {a!r}")
    object.__setattr__(a, "_neg", neg)
    object.__setattr__(neg, "_neg", a)
    return neg


def size(a: Formula) -> int:
    """Node count of the formula tree."""
    return a.size


# ---------------------------------------------------------------------------
# Polarity


class Polarity(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNPOLARISED = "unpolarised"


class PolarisationSet(_Structural):
    """A syntactically consistent set of literals declared positive."""

    __slots__ = ("literals",)

    def __init__(self, literals: Iterable[Literal] = ()):
        fs = frozenset(literals)
        for l in fs:
            if l.negate() in fs:
                raise ValueError(f"inconsistent polarisation: {l!r} and its negation")
        object.__setattr__(self, "literals", fs)
        self._init_key((9, tuple(sorted(l._key for l in fs))))

    def __contains__(self, literal: Literal) -> bool:
        return literal in self.literals

    def __iter__(self):
        return iter(self.literals)

    def __len__(self) -> int:
        return len(self.literals)

    def classify_literal(self, l: Literal) -> Polarity:
        if l in self.literals:
            return Polarity.POSITIVE
        if l.negate() in self.literals:
            return Polarity.NEGATIVE
        return Polarity.UNPOLARISED

    def with_literal(self, l: Literal) -> "PolarisationSet":
        if l in self.literals or l.negate() in self.literals:
            return self
        ps = PolarisationSet.__new__(PolarisationSet)
        object.__setattr__(ps, "literals", self.literals | {l})
        ps._init_key((9, tuple(sorted(x._key for x in ps.literals))))
        return ps

    def __repr__(self) -> str:
        return "{" + ", ".join(repr(l) for l in sorted(self.literals)) + "}"


EMPTY_POL = PolarisationSet()


_POSITIVE_SHAPES = (AndPos, OrPos, TruePos, FalsePos)
_NEGATIVE_SHAPES = (AndNeg, OrNeg, TrueNeg, FalseNeg)


def classify(a: Formula, p: PolarisationSet) -> Polarity:
    """Polarity of a formula: literals consult ``p``, connectives their shape."""
    if isinstance(a, Lit):
        return p.classify_literal(a.literal)
    if isinstance(a, _POSITIVE_SHAPES):
        return Polarity.POSITIVE
    if isinstance(a, _NEGATIVE_SHAPES):
        return Polarity.NEGATIVE
    raise TypeError(f"not a formula: {a!r}")


def polar(p: PolarisationSet, a: Formula) -> PolarisationSet:
    """Extend ``p`` with ``a`` when it is an unpolarised literal, else ``p``."""
    if isinstance(a, Lit):
        return p.with_literal(a.literal)
    return p


# ---------------------------------------------------------------------------
# Clauses


class Clause(_Structural):
    """A finite set of literals read as their disjunction; may be empty."""

    __slots__ = ("literals", "ordered")

    def __init__(self, literals: Iterable[Literal] = ()):
        fs = frozenset(literals)
        ordered = tuple(sorted(fs))
        object.__setattr__(self, "literals", fs)
        object.__setattr__(self, "ordered", ordered)
        self._init_key((10, tuple(l._key for l in ordered)))

    def __len__(self) -> int:
        return len(self.literals)

    def __iter__(self):
        return iter(self.ordered)

    def __contains__(self, l: Literal) -> bool:
        return l in self.literals

    def __repr__(self) -> str:
        return "{" + ", ".join(repr(l) for l in self.ordered) + "}"


def represent_clause(c: Clause) -> Formula:
    """Right-nested negative disjunction of the clause, terminated by ⊥⁻.

    Literals appear in canonical order, so representation is a function of
    the clause.
    """
    out: Formula = BOT_NEG
    for l in reversed(c.ordered):
        out = OrNeg(Lit(l), out)
    return out


def clause_of_formula(f: Formula) -> Optional[Clause]:
    """Inverse of :func:`represent_clause`; None if ``f`` is not clause-shaped."""
    lits = []
    while isinstance(f, OrNeg):
        if not isinstance(f.left, Lit):
            return None
        lits.append(f.left.literal)
        f = f.right
    if not isinstance(f, FalseNeg):
        return None
    c = Clause(lits)
    if len(c) != len(lits) or list(c.ordered) != lits:
        return None  # duplicates or non-canonical order: not a representation
    return c


def representation_weight(f: Formula) -> int:
    """Connective+literal weight of a formula (polarity constants weigh 0).

    This is the measure under which a clause representation weighs at most
    twice the clause it represents.
    """
    if isinstance(f, _Const):
        return 0
    if isinstance(f, Lit):
        return 1
    assert isinstance(f, _Binary)
    return 1 + representation_weight(f.left) + representation_weight(f.right)


def clause_set_weight(clauses: Iterable[Clause]) -> int:
    """Summed clause sizes (the measure used by the simulation bound)."""
    return sum(len(c) for c in clauses)


def atoms_of_clauses(clauses: Iterable[Clause]) -> frozenset:
    """Literals occurring in the clause set, closed under negation."""
    lits = set()
    for c in clauses:
        for l in c:
            lits.add(l)
            lits.add(l.negate())
    return frozenset(lits)
