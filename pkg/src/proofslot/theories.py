"""Decision procedures deciding consistency of literal sets modulo a theory.

A procedure implements one call::

    consistency(literals) -> None                    # consistent
    consistency(literals) -> frozenset(sub_literals) # inconsistent subset

The returned set is always a subset of the input and is itself
inconsistent. Every procedure realises an inconsistency predicate: it
holds of {l, ¬l} for every literal, is upward closed, and splits on
l / ¬l. Procedures are stateless per call and safe to share.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product
from typing import Dict, FrozenSet, Iterable, List, Optional, Protocol, Tuple

from .formulas import (Clause, EufEq, GroundTerm, LinConstraint, Literal,
                       PropVar, REL_EQ, REL_GE, REL_GT, atoms_of_clauses)

LitSet = FrozenSet[Literal]


class TheoryError(Exception):
    """A literal outside the procedure's theory was supplied."""


class DecisionProcedure(Protocol):
    name: str

    def consistency(self, literals: Iterable[Literal]) -> Optional[LitSet]:
        ...


def _syntactic_pair(literals: LitSet) -> Optional[LitSet]:
    for l in sorted(literals):
        n = l.negate()
        if n in literals:
            return frozenset((l, n))
    return None


class SyntacticProcedure:
    """The smallest inconsistency predicate: an explicit complementary pair."""

    name = "empty"

    def consistency(self, literals: Iterable[Literal]) -> Optional[LitSet]:
        return _syntactic_pair(frozenset(literals))


# ---------------------------------------------------------------------------
# Linear rational arithmetic


# A row is (coeffs, bound, strict, provenance) read as sum(c*x) >= bound,
# or > bound when strict. Provenance is the set of input literals the row
# was derived from.
_Row = Tuple[Tuple[Tuple[str, Fraction], ...], Fraction, bool, LitSet]


def _literal_rows(l: Literal) -> Tuple[List[_Row], bool]:
    """Rows for one literal; second component flags a disequality."""
    atom = l.atom
    if not isinstance(atom, LinConstraint):
        raise TheoryError(f"not a linear-arithmetic literal: {l!r}")
    prov = frozenset((l,))
    pos = atom.coeffs
    neg = tuple((v, -c) for v, c in pos)
    b = atom.bound
    if l.sign:
        if atom.rel == REL_GT:
            return [(pos, b, True, prov)], False
        if atom.rel == REL_GE:
            return [(pos, b, False, prov)], False
        return [(pos, b, False, prov), (neg, -b, False, prov)], False
    if atom.rel == REL_GT:      # ¬(e > b)  ==  e <= b
        return [(neg, -b, False, prov)], False
    if atom.rel == REL_GE:      # ¬(e >= b) ==  e < b
        return [(neg, -b, True, prov)], False
    return [], True             # ¬(e = b): handled by case split


def _combine(r1: _Row, r2: _Row, var: str) -> _Row:
    c1 = dict(r1[0])
    c2 = dict(r2[0])
    a1 = c1.pop(var)
    a2 = -c2.pop(var)
    assert a1 > 0 and a2 > 0
    out: Dict[str, Fraction] = {}
    for v, c in c1.items():
        out[v] = c * a2
    for v, c in c2.items():
        out[v] = out.get(v, Fraction(0)) + c * a1
    coeffs = tuple(sorted((v, c) for v, c in out.items() if c != 0))
    return (coeffs, r1[1] * a2 + r2[1] * a1, r1[2] or r2[2], r1[3] | r2[3])


def _fm_refute(rows: List[_Row]) -> Optional[LitSet]:
    """Eliminate variables; provenance of a contradictory row, else None."""
    while True:
        pending: List[_Row] = []
        for coeffs, bound, strict, prov in rows:
            if coeffs:
                pending.append((coeffs, bound, strict, prov))
            elif bound > 0 or (strict and bound == 0):
                return prov  # 0 >(=) bound is violated
        if not pending:
            return None
        occurrences: Dict[str, List[int]] = {}
        for i, row in enumerate(pending):
            for v, _ in row[0]:
                occurrences.setdefault(v, []).append(i)
        # eliminate the variable generating the fewest combined rows
        def cost(v: str) -> Tuple[int, str]:
            p = sum(1 for i in occurrences[v] if dict(pending[i][0])[v] > 0)
            n = len(occurrences[v]) - p
            return (p * n - p - n, v)
        var = min(occurrences, key=cost)
        pos = [r for r in pending if dict(r[0]).get(var, 0) > 0]
        neg = [r for r in pending if dict(r[0]).get(var, 0) < 0]
        rest = [r for r in pending if var not in dict(r[0])]
        combined: Dict[Tuple, _Row] = {}
        for r in rest:
            key = r[:3]
            old = combined.get(key)
            if old is None or len(r[3]) < len(old[3]):
                combined[key] = r
        for r1 in pos:
            for r2 in neg:
                r = _combine(r1, r2, var)
                key = r[:3]
                old = combined.get(key)
                if old is None or len(r[3]) < len(old[3]):
                    combined[key] = r
        rows = list(combined.values())


class LraProcedure:
    """Exact-rational Fourier-Motzkin elimination with provenance tracking.

    Negated strict inequalities normalise to non-strict complements;
    equalities split into two inequalities; disequalities are handled by
    case splitting (and contribute both branch certificates).
    """

    name = "lra"

    def __init__(self) -> None:
        self._cache: Dict[LitSet, Optional[LitSet]] = {}

    def consistency(self, literals: Iterable[Literal]) -> Optional[LitSet]:
        s = frozenset(literals)
        if s in self._cache:
            return self._cache[s]
        result = self._decide(s)
        self._cache[s] = result
        return result

    def _decide(self, s: LitSet) -> Optional[LitSet]:
        pair = _syntactic_pair(s)
        if pair is not None:
            return pair
        base: List[_Row] = []
        splits: List[Literal] = []
        for l in sorted(s):
            rows, is_diseq = _literal_rows(l)
            if is_diseq:
                splits.append(l)
            else:
                base.extend(rows)
        cert: set = set()
        for signs in product((True, False), repeat=len(splits)):
            rows = list(base)
            for l, side in zip(splits, signs):
                atom = l.atom
                prov = frozenset((l,))
                if side:   # e > bound
                    rows.append((atom.coeffs, atom.bound, True, prov))
                else:      # e < bound
                    neg = tuple((v, -c) for v, c in atom.coeffs)
                    rows.append((neg, -atom.bound, True, prov))
            refutation = _fm_refute(rows)
            if refutation is None:
                return None
            cert |= refutation
        return frozenset(cert)


# ---------------------------------------------------------------------------
# Congruence closure


class _ProofForest:
    """Union-find plus an explanation forest over ground terms."""

    def __init__(self) -> None:
        self.rep: Dict[GroundTerm, GroundTerm] = {}
        self.edge: Dict[GroundTerm, Tuple[GroundTerm, tuple]] = {}

    def add(self, t: GroundTerm) -> None:
        if t not in self.rep:
            self.rep[t] = t

    def find(self, t: GroundTerm) -> GroundTerm:
        r = self.rep[t]
        while self.rep[r] is not r:
            r = self.rep[r]
        while self.rep[t] is not r:
            self.rep[t], t = r, self.rep[t]
        return r

    def _path_to_root(self, t: GroundTerm) -> List[GroundTerm]:
        path = [t]
        while path[-1] in self.edge:
            path.append(self.edge[path[-1]][0])
        return path

    def union(self, a: GroundTerm, b: GroundTerm, reason: tuple) -> bool:
        if self.find(a) == self.find(b):
            return False
        # hang a's explanation tree under b via a reversed path
        path = self._path_to_root(a)
        reversed_edges = [(path[i + 1], (path[i], self.edge[path[i]][1]))
                          for i in range(len(path) - 1)]
        for node, e in reversed_edges:
            self.edge[node] = e
        self.edge[a] = (b, reason)
        self.rep[self.find(a)] = self.find(b)
        return True

    def explain(self, a: GroundTerm, b: GroundTerm) -> set:
        if a == b:
            return set()
        pa = self._path_to_root(a)
        pb = self._path_to_root(b)
        common = None
        in_pa = set(pa)
        for t in pb:
            if t in in_pa:
                common = t
                break
        assert common is not None, "explain called on unmerged terms"
        out: set = set()
        for path in (pa, pb):
            for node in path:
                if node == common:
                    break
                parent, reason = self.edge[node]
                if reason[0] == "lit":
                    out.add(reason[1])
                else:
                    _, t1, t2 = reason
                    for x, y in zip(t1.args, t2.args):
                        out |= self.explain(x, y)
        return out


class CcProcedure:
    """Congruence closure by union-find with explanation extraction."""

    name = "cc"

    def __init__(self) -> None:
        self._cache: Dict[LitSet, Optional[LitSet]] = {}

    def consistency(self, literals: Iterable[Literal]) -> Optional[LitSet]:
        s = frozenset(literals)
        if s in self._cache:
            return self._cache[s]
        result = self._decide(s)
        self._cache[s] = result
        return result

    def _decide(self, s: LitSet) -> Optional[LitSet]:
        pair = _syntactic_pair(s)
        if pair is not None:
            return pair
        for l in s:
            if not isinstance(l.atom, EufEq):
                raise TheoryError(f"not an equational literal: {l!r}")
        forest = _ProofForest()
        terms: set = set()
        for l in s:
            terms |= l.atom.lhs.subterms() | l.atom.rhs.subterms()
        for t in terms:
            forest.add(t)
        universe = sorted(terms)
        for l in sorted(s):
            if l.sign:
                forest.union(l.atom.lhs, l.atom.rhs, ("lit", l))
        # propagate congruence to a fixpoint over the subterm universe
        changed = True
        while changed:
            changed = False
            for i, t1 in enumerate(universe):
                if not t1.args:
                    continue
                for t2 in universe[i + 1:]:
                    if (t1.symbol != t2.symbol or len(t1.args) != len(t2.args)
                            or forest.find(t1) == forest.find(t2)):
                        continue
                    if all(forest.find(x) == forest.find(y)
                           for x, y in zip(t1.args, t2.args)):
                        forest.union(t1, t2, ("cong", t1, t2))
                        changed = True
        for l in sorted(s):
            if not l.sign and forest.find(l.atom.lhs) == forest.find(l.atom.rhs):
                cert = forest.explain(l.atom.lhs, l.atom.rhs)
                cert.add(l)
                return frozenset(cert)
        return None


# ---------------------------------------------------------------------------
# Routing and helpers


class CombinedProcedure:
    """Routes mixed literal sets: syntactic pairs on everything, then each
    component procedure on the literals of its atom kind."""

    def __init__(self, name: str, lra: Optional[LraProcedure] = None,
                 cc: Optional[CcProcedure] = None) -> None:
        self.name = name
        self._lra = lra
        self._cc = cc

    def consistency(self, literals: Iterable[Literal]) -> Optional[LitSet]:
        s = frozenset(literals)
        pair = _syntactic_pair(s)
        if pair is not None:
            return pair
        if self._lra is not None:
            lin = frozenset(l for l in s if isinstance(l.atom, LinConstraint))
            if lin:
                result = self._lra.consistency(lin)
                if result is not None:
                    return result
        if self._cc is not None:
            eq = frozenset(l for l in s if isinstance(l.atom, EufEq))
            if eq:
                result = self._cc.consistency(eq)
                if result is not None:
                    return result
        return None


THEORY_NAMES = ("empty", "lra", "cc")


def make_theory(name: str) -> DecisionProcedure:
    if name == "empty":
        return SyntacticProcedure()
    if name == "lra":
        return CombinedProcedure("lra", lra=LraProcedure())
    if name == "cc":
        return CombinedProcedure("cc", cc=CcProcedure())
    raise ValueError(f"unknown theory {name!r} (expected one of {THEORY_NAMES})")


_DEFAULT_SYNTACTIC = SyntacticProcedure()


def syntactic_consistency(s: Iterable[Literal]) -> Optional[LitSet]:
    return _DEFAULT_SYNTACTIC.consistency(s)


def lra_consistency(s: Iterable[Literal]) -> Optional[LitSet]:
    return LraProcedure().consistency(s)


def cc_consistency(s: Iterable[Literal]) -> Optional[LitSet]:
    return CcProcedure().consistency(s)


def m_sat_member(dp: DecisionProcedure, delta: Iterable[Literal],
                 l: Literal) -> bool:
    """True iff ``delta`` entails ``l`` modulo the theory."""
    return dp.consistency(frozenset(delta) | {l.negate()}) is not None


def n_sat(dp: DecisionProcedure, clauses: Iterable[Clause],
          delta: Iterable[Literal]) -> FrozenSet[Literal]:
    """Entailed literals restricted to those occurring in the clause set."""
    delta = frozenset(delta)
    return frozenset(l for l in atoms_of_clauses(clauses)
                     if m_sat_member(dp, delta, l))
