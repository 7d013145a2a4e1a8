"""Elementary DPLL(T) as an explicit transition system.

This is the reference semantics used to cross-validate the proof-search
plugins and to drive the bisimulation harness. States are immutable; a
transition either satisfies all its side conditions and yields the
successor state, or is rejected naming the failed condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .formulas import Clause, Literal, atoms_of_clauses
from .theories import DecisionProcedure, n_sat


@dataclass(frozen=True)
class TaggedLiteral:
    literal: Literal
    decision: bool = False

    def __repr__(self) -> str:
        return f"{self.literal!r}^d" if self.decision else repr(self.literal)


class Unsat:
    """The terminal refutation state."""

    _instance: Optional["Unsat"] = None

    def __new__(cls) -> "Unsat":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "unsat"


UNSAT = Unsat()


@dataclass(frozen=True)
class Pair:
    """A search state: trail of possibly-tagged literals and the clause set."""

    delta: Tuple[TaggedLiteral, ...]
    phi: FrozenSet[Clause]

    def forget(self) -> FrozenSet[Literal]:
        return frozenset(t.literal for t in self.delta)

    def has_decision(self) -> bool:
        return any(t.decision for t in self.delta)

    def __repr__(self) -> str:
        trail = ", ".join(repr(t) for t in self.delta) or "∅"
        return f"{trail} ∥ |φ|={len(self.phi)}"


DpllState = object  # Unsat | Pair


def initial_state(phi: Iterable[Clause]) -> Pair:
    return Pair((), frozenset(phi))


# ---------------------------------------------------------------------------
# Transitions


@dataclass(frozen=True)
class Decide:
    literal: Literal


@dataclass(frozen=True)
class Propagate:
    clause: Clause     # the clause C ∨ l as it occurs in phi
    literal: Literal   # the propagated literal l


@dataclass(frozen=True)
class PropagateT:
    literal: Literal


@dataclass(frozen=True)
class Fail:
    clause: Clause


@dataclass(frozen=True)
class FailT:
    pass


@dataclass(frozen=True)
class Backtrack:
    clause: Clause


@dataclass(frozen=True)
class BacktrackT:
    pass


Transition = object

_RANK = {Fail: 0, FailT: 1, Backtrack: 2, BacktrackT: 3,
         Propagate: 4, PropagateT: 5, Decide: 6}


def _transition_key(t: Transition) -> tuple:
    rank = _RANK[type(t)]
    if isinstance(t, (Fail, Backtrack)):
        return (rank, t.clause.sort_key())
    if isinstance(t, Propagate):
        return (rank, t.clause.sort_key(), t.literal.sort_key())
    if isinstance(t, (PropagateT, Decide)):
        return (rank, t.literal.sort_key())
    return (rank,)


def format_transition(t: Transition) -> str:
    if isinstance(t, Decide):
        return f"Decide {t.literal!r}"
    if isinstance(t, Propagate):
        return f"Propagate {t.clause!r} {t.literal!r}"
    if isinstance(t, PropagateT):
        return f"PropagateT {t.literal!r}"
    if isinstance(t, Fail):
        return f"Fail {t.clause!r}"
    if isinstance(t, FailT):
        return "FailT"
    if isinstance(t, Backtrack):
        return f"Backtrack {t.clause!r}"
    if isinstance(t, BacktrackT):
        return "BacktrackT"
    raise TypeError(f"not a transition: {t!r}")


class TransitionError(Exception):
    """A side condition of the attempted transition does not hold."""

    def __init__(self, transition: Transition, condition: str):
        super().__init__(f"{format_transition(transition)}: {condition}")
        self.transition = transition
        self.condition = condition


def _fresh(state: Pair, l: Literal) -> bool:
    forget = state.forget()
    return l not in forget and l.negate() not in forget


def _falsifies(state: Pair, lits: Iterable[Literal]) -> bool:
    forget = state.forget()
    return all(l.negate() in forget for l in lits)


def _split_last_decision(delta: Sequence[TaggedLiteral]):
    for i in range(len(delta) - 1, -1, -1):
        if delta[i].decision:
            return delta[:i], delta[i].literal
    return None


def apply(state: DpllState, t: Transition, dp: DecisionProcedure) -> DpllState:
    """Apply one transition, enforcing every side condition of its rule."""
    if not isinstance(state, Pair):
        raise TransitionError(t, "state is already unsat")

    if isinstance(t, Decide):
        if t.literal not in atoms_of_clauses(state.phi):
            raise TransitionError(t, "literal does not occur in the clause set")
        if not _fresh(state, t.literal):
            raise TransitionError(t, "literal or its negation already in the trail")
        return Pair(state.delta + (TaggedLiteral(t.literal, True),), state.phi)

    if isinstance(t, Propagate):
        if t.clause not in state.phi:
            raise TransitionError(t, "clause not in the clause set")
        if t.literal not in t.clause:
            raise TransitionError(t, "literal not in the clause")
        if not _falsifies(state, set(t.clause.literals) - {t.literal}):
            raise TransitionError(t, "remainder of the clause is not falsified")
        if not _fresh(state, t.literal):
            raise TransitionError(t, "literal or its negation already in the trail")
        return Pair(state.delta + (TaggedLiteral(t.literal),), state.phi)

    if isinstance(t, PropagateT):
        if t.literal not in atoms_of_clauses(state.phi):
            raise TransitionError(t, "literal does not occur in the clause set")
        if not _fresh(state, t.literal):
            raise TransitionError(t, "literal or its negation already in the trail")
        if dp.consistency(state.forget() | {t.literal.negate()}) is None:
            raise TransitionError(t, "literal is not entailed by the trail")
        return Pair(state.delta + (TaggedLiteral(t.literal),), state.phi)

    if isinstance(t, Fail):
        if t.clause not in state.phi:
            raise TransitionError(t, "clause not in the clause set")
        if not _falsifies(state, t.clause):
            raise TransitionError(t, "clause is not falsified")
        if state.has_decision():
            raise TransitionError(t, "trail still holds a decision literal")
        return UNSAT

    if isinstance(t, FailT):
        if dp.consistency(state.forget()) is None:
            raise TransitionError(t, "trail is consistent with the theory")
        if state.has_decision():
            raise TransitionError(t, "trail still holds a decision literal")
        return UNSAT

    if isinstance(t, Backtrack):
        if t.clause not in state.phi:
            raise TransitionError(t, "clause not in the clause set")
        if not _falsifies(state, t.clause):
            raise TransitionError(t, "clause is not falsified")
        split = _split_last_decision(state.delta)
        if split is None:
            raise TransitionError(t, "no decision literal to backtrack")
        prefix, l = split
        return Pair(tuple(prefix) + (TaggedLiteral(l.negate()),), state.phi)

    if isinstance(t, BacktrackT):
        if dp.consistency(state.forget()) is None:
            raise TransitionError(t, "trail is consistent with the theory")
        split = _split_last_decision(state.delta)
        if split is None:
            raise TransitionError(t, "no decision literal to backtrack")
        prefix, l = split
        return Pair(tuple(prefix) + (TaggedLiteral(l.negate()),), state.phi)

    raise TypeError(f"not a transition: {t!r}")


def legal_transitions(state: DpllState, dp: DecisionProcedure) -> Tuple[Transition, ...]:
    """Every transition whose side conditions hold, in canonical order."""
    if not isinstance(state, Pair):
        raise ValueError("legal_transitions requires a live state, not unsat")
    forget = state.forget()
    out: List[Transition] = []
    falsified = [c for c in state.phi if _falsifies(state, c)]
    theory_conflict = dp.consistency(forget) is not None
    has_decision = state.has_decision()
    for c in falsified:
        out.append(Backtrack(c) if has_decision else Fail(c))
    if theory_conflict:
        out.append(BacktrackT() if has_decision else FailT())
    for c in state.phi:
        for l in c:
            if _fresh(state, l) and _falsifies(state, set(c.literals) - {l}):
                out.append(Propagate(c, l))
    for l in n_sat(dp, state.phi, forget):
        if _fresh(state, l):
            out.append(PropagateT(l))
    for l in atoms_of_clauses(state.phi):
        if _fresh(state, l):
            out.append(Decide(l))
    return tuple(sorted(out, key=_transition_key))


def backtrack_points(delta: Sequence[TaggedLiteral]) -> List[FrozenSet[Literal]]:
    """Unexplored alternatives encoded in a trail, innermost first.

    Each decision literal contributes the untagged prefix before it plus the
    negation of the decision; the list length equals the number of decisions.
    """
    out: List[FrozenSet[Literal]] = []
    for i, t in enumerate(delta):
        if t.decision:
            point = frozenset(x.literal for x in delta[:i]) | {t.literal.negate()}
            out.insert(0, point)
    return out


# ---------------------------------------------------------------------------
# Closed runs


Strategy = Callable[[Pair, Tuple[Transition, ...]], Transition]


def first_legal(state: Pair, legal: Tuple[Transition, ...]) -> Transition:
    """Default chooser: conflict rules first, then propagation, then the
    canonically smallest decision (the plugin strategy order)."""
    return legal[0]


class StepLimitExceeded(Exception):
    pass


@dataclass
class RunResult:
    outcome: str  # "unsat" | "saturated"
    delta: Optional[Tuple[TaggedLiteral, ...]]
    trace: List[Tuple[Transition, DpllState]]

    @property
    def unsat(self) -> bool:
        return self.outcome == "unsat"


def run(phi: Iterable[Clause], dp: DecisionProcedure,
        strategy: Strategy = first_legal, step_limit: int = 10000) -> RunResult:
    """Drive transitions to unsat or saturation under a deterministic chooser."""
    state: DpllState = initial_state(phi)
    trace: List[Tuple[Transition, DpllState]] = []
    for _ in range(step_limit):
        if not isinstance(state, Pair):
            return RunResult("unsat", None, trace)
        legal = legal_transitions(state, dp)
        if not legal:
            return RunResult("saturated", state.delta, trace)
        t = strategy(state, legal)
        state = apply(state, t, dp)
        trace.append((t, state))
    raise StepLimitExceeded(f"no terminal state within {step_limit} transitions")


def format_trace(trace: Iterable[Tuple[Transition, DpllState]]) -> str:
    """One transition per line: ``RULE params : Δ ∥ |φ|``."""
    lines = []
    for t, state in trace:
        lines.append(f"{format_transition(t)} : {state!r}")
    return "\n".join(lines)
