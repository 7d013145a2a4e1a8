"""The trusted proof kernel.

The kernel exposes exactly one way to make progress: feed a statement to
:func:`machine` and then feed coins to the paused outputs it returns. All
invertible rules run automatically; every non-invertible step (focus
selection, disjunct side, on-the-fly polarisation, cut, theory check, memo
reuse, branch navigation) costs one coin. Search state is an explicit
stack of pending branches, so every call returns after a bounded number of
rule applications.

Soundness rests on two facts: :class:`Answer` values can only be minted
here, and a ``Provable`` answer always carries a proof tree that the
independent checker accepts. ``NotProvable`` is only produced once every
branch of the complete rule fragment has been exhausted.
"""

from __future__ import annotations

import enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

from .formulas import (EMPTY_POL, Formula, Lit, AndPos, OrPos, TruePos,
                       FalsePos, AndNeg, OrNeg, TrueNeg, FalseNeg, Literal,
                       PolarisationSet, Polarity, _Structural, classify,
                       negate_formula, polar)
from .theories import DecisionProcedure, SyntacticProcedure


class KernelBug(AssertionError):
    """An internal invariant of the kernel failed."""


class MalformedStatement(ValueError):
    """The statement violates the stored-formula invariant."""


class IllegalCoinError(ValueError):
    """The coin cannot be fed to this output. The output stays usable."""


class StaleStateError(ValueError):
    """The resume handle was already consumed by a later coin."""


# ---------------------------------------------------------------------------
# Sequents


class _Gamma:
    """A stored-formula set with its canonical order and key precomputed.

    Sequents that share a gamma share one of these, so constructing the
    next sequent of a phase costs no re-sorting.
    """

    __slots__ = ("formulas", "ordered", "key")

    def __init__(self, formulas: Iterable[Formula] = ()):
        fs = frozenset(formulas)
        ordered = tuple(sorted(fs))
        self.formulas = fs
        self.ordered = ordered
        self.key = tuple(f._key for f in ordered)

    def add(self, f: Formula) -> "_Gamma":
        if f in self.formulas:
            return self
        g = _Gamma.__new__(_Gamma)
        g.formulas = self.formulas | {f}
        lo, hi = 0, len(self.ordered)
        fk = f._key
        while lo < hi:
            mid = (lo + hi) // 2
            if self.ordered[mid]._key < fk:
                lo = mid + 1
            else:
                hi = mid
        g.ordered = self.ordered[:lo] + (f,) + self.ordered[lo:]
        g.key = self.key[:lo] + (fk,) + self.key[lo:]
        return g


def _as_gamma(gamma) -> _Gamma:
    return gamma if isinstance(gamma, _Gamma) else _Gamma(gamma)


class Unfocused(_Structural):
    """``gamma ⊢ delta`` under a polarisation set; developed when delta = ()."""

    __slots__ = ("_gset", "delta", "pol")

    def __init__(self, gamma: Iterable[Formula] = (),
                 delta: Iterable[Formula] = (),
                 pol: PolarisationSet = EMPTY_POL):
        g = _as_gamma(gamma)
        d = tuple(delta)
        object.__setattr__(self, "_gset", g)
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "pol", pol)
        self._init_key((20, g.key, tuple(f._key for f in d), pol._key))

    @property
    def gamma(self) -> FrozenSet[Formula]:
        return self._gset.formulas

    @property
    def gamma_ordered(self) -> Tuple[Formula, ...]:
        return self._gset.ordered

    @property
    def developed(self) -> bool:
        return not self.delta

    def __repr__(self) -> str:
        g = ", ".join(repr(f) for f in self.gamma_ordered)
        d = ", ".join(repr(f) for f in self.delta)
        p = f"  [pos: {self.pol!r}]" if len(self.pol) else ""
        return f"{g} ⊢ {d}{p}"


class Focused(_Structural):
    """``gamma ⊢ [focus]``: the formula under focus drives synchronous steps."""

    __slots__ = ("_gset", "focus", "pol")

    def __init__(self, gamma: Iterable[Formula], focus: Formula,
                 pol: PolarisationSet = EMPTY_POL):
        g = _as_gamma(gamma)
        object.__setattr__(self, "_gset", g)
        object.__setattr__(self, "focus", focus)
        object.__setattr__(self, "pol", pol)
        self._init_key((21, g.key, focus._key, pol._key))

    @property
    def gamma(self) -> FrozenSet[Formula]:
        return self._gset.formulas

    @property
    def gamma_ordered(self) -> Tuple[Formula, ...]:
        return self._gset.ordered

    @property
    def developed(self) -> bool:
        return False

    def __repr__(self) -> str:
        g = ", ".join(repr(f) for f in self.gamma_ordered)
        p = f"  [pos: {self.pol!r}]" if len(self.pol) else ""
        return f"{g} ⊢ [{self.focus!r}]{p}"


Sequent = Union[Unfocused, Focused]


def step_bound(statement: Sequent) -> int:
    """Per-segment budget: the summed sizes of the formulae in the sequent."""
    total = sum(f.size for f in statement.gamma)
    if isinstance(statement, Unfocused):
        total += sum(f.size for f in statement.delta)
    else:
        total += statement.focus.size
    return total


def gamma_literal_occurrences(gamma: Iterable[Formula]) -> FrozenSet[Literal]:
    out: Set[Literal] = set()
    for f in gamma:
        out |= f.literals
    return frozenset(out)


def occurs_in_gamma(l: Literal, occurrences: FrozenSet[Literal]) -> bool:
    return l in occurrences or l.negate() in occurrences


def positive_stored_literals(seq: Sequent) -> FrozenSet[Literal]:
    """The pol-positive literals stored in gamma (what theory rules see)."""
    return frozenset(f.literal for f in seq.gamma
                     if isinstance(f, Lit) and f.literal in seq.pol)


# ---------------------------------------------------------------------------
# Proof trees


class Rule(enum.Enum):
    AND_POS = "AndPos"
    OR_POS_1 = "OrPos1"
    OR_POS_2 = "OrPos2"
    TRUE_POS = "TruePos"
    INIT_1 = "Init1"
    RELEASE = "Release"
    AND_NEG = "AndNeg"
    OR_NEG = "OrNeg"
    FALSE_NEG = "FalseNeg"
    TRUE_NEG = "TrueNeg"
    STORE = "Store"
    SELECT = "Select"
    INIT_2 = "Init2"
    POL = "Pol"
    CUT = "Cut"
    MEMO_HIT = "MemoHit"


class ProofTree(_Structural):
    """One derivation node; premises are complete subproofs.

    ``certificate`` records the theory's inconsistent subset for Init1,
    Init2 and Pol nodes. MemoHit nodes embed the reused answer's pruned
    statement (and its proof, for independent re-checking).
    """

    __slots__ = ("rule", "conclusion", "premises", "certificate",
                 "memo_statement", "memo_proof")

    def __init__(self, rule: Rule, conclusion: Sequent,
                 premises: Iterable["ProofTree"] = (),
                 certificate: Optional[FrozenSet[Literal]] = None,
                 memo_statement: Optional[Sequent] = None,
                 memo_proof: Optional["ProofTree"] = None):
        premises = tuple(premises)
        object.__setattr__(self, "rule", rule)
        object.__setattr__(self, "conclusion", conclusion)
        object.__setattr__(self, "premises", premises)
        object.__setattr__(self, "certificate",
                           None if certificate is None else frozenset(certificate))
        object.__setattr__(self, "memo_statement", memo_statement)
        object.__setattr__(self, "memo_proof", memo_proof)
        cert_key = (None if certificate is None
                    else tuple(sorted(l._key for l in self.certificate)))
        self._init_key((22, rule.value, conclusion._key,
                        tuple(p._key for p in premises), cert_key,
                        None if memo_statement is None else memo_statement._key))

    def node_count(self) -> int:
        return 1 + sum(p.node_count() for p in self.premises)

    def __repr__(self) -> str:
        return f"<{self.rule.value} proof of {self.conclusion!r}>"


# ---------------------------------------------------------------------------
# Answers (mintable only here)


_MINT = object()


class Answer:
    """A kernel verdict. Readable everywhere, constructible only here."""

    __slots__ = ("provable", "statement", "proof")

    def __init__(self, provable: bool, statement: Sequent,
                 proof: Optional[ProofTree], *, _token: object = None):
        if _token is not _MINT:
            raise TypeError("answers are minted by the kernel only")
        object.__setattr__(self, "provable", provable)
        object.__setattr__(self, "statement", statement)
        object.__setattr__(self, "proof", proof)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("Answer is immutable")

    def __repr__(self) -> str:
        tag = "Provable" if self.provable else "NotProvable"
        return f"{tag}({self.statement!r})"


def _mint_provable(statement: Sequent, proof: ProofTree) -> Answer:
    return Answer(True, statement, proof, _token=_MINT)


def _mint_notprovable(statement: Sequent) -> Answer:
    return Answer(False, statement, None, _token=_MINT)


# ---------------------------------------------------------------------------
# Pruning (eager a-posteriori weakening)


def _needed(node: ProofTree) -> FrozenSet[Formula]:
    """Formulae of the conclusion's gamma actually used by the proof."""
    rule = node.rule
    gamma = node.conclusion.gamma
    if rule in (Rule.TRUE_POS, Rule.TRUE_NEG):
        return frozenset()
    if rule in (Rule.INIT_1, Rule.INIT_2):
        cert = node.certificate or frozenset()
        return frozenset(f for f in gamma
                         if isinstance(f, Lit) and f.literal in cert)
    if rule is Rule.MEMO_HIT:
        return frozenset(node.memo_statement.gamma) & gamma
    needs: Set[Formula] = set()
    for p in node.premises:
        needs |= _needed(p)
    if rule is Rule.SELECT:
        needs.add(negate_formula(node.premises[0].conclusion.focus))
    elif rule is Rule.STORE:
        stored = negate_formula(node.conclusion.delta[0])
        needs.discard(stored)
    elif rule in (Rule.CUT, Rule.POL):
        if rule is Rule.CUT:
            l = node.premises[0].conclusion.delta[0]
        else:
            (l,) = node.premises[0].conclusion.pol.literals - node.conclusion.pol.literals
            cert = node.certificate or frozenset()
            needs |= {f for f in gamma
                      if isinstance(f, Lit) and f.literal in cert}
            l = Lit(l)
        lit = l.literal if isinstance(l, Lit) else None
        if lit is not None and not any(lit in f.literals
                                       or lit.negate() in f.literals
                                       for f in needs):
            witness = min((f for f in node.conclusion.gamma_ordered
                           if lit in f.literals or lit.negate() in f.literals),
                          default=None)
            if witness is not None:
                needs.add(witness)
    return frozenset(needs) & gamma


def _rebuild(node: ProofTree, gamma: FrozenSet[Formula]) -> ProofTree:
    seq = node.conclusion
    if isinstance(seq, Unfocused):
        new_seq: Sequent = Unfocused(gamma, seq.delta, seq.pol)
    else:
        new_seq = Focused(gamma, seq.focus, seq.pol)
    new_premises = []
    for p in node.premises:
        child_gamma = gamma
        if node.rule is Rule.STORE:
            child_gamma = gamma | {negate_formula(seq.delta[0])}
        new_premises.append(_rebuild(p, child_gamma))
    return ProofTree(node.rule, new_seq, new_premises, node.certificate,
                     node.memo_statement, node.memo_proof)


def prune(proof: ProofTree) -> ProofTree:
    """Weaken every gamma down to the formulae the proof actually uses.

    The result proves a sequent whose gamma is a subset of the original's;
    pruning is idempotent and preserves checkability.
    """
    return _rebuild(proof, _needed(proof))


# ---------------------------------------------------------------------------
# Coins


class _FrozenCoin:
    __slots__ = ()

    def __setattr__(self, name, value):
        raise AttributeError("coins are immutable")


class FocusCoin(_FrozenCoin):
    """Select the gamma formula at ``index`` and focus its negation."""

    __slots__ = ("index",)

    def __init__(self, index: int):
        object.__setattr__(self, "index", index)

    def __eq__(self, other):
        return isinstance(other, FocusCoin) and other.index == self.index

    def __hash__(self):
        return hash(("focus", self.index))

    def __repr__(self):
        return f"FocusCoin({self.index})"


class SideCoin(_FrozenCoin):
    __slots__ = ("side",)

    def __init__(self, side: int):
        if side not in (1, 2):
            raise ValueError("side must be 1 or 2")
        object.__setattr__(self, "side", side)

    def __eq__(self, other):
        return isinstance(other, SideCoin) and other.side == self.side

    def __hash__(self):
        return hash(("side", self.side))

    def __repr__(self):
        return f"SideCoin({self.side})"


class PolariseCoin(_FrozenCoin):
    __slots__ = ("literal",)

    def __init__(self, literal: Literal):
        object.__setattr__(self, "literal", literal)

    def __eq__(self, other):
        return isinstance(other, PolariseCoin) and other.literal == self.literal

    def __hash__(self):
        return hash(("pol", self.literal))

    def __repr__(self):
        return f"PolariseCoin({self.literal!r})"


class CutCoin(_FrozenCoin):
    """Cut on a literal; the branch with the literal in delta stays active."""

    __slots__ = ("literal",)

    def __init__(self, literal: Literal):
        object.__setattr__(self, "literal", literal)

    def __eq__(self, other):
        return isinstance(other, CutCoin) and other.literal == self.literal

    def __hash__(self):
        return hash(("cut", self.literal))

    def __repr__(self):
        return f"CutCoin({self.literal!r})"


class ConsistencyCheckCoin(_FrozenCoin):
    __slots__ = ()

    def __eq__(self, other):
        return isinstance(other, ConsistencyCheckCoin)

    def __hash__(self):
        return hash("check")

    def __repr__(self):
        return "ConsistencyCheckCoin()"


class MemoCoin(_FrozenCoin):
    __slots__ = ("answer",)

    def __init__(self, answer: Answer):
        if not isinstance(answer, Answer):
            raise TypeError("memo coins carry kernel answers")
        object.__setattr__(self, "answer", answer)

    def __repr__(self):
        return f"MemoCoin({self.answer!r})"


class MoveNextCoin(_FrozenCoin):
    __slots__ = ("direction", "kind")

    def __init__(self, direction: str, kind: str):
        if direction not in ("left", "right") or kind not in ("success", "failure"):
            raise ValueError("direction in {left,right}, kind in {success,failure}")
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "kind", kind)

    def __eq__(self, other):
        return (isinstance(other, MoveNextCoin)
                and (other.direction, other.kind) == (self.direction, self.kind))

    def __hash__(self):
        return hash(("move", self.direction, self.kind))

    def __repr__(self):
        return f"MoveNextCoin({self.direction!r}, {self.kind!r})"


Coin = Union[FocusCoin, SideCoin, PolariseCoin, CutCoin,
             ConsistencyCheckCoin, MemoCoin, MoveNextCoin]

CHECK = ConsistencyCheckCoin()


class CoinOffer:
    __slots__ = ("id", "kind", "description", "coin")

    def __init__(self, id_: str, kind: str, description: str, coin: Coin):
        self.id = id_
        self.kind = kind
        self.description = description
        self.coin = coin

    def __repr__(self):
        return f"<coin {self.id}: {self.description}>"


# ---------------------------------------------------------------------------
# Outputs


class PendingInfo:
    __slots__ = ("kind", "sequent", "paused")

    def __init__(self, kind: str, sequent: Sequent, paused: bool):
        self.kind = kind
        self.sequent = sequent
        self.paused = paused

    def __repr__(self):
        return f"<pending {self.kind}: {self.sequent!r}>"


class Jackpot:
    __slots__ = ("answer",)

    def __init__(self, answer: Answer):
        self.answer = answer

    def __repr__(self):
        return f"Jackpot({self.answer!r})"


class InsertCoin:
    """A paused search: a goal to look at, the legal coins, a resume handle.

    ``events`` carries the answers the kernel minted for developed branches
    it closed or exhausted since the previous pause (memoisation food).
    ``note`` explains why the previous coin, if any, did not help.
    """

    __slots__ = ("state", "_epoch", "goal", "events", "note")

    def __init__(self, state: "SearchState", goal: Sequent,
                 events: Tuple[Answer, ...], note: Optional[str]):
        self.state = state
        self._epoch = state.epoch
        self.goal = goal
        self.events = events
        self.note = note

    @property
    def legal(self) -> List[CoinOffer]:
        if self._epoch != self.state.epoch:
            raise StaleStateError("this output was already resumed")
        return self.state._offers()

    @property
    def first_coin(self) -> Coin:
        """The first coin of the menu, without building the whole menu."""
        if self._epoch != self.state.epoch:
            raise StaleStateError("this output was already resumed")
        return self.state._first_complete_coin()

    @property
    def pending_info(self) -> List["PendingInfo"]:
        """One entry per pending branch, in tree order (left to right)."""
        if self._epoch != self.state.epoch:
            raise StaleStateError("this output was already resumed")
        return [PendingInfo(b.pending_kind, b.sequent,
                            b.status in (_PAUSED_CHOICE, _PAUSED_SIDE))
                for b in self.state._pending_in_order()]

    def __repr__(self):
        return f"InsertCoin(goal={self.goal!r})"


Output = Union[Jackpot, InsertCoin]


# ---------------------------------------------------------------------------
# Internal search structures


_UNRUN = "unrun"
_RUNNING = "running"
_PAUSED_CHOICE = "paused-choice"
_PAUSED_SIDE = "paused-side"
_CLOSED = "closed"
_FAILED = "failed"
_CANCELLED = "cancelled"

_ROOT_SLOT = ("root", None)


class _Frame:
    """A rule application whose premises are still being proved."""

    __slots__ = ("rule", "sequent", "cert", "kids", "remaining", "slot")

    def __init__(self, rule: Rule, sequent: Sequent, nkids: int, slot,
                 cert: Optional[FrozenSet[Literal]] = None):
        self.rule = rule
        self.sequent = sequent
        self.cert = cert
        self.kids: List[Optional[ProofTree]] = [None] * nkids
        self.remaining = nkids
        self.slot = slot


class _Branch:
    """One obligation; doubles as the pause node when it stops on a choice."""

    __slots__ = ("sequent", "slot", "position", "attempt", "ancestors",
                 "status", "pending_kind", "has_failed", "failed_coins",
                 "complete_remaining", "complete_eligible", "occurrences",
                 "live_attempt", "sides_remaining", "loop_pruned")

    def __init__(self, sequent: Sequent, slot, position: Tuple[int, ...],
                 attempt: Optional["_Attempt"], ancestors: FrozenSet[Sequent]):
        self.sequent = sequent
        self.slot = slot
        self.position = position
        self.attempt = attempt
        self.ancestors = ancestors
        self.status = _UNRUN
        self.pending_kind = "success"
        self.has_failed = False
        self.failed_coins: Set[Coin] = set()
        self.complete_remaining = 0
        self.complete_eligible: Tuple[int, ...] = ()
        self.occurrences: FrozenSet[Literal] = frozenset()
        self.live_attempt: Optional[_Attempt] = None
        self.sides_remaining: Set[int] = set()
        self.loop_pruned = False


class _Attempt:
    """One coin's sub-search under a paused choice goal."""

    __slots__ = ("goal", "coin", "branches", "subattempts", "alive")

    def __init__(self, goal: _Branch, coin: Coin):
        self.goal = goal
        self.coin = coin
        self.branches: List[_Branch] = []
        self.subattempts: List[_Attempt] = []
        self.alive = True
        parent = goal.attempt
        if parent is not None:
            parent.subattempts.append(self)


_COMPLETE_COINS = (ConsistencyCheckCoin, FocusCoin)


class SearchState:
    """Resumable search: current pause, pending branches, step accounting.

    Confined to one caller at a time; every :func:`insert_coin` consumes the
    previous output's handle.
    """

    def __init__(self, statement: Sequent, dp: DecisionProcedure,
                 allow_cuts: bool = True, emit_events: bool = True):
        self.statement = statement
        self.dp = dp
        self.allow_cuts = allow_cuts
        self.emit_events = emit_events
        self.epoch = 0
        self.answer: Optional[Answer] = None
        self.current: Optional[_Branch] = None
        self.pending: Dict[int, _Branch] = {}
        self.events: List[Answer] = []
        self.note: Optional[str] = None
        self.coins_accepted = 0
        self.step_log: List[Tuple[int, int]] = []
        self._steps = 0
        self._budget = 0

    # -- step accounting ----------------------------------------------------

    def _new_segment(self, seq: Sequent) -> None:
        if self._budget:
            self.step_log.append((self._steps, self._budget))
        self._steps = 0
        self._budget = step_bound(seq)

    def _tick(self) -> None:
        self._steps += 1
        if self._steps > self._budget:
            raise KernelBug(
                f"step budget exceeded: {self._steps} > {self._budget}")

    # -- pending bookkeeping ------------------------------------------------

    def _pending_in_order(self) -> List[_Branch]:
        return sorted(self.pending.values(), key=lambda b: b.position)

    def _park(self, b: _Branch) -> None:
        b.pending_kind = "failure" if b.has_failed else "success"
        self.pending[id(b)] = b

    def _unpark(self, b: _Branch) -> None:
        self.pending.pop(id(b), None)

    # -- events ---------------------------------------------------------------

    def _emit_closed(self, goal: _Branch, proof: ProofTree) -> None:
        if (self.emit_events and isinstance(goal.sequent, Unfocused)
                and goal.sequent.developed):
            pruned = prune(proof)
            self.events.append(_mint_provable(pruned.conclusion, pruned))

    def _emit_failed(self, goal: _Branch) -> None:
        if (self.emit_events and not goal.loop_pruned
                and isinstance(goal.sequent, Unfocused)
                and goal.sequent.developed):
            self.events.append(_mint_notprovable(goal.sequent))

    # -- proof assembly -------------------------------------------------------

    def _close_slot(self, slot, proof: ProofTree) -> None:
        while True:
            kind, target = slot[0], slot[1]
            if kind == "frame":
                frame: _Frame = target
                idx = slot[2]
                assert frame.kids[idx] is None
                frame.kids[idx] = proof
                frame.remaining -= 1
                if frame.remaining:
                    return
                proof = ProofTree(frame.rule, frame.sequent, frame.kids,
                                  frame.cert)
                slot = frame.slot
            elif kind == "goal":
                goal: _Branch = target
                goal.status = _CLOSED
                goal.live_attempt = None
                self._emit_closed(goal, proof)
                slot = goal.slot
            else:  # root
                pruned = prune(proof)
                self.answer = _mint_provable(pruned.conclusion, pruned)
                return

    # -- failure --------------------------------------------------------------

    def _cancel_attempt(self, attempt: _Attempt) -> None:
        attempt.alive = False
        for b in attempt.branches:
            if b.status not in (_CLOSED, _FAILED, _CANCELLED):
                b.status = _CANCELLED
                self._unpark(b)
                if self.current is b:
                    self.current = None
        for sub in attempt.subattempts:
            if sub.alive:
                self._cancel_attempt(sub)

    def _fail_branch(self, b: _Branch, reason: str) -> None:
        while True:
            b.status = _FAILED
            self._unpark(b)
            if self.current is b:
                self.current = None
            attempt = b.attempt
            if attempt is None:
                self.answer = _mint_notprovable(self.statement)
                return
            goal = attempt.goal
            self._cancel_attempt(attempt)
            goal.live_attempt = None
            goal.has_failed = True
            if isinstance(attempt.coin, SideCoin):
                goal.sides_remaining.discard(attempt.coin.side)
                if goal.sides_remaining:
                    goal.status = _PAUSED_SIDE
                    self.current = goal
                    self.note = reason
                    return
                reason = "both disjunct sides failed"
                b = goal
                continue
            goal.failed_coins.add(attempt.coin)
            if isinstance(attempt.coin, _COMPLETE_COINS):
                goal.complete_remaining -= 1
                if goal.complete_remaining <= 0:
                    # complete fragment exhausted: the goal is unprovable
                    self._emit_failed(goal)
                    reason = "branch exhausted"
                    b = goal
                    continue
            goal.status = _PAUSED_CHOICE
            self.current = goal
            self.note = reason
            return

    # -- pauses ---------------------------------------------------------------

    def _pause_choice(self, b: _Branch) -> Optional[str]:
        """Returns None and sets the pause up, or a failure reason."""
        seq = b.sequent
        if seq in b.ancestors:
            b.loop_pruned = True
            return "repeated sequent on this branch"
        eligible = []
        for i, f in enumerate(seq.gamma_ordered):
            if not (isinstance(f, Lit) and f.literal in seq.pol):
                eligible.append(i)
        b.complete_eligible = tuple(eligible)
        b.complete_remaining = 1 + len(eligible)  # + the consistency check
        b.occurrences = gamma_literal_occurrences(seq.gamma)
        b.status = _PAUSED_CHOICE
        self.current = b
        return None

    # -- the drivers ----------------------------------------------------------

    def _run(self, b: _Branch) -> None:
        """Drive one branch until it pauses, closes or fails."""
        b.status = _RUNNING
        while True:
            seq = b.sequent
            if isinstance(seq, Unfocused):
                if not seq.delta:
                    reason = self._pause_choice(b)
                    if reason is not None:
                        self._fail_branch(b, reason)
                    return
                head, rest = seq.delta[0], seq.delta[1:]
                if isinstance(head, AndNeg):
                    self._tick()
                    frame = _Frame(Rule.AND_NEG, seq, 2, b.slot)
                    sibling = _Branch(
                        Unfocused(seq._gset, (head.right,) + rest, seq.pol),
                        ("frame", frame, 1), b.position + (1,), b.attempt,
                        b.ancestors)
                    if b.attempt is not None:
                        b.attempt.branches.append(sibling)
                    self._park(sibling)
                    b.sequent = Unfocused(seq._gset, (head.left,) + rest,
                                          seq.pol)
                    b.slot = ("frame", frame, 0)
                    b.position = b.position + (0,)
                elif isinstance(head, OrNeg):
                    self._tick()
                    frame = _Frame(Rule.OR_NEG, seq, 1, b.slot)
                    b.sequent = Unfocused(seq.gamma,
                                          (head.left, head.right) + rest,
                                          seq.pol)
                    b.slot = ("frame", frame, 0)
                elif isinstance(head, FalseNeg):
                    self._tick()
                    frame = _Frame(Rule.FALSE_NEG, seq, 1, b.slot)
                    b.sequent = Unfocused(seq._gset, rest, seq.pol)
                    b.slot = ("frame", frame, 0)
                elif isinstance(head, TrueNeg):
                    self._tick()
                    self._close_branch(b, ProofTree(Rule.TRUE_NEG, seq))
                    return
                else:
                    # Store: head is a literal or a positive formula
                    self._tick()
                    stored = negate_formula(head)
                    frame = _Frame(Rule.STORE, seq, 1, b.slot)
                    b.sequent = Unfocused(seq._gset.add(stored), rest,
                                          polar(seq.pol, stored))
                    b.slot = ("frame", frame, 0)
            else:
                focus = seq.focus
                if isinstance(focus, Lit):
                    l = focus.literal
                    if l in seq.pol:
                        self._tick()
                        cert = self.dp.consistency(
                            positive_stored_literals(seq) | {l.negate()})
                        if cert is None:
                            self._fail_branch(
                                b, f"theory found {l!r} consistent with the "
                                   f"stored literals")
                            return
                        self._close_branch(
                            b, ProofTree(Rule.INIT_1, seq, certificate=cert))
                        return
                    # not pol-positive: release into the asynchronous phase
                    frame = _Frame(Rule.RELEASE, seq, 1, b.slot)
                    b.sequent = Unfocused(seq._gset, (focus,), seq.pol)
                    b.slot = ("frame", frame, 0)
                elif isinstance(focus, AndPos):
                    self._tick()
                    frame = _Frame(Rule.AND_POS, seq, 2, b.slot)
                    sibling = _Branch(Focused(seq._gset, focus.right, seq.pol),
                                      ("frame", frame, 1), b.position + (1,),
                                      b.attempt, b.ancestors)
                    if b.attempt is not None:
                        b.attempt.branches.append(sibling)
                    self._park(sibling)
                    b.sequent = Focused(seq._gset, focus.left, seq.pol)
                    b.slot = ("frame", frame, 0)
                    b.position = b.position + (0,)
                elif isinstance(focus, OrPos):
                    b.status = _PAUSED_SIDE
                    b.sides_remaining = {1, 2}
                    self.current = b
                    return
                elif isinstance(focus, TruePos):
                    self._tick()
                    self._close_branch(b, ProofTree(Rule.TRUE_POS, seq))
                    return
                elif isinstance(focus, FalsePos):
                    self._fail_branch(b, "⊥⁺ under focus has no rule")
                    return
                else:
                    # negative formula under focus: release
                    frame = _Frame(Rule.RELEASE, seq, 1, b.slot)
                    b.sequent = Unfocused(seq._gset, (focus,), seq.pol)
                    b.slot = ("frame", frame, 0)

    def _close_branch(self, b: _Branch, proof: ProofTree) -> None:
        b.status = _CLOSED
        if self.current is b:
            self.current = None
        self._close_slot(b.slot, proof)

    # -- scheduling -----------------------------------------------------------

    def _settle(self) -> Output:
        while True:
            if self.answer is not None:
                if self._budget:
                    self.step_log.append((self._steps, self._budget))
                    self._budget = 0
                self.epoch += 1
                return Jackpot(self.answer)
            if self.current is not None:
                out = InsertCoin(self, self.current.sequent,
                                 tuple(self.events), self.note)
                self.events.clear()
                self.note = None
                return out
            if not self.pending:
                raise KernelBug("no work left but no verdict either")
            nxt = min(self.pending.values(), key=lambda x: x.position)
            self._unpark(nxt)
            if nxt.status == _UNRUN:
                self._new_segment(nxt.sequent)
                self._run(nxt)
            else:
                # a parked pause resurfaces
                self.current = nxt

    # -- coin menu ------------------------------------------------------------

    def _first_complete_coin(self) -> Coin:
        b = self.current
        if b is None:
            raise KernelBug("no current pause")
        if b.status == _PAUSED_SIDE:
            return SideCoin(min(b.sides_remaining))
        if CHECK not in b.failed_coins:
            return CHECK
        for i in b.complete_eligible:
            coin = FocusCoin(i)
            if coin not in b.failed_coins:
                return coin
        raise KernelBug("paused choice with its complete fragment exhausted")

    def _offers(self) -> List[CoinOffer]:
        b = self.current
        if b is None:
            return []
        offers: List[CoinOffer] = []
        if b.status == _PAUSED_SIDE:
            focus = b.sequent.focus
            for side in sorted(b.sides_remaining):
                arm = focus.left if side == 1 else focus.right
                offers.append(CoinOffer(f"side:{side}", "side",
                                        f"take disjunct {side}: {arm!r}",
                                        SideCoin(side)))
        else:
            seq = b.sequent
            if CHECK not in b.failed_coins:
                offers.append(CoinOffer(
                    "check", "check",
                    "close by theory inconsistency of the stored literals",
                    CHECK))
            for i in b.complete_eligible:
                coin = FocusCoin(i)
                if coin not in b.failed_coins:
                    f = seq.gamma_ordered[i]
                    offers.append(CoinOffer(f"focus:{i}", "focus",
                                            f"select {f!r} and focus its negation",
                                            coin))
            candidates = set()
            for l in b.occurrences:
                candidates.add(l)
                candidates.add(l.negate())
            unpol = sorted(l for l in candidates
                           if l not in seq.pol and l.negate() not in seq.pol)
            for l in unpol:
                coin = PolariseCoin(l)
                if coin not in b.failed_coins:
                    offers.append(CoinOffer(f"pol:{l!r}", "polarise",
                                            f"polarise {l!r} positive", coin))
            if self.allow_cuts:
                for l in unpol:
                    coin = CutCoin(l)
                    if coin not in b.failed_coins:
                        offers.append(CoinOffer(f"cut:{l!r}", "cut",
                                                f"cut on {l!r}", coin))
        kinds_present = {x.pending_kind for x in self.pending.values()}
        for kind in ("success", "failure"):
            if kind in kinds_present:
                for direction in ("left", "right"):
                    offers.append(CoinOffer(
                        f"move:{direction}:{kind}", "move",
                        f"move to the {direction}most pending {kind} branch",
                        MoveNextCoin(direction, kind)))
        return offers

    # -- coin application -------------------------------------------------------

    def _losing(self, b: _Branch, coin: Coin, reason: str,
                complete: bool) -> Output:
        b.failed_coins.add(coin)
        b.has_failed = True
        if complete:
            b.complete_remaining -= 1
            if b.complete_remaining <= 0:
                self._emit_failed(b)
                self._fail_branch(b, "branch exhausted")
                return self._settle()
        self.note = reason
        return self._settle()

    def _spawn(self, goal: _Branch, coin: Coin, frame_rule: Rule,
               premises: List[Sequent],
               cert: Optional[FrozenSet[Literal]] = None) -> Output:
        """Open an attempt applying a structural rule at a choice goal."""
        attempt = _Attempt(goal, coin)
        goal.live_attempt = attempt
        goal.status = _RUNNING
        self.current = None
        frame = _Frame(frame_rule, goal.sequent, len(premises),
                       ("goal", goal), cert)
        ancestors = goal.ancestors | {goal.sequent}
        first: Optional[_Branch] = None
        for i, premise in enumerate(premises):
            child = _Branch(premise, ("frame", frame, i),
                            goal.position + (i,) if len(premises) > 1
                            else goal.position,
                            attempt, ancestors)
            attempt.branches.append(child)
            if i == 0:
                first = child
            else:
                self._park(child)
        self._new_segment(first.sequent)
        self._run(first)
        return self._settle()

    def _accept(self) -> None:
        # the point of no return: the previous output is consumed
        self.epoch += 1
        self.coins_accepted += 1

    def insert(self, coin: Coin) -> Output:
        if self.answer is not None:
            raise StaleStateError("the search already produced its answer")
        b = self.current
        if b is None:
            raise KernelBug("no current pause to feed")

        if isinstance(coin, MoveNextCoin):
            matching = [x for x in self._pending_in_order()
                        if x.pending_kind == coin.kind]
            if not matching:
                raise IllegalCoinError(f"no pending {coin.kind} branch")
            target = matching[0] if coin.direction == "left" else matching[-1]
            self._accept()
            self._unpark(target)
            self._park(b)
            self.current = None
            if target.status == _UNRUN:
                self._new_segment(target.sequent)
                self._run(target)
            else:
                self.current = target
            return self._settle()

        if b.status == _PAUSED_SIDE:
            if not isinstance(coin, SideCoin):
                raise IllegalCoinError(
                    "this pause is a disjunct choice: side coins only")
            if coin.side not in b.sides_remaining:
                raise IllegalCoinError(f"side {coin.side} already failed")
            self._accept()
            seq = b.sequent
            arm = seq.focus.left if coin.side == 1 else seq.focus.right
            rule = Rule.OR_POS_1 if coin.side == 1 else Rule.OR_POS_2
            # a side choice is a nested alternative: track it as an attempt
            # so its failure rolls back to this pause, not past it
            attempt = _Attempt(b, coin)
            b.live_attempt = attempt
            b.status = _RUNNING
            self.current = None
            frame = _Frame(rule, seq, 1, ("goal", b))
            child = _Branch(Focused(seq._gset, arm, seq.pol),
                            ("frame", frame, 0), b.position, attempt,
                            b.ancestors)
            attempt.branches.append(child)
            self._new_segment(child.sequent)
            self._run(child)
            return self._settle()

        if b.status != _PAUSED_CHOICE:
            raise KernelBug(f"current pause in unexpected state {b.status}")
        seq = b.sequent

        if isinstance(coin, MemoCoin):
            a = coin.answer
            self._accept()
            if a.provable and a.statement.gamma <= seq.gamma:
                proof = ProofTree(Rule.MEMO_HIT, seq,
                                  memo_statement=a.statement,
                                  memo_proof=a.proof)
                self._close_branch(b, proof)
                return self._settle()
            if not a.provable and seq.gamma <= a.statement.gamma:
                b.loop_pruned = True  # refuted by memo: no fresh event
                self._fail_branch(b, "memoised refutation applies")
                return self._settle()
            return self._losing(b, coin, "memoised answer does not apply here",
                                complete=False)

        if isinstance(coin, ConsistencyCheckCoin):
            if coin in b.failed_coins:
                raise IllegalCoinError("consistency check already failed here")
            self._accept()
            cert = self.dp.consistency(positive_stored_literals(seq))
            if cert is None:
                return self._losing(b, coin,
                                    "stored literals are theory-consistent",
                                    complete=True)
            self._close_branch(b, ProofTree(Rule.INIT_2, seq, certificate=cert))
            return self._settle()

        if isinstance(coin, FocusCoin):
            if not (0 <= coin.index < len(seq.gamma_ordered)):
                raise IllegalCoinError(f"no gamma formula at index {coin.index}")
            if coin.index not in b.complete_eligible:
                raise IllegalCoinError(
                    "that stored formula's negation is pol-negative")
            if coin in b.failed_coins:
                raise IllegalCoinError("this focus already failed here")
            self._accept()
            target = seq.gamma_ordered[coin.index]
            return self._spawn(b, coin, Rule.SELECT,
                               [Focused(seq._gset, negate_formula(target),
                                        seq.pol)])

        if isinstance(coin, PolariseCoin):
            l = coin.literal
            if not occurs_in_gamma(l, b.occurrences):
                raise IllegalCoinError(f"{l!r} does not occur in gamma")
            if l in seq.pol or l.negate() in seq.pol:
                raise IllegalCoinError(f"{l!r} is already polarised")
            if coin in b.failed_coins:
                raise IllegalCoinError("this polarisation already failed here")
            self._accept()
            cert = self.dp.consistency(
                positive_stored_literals(seq) | {l.negate()})
            if cert is None:
                return self._losing(
                    b, coin, f"theory does not entail {l!r} here",
                    complete=False)
            return self._spawn(b, coin, Rule.POL,
                               [Unfocused(seq._gset, (), seq.pol.with_literal(l))],
                               cert=cert)

        if isinstance(coin, CutCoin):
            if not self.allow_cuts:
                raise IllegalCoinError("cuts are disabled")
            l = coin.literal
            if not occurs_in_gamma(l, b.occurrences):
                raise IllegalCoinError(f"{l!r} does not occur in gamma")
            if coin in b.failed_coins:
                raise IllegalCoinError("this cut already failed here")
            self._accept()
            if l in seq.pol or l.negate() in seq.pol:
                return self._losing(b, coin, f"{l!r} is already polarised",
                                    complete=False)
            return self._spawn(b, coin, Rule.CUT,
                               [Unfocused(seq._gset, (Lit(l),), seq.pol),
                                Unfocused(seq._gset, (Lit(l.negate()),),
                                          seq.pol)])

        raise IllegalCoinError(f"unrecognised coin {coin!r}")


# ---------------------------------------------------------------------------
# Public API


def _validate_statement(statement: Sequent) -> None:
    if not isinstance(statement, Unfocused):
        raise MalformedStatement("statements are unfocused sequents")
    for f in statement.gamma:
        shape = classify(f, statement.pol)
        if isinstance(f, Lit):
            if shape is not Polarity.POSITIVE:
                raise MalformedStatement(
                    f"stored literal {f!r} is not declared positive")
        elif shape is not Polarity.NEGATIVE:
            raise MalformedStatement(
                f"stored formula {f!r} is not negative")


def machine(statement: Sequent,
            dp: Optional[DecisionProcedure] = None, *,
            allow_cuts: bool = True,
            emit_events: bool = True) -> Output:
    """Start a search: run the asynchronous phase and pause or conclude."""
    _validate_statement(statement)
    state = SearchState(statement, dp if dp is not None else SyntacticProcedure(),
                        allow_cuts=allow_cuts, emit_events=emit_events)
    root = _Branch(statement, _ROOT_SLOT, (), None, frozenset())
    state._new_segment(statement)
    state._run(root)
    return state._settle()


def insert_coin(output: Output, coin: Coin) -> Output:
    """Feed one coin to a paused output. Consumes the handle."""
    if isinstance(output, Jackpot):
        raise IllegalCoinError("the machine already paid out")
    state = output.state
    if output._epoch != state.epoch:
        raise StaleStateError("this output was already resumed")
    return state.insert(coin)
