"""Untrusted search strategies driving the kernel's slot machine.

Plugins can only obtain answers from kernel outputs (or a memo store fed
with them); the worst a buggy plugin can do is waste coins or give up.
Shipped strategies: ``naive`` (insert the first offered coin, exhaustive),
``dpll_wl`` (DPLL(T) in lockstep with the proof search, with watched
literals, memoisation and restarts) and ``interactive`` (prompt a human).
"""

from __future__ import annotations

from typing import Dict, FrozenSet, Iterable, List, Optional, Protocol, \
    Sequence, Set, Tuple

from .formulas import Clause, Formula, Lit, Literal, atoms_of_clauses, \
    clause_of_formula, represent_clause
from .kernel import (CHECK, Answer, CutCoin, FocusCoin, Focused, InsertCoin,
                     Jackpot, MemoCoin, MoveNextCoin, Output, PolariseCoin,
                     SideCoin, Unfocused, insert_coin, machine)
from .memo import MemoStore, memo_insert, memo_lookup
from .theories import DecisionProcedure, SyntacticProcedure, m_sat_member


class PluginError(Exception):
    """The plugin cannot handle this statement or lost track of the search."""


class BudgetExceeded(PluginError):
    """The plugin's coin budget ran out before the kernel paid out."""


class Plugin(Protocol):
    def solve(self, out: Output) -> Answer:
        ...


# ---------------------------------------------------------------------------
# Naive plugin


class NaivePlugin:
    """Inserts the first offered coin, every time.

    Because the kernel removes failed coins from the menu and fails a
    branch once its complete fragment is exhausted, this is a depth-first
    exhaustive search; it terminates on finite search spaces.
    """

    def __init__(self, budget: int = 200000):
        self.budget = budget
        self.coins = 0

    def solve(self, out: Output) -> Answer:
        while isinstance(out, InsertCoin):
            if self.coins >= self.budget:
                raise BudgetExceeded(f"naive plugin spent {self.coins} coins")
            offers = out.legal
            if not offers:
                raise PluginError("paused with an empty coin menu")
            self.coins += 1
            out = insert_coin(out, offers[0].coin)
        return out.answer


def naive_solve(out: Output, budget: int = 200000) -> Answer:
    return NaivePlugin(budget=budget).solve(out)


# ---------------------------------------------------------------------------
# Watched literals


class WatchResult:
    __slots__ = ("units", "conflicts")

    def __init__(self, units: List[Tuple[Clause, Literal]],
                 conflicts: List[Clause]):
        self.units = units
        self.conflicts = conflicts


class WatchTable:
    """Two watched positions per clause, plus a literal-to-clauses index.

    Watches only ever move off literals that became false, so unassigning
    (chronological backtracking) never invalidates them. A unit clause
    watches its single literal twice.
    """

    def __init__(self, clauses: Sequence[Clause]):
        self.clauses: List[Clause] = list(clauses)
        self.lits: List[Tuple[Literal, ...]] = [c.ordered for c in clauses]
        self.watches: List[Tuple[int, int]] = []
        self.watching: Dict[Literal, Set[int]] = {}
        self.true_lits: Set[Literal] = set()
        self.empty_clauses: List[Clause] = []
        for ci, lits in enumerate(self.lits):
            if not lits:
                self.watches.append((0, 0))
                self.empty_clauses.append(self.clauses[ci])
                continue
            positions = (0, 1) if len(lits) > 1 else (0, 0)
            self.watches.append(positions)
            for pos in set(positions):
                self.watching.setdefault(lits[pos], set()).add(ci)

    def value(self, l: Literal) -> Optional[bool]:
        if l in self.true_lits:
            return True
        if l.negate() in self.true_lits:
            return False
        return None

    def initial_units(self) -> List[Tuple[Clause, Literal]]:
        return [(c, c.ordered[0]) for c in self.clauses if len(c) == 1]

    def assign(self, assigned: Literal) -> WatchResult:
        if self.value(assigned) is not None:
            raise ValueError(f"{assigned!r} is already assigned")
        self.true_lits.add(assigned)
        falsified = assigned.negate()
        units: List[Tuple[Clause, Literal]] = []
        conflicts: List[Clause] = []
        for ci in sorted(self.watching.get(falsified, ())):
            lits = self.lits[ci]
            w1, w2 = self.watches[ci]
            if lits[w1] == falsified and lits[w2] == falsified:
                # a unit clause watching its only literal twice
                conflicts.append(self.clauses[ci])
                continue
            keep, moving = (w1, w2) if lits[w2] == falsified else (w2, w1)
            other = lits[keep]
            if self.value(other) is True:
                continue  # satisfied through the other watch
            replacement = None
            for pos, l in enumerate(lits):
                if pos in (keep, moving):
                    continue
                if self.value(l) is not False:
                    replacement = pos
                    break
            if replacement is not None:
                self.watches[ci] = (keep, replacement)
                self.watching[falsified].discard(ci)
                self.watching.setdefault(lits[replacement], set()).add(ci)
            elif self.value(other) is None:
                units.append((self.clauses[ci], other))
            else:
                conflicts.append(self.clauses[ci])
        return WatchResult(units, conflicts)

    def unassign(self, l: Literal) -> None:
        self.true_lits.discard(l)


def watch_update(table: WatchTable, assigned: Literal
                 ) -> Tuple[WatchTable, List[Tuple[Clause, Literal]],
                            List[Clause]]:
    """Assign a literal, relocating watches; report new units and conflicts."""
    result = table.assign(assigned)
    return table, result.units, result.conflicts


def watch_invariant_violations(table: WatchTable) -> List[Clause]:
    """Clauses breaking the lazy-watch invariant: not satisfied, a watched
    literal false, and still more than one non-false literal."""
    bad = []
    for ci, lits in enumerate(table.lits):
        if not lits:
            continue
        if any(table.value(l) is True for l in lits):
            continue
        w1, w2 = table.watches[ci]
        if table.value(lits[w1]) is not False and \
                table.value(lits[w2]) is not False:
            continue
        non_false = sum(1 for l in lits if table.value(l) is not False)
        if non_false > 1:
            bad.append(table.clauses[ci])
    return bad


# ---------------------------------------------------------------------------
# DPLL(T) with watched literals


class DpllWlPlugin:
    """Runs DPLL(T) and mirrors every rule into kernel coins.

    Conflict rules fire a focus on the falsified clause's representation
    (closed entirely by theory calls), unit propagation a focus whose
    release/store introduces the unit literal, theory propagation a
    polarise coin, theory conflicts a consistency check, and decisions a
    cut whose active branch assumes the decided literal. The memo store is
    consulted before anything else.
    """

    def __init__(self, memo: Optional[MemoStore] = None, use_memo: bool = True,
                 restarts: Optional[Sequence[int]] = None,
                 budget: int = 500000, lockstep_check: bool = False):
        self.memo = (memo if memo is not None else MemoStore()) if use_memo \
            else None
        self.restart_schedule = list(restarts) if restarts else []
        self.budget = budget
        self.coins = 0
        self.restarts_done = 0
        self.lockstep_check = lockstep_check
        self.lockstep_failures: List[str] = []
        self.statement = None
        self.dp: DecisionProcedure = SyntacticProcedure()
        self.allow_cuts = True
        self.clauses: List[Clause] = []
        self.reps: Dict[Clause, Formula] = {}
        self.atoms: Tuple[Literal, ...] = ()
        self.theory_active = False
        self._trail: List[Tuple[Literal, bool]] = []
        self._trail_set: Set[Literal] = set()
        self._watch: Optional[WatchTable] = None
        self._units: List[Tuple[Clause, Literal]] = []
        self._conflicts: List[Clause] = []
        self._branch_trails: Dict[FrozenSet[Literal],
                                  List[Tuple[Literal, bool]]] = {}

    # -- session ------------------------------------------------------------

    def restart(self) -> Output:
        """Fresh kernel run of the recorded statement; memo survives."""
        if self.statement is None:
            raise PluginError("no recorded statement to restart from")
        self.restarts_done += 1
        self._reset_view()
        return machine(self.statement, self.dp, allow_cuts=self.allow_cuts)

    def _reset_view(self) -> None:
        self._trail = []
        self._trail_set = set()
        self._watch = WatchTable(self.clauses)
        self._units = list(self._watch.initial_units())
        self._conflicts = list(self._watch.empty_clauses)
        self._branch_trails = {}

    # -- plumbing -----------------------------------------------------------

    def _ingest(self, out: Output) -> None:
        if self.memo is not None and isinstance(out, InsertCoin):
            for answer in out.events:
                memo_insert(self.memo, answer)

    def _insert(self, out: InsertCoin, coin) -> Output:
        if self.coins >= self.budget:
            raise BudgetExceeded(f"dpll_wl spent {self.coins} coins")
        self.coins += 1
        nxt = insert_coin(out, coin)
        self._ingest(nxt)
        return nxt

    def _assign(self, l: Literal) -> None:
        _, units, conflicts = watch_update(self._watch, l)
        self._units.extend(units)
        self._conflicts.extend(conflicts)

    def _extend_trail(self, l: Literal, decision: bool) -> None:
        self._trail.append((l, decision))
        self._trail_set.add(l)
        self._assign(l)

    def _adopt(self, pol_set: FrozenSet[Literal]) -> None:
        target = self._branch_trails.pop(pol_set, None)
        if target is None:
            raise PluginError("kernel surfaced a branch this plugin never "
                              "scheduled")
        common = 0
        while (common < len(target) and common < len(self._trail)
               and self._trail[common] == target[common]):
            common += 1
        for l, _ in reversed(self._trail[common:]):
            self._watch.unassign(l)
            self._trail_set.discard(l)
        del self._trail[common:]
        self._units = []
        self._conflicts = list(self._watch.empty_clauses)
        for l, decision in target[common:]:
            self._extend_trail(l, decision)

    def _find_conflict(self) -> Optional[Clause]:
        while self._conflicts:
            c = self._conflicts[0]
            if all(self._watch.value(l) is False for l in c):
                return c
            self._conflicts.pop(0)
        return None

    def _find_unit(self) -> Optional[Tuple[Clause, Literal]]:
        while self._units:
            clause, l = self._units[0]
            if self._watch.value(l) is None and \
                    all(self._watch.value(m) is False
                        for m in clause if m != l):
                return clause, l
            self._units.pop(0)
        return None

    def _find_theory_prop(self) -> Optional[Literal]:
        if not self.theory_active:
            return None
        for l in self.atoms:
            if self._watch.value(l) is None and \
                    m_sat_member(self.dp, self._trail_set, l):
                return l
        return None

    def _find_decision(self) -> Optional[Literal]:
        for l in self.atoms:
            if self._watch.value(l) is None:
                return l
        return None

    def _check_lockstep(self, goal: Unfocused) -> None:
        problems = []
        if goal.pol.literals != frozenset(self._trail_set):
            problems.append("polarisation set diverged from the trail")
        stored = {f.literal for f in goal.gamma if isinstance(f, Lit)}
        if not stored <= self._trail_set:
            problems.append("kernel stored literals outside the trail")
        shapes = {f for f in goal.gamma if not isinstance(f, Lit)}
        if shapes != set(self.reps.values()):
            problems.append("gamma's clause representations diverged")
        if problems:
            self.lockstep_failures.extend(problems)
            raise PluginError("; ".join(problems))

    def _focus_coin(self, goal: Unfocused, clause: Clause) -> FocusCoin:
        return FocusCoin(goal.gamma_ordered.index(self.reps[clause]))

    # -- the solver ----------------------------------------------------------

    def solve(self, out: Output) -> Answer:
        if isinstance(out, Jackpot):
            return out.answer
        state = out.state
        self.statement = state.statement
        self.dp = state.dp
        self.allow_cuts = state.allow_cuts
        self.theory_active = not isinstance(self.dp, SyntacticProcedure)
        clauses = []
        for f in sorted(self.statement.gamma):
            c = clause_of_formula(f)
            if c is None:
                raise PluginError(f"statement is not a represented clause "
                                  f"set: {f!r}")
            clauses.append(c)
        if self.statement.delta or self.statement.pol.literals:
            raise PluginError("dpll_wl expects a bare clause-set statement")
        self.clauses = clauses
        self.reps = {c: represent_clause(c) for c in clauses}
        self.atoms = tuple(sorted(atoms_of_clauses(clauses)))
        self._reset_view()
        self._ingest(out)
        schedule = iter(self.restart_schedule)
        next_restart = next(schedule, None)

        while isinstance(out, InsertCoin):
            if next_restart is not None and self.coins >= next_restart:
                out = self.restart()
                self._ingest(out)
                next_restart = next(schedule, None)
                continue
            goal = out.goal
            if isinstance(goal, Focused):
                raise PluginError("unexpected synchronous pause on a clause "
                                  "problem")
            if any(isinstance(info.sequent, Focused)
                   for info in out.pending_info):
                out = self._insert(out, MoveNextCoin("left", "success"))
                continue
            pol_set = frozenset(goal.pol.literals)
            if pol_set in self._branch_trails:
                self._adopt(pol_set)
            elif pol_set != frozenset(self._trail_set):
                # a refuted subtree bubbled back to an ancestor: no DPLL rule
                # maps here, so close it from the memo or grind the menu
                if self.memo is not None:
                    hit = memo_lookup(self.memo, goal.gamma)
                    if hit is not None:
                        out = self._insert(out, MemoCoin(hit))
                        continue
                out = self._insert(out, out.first_coin)
                continue
            if self.lockstep_check:
                self._check_lockstep(goal)
            if self.memo is not None:
                hit = memo_lookup(self.memo, goal.gamma)
                if hit is not None:
                    out = self._insert(out, MemoCoin(hit))
                    continue
            out = self._insert(out, self._choose(goal, out))
        return out.answer

    def _choose(self, goal: Unfocused, out: InsertCoin):
        conflict = self._find_conflict()
        if conflict is not None:
            return self._focus_coin(goal, conflict)          # Fail / Backtrack
        if self.theory_active and \
                self.dp.consistency(frozenset(self._trail_set)) is not None:
            return CHECK                                     # FailT / BacktrackT
        unit = self._find_unit()
        if unit is not None:
            clause, l = unit
            self._units.pop(0)
            self._extend_trail(l, False)
            return self._focus_coin(goal, clause)            # Propagate
        tlit = self._find_theory_prop()
        if tlit is not None:
            self._extend_trail(tlit, False)
            return PolariseCoin(tlit)                        # PropagateT
        decision = self._find_decision()
        if decision is not None:
            if not self.allow_cuts:
                raise PluginError("a decision is needed but cuts are "
                                  "disabled (--no-cuts)")
            sibling = [t for t in self._trail] + [(decision.negate(), False)]
            key = frozenset(self._trail_set) | {decision.negate()}
            self._branch_trails[key] = sibling
            self._extend_trail(decision, True)
            return CutCoin(decision.negate())                # Decide
        # saturated: this branch describes a theory-consistent total
        # assignment; let the kernel exhaust it
        return out.first_coin


def dpll_wl_solve(out: Output, **kwargs) -> Answer:
    return DpllWlPlugin(**kwargs).solve(out)


# ---------------------------------------------------------------------------
# Interactive plugin


class InteractivePlugin:
    """Prompts for each coin by id on the given streams."""

    def __init__(self, input_fn=input, print_fn=print):
        self.input_fn = input_fn
        self.print_fn = print_fn

    def solve(self, out: Output) -> Answer:
        while isinstance(out, InsertCoin):
            self.print_fn(f"goal: {out.goal!r}")
            if out.note:
                self.print_fn(f"note: {out.note}")
            offers = out.legal
            for offer in offers:
                self.print_fn(f"  [{offer.id}] {offer.description}")
            try:
                picked = self.input_fn("coin> ").strip()
            except EOFError:
                raise PluginError("interactive session ended without a coin")
            chosen = next((o for o in offers if o.id == picked), None)
            if chosen is None:
                self.print_fn(f"unknown coin id {picked!r}")
                continue
            out = insert_coin(out, chosen.coin)
        answer = out.answer
        self.print_fn("jackpot: "
                      + ("PROVABLE" if answer.provable else "NOTPROVABLE"))
        return answer


PLUGIN_NAMES = ("naive", "dpll_wl", "interactive")


def make_plugin(name: str, **kwargs) -> Plugin:
    if name == "naive":
        return NaivePlugin(**{k: v for k, v in kwargs.items() if k == "budget"})
    if name == "dpll_wl":
        return DpllWlPlugin(**kwargs)
    if name == "interactive":
        return InteractivePlugin()
    raise ValueError(f"unknown plugin {name!r} (expected one of {PLUGIN_NAMES})")
