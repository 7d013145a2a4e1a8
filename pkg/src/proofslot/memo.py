"""Memoisation of kernel answers with subsumption lookup.

Provable entries are keyed by their pruned gamma and kept minimal under
set inclusion (an entry proving less subsumes one proving more);
NotProvable entries are kept maximal. Reuse through the kernel's memo coin
stands in for clause learning.
"""

from __future__ import annotations

import hashlib
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from .formulas import Formula
from .kernel import Answer

GammaKey = FrozenSet[Formula]


class MemoStore:
    """Antichain-reduced answer cache. One writer at a time."""

    def __init__(self) -> None:
        self.provable: List[Tuple[GammaKey, Answer]] = []
        self.notprovable: List[Tuple[GammaKey, Answer]] = []
        self.hits = 0
        self.misses = 0
        self.inserted = 0
        self.rejected = 0

    def __len__(self) -> int:
        return len(self.provable) + len(self.notprovable)


def memo_insert(store: MemoStore, answer: Answer) -> MemoStore:
    """Record an answer unless an existing entry already subsumes it."""
    if not isinstance(answer, Answer):
        raise TypeError("only kernel answers can be memoised")
    key = frozenset(answer.statement.gamma)
    if answer.provable:
        if any(k <= key for k, _ in store.provable):
            store.rejected += 1
            return store
        store.provable = [(k, a) for k, a in store.provable if not key <= k]
        store.provable.append((key, answer))
    else:
        if any(key <= k for k, _ in store.notprovable):
            store.rejected += 1
            return store
        store.notprovable = [(k, a) for k, a in store.notprovable
                             if not k <= key]
        store.notprovable.append((key, answer))
    store.inserted += 1
    return store


def memo_lookup(store: MemoStore, gamma: Iterable[Formula]) -> Optional[Answer]:
    """An answer applying to the goal: a provable entry it subsumes, or a
    refuted entry subsuming it."""
    goal = frozenset(gamma)
    for key, answer in store.provable:
        if key <= goal:
            store.hits += 1
            return answer
    for key, answer in store.notprovable:
        if goal <= key:
            store.hits += 1
            return answer
    store.misses += 1
    return None


def proof_reference(answer: Answer) -> str:
    """Short stable identifier for an answer's proof (dump/debug use)."""
    if answer.proof is None:
        return "-"
    digest = hashlib.sha256(repr(answer.proof.sort_key()).encode()).hexdigest()
    return digest[:12]


def dump(store: MemoStore, path: str) -> None:
    """One entry per line: tag, sorted key, proof reference id."""
    with open(path, "w", encoding="utf-8") as fh:
        for tag, entries in (("provable", store.provable),
                             ("notprovable", store.notprovable)):
            for key, answer in entries:
                rendered = "; ".join(repr(f) for f in sorted(key))
                fh.write(f"{tag}\t[{rendered}]\t{proof_reference(answer)}\n")


def restart(session) -> object:
    """Resume a plugin session from its recorded initial output, keeping
    the memo store (the one persistent side effect)."""
    return session.restart()
