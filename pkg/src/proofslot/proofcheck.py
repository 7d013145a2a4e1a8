"""Independent validation of completed proof trees.

Defense in depth behind the kernel's private answer type: every node must
instantiate its rule schema exactly, theory certificates are re-verified
by calling the decision procedure (never trusted), and memo reuse is
validated by subsumption against the embedded pruned statement.
"""

from __future__ import annotations

from typing import Optional, Tuple

from .formulas import (AndNeg, AndPos, FalseNeg, Lit, OrNeg, OrPos, Polarity,
                       TrueNeg, TruePos, classify, negate_formula, polar)
from .kernel import (Focused, ProofTree, Rule, Sequent, Unfocused,
                     gamma_literal_occurrences, positive_stored_literals)
from .theories import DecisionProcedure


class CheckResult:
    """Boolean verdict plus first-failure diagnostics."""

    __slots__ = ("ok", "error", "path")

    def __init__(self, ok: bool, error: Optional[str] = None,
                 path: Optional[str] = None):
        self.ok = ok
        self.error = error
        self.path = path

    def __bool__(self) -> bool:
        return self.ok

    def __repr__(self) -> str:
        if self.ok:
            return "CheckResult(ok)"
        return f"CheckResult(failed at {self.path}: {self.error})"


_OK = CheckResult(True)


def _fail(path: str, message: str) -> CheckResult:
    return CheckResult(False, message, path)


def _expect_premises(node: ProofTree, expected: Tuple[Sequent, ...],
                     path: str) -> Optional[CheckResult]:
    if len(node.premises) != len(expected):
        return _fail(path, f"{node.rule.value} wants {len(expected)} premises, "
                           f"has {len(node.premises)}")
    for i, (premise, want) in enumerate(zip(node.premises, expected)):
        if premise.conclusion != want:
            return _fail(f"{path}.{i}",
                         f"premise is {premise.conclusion!r}, schema wants "
                         f"{want!r}")
    return None


def _check_node(node: ProofTree, theory: DecisionProcedure,
                path: str) -> CheckResult:
    rule = node.rule
    seq = node.conclusion
    expected: Optional[Tuple[Sequent, ...]] = None

    if rule in (Rule.AND_POS, Rule.OR_POS_1, Rule.OR_POS_2, Rule.TRUE_POS,
                Rule.INIT_1, Rule.RELEASE):
        if not isinstance(seq, Focused):
            return _fail(path, f"{rule.value} concludes a focused sequent")
        focus = seq.focus
        if rule is Rule.AND_POS:
            if not isinstance(focus, AndPos):
                return _fail(path, "focus is not a positive conjunction")
            expected = (Focused(seq.gamma, focus.left, seq.pol),
                        Focused(seq.gamma, focus.right, seq.pol))
        elif rule in (Rule.OR_POS_1, Rule.OR_POS_2):
            if not isinstance(focus, OrPos):
                return _fail(path, "focus is not a positive disjunction")
            arm = focus.left if rule is Rule.OR_POS_1 else focus.right
            expected = (Focused(seq.gamma, arm, seq.pol),)
        elif rule is Rule.TRUE_POS:
            if not isinstance(focus, TruePos):
                return _fail(path, "focus is not ⊤⁺")
            expected = ()
        elif rule is Rule.INIT_1:
            if not isinstance(focus, Lit):
                return _fail(path, "Init1 needs a literal under focus")
            l = focus.literal
            if l not in seq.pol:
                return _fail(path, f"{l!r} is not declared positive")
            if node.certificate is None:
                return _fail(path, "Init1 carries no certificate")
            allowed = positive_stored_literals(seq) | {l.negate()}
            if not node.certificate <= allowed:
                return _fail(path, "certificate mentions literals outside "
                                   "the stored positives plus the dual focus")
            if theory.consistency(node.certificate) is None:
                return _fail(path, "certificate is consistent with the theory")
            expected = ()
        else:  # RELEASE
            if classify(focus, seq.pol) is Polarity.POSITIVE:
                return _fail(path, "released formula is pol-positive")
            expected = (Unfocused(seq.gamma, (focus,), seq.pol),)

    elif rule in (Rule.AND_NEG, Rule.OR_NEG, Rule.FALSE_NEG, Rule.TRUE_NEG,
                  Rule.STORE):
        if not isinstance(seq, Unfocused) or not seq.delta:
            return _fail(path, f"{rule.value} needs a formula to process")
        head, rest = seq.delta[0], seq.delta[1:]
        if rule is Rule.AND_NEG:
            if not isinstance(head, AndNeg):
                return _fail(path, "head is not a negative conjunction")
            expected = (Unfocused(seq.gamma, (head.left,) + rest, seq.pol),
                        Unfocused(seq.gamma, (head.right,) + rest, seq.pol))
        elif rule is Rule.OR_NEG:
            if not isinstance(head, OrNeg):
                return _fail(path, "head is not a negative disjunction")
            expected = (Unfocused(seq.gamma, (head.left, head.right) + rest,
                                  seq.pol),)
        elif rule is Rule.FALSE_NEG:
            if not isinstance(head, FalseNeg):
                return _fail(path, "head is not ⊥⁻")
            expected = (Unfocused(seq.gamma, rest, seq.pol),)
        elif rule is Rule.TRUE_NEG:
            if not isinstance(head, TrueNeg):
                return _fail(path, "head is not ⊤⁻")
            expected = ()
        else:  # STORE
            if not (isinstance(head, Lit)
                    or classify(head, seq.pol) is Polarity.POSITIVE):
                return _fail(path, "stored formula is neither a literal nor "
                                   "pol-positive")
            stored = negate_formula(head)
            expected = (Unfocused(seq.gamma | {stored}, rest,
                                  polar(seq.pol, stored)),)

    elif rule in (Rule.SELECT, Rule.INIT_2, Rule.POL, Rule.CUT, Rule.MEMO_HIT):
        if not (isinstance(seq, Unfocused) and seq.developed):
            return _fail(path, f"{rule.value} applies to developed sequents")
        if rule is Rule.SELECT:
            if len(node.premises) != 1:
                return _fail(path, "Select has exactly one premise")
            premise = node.premises[0].conclusion
            if not isinstance(premise, Focused):
                return _fail(path, "Select's premise is focused")
            p_formula = premise.focus
            if negate_formula(p_formula) not in seq.gamma:
                return _fail(path, "focused formula's negation is not stored")
            if classify(p_formula, seq.pol) is Polarity.NEGATIVE:
                return _fail(path, "selected formula is pol-negative")
            expected = (Focused(seq.gamma, p_formula, seq.pol),)
        elif rule is Rule.INIT_2:
            if node.certificate is None:
                return _fail(path, "Init2 carries no certificate")
            if not node.certificate <= positive_stored_literals(seq):
                return _fail(path, "certificate mentions unstored literals")
            if theory.consistency(node.certificate) is None:
                return _fail(path, "certificate is consistent with the theory")
            expected = ()
        elif rule is Rule.POL:
            if len(node.premises) != 1:
                return _fail(path, "Pol has exactly one premise")
            premise = node.premises[0].conclusion
            if not (isinstance(premise, Unfocused) and premise.developed
                    and premise.gamma == seq.gamma):
                return _fail(path, "Pol's premise reuses the same developed "
                                   "sequent")
            added = premise.pol.literals - seq.pol.literals
            if len(added) != 1 or premise.pol.literals != seq.pol.literals | added:
                return _fail(path, "Pol adds exactly one literal")
            (l,) = added
            occ = gamma_literal_occurrences(seq.gamma)
            if l not in occ and l.negate() not in occ:
                return _fail(path, f"{l!r} does not occur in gamma")
            if node.certificate is not None:
                allowed = positive_stored_literals(seq) | {l.negate()}
                if not node.certificate <= allowed:
                    return _fail(path, "certificate outside the stored "
                                       "positives plus the dual literal")
                if theory.consistency(node.certificate) is None:
                    return _fail(path, "certificate is consistent")
            elif theory.consistency(positive_stored_literals(seq)
                                    | {l.negate()}) is None:
                return _fail(path, f"theory does not entail {l!r}")
            expected = (premise,)
        elif rule is Rule.CUT:
            if len(node.premises) != 2:
                return _fail(path, "cut has exactly two premises")
            first = node.premises[0].conclusion
            if not (isinstance(first, Unfocused) and len(first.delta) == 1
                    and isinstance(first.delta[0], Lit)):
                return _fail(path, "cut's first premise carries one literal")
            l = first.delta[0].literal
            occ = gamma_literal_occurrences(seq.gamma)
            if l not in occ and l.negate() not in occ:
                return _fail(path, f"cut literal {l!r} does not occur in gamma")
            expected = (Unfocused(seq.gamma, (Lit(l),), seq.pol),
                        Unfocused(seq.gamma, (Lit(l.negate()),), seq.pol))
        else:  # MEMO_HIT
            if node.memo_statement is None:
                return _fail(path, "memo node embeds no statement")
            if not node.memo_statement.gamma <= seq.gamma:
                return _fail(path, "memoised statement is not subsumed by "
                                   "the goal")
            if node.memo_proof is not None:
                if node.memo_proof.conclusion != node.memo_statement:
                    return _fail(path, "embedded proof does not prove the "
                                       "embedded statement")
                inner = _check_node(node.memo_proof, theory, path + ".memo")
                if not inner:
                    return inner
            expected = ()
    else:
        return _fail(path, f"unknown rule {rule!r}")

    bad = _expect_premises(node, expected, path)
    if bad is not None:
        return bad
    for i, premise in enumerate(node.premises):
        sub = _check_node(premise, theory, f"{path}.{i}")
        if not sub:
            return sub
    return _OK


def check(proof: ProofTree, theory: DecisionProcedure) -> CheckResult:
    """True iff every node matches its rule schema exactly.

    Deterministic and side-effect free apart from theory calls.
    """
    return _check_node(proof, theory, "root")
