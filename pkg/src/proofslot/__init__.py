"""Trusted-kernel proof search for quantifier-free logic modulo theories."""

from .formulas import (Atom, Clause, EufEq, Formula, GroundTerm, LinConstraint,
                       Literal, PolarisationSet, Polarity, PropVar, classify,
                       clause_of_formula, negate_formula, polar, prop,
                       represent_clause, size)
from .kernel import (Answer, Coin, CoinOffer, ConsistencyCheckCoin, CutCoin,
                     FocusCoin, Focused, InsertCoin, Jackpot, MemoCoin,
                     MoveNextCoin, Output, PolariseCoin, ProofTree, Rule,
                     SearchState, Sequent, SideCoin, Unfocused, insert_coin,
                     machine, prune, step_bound)
from .memo import MemoStore, memo_insert, memo_lookup
from .plugins import (DpllWlPlugin, InteractivePlugin, NaivePlugin, Plugin,
                      WatchTable, dpll_wl_solve, make_plugin, naive_solve,
                      watch_update)
from .proofcheck import CheckResult, check
from .theories import (DecisionProcedure, cc_consistency, lra_consistency,
                       m_sat_member, make_theory, syntactic_consistency)

__version__ = "0.1.0"
