"""epcalc: De Simone rule systems with transition successors.

Derives labelled transition systems whose transitions are proof trees, checks
rule sets against the De Simone format (plain and with successor rules), and
decides strong and enabling-preserving bisimilarity on finite fragments.
CCS and ABCdE ship as built-in languages.
"""

from .errors import EpcalcError
from .terms import OperatorDecl, Op, Rec, RecSpec, Var, free_vars, is_closed, substitute
from .parser import parse_term
from .rules import TSS, DeSimoneRule, Diagnostic, check_de_simone, rules_named
from .derive import Transition, enabled, explore, name_of, proof_tree
from .successors import TSSS, SuccessorRule, check_de_simone_succ, successor_relation, successors
from .equivalence import RawLTSS, Verdict, ep_bisim, ep_bisim_on_lts, strong_bisim_terms, verify_witness
from .langfile import load_language
from .langs import ccs_example_pq, load_abcde, load_ccs, resolve_language

__all__ = [
    "EpcalcError",
    "OperatorDecl",
    "Op",
    "Rec",
    "RecSpec",
    "Var",
    "free_vars",
    "is_closed",
    "substitute",
    "parse_term",
    "TSS",
    "DeSimoneRule",
    "Diagnostic",
    "check_de_simone",
    "rules_named",
    "Transition",
    "enabled",
    "explore",
    "name_of",
    "proof_tree",
    "TSSS",
    "SuccessorRule",
    "check_de_simone_succ",
    "successors",
    "successor_relation",
    "RawLTSS",
    "Verdict",
    "ep_bisim",
    "ep_bisim_on_lts",
    "strong_bisim_terms",
    "verify_witness",
    "load_language",
    "ccs_example_pq",
    "load_abcde",
    "load_ccs",
    "resolve_language",
]

__version__ = "0.1.0"
