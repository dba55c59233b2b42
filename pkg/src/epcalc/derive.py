"""Deriving transitions as named proof trees.

A transition of a closed term is a proof of a literal ``p -a-> q`` from the
rule set.  Proofs are identified with their canonical names: constructor
applications of rule names to sub-names (trigger positions) and inactive
argument processes, plus `recAct`/`recIn` wrappers for recursive calls and
``(tx :: p -a-> q)`` leaves in open proofs.  Naming is injective, so equality
and hashing of transitions are structural on names; the underlying labelled
tree is materialised only for display and export.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    DepthLimitError,
    EpcalcError,
    HorizonLimitError,
    InvalidTransition,
    MatchError,
    NotOpenTransition,
)
from .rules import TSS, DeSimoneRule
from .terms import (
    Op,
    Rec,
    RecSpec,
    Term,
    Var,
    cached_hash,
    render,
    substitute,
    term_key,
    unfold,
)

DEFAULT_DEPTH = 64
DEFAULT_HORIZON = 10_000


@dataclass(frozen=True)
class TLeaf:
    """Open-proof leaf: transition variable with its pledged literal."""

    var: str
    source: Term
    label: str
    target: Term

    def __hash__(self):
        return cached_hash(self, "tl", self.var, self.source, self.label, self.target)


@dataclass(frozen=True)
class TRec:
    kind: str  # "act" | "ind"
    var: str
    spec: RecSpec
    sub: "TransExpr"

    def __hash__(self):
        return cached_hash(self, "tr", self.kind, self.var, self.spec, self.sub)


@dataclass(frozen=True)
class TCons:
    rule: str  # rule name, e.g. "act(a)", "plusL"
    args: tuple  # TransExpr at trigger positions, Term elsewhere

    def __hash__(self):
        return cached_hash(self, "tc", self.rule, self.args)


TransExpr = TLeaf | TRec | TCons


def is_trans_expr(x) -> bool:
    return isinstance(x, (TLeaf, TRec, TCons))


def expr_key(e) -> str:
    """Injective rendering of names, used for ordering and map keys; cached."""
    key = getattr(e, "_key", None)
    if key is not None:
        return key
    if isinstance(e, TLeaf):
        key = f"l[{e.var}:{term_key(e.source)}-{e.label}->{term_key(e.target)}]"
    elif isinstance(e, TRec):
        eqs = ";".join(f"{x}={term_key(t)}" for x, t in e.spec.items())
        key = f"R{e.kind}[{e.var}|{eqs}]({expr_key(e.sub)})"
    elif isinstance(e, TCons):
        inner = ",".join(
            expr_key(a) if is_trans_expr(a) else "p:" + term_key(a) for a in e.args
        )
        key = f"c[{e.rule}]({inner})"
    else:
        raise TypeError(f"not a transition expression: {e!r}")
    object.__setattr__(e, "_key", key)
    return key


def tvars_of(e) -> frozenset:
    if isinstance(e, TLeaf):
        return frozenset((e.var,))
    if isinstance(e, TRec):
        return tvars_of(e.sub)
    if isinstance(e, TCons):
        out = frozenset()
        for a in e.args:
            if is_trans_expr(a):
                out |= tvars_of(a)
        return out
    return frozenset()


def binding_of(e, out: dict | None = None) -> dict:
    """Binding function: transition variable -> pledged literal (src, label, tgt).

    Raises NotOpenTransition if one variable is pledged to two literals.
    """
    if out is None:
        out = {}
    if isinstance(e, TLeaf):
        lit = (e.source, e.label, e.target)
        if out.setdefault(e.var, lit) != lit:
            raise NotOpenTransition(
                f"transition variable {e.var!r} is used for two different literals; "
                "the expression is not an open transition"
            )
    elif isinstance(e, TRec):
        binding_of(e.sub, out)
    elif isinstance(e, TCons):
        for a in e.args:
            if is_trans_expr(a):
                binding_of(a, out)
    return out


@dataclass(frozen=True)
class Transition:
    """A derived transition: canonical name plus its resolved literal."""

    expr: TransExpr
    source: Term = field(compare=False)
    label: str = field(compare=False)
    target: Term = field(compare=False)

    def key(self) -> str:
        return expr_key(self.expr)

    def __str__(self):
        return render_expr(self.expr)


def name_of(t) -> TransExpr:
    """Canonical transition expression of a transition (or open transition)."""
    return t.expr if isinstance(t, Transition) else t


# -- resolution: expression -> literal ---------------------------------------


def resolve(tss: TSS, e) -> tuple:
    """(source, label, target) of a transition expression; raises InvalidTransition."""
    cached = tss._expr_cache.get(e)
    if cached is not None:
        return cached
    out = _resolve(tss, e)
    tss._expr_cache[e] = out
    return out


def _resolve(tss: TSS, e) -> tuple:
    if isinstance(e, TLeaf):
        return (e.source, e.label, e.target)
    if isinstance(e, TRec):
        src, label, tgt = resolve(tss, e.sub)
        call = Rec(e.var, e.spec)
        if src != unfold(call):
            raise InvalidTransition(
                f"recursion step over {render(call)} applied to a proof of "
                f"{render(src)}, not of its unfolding"
            )
        if e.kind == "act":
            if not tss.is_action(label):
                raise InvalidTransition(f"recAct used with non-action label {label!r}")
            return (call, label, tgt)
        if not tss.is_indicator(label):
            raise InvalidTransition(f"recIn used with action label {label!r}")
        return (call, label, call)
    if isinstance(e, TCons):
        rules = tss._by_name.get(e.rule)
        if not rules:
            raise InvalidTransition(f"unknown rule name {e.rule!r}")
        arity = rules[0].op.arity
        if len(e.args) != arity:
            raise InvalidTransition(f"{e.rule} applied to {len(e.args)} arguments, expects {arity}")
        trigger_set = rules[0].trigger_set()
        trig = []
        sub_lits = {}
        for i, a in enumerate(e.args, start=1):
            if i in trigger_set:
                if not is_trans_expr(a):
                    raise InvalidTransition(
                        f"argument {i} of {e.rule} must be a transition"
                    )
                lit = resolve(tss, a)
                sub_lits[i] = lit
                trig.append(lit[1])
            else:
                if is_trans_expr(a):
                    raise InvalidTransition(f"argument {i} of {e.rule} must be a process")
                trig.append(None)
        rule = tss.instance(e.rule, tuple(trig))
        if rule is None:
            raise InvalidTransition(
                f"no instance of rule {e.rule} with trigger {tuple(trig)!r}"
            )
        src_args = []
        sub = {}
        names = rule.source_vars()
        prem_by_pos = {
            pos: prem
            for prem, pos in zip(rule.premises, rule.premise_positions())
            if pos is not None
        }
        for i, a in enumerate(e.args, start=1):
            if i in trigger_set:
                s_i, _, t_i = sub_lits[i]
                src_args.append(s_i)
                sub[prem_by_pos[i].target] = t_i
            else:
                src_args.append(a)
                sub[names[i - 1]] = a
        source = Op(rule.op, tuple(src_args))
        target = substitute(rule.target, sub)
        return (source, rule.label, target)
    raise TypeError(f"not a transition expression: {e!r}")


def osrc(tss: TSS, e) -> Term:
    return resolve(tss, e)[0]


def oell(tss: TSS, e) -> str:
    return resolve(tss, e)[1]


def otar(tss: TSS, e) -> Term:
    return resolve(tss, e)[2]


def make_transition(tss: TSS, e: TransExpr) -> Transition:
    src, label, tgt = resolve(tss, e)
    return Transition(e, src, label, tgt)


# -- derivation ---------------------------------------------------------------


def enabled(tss: TSS, term: Term, depth: int = DEFAULT_DEPTH) -> tuple:
    """All transitions enabled in a closed term, ordered by canonical name.

    `depth` bounds recursion unfoldings along one derivation; exceeding it
    (or re-entering the same state while unfolding) reports likely unguarded
    recursion rather than diverging.
    """
    return _enabled(tss, term, depth, set())


def _enabled(tss: TSS, term: Term, depth: int, opening: set) -> tuple:
    cached = tss._enabled_cache.get(term)
    if cached is not None:
        return cached

    match term:
        case Op(decl, args):
            found = []
            for rule in tss.rules_for_op(decl.symbol):
                found.extend(_apply_rule(tss, rule, args, depth, opening))
            out = tuple(sorted(set(found), key=Transition.key))
        case Rec(var, spec):
            if term in opening:
                raise DepthLimitError(
                    f"unguarded recursion detected while deriving {render(term)}"
                )
            if depth <= 0:
                raise DepthLimitError(
                    "recursion unfolding bound exceeded; "
                    f"the specification {render(term)} is likely unguarded"
                )
            opening = opening | {term}
            inner = _enabled(tss, unfold(Rec(var, spec)), depth - 1, opening)
            out = []
            for t in inner:
                if tss.is_action(t.label):
                    out.append(Transition(TRec("act", var, spec, t.expr), term, t.label, t.target))
                else:
                    out.append(Transition(TRec("ind", var, spec, t.expr), term, t.label, term))
            out = tuple(sorted(out, key=Transition.key))
        case Var(name):
            raise EpcalcError(f"cannot derive transitions of an open term (variable {name!r})")
        case _:
            raise TypeError(f"not a term: {term!r}")

    tss._enabled_cache[term] = out
    return out


def _apply_rule(tss: TSS, rule: DeSimoneRule, args: tuple, depth: int, opening: set):
    trigger_set = sorted(rule.trigger_set())
    prem_by_pos = {
        pos: prem
        for prem, pos in zip(rule.premises, rule.premise_positions())
        if pos is not None
    }
    choices: list = [[]]
    for pos in trigger_set:
        prem = prem_by_pos[pos]
        sub_ts = [
            t
            for t in _enabled(tss, args[pos - 1], depth, opening)
            if t.label == prem.label
        ]
        if not sub_ts:
            return
        choices = [c + [(pos, t)] for c in choices for t in sub_ts]
    names = rule.source_vars()
    for combo in choices:
        sub = {}
        cons_args: list = list(args)
        for pos, t in combo:
            sub[prem_by_pos[pos].target] = t.target
            cons_args[pos - 1] = t.expr
        for i, nm in enumerate(names, start=1):
            if i not in prem_by_pos:
                sub[nm] = args[i - 1]
        target = substitute(rule.target, sub)
        source = Op(rule.op, tuple(args))
        yield Transition(TCons(rule.name, tuple(cons_args)), source, rule.label, target)


# -- transition substitutions -------------------------------------------------


@dataclass(frozen=True)
class TransSubst:
    """Partial map of process variables to terms and transition variables to
    transition expressions."""

    procs: tuple = ()  # sorted (name, Term) pairs
    trans: tuple = ()  # sorted (name, TransExpr) pairs

    @staticmethod
    def of(procs: dict | None = None, trans: dict | None = None) -> "TransSubst":
        return TransSubst(
            tuple(sorted((procs or {}).items())),
            tuple(sorted((trans or {}).items(), key=lambda kv: kv[0])),
        )

    def proc_map(self) -> dict:
        return dict(self.procs)

    def trans_map(self) -> dict:
        return dict(self.trans)

    def is_empty(self) -> bool:
        return not self.procs and not self.trans


def matches(tss: TSS, sigma: TransSubst, e) -> bool:
    """A substitution matches every process expression, and an open transition
    iff each bound leaf's literal instantiates to the bound value's literal."""
    if not is_trans_expr(e):
        return True
    procs = sigma.proc_map()
    trans = sigma.trans_map()
    try:
        binding = binding_of(e)
    except NotOpenTransition:
        return False
    for var, (src, label, tgt) in binding.items():
        if var not in trans:
            continue
        val = trans[var]
        vsrc, vlabel, vtgt = resolve(tss, val)
        if vlabel != label:
            return False
        if vsrc != substitute(src, procs) or vtgt != substitute(tgt, procs):
            return False
    return True


def apply_tsubst(tss: TSS, e, sigma: TransSubst):
    """Instantiate an expression; returns a Transition when the result is closed.

    Raises MatchError when the substitution does not match, NotOpenTransition
    when the result reuses a transition variable for two literals.
    """
    if not is_trans_expr(e):
        return substitute(e, sigma.proc_map())
    if not matches(tss, sigma, e):
        detail = _mismatch_detail(tss, sigma, e)
        raise MatchError(f"substitution does not match the open transition: {detail}")
    result = _apply(tss, e, sigma.proc_map(), sigma.trans_map())
    binding_of(result)  # raises NotOpenTransition on variable reuse
    if not tvars_of(result):
        return make_transition(tss, result)
    return result


def _mismatch_detail(tss: TSS, sigma: TransSubst, e) -> str:
    procs = sigma.proc_map()
    trans = sigma.trans_map()
    for var, (src, label, tgt) in binding_of(e).items():
        if var not in trans:
            continue
        vsrc, vlabel, vtgt = resolve(tss, trans[var])
        if vlabel != label:
            return f"{var} is pledged to label {label!r} but bound to a {vlabel!r} transition"
        if vsrc != substitute(src, procs):
            return f"{var}: bound source {render(vsrc)} != instance of {render(src)}"
        if vtgt != substitute(tgt, procs):
            return f"{var}: bound target {render(vtgt)} != instance of {render(tgt)}"
    return "inconsistent leaf literals"


def _apply(tss: TSS, e, procs: dict, trans: dict):
    if isinstance(e, TLeaf):
        if e.var in trans:
            return trans[e.var]
        return TLeaf(
            e.var,
            substitute(e.source, procs),
            e.label,
            substitute(e.target, procs),
        )
    if isinstance(e, TRec):
        # spec bodies are process expressions; reuse term-level capture avoidance
        rec = substitute(Rec(e.var, e.spec), procs)
        return TRec(e.kind, rec.var, rec.spec, _apply(tss, e.sub, procs, trans))
    if isinstance(e, TCons):
        return TCons(
            e.rule,
            tuple(
                _apply(tss, a, procs, trans) if is_trans_expr(a) else substitute(a, procs)
                for a in e.args
            ),
        )
    raise TypeError(f"not a transition expression: {e!r}")


# -- proof trees and rendering -------------------------------------------------


@dataclass(frozen=True)
class ProofNode:
    source: Term
    label: str
    target: Term
    rule: str  # rule name, or the leaf's transition variable
    is_leaf_var: bool
    children: tuple

    def literal(self) -> str:
        return f"{render(self.source)} -{self.label}-> {render(self.target)}"


def proof_tree(tss: TSS, e) -> ProofNode:
    """Materialise the ordered labelled proof tree a name stands for."""
    src, label, tgt = resolve(tss, e)
    if isinstance(e, TLeaf):
        return ProofNode(src, label, tgt, e.var, True, ())
    if isinstance(e, TRec):
        child = proof_tree(tss, e.sub)
        return ProofNode(src, label, tgt, "recAct" if e.kind == "act" else "recIn", False, (child,))
    rules = tss._by_name[e.rule]
    trigger_set = sorted(rules[0].trigger_set())
    children = tuple(proof_tree(tss, e.args[i - 1]) for i in trigger_set)
    return ProofNode(src, label, tgt, e.rule, False, children)


def proof_json(node: ProofNode) -> dict:
    return {
        "literal": node.literal(),
        "rule": node.rule,
        "children": [proof_json(c) for c in node.children],
    }


def _group_fixity(rule_name: str, args: tuple) -> str:
    if len(args) == 2:
        return "infix"
    if len(args) == 0:
        return "nullary"
    sym = rule_name
    if sym.startswith("act("):
        return "prefix"
    return "postfix"


def render_expr(e, tight: bool = False) -> str:
    if isinstance(e, TLeaf):
        return f"({e.var} :: {render(e.source)} -{e.label}-> {render(e.target)})"
    if isinstance(e, TRec):
        head = "recAct" if e.kind == "act" else "recIn"
        spec = "{" + ", ".join(f"{x} = {render(t)}" for x, t in e.spec.items()) + "}"
        return f"{head}({e.var},{spec},{render_expr(e.sub)})"
    if isinstance(e, TCons):
        parts = [
            render_expr(a, tight=True) if is_trans_expr(a) else render(a, 3)
            for a in e.args
        ]
        fix = _group_fixity(e.rule, e.args)
        if fix == "infix":
            out = f"{parts[0]} {e.rule} {parts[1]}"
            return f"({out})" if tight else out
        if fix == "nullary":
            return e.rule
        if fix == "prefix":
            out = f"{e.rule} {parts[0]}"
        else:
            out = f"{parts[0]} {e.rule}"
        return f"({out})" if tight else out
    raise TypeError(f"not a transition expression: {e!r}")


# -- reachability ---------------------------------------------------------------


@dataclass
class LTSGraph:
    initial: Term
    states: list  # discovery order
    transitions: dict  # state -> tuple of Transition


def explore(
    tss: TSS,
    start: Term,
    horizon: int = DEFAULT_HORIZON,
    depth: int = DEFAULT_DEPTH,
) -> LTSGraph:
    """Breadth-first reachable fragment; states in deterministic discovery order."""
    states: list = [start]
    seen = {start}
    transitions: dict = {}
    i = 0
    while i < len(states):
        state = states[i]
        i += 1
        ts = enabled(tss, state, depth)
        transitions[state] = ts
        for t in ts:
            if t.target not in seen:
                if len(states) >= horizon:
                    raise HorizonLimitError(
                        f"more than {horizon} reachable states from {render(start)}"
                    )
                seen.add(t.target)
                states.append(t.target)
    return LTSGraph(start, states, transitions)


def lts_dot(graph: LTSGraph) -> str:
    ids = {s: i for i, s in enumerate(graph.states)}

    def q(s: str) -> str:
        return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

    lines = ["digraph lts {", "  rankdir=LR;"]
    for s in graph.states:
        shape = "doublecircle" if s == graph.initial else "circle"
        lines.append(f"  n{ids[s]} [label={q(render(s))} shape={shape}];")
    for s in graph.states:
        for t in graph.transitions[s]:
            lines.append(f"  n{ids[s]} -> n{ids[t.target]} [label={q(t.label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
