"""Successor rules and derivation of the relation  t ~u> v.

A successor statement ``t ~u> v`` reads: transition t (enabled alongside u in
the same state) is unaffected by u, and persists as its variant v after u has
been performed.

Stored successor rules are schematic over one pair of rule-name groups
(r, s): the conclusion's two root constructors.  Label metavariables quantified
in the language file are expanded at load time; remaining label freedom is
kept as per-position constraint sets, checked during matching.  The built-in
recursion schema (one instance per recursive call) is applied directly by the
engine, mirroring how recAct/recIn work for plain derivation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .derive import (
    TCons,
    TRec,
    Transition,
    enabled,
    explore,
    is_trans_expr,
    make_transition,
    resolve,
)
from .errors import EpcalcError, LangError
from .rules import TSS, Diagnostic
from .terms import Op, Term, Var, render

# -- conclusion-target expression forms ----------------------------------------
#
# Leaves name, per argument position, one of the variable-expression classes a
# conclusion target may use: the shared source process, the mid transition's
# target process, the lhs sub-transition, a premise result, or a fresh
# transition variable over one of the two processes.


@dataclass(frozen=True)
class VProc:
    pos: int
    over: str  # "x" (shared source argument) | "ytgt" (target of mid transition)


@dataclass(frozen=True)
class VLhs:
    pos: int


@dataclass(frozen=True)
class VPrem:
    pos: int


@dataclass(frozen=True)
class VFresh:
    pos: int
    over: str  # as VProc
    labels: frozenset | None = None


@dataclass(frozen=True)
class VCons:
    group: str
    args: tuple


@dataclass(frozen=True)
class VBad:
    """Unresolvable reference kept for diagnosis."""

    name: str
    reason: str


VExpr = VProc | VLhs | VPrem | VFresh | VCons | VBad


@dataclass(frozen=True)
class SuccessorRule:
    name: str
    r_group: str
    s_group: str
    premises: tuple  # ascending argument positions with a premise
    target: VExpr
    on_r_label: frozenset | None = None  # constraint on the conclusion label of t
    on_s_label: frozenset | None = None  # ... of u
    on_xa: tuple = ()  # (pos, labelset) constraints on lhs sub-transition labels
    on_ya: tuple = ()  # ... on mid sub-transition labels
    on_za: tuple = ()  # ... on premise-result labels
    anomalies: tuple = ()  # raw (code, message) pairs recorded during elaboration
    builtin: bool = False  # realised by the recursion schema, not by matching

    def za_constraint(self, pos: int) -> frozenset | None:
        for p, s in self.on_za:
            if p == pos:
                return s
        return None

    def broken(self) -> bool:
        if self.anomalies:
            return True

        def has_bad(e) -> bool:
            if isinstance(e, VBad):
                return True
            return isinstance(e, VCons) and any(has_bad(a) for a in e.args)

        return has_bad(self.target)


@dataclass
class MetaRule:
    """`chi ~zeta> chi` whenever the label of zeta lies in `over`."""

    name: str
    over: frozenset


class TSSS:
    """A TSS paired with successor rules (plus the built-in recursion schema)."""

    def __init__(self, tss: TSS, srules: list, metarule: MetaRule | None = None):
        self.tss = tss
        self.srules: list = []
        self._index: dict = {}
        self.metarule = metarule
        self.generated: list = []  # successor rules produced by metarule expansion
        for r in srules:
            self.add_srule(r)
        self._succ_cache: dict = {}

    def add_srule(self, rule: SuccessorRule):
        self.srules.append(rule)
        if not rule.builtin:
            self._index.setdefault((rule.r_group, rule.s_group), []).append(rule)

    def candidates(self, r_group: str, s_group: str) -> list:
        return self._index.get((r_group, s_group), [])

    @property
    def name(self) -> str:
        return self.tss.name


# -- rule-1 style expansion -----------------------------------------------------


def expand_metarule(tsss: TSSS) -> list:
    """Expand the reflexivity meta-rule into one rule per same-type group pair.

    For each pair of rule-name groups (r, s) over the same operator family
    where s has an instance concluding a label in the meta-rule's set, emit

        { t_i ~u_i> t'_i | i in Ir n Is }  =>  r(xe..) ~s(ye..)> r(ze..)

    with the target shaped as the extended format's indicator clause demands.
    The two recursion-group pairs are included as built-in markers: the
    engine's recursion schema already realises them.
    """
    meta = tsss.metarule
    if meta is None:
        return []
    tss = tsss.tss
    if not meta.over <= tss.indicators:
        raise LangError(
            f"meta-rule {meta.name!r} must range over indicator labels only"
        )
    out: list = []
    groups = tss.groups()
    fams: dict = {}
    for gname, info in groups.items():
        fam = _family_of(info)
        fams.setdefault(fam, []).append(gname)
    for fam in sorted(fams):
        gnames = sorted(fams[fam])
        for s_group in gnames:
            s_info = groups[s_group]
            if not any(r.label in meta.over for r in tss._by_group[s_group]):
                continue
            for r_group in gnames:
                r_info = groups[r_group]
                if r_info.arity != s_info.arity:
                    continue
                prem = tuple(sorted(r_info.trigger_set & s_info.trigger_set))
                zes = []
                for i in range(1, r_info.arity + 1):
                    if i in prem:
                        zes.append(VPrem(i))
                    elif i not in s_info.trigger_set:
                        zes.append(VLhs(i) if i in r_info.trigger_set else VProc(i, "x"))
                    else:
                        zes.append(VProc(i, "ytgt"))
                out.append(
                    SuccessorRule(
                        name=f"{meta.name}({r_group},{s_group})",
                        r_group=r_group,
                        s_group=s_group,
                        premises=prem,
                        target=VCons(r_group, tuple(zes)),
                        on_s_label=meta.over,
                    )
                )
    # recursion pairs: realised by the built-in schema, reported for completeness
    for r_group in ("recAct", "recIn"):
        out.append(
            SuccessorRule(
                name=f"{meta.name}({r_group},recIn)",
                r_group=r_group,
                s_group="recIn",
                premises=(1,),
                target=VCons(r_group, (VPrem(1),)),
                on_s_label=meta.over,
                builtin=True,
            )
        )
    return out


def _family_of(info) -> str:
    from .terms import op_family

    kinds = {op_family(sym) for sym in info.op_symbols}
    if len(kinds) == 1:
        return kinds.pop()
    return "?mixed"


# -- format checking -------------------------------------------------------------


def check_de_simone_succ(tsss: TSSS) -> list:
    """Diagnostics for the extended format; assumes the plain TSS already checks."""
    diags: set = set()
    for rule in tsss.srules:
        if rule.builtin:
            continue
        _check_srule(tsss.tss, rule, diags)
    return sorted(diags, key=lambda d: (d.rule, d.code, d.message))


def _check_srule(tss: TSS, rule: SuccessorRule, diags: set):
    name = rule.name
    for code, message in rule.anomalies:
        diags.add(Diagnostic(code, name, message))

    if rule.r_group in ("recAct", "recIn") or rule.s_group in ("recAct", "recIn"):
        diags.add(
            Diagnostic(
                "succ-recursion-constructor",
                name,
                "the recursion successor schema is built in; rules may not "
                "mention recAct/recIn",
            )
        )
        return

    rg = tss.group(rule.r_group)
    sg = tss.group(rule.s_group)
    missing = [g for g, info in ((rule.r_group, rg), (rule.s_group, sg)) if info is None]
    if missing:
        diags.add(
            Diagnostic(
                "succ-unknown-constructor",
                name,
                f"unknown transition constructor(s): {', '.join(missing)}",
            )
        )
        return
    for info in (rg, sg):
        if not info.consistent:
            diags.add(
                Diagnostic(
                    "succ-unknown-constructor",
                    name,
                    f"constructor {info.name} has inconsistent arity or trigger set "
                    "across its instances",
                )
            )
            return

    if rg.arity != sg.arity or _family_of(rg) != _family_of(sg):
        diags.add(
            Diagnostic(
                "succ-constructor-type",
                name,
                f"{rule.r_group} and {rule.s_group} are not constructors of the same type",
            )
        )
        return

    n = rg.arity
    ir, is_ = rg.trigger_set, sg.trigger_set
    prem = frozenset(rule.premises)

    if not prem <= ir & is_:
        diags.add(
            Diagnostic(
                "succ-premise-positions",
                name,
                f"premises at {sorted(prem - (ir & is_))} lie outside both trigger sets "
                "(I must be included in Ir and Is)",
            )
        )

    # target: collect leaf usage per position
    usage: dict = {}
    _collect_usage(rule.target, usage, diags, name)
    for pos, uses in usage.items():
        if pos < 1 or pos > n:
            diags.add(
                Diagnostic(
                    "succ-target-inventory",
                    name,
                    f"target mentions argument position {pos}, arity is {n}",
                )
            )
            continue
        if len(uses) > 1:
            diags.add(
                Diagnostic(
                    "succ-target-not-univariate",
                    name,
                    f"argument position {pos} is drawn on {len(uses)} times in the target",
                )
            )
        for use in uses:
            _check_leaf_class(use, pos, prem, ir, is_, diags, name)

    _check_sorts(tss, rule.target, diags, name)
    _check_target_coherence(tss, rule, rg, sg, diags, name)
    _check_indicator_clause(tss, rule, rg, sg, prem, ir, is_, diags, name)


def _collect_usage(e: VExpr, usage: dict, diags: set, name: str):
    if isinstance(e, (VProc, VLhs, VPrem, VFresh)):
        usage.setdefault(e.pos, []).append(e)
    elif isinstance(e, VCons):
        for a in e.args:
            _collect_usage(a, usage, diags, name)
    elif isinstance(e, VBad):
        diags.add(Diagnostic("succ-target-inventory", name, e.reason))


def _check_leaf_class(use, pos, prem, ir, is_, diags, name):
    shared = pos not in ir and pos not in is_
    if isinstance(use, VPrem):
        if pos not in prem:
            diags.add(
                Diagnostic(
                    "succ-target-inventory",
                    name,
                    f"no premise provides a result transition at position {pos}",
                )
            )
        return
    if isinstance(use, VLhs):
        if pos in is_:
            diags.add(
                Diagnostic(
                    "succ-target-inventory",
                    name,
                    f"the lhs transition at position {pos} may only be kept when the "
                    "mid argument there is a process",
                )
            )
        return
    over = use.over
    if over == "x":
        if not shared:
            if isinstance(use, VProc) and pos in ir and pos not in is_:
                diags.add(
                    Diagnostic(
                        "succ-index-inclusion-rG",
                        name,
                        f"position {pos}: the lhs transition's source survives only as "
                        "a transition there ((Ir n IG)\\Is must lie in IT)",
                    )
                )
            else:
                diags.add(
                    Diagnostic(
                        "succ-target-inventory",
                        name,
                        f"position {pos}: the source process may only be drawn on when "
                        "both conclusion arguments there are that process",
                    )
                )
        return
    # over == "ytgt"
    if pos in prem and isinstance(use, VProc):
        diags.add(
            Diagnostic(
                "succ-index-inclusion-IT",
                name,
                f"position {pos}: a premise position's contribution must stay a "
                "transition (I n IG must lie in IT)",
            )
        )
        return
    if pos in prem and isinstance(use, VFresh):
        diags.add(
            Diagnostic(
                "succ-target-inventory",
                name,
                f"position {pos}: only the premise's own result may range over that target",
            )
        )
        return
    if pos not in is_:
        diags.add(
            Diagnostic(
                "succ-target-inventory",
                name,
                f"position {pos}: no mid transition there, so it has no target to draw on",
            )
        )


def _check_sorts(tss: TSS, e: VExpr, diags: set, name: str):
    if not isinstance(e, VCons):
        return
    info = tss.group(e.group)
    if info is None:
        diags.add(Diagnostic("succ-unknown-constructor", name, f"target uses unknown constructor {e.group}"))
        return
    if len(e.args) != info.arity:
        diags.add(
            Diagnostic(
                "succ-constructor-arity",
                name,
                f"target applies {e.group} to {len(e.args)} arguments, arity is {info.arity}",
            )
        )
        return
    for i, a in enumerate(e.args, start=1):
        is_trans = isinstance(a, (VLhs, VPrem, VFresh, VCons))
        if i in info.trigger_set and not is_trans:
            diags.add(
                Diagnostic(
                    "succ-argument-sort",
                    name,
                    f"argument {i} of {e.group} in the target must be a transition",
                )
            )
        if i not in info.trigger_set and is_trans:
            diags.add(
                Diagnostic(
                    "succ-argument-sort",
                    name,
                    f"argument {i} of {e.group} in the target must be a process",
                )
            )
        _check_sorts(tss, a, diags, name)


def _sym_source(tss: TSS, e: VExpr, op, r_group: str):
    """Source of the target expression over positional marker variables."""
    if isinstance(e, VProc):
        return Var(f".x{e.pos}") if e.over == "x" else Var(f".y{e.pos}")
    if isinstance(e, VLhs):
        return Var(f".x{e.pos}")
    if isinstance(e, (VPrem, VFresh)):
        if isinstance(e, VPrem) or e.over == "ytgt":
            return Var(f".y{e.pos}")
        return Var(f".x{e.pos}")
    if isinstance(e, VCons):
        info = tss.group(e.group)
        if e.group == r_group:
            use_op = op
        elif info is not None and len(info.op_symbols) == 1:
            use_op = tss.signature[next(iter(info.op_symbols))]
        else:
            return None
        args = [_sym_source(tss, a, op, r_group) for a in e.args]
        if any(a is None for a in args):
            return None
        return Op(use_op, tuple(args))
    return None


def _check_target_coherence(tss: TSS, rule: SuccessorRule, rg, sg, diags: set, name: str):
    # one sampled operator instance per shared op symbol suffices: rule targets
    # of one name differ only in their label instantiation
    for sym in sorted(rg.op_symbols & sg.op_symbols):
        op = tss.signature[sym]
        s_rule = next(r for r in tss._by_group[rule.s_group] if r.op.symbol == sym)
        from .rules import _norm_positional

        expect = _norm_positional(s_rule)
        got = _sym_source(tss, rule.target, op, rule.r_group)
        if got is not None and got != expect:
            diags.add(
                Diagnostic(
                    "succ-target-source-coherence",
                    name,
                    f"the target's source is {render(got)}, but performing the mid "
                    f"transition leads to {render(expect)}",
                )
            )
        return  # one sample is representative


def _check_indicator_clause(tss: TSS, rule, rg, sg, prem, ir, is_, diags, name):
    for s_rule in tss._by_group[rule.s_group]:
        if not tss.is_indicator(s_rule.label):
            continue
        if rule.on_s_label is not None and s_rule.label not in rule.on_s_label:
            continue
        trig = s_rule.trigger()
        bad_prem = [
            i for i in prem if trig[i - 1] is not None and not tss.is_indicator(trig[i - 1])
        ]
        if bad_prem:
            diags.add(
                Diagnostic(
                    "succ-indicator-premise-labels",
                    name,
                    f"an indicator mid conclusion requires indicator sub-labels at {bad_prem}",
                )
            )
        both = sorted((ir & is_) - prem)
        if both:
            diags.add(
                Diagnostic(
                    "succ-indicator-argument-shape",
                    name,
                    f"positions {both}: with an indicator mid conclusion, every "
                    "position without a premise must have a process argument on one side",
                )
            )
        expected = _indicator_ze(rule, rg, sg, prem, ir, is_)
        if rule.target != expected:
            diags.add(
                Diagnostic(
                    "succ-indicator-target-shape",
                    name,
                    "with an indicator mid conclusion the target must be the lhs "
                    "constructor applied to premise results and surviving arguments",
                )
            )
        return


def _indicator_ze(rule, rg, sg, prem, ir, is_) -> VExpr:
    zes = []
    for i in range(1, rg.arity + 1):
        if i in prem:
            zes.append(VPrem(i))
        elif i not in is_:
            zes.append(VLhs(i) if i in ir else VProc(i, "x"))
        else:
            zes.append(VProc(i, "ytgt"))
    return VCons(rule.r_group, tuple(zes))


# -- derivation -------------------------------------------------------------------


def successors(tsss: TSSS, t: Transition, u: Transition) -> tuple:
    """All v with ``t ~u> v`` derivable; goal-directed on the roots of t and u."""
    if t.source != u.source:
        raise EpcalcError(
            f"successor query requires a common source: "
            f"{render(t.source)} vs {render(u.source)}"
        )
    key = (t.expr, u.expr)
    cached = tsss._succ_cache.get(key)
    if cached is not None:
        return cached
    out = _successors(tsss, t, u)
    tsss._succ_cache[key] = out
    return out


def _successors(tsss: TSSS, t: Transition, u: Transition) -> tuple:
    tss = tsss.tss
    results: set = set()

    if isinstance(t.expr, TRec) and isinstance(u.expr, TRec):
        te, ue = t.expr, u.expr
        sub_t = make_transition(tss, te.sub)
        sub_u = make_transition(tss, ue.sub)
        inner = successors(tsss, sub_t, sub_u)
        if ue.kind == "act":
            results.update(inner)
        elif inner:
            results.add(t)
    elif isinstance(t.expr, TCons) and isinstance(u.expr, TCons):
        r_group = tss.group_of_rule_name(t.expr.rule)
        s_group = tss.group_of_rule_name(u.expr.rule)
        for rule in tsss.candidates(r_group, s_group):
            results.update(_apply_srule(tsss, rule, t, u))

    out = tuple(sorted(results, key=Transition.key))
    for v in out:
        assert v.source == u.target, "derived successor with wrong source"
    return out


def _apply_srule(tsss: TSSS, rule: SuccessorRule, t: Transition, u: Transition):
    tss = tsss.tss
    if rule.broken():
        return
    if rule.on_r_label is not None and t.label not in rule.on_r_label:
        return
    if rule.on_s_label is not None and u.label not in rule.on_s_label:
        return
    targs, uargs = t.expr.args, u.expr.args
    for pos, labels in rule.on_xa:
        sub = targs[pos - 1]
        if not is_trans_expr(sub) or resolve(tss, sub)[1] not in labels:
            return
    for pos, labels in rule.on_ya:
        sub = uargs[pos - 1]
        if not is_trans_expr(sub) or resolve(tss, sub)[1] not in labels:
            return

    choices: list = [{}]
    for pos in rule.premises:
        sub_t = make_transition(tss, targs[pos - 1])
        sub_u = make_transition(tss, uargs[pos - 1])
        found = successors(tsss, sub_t, sub_u)
        allowed = rule.za_constraint(pos)
        found = [v for v in found if allowed is None or v.label in allowed]
        if not found:
            return
        next_choices = []
        for c in choices:
            for v in found:
                d = dict(c)
                d[pos] = v
                next_choices.append(d)
        choices = next_choices

    for premres in choices:
        yield from _instantiate(tsss, rule.target, rule, t, u, premres, u.target)


def _instantiate(tsss, ve: VExpr, rule, t, u, premres: dict, expected_src: Term):
    """All transitions the target expression denotes, source-directed."""
    tss = tsss.tss
    if isinstance(ve, VPrem):
        v = premres[ve.pos]
        if v.source == expected_src:
            yield v
        return
    if isinstance(ve, VLhs):
        sub = make_transition(tss, t.expr.args[ve.pos - 1])
        if sub.source == expected_src:
            yield sub
        return
    if isinstance(ve, VProc):
        return  # process expressions are not transitions; handled inside VCons
    if isinstance(ve, VFresh):
        allowed = rule.za_constraint(ve.pos)
        for cand in enabled(tss, expected_src):
            if allowed is None or cand.label in allowed:
                yield cand
        return
    if isinstance(ve, VCons):
        if not isinstance(expected_src, Op):
            return
        info = tss.group(ve.group)
        if info is None or len(expected_src.args) != info.arity:
            return
        parts: list = [[]]
        for i, a in enumerate(ve.args, start=1):
            sub_src = expected_src.args[i - 1]
            if isinstance(a, VProc):
                if sub_src != _proc_value(tss, a, t, u):
                    return
                parts = [c + [sub_src] for c in parts]
            else:
                subs = list(_instantiate(tsss, a, rule, t, u, premres, sub_src))
                if not subs:
                    return
                parts = [c + [v.expr] for c in parts for v in subs]
        for combo in parts:
            inst = tss.instance_for(
                ve.group, expected_src.decl.symbol, _trigger_of(tss, info, combo)
            )
            if inst is None:
                continue
            candidate = TCons(inst.name, tuple(combo))
            src, label, tgt = resolve(tss, candidate)
            if src == expected_src:
                yield Transition(candidate, src, label, tgt)
        return
    return


def _trigger_of(tss: TSS, info, combo: tuple) -> tuple:
    trig = []
    for i, a in enumerate(combo, start=1):
        if i in info.trigger_set and is_trans_expr(a):
            trig.append(resolve(tss, a)[1])
        else:
            trig.append(None)
    return tuple(trig)


def _proc_value(tss: TSS, ve: VProc, t: Transition, u: Transition) -> Term | None:
    if ve.over == "x":
        return t.source.args[ve.pos - 1] if isinstance(t.source, Op) else None
    sub = u.expr.args[ve.pos - 1]
    return resolve(tss, sub)[2] if is_trans_expr(sub) else None


def successor_relation(
    tsss: TSSS,
    start: Term,
    horizon: int = 10_000,
    depth: int = 64,
) -> list:
    """All triples (t, u, v) with source(t) reachable from `start`.

    Returned as (state, t, u, v) tuples in deterministic order.
    """
    graph = explore(tsss.tss, start, horizon, depth)
    out = []
    for state in graph.states:
        ts = graph.transitions[state]
        for t in ts:
            for u in ts:
                for v in successors(tsss, t, u):
                    out.append((state, t, u, v))
    return out
