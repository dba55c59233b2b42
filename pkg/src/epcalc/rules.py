"""Transition system specifications in De Simone shape.

A `DeSimoneRule` here is one concrete rule instance: all label metavariables
of the source template have been resolved.  Instances keep the raw parsed
shape (source arguments as terms, premises in argument order) so that the
format checker can describe violations instead of refusing to construct them.

Rule identity is layered:

    group  --  schematic family, e.g. ``act`` for every action prefix axiom;
               successor rules refer to groups.
    name   --  the rule name proper, e.g. ``act(a)``; proof trees carry names.

Instances sharing a name must agree on type, target and trigger set and
differ in their triggers; that is what makes transition-expression naming
injective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import LangError, UnknownRuleName
from .terms import OperatorDecl, Op, Rec, Term, Var, free_vars, substitute, render

RESERVED_RULE_NAMES = ("recAct", "recIn")


def co(label: str) -> str | None:
    """Complement on plain names and co-names; None where undefined."""
    if not label or label == "tau" or label[-1] in "!?:":
        return None
    return label[1:] if label.startswith("'") else "'" + label


def relabel_apply(mapping: dict, label: str) -> str:
    """Extend a base-name relabelling to arbitrary labels."""
    if label == "tau":
        return "tau"
    if label.startswith("'"):
        return "'" + relabel_apply(mapping, label[1:])
    if label and label[-1] in "!?:":
        return mapping.get(label[:-1], label[:-1]) + label[-1]
    return mapping.get(label, label)


@dataclass(frozen=True)
class Premise:
    source: str
    label: str
    target: str


@dataclass(frozen=True)
class DeSimoneRule:
    group: str
    name: str
    op: OperatorDecl
    source_args: tuple  # parsed argument terms; plain variables when well-formed
    premises: tuple  # of Premise
    label: str
    target: Term

    def source_vars(self) -> tuple:
        return tuple(a.name if isinstance(a, Var) else None for a in self.source_args)

    def position_of(self, var: str) -> int | None:
        """1-based argument position of a premise source variable, if unique."""
        names = self.source_vars()
        if names.count(var) != 1:
            return None
        return names.index(var) + 1

    def premise_positions(self) -> tuple:
        return tuple(self.position_of(p.source) for p in self.premises)

    def trigger_set(self) -> frozenset:
        return frozenset(p for p in self.premise_positions() if p is not None)

    def trigger(self) -> tuple:
        trig = [None] * self.op.arity
        for prem, pos in zip(self.premises, self.premise_positions()):
            if pos is not None:
                trig[pos - 1] = prem.label
        return tuple(trig)

    def ordered_premises(self) -> tuple:
        """Premises sorted into argument order (premise lists are ordered)."""
        pairs = sorted(
            (pos, prem)
            for prem, pos in zip(self.premises, self.premise_positions())
            if pos is not None
        )
        return tuple(prem for _, prem in pairs)

    def describe(self) -> str:
        prems = ", ".join(f"{p.source} -{p.label}-> {p.target}" for p in self.premises)
        src = render(Op(self.op, self.source_args)) if None not in self.source_vars() else (
            self.op.symbol + "(" + ", ".join(render(a) for a in self.source_args) + ")"
        )
        head = f"{prems} => " if prems else "=> "
        return f"{self.name}: {head}{src} -{self.label}-> {render(self.target)}"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    rule: str
    message: str

    def __str__(self):
        return f"[{self.code}] {self.rule}: {self.message}"


@dataclass
class GroupInfo:
    name: str
    arity: int
    trigger_set: frozenset
    op_symbols: set = field(default_factory=set)
    consistent: bool = True


class TSS:
    """A signature, a set of concrete De Simone rules and their naming.

    Also acts as the signature context for the term parser, minting operator
    declarations for the parametric families (restriction, relabelling) on
    demand; newly minted operators bring their rule instances with them.
    """

    def __init__(
        self,
        name: str,
        labels: frozenset,
        actions: frozenset,
        channels: frozenset = frozenset(),
        broadcasts: frozenset = frozenset(),
        signals: frozenset = frozenset(),
    ):
        if not actions <= labels:
            raise LangError("action set must be contained in the label set")
        self.name = name
        self.labels = labels
        self.actions = actions
        self.channels = channels
        self.broadcasts = broadcasts
        self.signals = signals
        self.signature: dict = {}
        self.rules: list = []
        self._by_name: dict = {}
        self._by_op: dict = {}
        self._by_group: dict = {}
        self._groups: dict = {}
        self._instance: dict = {}  # (name, trigger) -> rule
        self._by_group_op: dict = {}  # (group, op symbol, trigger) -> rule
        self._family_factory = None  # set by the language loader
        self._enabled_cache: dict = {}
        self._expr_cache: dict = {}

    # -- labels ---------------------------------------------------------------

    def is_action(self, label: str) -> bool:
        return label in self.actions

    def is_indicator(self, label: str) -> bool:
        return label in self.labels and label not in self.actions

    @property
    def indicators(self) -> frozenset:
        return self.labels - self.actions

    # -- signature ------------------------------------------------------------

    def declare_op(self, decl: OperatorDecl) -> OperatorDecl:
        existing = self.signature.get(decl.symbol)
        if existing is not None:
            if existing.arity != decl.arity:
                raise LangError(
                    f"operator {decl.symbol!r} redeclared with arity "
                    f"{decl.arity} (was {existing.arity})"
                )
            return existing
        self.signature[decl.symbol] = decl
        return decl

    def add_rule(self, rule: DeSimoneRule):
        self.rules.append(rule)
        self._by_name.setdefault(rule.name, []).append(rule)
        self._by_op.setdefault(rule.op.symbol, []).append(rule)
        self._by_group.setdefault(rule.group, []).append(rule)
        self._instance[(rule.name, rule.trigger())] = rule
        self._by_group_op[(rule.group, rule.op.symbol, rule.trigger())] = rule
        info = self._groups.get(rule.group)
        if info is None:
            self._groups[rule.group] = GroupInfo(
                rule.group, rule.op.arity, rule.trigger_set(), {rule.op.symbol}
            )
        else:
            info.op_symbols.add(rule.op.symbol)
            if info.arity != rule.op.arity or info.trigger_set != rule.trigger_set():
                info.consistent = False

    def rules_named(self, name: str) -> list:
        try:
            return list(self._by_name[name])
        except KeyError:
            raise UnknownRuleName(f"no rule named {name!r}") from None

    def rule_names(self) -> list:
        return sorted(self._by_name)

    def rules_for_op(self, symbol: str) -> list:
        return self._by_op.get(symbol, [])

    def group(self, name: str) -> GroupInfo | None:
        return self._groups.get(name)

    def groups(self) -> dict:
        return dict(self._groups)

    def group_of_rule_name(self, rule_name: str) -> str:
        rules = self._by_name.get(rule_name)
        if not rules:
            raise UnknownRuleName(f"no rule named {rule_name!r}")
        return rules[0].group

    def instance(self, name: str, trigger: tuple) -> DeSimoneRule | None:
        return self._instance.get((name, trigger))

    def instance_for(self, group: str, op_symbol: str, trigger: tuple) -> DeSimoneRule | None:
        return self._by_group_op.get((group, op_symbol, trigger))

    # -- parser context -------------------------------------------------------

    def named_op(self, symbol: str, arity: int | None = None) -> OperatorDecl:
        decl = self.signature.get(symbol)
        if decl is None:
            raise ValueError(f"unknown operator {symbol!r}")
        if arity is not None and decl.arity != arity:
            raise ValueError(
                f"operator {symbol!r} has arity {decl.arity}, applied to {arity} arguments"
            )
        return decl

    def constant(self, name: str) -> OperatorDecl | None:
        decl = self.signature.get(name)
        if decl is not None and decl.arity == 0 and name != "0":
            return decl
        return None

    def prefix_op(self, label: str) -> OperatorDecl:
        decl = self.signature.get(label + ".")
        if decl is None:
            raise ValueError(f"{label!r} is not a prefixing action of {self.name}")
        return decl

    def signal_op(self, name: str) -> OperatorDecl:
        decl = self.signature.get("^" + name)
        if decl is None:
            raise ValueError(f"{name!r} is not a declared signal of {self.name}")
        return decl

    def restrict_op(self, names: frozenset) -> OperatorDecl:
        bad = sorted(set(names) - set(self.channels))
        if bad:
            raise ValueError(f"restriction set mentions non-channels: {', '.join(bad)}")
        symbol = "\\{" + ",".join(sorted(names)) + "}"
        return self._family_op("restrict", symbol, frozenset(names))

    def relabel_op(self, pairs: tuple) -> OperatorDecl:
        mapping: dict = {}
        for a, b in pairs:
            if mapping.get(a, b) != b:
                raise ValueError(f"relabelling maps {a!r} twice")
            kind_a = self._alphabet_of(a)
            kind_b = self._alphabet_of(b)
            if kind_a is None or kind_a != kind_b:
                raise ValueError(f"relabelling pair {a}->{b} does not stay within one alphabet")
            mapping[a] = b
        mapping = {a: b for a, b in mapping.items() if a != b}
        inner = ",".join(f"{a}->{b}" for a, b in sorted(mapping.items()))
        return self._family_op("relabel", f"[{inner}]", tuple(sorted(mapping.items())))

    def _alphabet_of(self, name: str) -> str | None:
        if name in self.channels:
            return "ch"
        if name in self.broadcasts:
            return "br"
        if name in self.signals:
            return "sig"
        return None

    def _family_op(self, family: str, symbol: str, param) -> OperatorDecl:
        decl = self.signature.get(symbol)
        if decl is not None:
            return decl
        decl = OperatorDecl(symbol, 1)
        if self._family_factory is None:
            raise ValueError(f"language {self.name} has no {family} rules")
        new_rules = self._family_factory(family, decl, param)
        self.declare_op(decl)
        for rule in new_rules:
            self.add_rule(rule)
        bad = check_rules(self, new_rules)
        if bad:
            raise LangError(
                f"{family} rules for {symbol} violate the rule format: "
                + "; ".join(str(d) for d in bad)
            )
        return decl


# -- format checking ----------------------------------------------------------


def _norm_positional(rule: DeSimoneRule) -> tuple:
    """Rewrite a rule's target over positional variable markers for comparison."""
    sub = {}
    names = rule.source_vars()
    for i, nm in enumerate(names, start=1):
        if nm is not None:
            sub[nm] = Var(f".x{i}")
    for prem, pos in zip(rule.premises, rule.premise_positions()):
        if pos is not None:
            sub[prem.target] = Var(f".y{pos}")
    return substitute(rule.target, sub)


def check_de_simone(tss: TSS) -> list:
    """All format diagnostics for the plain rule set; empty iff valid."""
    return check_rules(tss, tss.rules)


def check_rules(tss: TSS, rules: list) -> list:
    diags: set = set()

    for rule in rules:
        _check_rule_shape(tss, rule, diags)

    # naming constraints across rules sharing a name
    by_name: dict = {}
    for rule in rules:
        by_name.setdefault(rule.name, []).append(rule)
    for name, group in by_name.items():
        first = group[0]
        seen_triggers: dict = {}
        for rule in group:
            if rule.op != first.op:
                diags.add(
                    Diagnostic(
                        "naming-same-type",
                        name,
                        f"instances have different types: {rule.op.symbol}/{rule.op.arity} "
                        f"vs {first.op.symbol}/{first.op.arity}",
                    )
                )
                continue
            if rule.trigger_set() != first.trigger_set():
                diags.add(
                    Diagnostic(
                        "naming-same-trigger-set",
                        name,
                        "instances have different trigger sets",
                    )
                )
            if _norm_positional(rule) != _norm_positional(first):
                diags.add(
                    Diagnostic("naming-same-target", name, "instances have different targets")
                )
            trig = rule.trigger()
            if trig in seen_triggers and seen_triggers[trig] is not rule:
                diags.add(
                    Diagnostic(
                        "naming-duplicate-trigger",
                        name,
                        f"two rules share the trigger {trig!r}",
                    )
                )
            seen_triggers[trig] = rule

    return sorted(diags, key=lambda d: (d.rule, d.code, d.message))


def _check_rule_shape(tss: TSS, rule: DeSimoneRule, diags: set):
    name = rule.name

    if rule.group in RESERVED_RULE_NAMES or name in RESERVED_RULE_NAMES:
        diags.add(
            Diagnostic(
                "reserved-rule-name",
                name,
                "recAct/recIn are reserved for the built-in recursion rules",
            )
        )

    src_names = rule.source_vars()
    if None in src_names:
        bad = [render(a) for a in rule.source_args if not isinstance(a, Var)]
        diags.add(
            Diagnostic(
                "variable-distinctness",
                name,
                f"source arguments must be variables, found: {', '.join(bad) or 'n/a'}",
            )
        )
    if len([n for n in src_names if n is not None]) != len(
        set(n for n in src_names if n is not None)
    ):
        diags.add(Diagnostic("variable-distinctness", name, "repeated source variable"))

    positions = rule.premise_positions()
    seen_pos: set = set()
    prem_targets: list = []
    for prem, pos in zip(rule.premises, positions):
        if pos is None:
            diags.add(
                Diagnostic(
                    "premise-shape",
                    name,
                    f"premise source {prem.source!r} is not a distinct argument variable",
                )
            )
        elif pos in seen_pos:
            diags.add(
                Diagnostic(
                    "premise-shape", name, f"argument {pos} has more than one premise"
                )
            )
        else:
            seen_pos.add(pos)
        prem_targets.append(prem.target)

    if len(prem_targets) != len(set(prem_targets)) or set(prem_targets) & {
        n for n in src_names if n is not None
    }:
        diags.add(
            Diagnostic(
                "variable-distinctness",
                name,
                "premise target variables must be fresh and pairwise distinct",
            )
        )

    # target variable inventory: inactive arguments and premise targets only
    allowed = {
        n
        for pos, n in enumerate(src_names, start=1)
        if n is not None and pos not in seen_pos
    }
    allowed |= {p.target for p, pos in zip(rule.premises, positions) if pos is not None}
    occ = _var_occurrences(rule.target)
    for v, count in occ.items():
        if v not in allowed:
            diags.add(
                Diagnostic(
                    "target-variable-inventory",
                    name,
                    f"target mentions {v!r}, which is not an inactive argument "
                    "or a premise target",
                )
            )
        if count > 1:
            diags.add(
                Diagnostic(
                    "univariate-target", name, f"variable {v!r} occurs {count} times in the target"
                )
            )

    for sub in _rec_subterms(rule.target):
        if free_vars(sub):
            diags.add(
                Diagnostic(
                    "closed-rec-subexpression",
                    name,
                    f"target subexpression {render(sub)} is not closed",
                )
            )

    for a in rule.source_args:
        if isinstance(a, Rec):
            diags.add(
                Diagnostic(
                    "recursive-call-source",
                    name,
                    "rule source must be an operator application, not a recursive call",
                )
            )

    # indicator clause
    if tss.is_indicator(rule.label):
        for prem in rule.premises:
            if not tss.is_indicator(prem.label):
                diags.add(
                    Diagnostic(
                        "indicator-premises",
                        name,
                        f"indicator conclusion requires indicator premises, "
                        f"found {prem.label!r}",
                    )
                )
        expected = _indicator_target(rule)
        if expected is not None and rule.target != expected:
            diags.add(
                Diagnostic(
                    "indicator-target-shape",
                    name,
                    "indicator conclusion requires the target to be the rule's own "
                    "operator applied to its argument (or premise-target) variables",
                )
            )


def _indicator_target(rule: DeSimoneRule) -> Term | None:
    names = rule.source_vars()
    if None in names:
        return None
    args = []
    prem_by_pos = {
        pos: prem for prem, pos in zip(rule.premises, rule.premise_positions()) if pos is not None
    }
    for i, nm in enumerate(names, start=1):
        args.append(Var(prem_by_pos[i].target if i in prem_by_pos else nm))
    return Op(rule.op, tuple(args))


def _var_occurrences(term: Term, acc: dict | None = None) -> dict:
    if acc is None:
        acc = {}
    match term:
        case Var(name):
            acc[name] = acc.get(name, 0) + 1
        case Op(_, args):
            for a in args:
                _var_occurrences(a, acc)
        case Rec(_, spec):
            # free occurrences only; bound spec variables are invisible outside
            inner: dict = {}
            for _, body in spec.items():
                _var_occurrences(body, inner)
            for v, c in inner.items():
                if v not in spec.domain:
                    acc[v] = acc.get(v, 0) + c
    return acc


def _rec_subterms(term: Term) -> list:
    match term:
        case Var(_):
            return []
        case Op(_, args):
            out = []
            for a in args:
                out.extend(_rec_subterms(a))
            return out
        case Rec(_, _):
            return [term]
    return []


def rules_named(tss: TSS, name: str) -> list:
    return tss.rules_named(name)
