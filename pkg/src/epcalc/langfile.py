"""The language definition file format (`.lang`).

A file declares alphabets, named label classes, operators, transition rule
templates and successor rules, and optionally the reflexivity meta-rule.
Templates quantify label metavariables (``?a``) over label classes and are
expanded into concrete rules at load time; the restriction and relabelling
operator families stay parametric and materialise per operator instance.

Example::

    language ccs
    channels: a b c
    labelclass Syn = Ch + co(Ch)

    transition rules:
      act(?a) [?a in Act] :: => ?a.x -?a-> x
      plusL   [?a in Act] :: x -?a-> x' => x + y -?a-> x'

    successor rules:
      sum.ll :: t ~v> t' => (t plusL Q) ~(v plusL Q)> t'

In successor rules, identifiers starting with a lower-case letter are
transition variables and capitalised ones are process variables; ``tgt(w)``
is the target process of transition ``w`` and ``fresh(P, {...})`` a fresh
transition variable enabled at P with the given labels.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import LangError
from .rules import TSS, DeSimoneRule, Premise, co, relabel_apply
from .terms import Op, OperatorDecl, Rec, RecSpec, Term, Var
from .successors import (
    MetaRule,
    SuccessorRule,
    TSSS,
    VBad,
    VCons,
    VFresh,
    VLhs,
    VPrem,
    VProc,
    expand_metarule,
)

_BCOMP = {
    ("!", "!"): None,
    ("!", "?"): "!",
    ("!", ":"): "!",
    ("?", "!"): "!",
    ("?", "?"): "?",
    ("?", ":"): "?",
    (":", "!"): "!",
    (":", "?"): "?",
    (":", ":"): ":",
}

_TOK = re.compile(
    r"\s*(?:(?P<mv>\?[A-Za-z][A-Za-z0-9_']*)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_']*|0)"
    r"|(?P<op>=>|->|::|!=|[(){}\[\]+|\\^.,=~><':!?-])"
    r")"
)


def _lex(line: str) -> list:
    toks = []
    pos = 0
    while pos < len(line):
        m = _TOK.match(line, pos)
        if not m or m.end() == pos:
            rest = line[pos:].strip()
            if rest:
                raise LangError(f"cannot tokenise {rest[:20]!r}")
            break
        if m.group("mv"):
            toks.append(("mv", m.group("mv")[1:]))
        elif m.group("ident"):
            toks.append(("ident", m.group("ident")))
        else:
            toks.append((m.group("op"), m.group("op")))
        pos = m.end()
    toks.append(("end", ""))
    return toks


class _Cursor:
    def __init__(self, toks: list, line: str):
        self.toks = toks
        self.i = 0
        self.line = line

    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.i]
        if t[0] != "end":
            self.i += 1
        return t

    def eat(self, kind: str):
        t = self.next()
        if t[0] != kind:
            raise LangError(f"expected {kind!r}, found {t[1]!r} in: {self.line}")
        return t

    def at(self, kind: str) -> bool:
        return self.peek()[0] == kind

    def done(self) -> bool:
        return self.at("end")


# -- label expressions ---------------------------------------------------------


def _parse_lexpr(c: _Cursor):
    t = c.next()
    if t[0] == "mv":
        mark = ""
        if c.peek()[0] in ("!", "?", ":"):
            mark = c.next()[0]
        return ("mv", t[1], mark)
    if t[0] == "'":
        name = c.eat("ident")[1]
        return ("lit", "'" + name)
    if t[0] == "ident":
        if t[1] == "co" and c.at("("):
            c.next()
            sub = _parse_lexpr(c)
            c.eat(")")
            return ("co", sub)
        if t[1] == "f" and c.at("("):
            c.next()
            sub = _parse_lexpr(c)
            c.eat(")")
            return ("fapp", sub)
        name = t[1]
        if c.peek()[0] in ("!", "?", ":"):
            name += c.next()[0]
        return ("lit", name)
    raise LangError(f"expected a label expression, found {t[1]!r} in: {c.line}")


def _eval_lexpr(ast, env: dict, param=None):
    kind = ast[0]
    if kind == "mv":
        val = env.get(ast[1])
        if val is None:
            raise LangError(f"unbound label metavariable ?{ast[1]}")
        return val + ast[2] if ast[2] else val
    if kind == "co":
        return co(_eval_lexpr(ast[1], env, param))
    if kind == "fapp":
        if not isinstance(param, tuple):
            raise LangError("f(...) may only be used in relabelling rules")
        val = _eval_lexpr(ast[1], env, param)
        return relabel_apply(dict(param), val) if val is not None else None
    return ast[1]


# -- label classes ---------------------------------------------------------------


def _parse_classexpr(c: _Cursor):
    left = _parse_classterm(c)
    while c.peek()[0] in ("+", "-"):
        op = c.next()[0]
        right = _parse_classterm(c)
        left = ("union" if op == "+" else "minus", left, right)
    return left


def _parse_classterm(c: _Cursor):
    t = c.next()
    if t[0] == "ident":
        if t[1] == "co" and c.at("("):
            c.next()
            sub = _parse_classexpr(c)
            c.eat(")")
            return ("co", sub)
        if c.peek()[0] in ("!", "?", ":"):
            return ("markclass", ("name", t[1]), c.next()[0])
        return ("name", t[1])
    if t[0] == "{":
        items = []
        if not c.at("}"):
            items.append(_parse_lexpr(c))
            while c.at(","):
                c.next()
                items.append(_parse_lexpr(c))
        c.eat("}")
        return ("enum", items)
    if t[0] == "(":
        sub = _parse_classexpr(c)
        c.eat(")")
        return sub
    raise LangError(f"expected a label class, found {t[1]!r} in: {c.line}")


def _eval_class(ast, scope: dict, param=None) -> frozenset:
    kind = ast[0]
    if kind == "name":
        if ast[1] == "L" and isinstance(param, frozenset):
            return param
        try:
            return scope[ast[1]]
        except KeyError:
            raise LangError(f"unknown label class {ast[1]!r}") from None
    if kind == "co":
        return frozenset(x for x in map(co, _eval_class(ast[1], scope, param)) if x)
    if kind == "markclass":
        base = _eval_class(ast[1], scope, param)
        return frozenset(b + ast[2] for b in base)
    if kind == "union":
        return _eval_class(ast[1], scope, param) | _eval_class(ast[2], scope, param)
    if kind == "minus":
        return _eval_class(ast[1], scope, param) - _eval_class(ast[2], scope, param)
    if kind == "enum":
        return frozenset(_eval_lexpr(x, {}) for x in ast[1])
    raise LangError(f"bad class expression {ast!r}")


# -- term patterns ----------------------------------------------------------------


def _parse_pattern(c: _Cursor):
    return _pat_choice(c)


def _pat_choice(c: _Cursor):
    left = _pat_par(c)
    while c.at("+"):
        c.next()
        left = ("op", "choice", None, [left, _pat_par(c)])
    return left


def _pat_par(c: _Cursor):
    left = _pat_post(c)
    while c.at("|"):
        c.next()
        left = ("op", "par", None, [left, _pat_post(c)])
    return left


def _pat_post(c: _Cursor):
    t = _pat_pre(c)
    while True:
        if c.at("\\"):
            c.next()
            if c.at("ident") and c.peek()[1] == "L":
                c.next()
                t = ("op", "restrict", "L", [t])
            else:
                c.eat("{")
                names = []
                if not c.at("}"):
                    names.append(c.eat("ident")[1])
                    while c.at(","):
                        c.next()
                        names.append(c.eat("ident")[1])
                c.eat("}")
                t = ("op", "restrict", frozenset(names), [t])
        elif c.at("["):
            c.next()
            if c.at("ident") and c.peek()[1] == "f" and c.peek(1)[0] == "]":
                c.next()
                c.eat("]")
                t = ("op", "relabel", "f", [t])
            else:
                pairs = []
                while True:
                    a = c.eat("ident")[1]
                    c.eat("->")
                    b = c.eat("ident")[1]
                    pairs.append((a, b))
                    if not c.at(","):
                        break
                    c.next()
                c.eat("]")
                t = ("op", "relabel", tuple(pairs), [t])
        else:
            return t


def _pat_is_label_start(c: _Cursor) -> bool:
    if c.at("mv"):
        k = 1
        if c.peek(1)[0] in ("!", "?", ":"):
            k = 2
        return c.peek(k)[0] == "."
    if c.at("'"):
        return c.peek(2)[0] == "."
    if c.at("ident"):
        if c.peek()[1] in ("co",) and c.peek(1)[0] == "(":
            # co(...) followed by '.'  -- find matching paren is overkill; co labels
            # in prefix position are not used by the built-in languages
            return False
        k = 1
        if c.peek(1)[0] in ("!", "?", ":"):
            k = 2
        return c.peek(k)[0] == "."
    return False


def _pat_pre(c: _Cursor):
    if _pat_is_label_start(c):
        lab = _parse_lexpr(c)
        c.eat(".")
        return ("op", "prefix", lab, [_pat_pre(c)])
    return _pat_sig(c)


def _pat_sig(c: _Cursor):
    t = _pat_atom(c)
    while c.at("^"):
        c.next()
        lab = _parse_lexpr(c)
        t = ("op", "signal", lab, [t])
    return t


def _pat_atom(c: _Cursor):
    t = c.next()
    if t[0] == "(":
        inner = _pat_choice(c)
        c.eat(")")
        return inner
    if t[0] == "ident":
        if t[1] == "0":
            pass
        if t[1] == "rec":
            var = c.eat("ident")[1]
            c.eat("{")
            bindings = []
            while True:
                x = c.eat("ident")[1]
                c.eat("=")
                bindings.append((x, _pat_choice(c)))
                if not c.at(","):
                    break
                c.next()
            c.eat("}")
            return ("rec", var, bindings)
        if c.at("("):
            c.next()
            args = []
            if not c.at(")"):
                args.append(_pat_choice(c))
                while c.at(","):
                    c.next()
                    args.append(_pat_choice(c))
            c.eat(")")
            return ("op", "const:" + t[1], None, args)
        return ("var", t[1])
    raise LangError(f"unexpected {t[1]!r} in term pattern: {c.line}")


def _pattern_to_term(pat, env: dict, tss: TSS, param, family_decl=None) -> Term:
    kind = pat[0]
    if kind == "var":
        if pat[1] == "0":
            return Op(tss.declare_op(OperatorDecl("0", 0)), ())
        return Var(pat[1])
    if kind == "rec":
        bindings = {
            x: _pattern_to_term(p, env, tss, param, family_decl) for x, p in pat[2]
        }
        return Rec(pat[1], RecSpec.of(bindings))
    _, fam, arg, sub_pats = pat
    args = tuple(_pattern_to_term(p, env, tss, param, family_decl) for p in sub_pats)
    if fam == "choice":
        return Op(tss.declare_op(OperatorDecl("+", 2)), args)
    if fam == "par":
        return Op(tss.declare_op(OperatorDecl("|", 2)), args)
    if fam == "prefix":
        label = _eval_lexpr(arg, env, param)
        if label is None or label not in tss.actions:
            raise LangError(f"label {label!r} cannot prefix a process")
        return Op(tss.declare_op(OperatorDecl(label + ".", 1)), args)
    if fam == "signal":
        sig = _eval_lexpr(arg, env, param)
        return Op(tss.declare_op(OperatorDecl("^" + sig, 1)), args)
    if fam == "restrict":
        if arg == "L":
            if family_decl is None:
                raise LangError("\\ L may only appear in restriction-family rules")
            return Op(family_decl, args)
        symbol = "\\{" + ",".join(sorted(arg)) + "}"
        return Op(tss.declare_op(OperatorDecl(symbol, 1)), args)
    if fam == "relabel":
        if arg == "f":
            if family_decl is None:
                raise LangError("[f] may only appear in relabelling-family rules")
            return Op(family_decl, args)
        mapping = {a: b for a, b in arg if a != b}
        symbol = "[" + ",".join(f"{a}->{b}" for a, b in sorted(mapping.items())) + "]"
        return Op(tss.declare_op(OperatorDecl(symbol, 1)), args)
    if fam.startswith("const:"):
        name = fam[6:]
        decl = tss.signature.get(name)
        if decl is None:
            raise LangError(f"operator {name!r} is not declared")
        return Op(decl, args)
    raise LangError(f"bad pattern {pat!r}")


def _pattern_family(pat) -> str | None:
    """Which lazy operator family a conclusion-source pattern belongs to."""
    if pat[0] != "op":
        return None
    if pat[1] == "restrict" and pat[2] == "L":
        return "restrict"
    if pat[1] == "relabel" and pat[2] == "f":
        return "relabel"
    return None


# -- rule templates ---------------------------------------------------------------


@dataclass
class _RuleTemplate:
    group: str
    name_pat: str
    items: list  # quantifier/condition entries
    premises: list  # (src var, lexpr, tgt var)
    src_pat: object
    label: object  # lexpr
    tgt_pat: object
    family: str | None = None
    line: str = ""


@dataclass
class _SRuleTemplate:
    group: str
    name_pat: str
    items: list
    premises: list  # (t, v, t') identifier triples
    lhs: object
    mid: object
    target: object
    line: str = ""


def _parse_items(c: _Cursor) -> list:
    """The `[...]` quantifier/condition block."""
    items: list = []
    if not c.at("["):
        return items
    c.next()
    while not c.at("]"):
        if c.at("("):
            c.next()
            mvs = [c.eat("mv")[1]]
            while c.at(","):
                c.next()
                mvs.append(c.eat("mv")[1])
            c.eat(")")
            c.eat("ident")  # 'in'
            table = c.eat("ident")[1]
            items.append(("intuple", mvs, table))
        elif c.at("ident") and c.peek()[1] == "label":
            c.next()
            c.eat("(")
            var = c.eat("ident")[1]
            c.eat(")")
            t = c.next()
            if t[0] == "ident" and t[1] == "in":
                items.append(("labelin", var, _parse_classexpr(c)))
            elif t[0] == "=":
                items.append(("labeleq", var, _parse_lexpr(c)))
            else:
                raise LangError(f"bad label(...) condition in: {c.line}")
        else:
            lx = _parse_lexpr(c)
            t = c.next()
            if t[0] == "ident" and t[1] == "in" and lx[0] == "mv" and not lx[2]:
                items.append(("in", lx[1], _parse_classexpr(c)))
            elif t[0] == "ident" and t[1] == "notin":
                items.append(("notin", lx, _parse_classexpr(c)))
            elif t[0] == "!=":
                items.append(("ne", lx, _parse_lexpr(c)))
            elif t[0] == "=":
                items.append(("eq", lx, _parse_lexpr(c)))
            else:
                raise LangError(f"bad condition in: {c.line}")
        if c.at(","):
            c.next()
    c.eat("]")
    return items


def _expand_items(items: list, scope: dict, broadcasts: frozenset, param=None) -> list:
    """All metavariable environments satisfying the quantifiers and filters."""
    envs = [{}]
    for item in items:
        kind = item[0]
        if kind == "in":
            _, mv, cls = item
            values = sorted(_eval_class(cls, scope, param))
            envs = [dict(e, **{mv: v}) for e in envs for v in values]
        elif kind == "intuple":
            _, mvs, table = item
            if table != "BroadcastSync":
                raise LangError(f"unknown tuple class {table!r}")
            if len(mvs) != 3:
                raise LangError("BroadcastSync binds exactly three metavariables")
            triples = [
                (b + m1, b + m2, b + out)
                for b in sorted(broadcasts)
                for (m1, m2), out in sorted(_BCOMP.items())
                if out is not None
            ]
            envs = [
                dict(e, **{mvs[0]: l1, mvs[1]: l2, mvs[2]: l3})
                for e in envs
                for (l1, l2, l3) in triples
            ]
        elif kind == "notin":
            _, lx, cls = item
            keep = []
            for e in envs:
                val = _eval_lexpr(lx, e, param)
                if val is None or val not in _eval_class(cls, scope, param):
                    keep.append(e)
            envs = keep
        elif kind == "ne":
            envs = [
                e
                for e in envs
                if _eval_lexpr(item[1], e, param) != _eval_lexpr(item[2], e, param)
            ]
        elif kind == "eq":
            envs = [
                e
                for e in envs
                if _eval_lexpr(item[1], e, param) == _eval_lexpr(item[2], e, param)
            ]
        elif kind in ("labelin", "labeleq"):
            continue  # successor-rule constraint, handled at elaboration
        else:
            raise LangError(f"bad quantifier item {item!r}")
    return envs


def _subst_name(name_pat: str, env: dict) -> str:
    return re.sub(
        r"\?([A-Za-z][A-Za-z0-9_']*)",
        lambda m: env.get(m.group(1), m.group(0)),
        name_pat,
    )


# -- the loader --------------------------------------------------------------------


@dataclass
class _FileAst:
    name: str = "unnamed"
    channels: list = field(default_factory=list)
    broadcasts: list = field(default_factory=list)
    signals: list = field(default_factory=list)
    operators: list = field(default_factory=list)  # (symbol, arity)
    classes: list = field(default_factory=list)  # (name, classexpr)
    rules: list = field(default_factory=list)
    srules: list = field(default_factory=list)
    metarule: tuple | None = None  # (name, classexpr)


def parse_lang(text: str) -> _FileAst:
    ast = _FileAst()
    mode = ""
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        low = stripped.lower()
        if low == "transition rules:":
            mode = "rules"
            continue
        if low == "successor rules:":
            mode = "srules"
            continue
        head = stripped.split(None, 1)
        if head[0] == "language":
            ast.name = head[1].strip()
            mode = ""
            continue
        if head[0] in ("channels:", "broadcasts:", "signals:"):
            names = head[1].split() if len(head) > 1 else []
            getattr(ast, head[0][:-1]).extend(names)
            mode = ""
            continue
        if head[0] == "operators:":
            for item in (head[1].split() if len(head) > 1 else []):
                sym, _, ar = item.partition("/")
                ast.operators.append((sym, int(ar)))
            mode = ""
            continue
        if head[0] == "labelclass":
            rest = head[1]
            cname, _, cexpr = rest.partition("=")
            c = _Cursor(_lex(cexpr.strip()), line)
            ast.classes.append((cname.strip(), _parse_classexpr(c)))
            mode = ""
            continue
        if head[0] == "metarule":
            ast.metarule = _parse_metarule(head[1], line)
            mode = ""
            continue
        if mode == "rules":
            ast.rules.append(_parse_rule_line(stripped))
            continue
        if mode == "srules":
            ast.srules.append(_parse_srule_line(stripped))
            continue
        raise LangError(f"unexpected line outside any section: {stripped!r}")
    return ast


def _parse_metarule(rest: str, line: str) -> tuple:
    c = _Cursor(_lex(rest), line)
    name = c.eat("ident")[1]
    c.eat("::")
    chi = c.eat("ident")[1]
    c.eat("~")
    zeta = c.eat("ident")[1]
    c.eat(">")
    chi2 = c.eat("ident")[1]
    if chi != chi2:
        raise LangError(
            "meta-rule shape mismatch: conclusion must preserve the transition "
            f"({chi} vs {chi2})"
        )
    items = _parse_items(c)
    cond = [i for i in items if i[0] == "labelin" and i[1] == zeta]
    if len(items) != 1 or not cond:
        raise LangError(
            "meta-rule shape mismatch: exactly one label(...) condition on the "
            "mid transition is required"
        )
    return name, cond[0][2]


def _parse_rule_line(line: str) -> _RuleTemplate:
    c = _Cursor(_lex(line), line)
    name_tok = c.eat("ident")[1]
    name_pat = name_tok
    if c.at("("):
        depth = 0
        parts = [c.next()[1]]
        while True:
            t = c.next()
            if t[0] == "end":
                raise LangError(f"unterminated rule name in: {line}")
            parts.append(t[1] if t[0] != "mv" else "?" + t[1])
            if t[0] == "(":
                depth += 1
            if t[0] == ")":
                if depth == 0:
                    break
                depth -= 1
        name_pat += "".join(parts)
    items = _parse_items(c)
    c.eat("::")
    premises = []
    while not c.at("=>"):
        src = c.eat("ident")[1]
        c.eat("-")
        lab = _parse_lexpr(c)
        c.eat("->")
        tgt = c.eat("ident")[1]
        premises.append((src, lab, tgt))
        if c.at(","):
            c.next()
    c.eat("=>")
    src_pat = _parse_pattern(c)
    c.eat("-")
    label = _parse_lexpr(c)
    c.eat("->")
    tgt_pat = _parse_pattern(c)
    if not c.done():
        raise LangError(f"trailing input in rule: {line}")
    return _RuleTemplate(
        group=name_tok,
        name_pat=name_pat,
        items=items,
        premises=premises,
        src_pat=src_pat,
        label=label,
        tgt_pat=tgt_pat,
        family=_pattern_family(src_pat),
        line=line,
    )


# successor-rule transition-expression patterns ------------------------------------


def _parse_texpr(c: _Cursor):
    if c.at("("):
        c.next()
        first = _parse_texpr(c)
        if c.at(")"):
            c.next()
            return first
        group = c.eat("ident")[1]
        constraint = None
        if c.at("{"):
            c.next()
            constraint = _parse_lexpr(c)
            c.eat("}")
        second = _parse_texpr(c)
        c.eat(")")
        return ("cons", group, constraint, [first, second])
    t = c.eat("ident")
    name = t[1]
    if name == "tgt" and c.at("("):
        c.next()
        inner = c.eat("ident")[1]
        c.eat(")")
        return ("tgt", inner)
    if name == "fresh" and c.at("("):
        c.next()
        base = _parse_texpr(c)
        labels = None
        if c.at(","):
            c.next()
            c.eat("{")
            labels = [_parse_lexpr(c)]
            while c.at(","):
                c.next()
                labels.append(_parse_lexpr(c))
            c.eat("}")
        c.eat(")")
        return ("fresh", base, labels)
    constraint = None
    if c.at("{"):
        c.next()
        constraint = _parse_lexpr(c)
        c.eat("}")
    if c.at("("):
        c.next()
        args = []
        if not c.at(")"):
            args.append(_parse_texpr(c))
            while c.at(","):
                c.next()
                args.append(_parse_texpr(c))
        c.eat(")")
        return ("cons", name, constraint, args)
    if constraint is not None:
        raise LangError(f"label constraint on a variable in: {c.line}")
    return ("id", name)


def _parse_srule_line(line: str) -> _SRuleTemplate:
    c = _Cursor(_lex(line), line)
    name_tok = c.eat("ident")[1]
    name_pat = name_tok
    if c.at("("):
        c.next()
        inner = []
        while not c.at(")"):
            t = c.next()
            inner.append("?" + t[1] if t[0] == "mv" else t[1])
        c.eat(")")
        name_pat += "(" + "".join(inner) + ")"
    items = _parse_items(c)
    c.eat("::")
    premises = []
    while not c.at("=>"):
        t = c.eat("ident")[1]
        c.eat("~")
        v = c.eat("ident")[1]
        c.eat(">")
        res = c.eat("ident")[1]
        premises.append((t, v, res))
        if c.at(","):
            c.next()
    c.eat("=>")
    lhs = _parse_texpr(c)
    c.eat("~")
    mid = _parse_texpr(c)
    c.eat(">")
    target = _parse_texpr(c)
    if not c.done():
        raise LangError(f"trailing input in successor rule: {line}")
    return _SRuleTemplate(
        group=name_tok,
        name_pat=name_pat,
        items=items,
        premises=premises,
        lhs=lhs,
        mid=mid,
        target=target,
        line=line,
    )


# -- building the TSS ---------------------------------------------------------------


def _expand_rule(tpl: _RuleTemplate, tss: TSS, scope: dict, env: dict, param=None, decl=None):
    name = _subst_name(tpl.name_pat, env)
    if param is not None and decl is not None:
        name = decl.symbol
    src = _pattern_to_term(tpl.src_pat, env, tss, param, decl)
    if not isinstance(src, Op):
        raise LangError(f"rule source must be an operator application: {tpl.line}")
    label = _eval_lexpr(tpl.label, env, param)
    if label is None:
        return None
    if label not in tss.labels:
        raise LangError(f"rule {name}: conclusion label {label!r} is not declared")
    prems = []
    for s, lx, t in tpl.premises:
        lab = _eval_lexpr(lx, env, param)
        if lab is None:
            return None
        if lab not in tss.labels:
            raise LangError(f"rule {name}: premise label {lab!r} is not declared")
        prems.append(Premise(s, lab, t))
    tgt = _pattern_to_term(tpl.tgt_pat, env, tss, param, decl)
    return DeSimoneRule(
        group=tpl.group,
        name=name,
        op=src.decl,
        source_args=src.args,
        premises=tuple(prems),
        label=label,
        target=tgt,
    )


def load_language(
    text: str,
    channels=None,
    broadcasts=None,
    signals=None,
) -> TSSS:
    """Parse a language definition and expand it into a checked-free TSSS.

    Format diagnostics are not raised here; run the format checkers on the
    result to obtain them.
    """
    ast = parse_lang(text)
    ch = frozenset(channels if channels is not None else ast.channels)
    br = frozenset(broadcasts if broadcasts is not None else ast.broadcasts)
    sg = frozenset(signals if signals is not None else ast.signals)
    overlap = (ch & br) | (ch & sg) | (br & sg)
    if overlap:
        raise LangError(f"alphabets overlap on: {', '.join(sorted(overlap))}")
    if "tau" in ch | br | sg:
        raise LangError("'tau' cannot be declared in an alphabet")

    actions = (
        ch
        | frozenset(co(x) for x in ch)
        | frozenset(("tau",))
        | frozenset(b + "!" for b in br)
        | frozenset(b + "?" for b in br)
        | sg
    )
    indicators = frozenset(b + ":" for b in br) | frozenset(co(s) for s in sg)
    tss = TSS(
        ast.name,
        labels=actions | indicators,
        actions=actions,
        channels=ch,
        broadcasts=br,
        signals=sg,
    )

    scope = {
        "Ch": ch,
        "B": br,
        "Sig": sg,
        "Act": actions,
        "Lab": actions | indicators,
        "Ind": indicators,
        "Tau": frozenset(("tau",)),
    }
    for cname, cexpr in ast.classes:
        scope[cname] = _eval_class(cexpr, scope)

    tss.declare_op(OperatorDecl("0", 0))  # inaction is part of the term grammar
    for sym, ar in ast.operators:
        tss.declare_op(OperatorDecl(sym, ar))

    family_templates: dict = {"restrict": [], "relabel": []}
    for tpl in ast.rules:
        if tpl.family is not None:
            family_templates[tpl.family].append(tpl)
            continue
        for env in _expand_items(tpl.items, scope, br):
            rule = _expand_rule(tpl, tss, scope, env)
            if rule is not None:
                tss.add_rule(rule)

    def factory(family: str, decl: OperatorDecl, param) -> list:
        out = []
        for tpl in family_templates[family]:
            for env in _expand_items(tpl.items, scope, br, param=param):
                rule = _expand_rule(tpl, tss, scope, env, param=param, decl=decl)
                if rule is not None:
                    out.append(rule)
        return out

    tss._family_factory = factory

    # representative instances so load-time checking covers the families
    if family_templates["restrict"]:
        tss.restrict_op(ch)
        if ch:
            tss.restrict_op(frozenset((sorted(ch)[0],)))
    if family_templates["relabel"]:
        tss.relabel_op(())
        if len(ch) >= 2:
            a, b = sorted(ch)[:2]
            tss.relabel_op(((a, b), (b, a)))

    srules = [
        srule
        for tpl in ast.srules
        for srule in _elaborate_srules(tpl, tss, scope, br)
    ]
    metarule = None
    if ast.metarule is not None:
        mname, mclass = ast.metarule
        metarule = MetaRule(mname, _eval_class(mclass, scope))

    tsss = TSSS(tss, srules, metarule)
    if metarule is not None:
        tsss.generated = expand_metarule(tsss)
        for rule in tsss.generated:
            tsss.add_srule(rule)
    return tsss


# -- successor-rule elaboration -------------------------------------------------------


def _elaborate_srules(tpl: _SRuleTemplate, tss: TSS, scope: dict, br: frozenset) -> list:
    out = []
    for env in _expand_items(tpl.items, scope, br):
        out.append(_elaborate_srule(tpl, tss, scope, env))
    return out


def _elaborate_srule(tpl: _SRuleTemplate, tss: TSS, scope: dict, env: dict) -> SuccessorRule:
    name = _subst_name(tpl.name_pat, env)
    anomalies: list = []

    def cons_parts(side, which):
        if side[0] != "cons":
            anomalies.append(
                ("succ-premise-shape", f"the {which} of the conclusion must be a constructor application")
            )
            return None, None, []
        _, group, constraint, args = side
        return group, constraint, args

    r_group, r_cons, lhs_args = cons_parts(tpl.lhs, "left-hand side")
    s_group, s_cons, mid_args = cons_parts(tpl.mid, "mid")
    if r_group is None or s_group is None:
        return SuccessorRule(
            name=name, r_group=r_group or "?", s_group=s_group or "?",
            premises=(), target=VBad("?", "malformed conclusion"),
            anomalies=tuple(anomalies),
        )

    def classify(args, which):
        tvars: dict = {}
        pvars: dict = {}
        for i, a in enumerate(args, start=1):
            if a[0] == "id":
                if a[1][0].islower():
                    tvars[a[1]] = i
                else:
                    pvars[a[1]] = i
            else:
                anomalies.append(
                    (
                        "premise-shape",
                        f"argument {i} of the {which} constructor must be a variable",
                    )
                )
        return tvars, pvars

    lhs_t, lhs_p = classify(lhs_args, "left")
    mid_t, mid_p = classify(mid_args, "mid")

    rg = tss.group(r_group)
    sg = tss.group(s_group)
    if rg is not None:
        for v, i in lhs_t.items():
            if i not in rg.trigger_set:
                anomalies.append(
                    (
                        "lhs-argument-shape",
                        f"argument {i} of {r_group} is outside its trigger set but "
                        f"holds transition variable {v!r}",
                    )
                )
        for v, i in lhs_p.items():
            if i in rg.trigger_set:
                anomalies.append(
                    (
                        "lhs-argument-shape",
                        f"argument {i} of {r_group} is a premise position but holds "
                        f"process variable {v!r}",
                    )
                )
    if sg is not None:
        for v, i in mid_t.items():
            if i not in sg.trigger_set:
                anomalies.append(
                    (
                        "mid-argument-shape",
                        f"argument {i} of {s_group} is outside its trigger set but "
                        f"holds transition variable {v!r}",
                    )
                )
        for v, i in mid_p.items():
            if i in sg.trigger_set:
                anomalies.append(
                    (
                        "mid-argument-shape",
                        f"argument {i} of {s_group} is a premise position but holds "
                        f"process variable {v!r}",
                    )
                )

    # shared source processes: same position, same name on both sides
    for v, i in lhs_p.items():
        if v in mid_p and mid_p[v] != i:
            anomalies.append(
                ("succ-source-coherence", f"process variable {v!r} sits at two different positions")
            )
    for i in set(lhs_p.values()) & set(mid_p.values()):
        lv = [v for v, j in lhs_p.items() if j == i][0]
        mv = [v for v, j in mid_p.items() if j == i][0]
        if lv != mv:
            anomalies.append(
                (
                    "source-coherence",
                    f"position {i} holds process variables {lv!r} and {mv!r}; "
                    "a shared argument must use one variable",
                )
            )

    all_names = list(lhs_t) + list(mid_t) + [v for v in lhs_p] + [
        v for v in mid_p if v not in lhs_p
    ]
    if len(all_names) != len(set(all_names)):
        anomalies.append(("succ-variable-distinctness", "a variable name is used on both sides"))

    prem_pos: list = []
    prem_results: dict = {}
    for (tname, vname, resname) in tpl.premises:
        ti = lhs_t.get(tname)
        vi = mid_t.get(vname)
        if ti is None or vi is None or ti != vi:
            anomalies.append(
                (
                    "premise-shape",
                    f"premise {tname} ~{vname}> {resname} must relate the lhs and mid "
                    "transition variables of one argument position",
                )
            )
            continue
        if ti in prem_pos:
            anomalies.append(
                ("succ-premise-shape", f"argument {ti} has more than one premise")
            )
            continue
        if resname in all_names or resname in prem_results:
            anomalies.append(
                ("succ-variable-distinctness", f"premise result {resname!r} is not fresh")
            )
        prem_pos.append(ti)
        prem_results[resname] = ti

    on_xa: dict = {}
    on_ya: dict = {}
    on_za: dict = {}
    on_r_label = _constraint_set(r_cons, env, scope)
    on_s_label = _constraint_set(s_cons, env, scope)

    def to_vexpr(node):
        kind = node[0]
        if kind == "id":
            nm = node[1]
            if nm in prem_results:
                return VPrem(prem_results[nm])
            if nm in lhs_t:
                return VLhs(lhs_t[nm])
            if nm in mid_t:
                return VBad(nm, f"mid transition {nm!r} may not be reused in the target")
            if nm in lhs_p or nm in mid_p:
                return VProc(lhs_p.get(nm, mid_p.get(nm)), "x")
            return VBad(nm, f"unknown variable {nm!r} in the target")
        if kind == "tgt":
            nm = node[1]
            if nm in mid_t:
                return VProc(mid_t[nm], "ytgt")
            return VBad(nm, f"tgt(...) needs a mid transition variable, got {nm!r}")
        if kind == "fresh":
            base = to_vexpr(node[1])
            labels = None
            if node[2] is not None:
                labels = frozenset(
                    v for v in (_eval_lexpr(lx, env) for lx in node[2]) if v is not None
                )
            if isinstance(base, VProc):
                return VFresh(base.pos, base.over, labels)
            return VBad("fresh", "fresh(...) needs a process expression to range over")
        if kind == "cons":
            _, group, constraint, args = node
            if constraint is not None:
                return VBad(group, "label constraints are not allowed in the target")
            return VCons(group, tuple(to_vexpr(a) for a in args))
        return VBad("?", f"bad target node {node!r}")

    target = to_vexpr(tpl.target)

    # fresh-variable label sets live in on_za, keyed by position
    def hoist_fresh(e):
        if isinstance(e, VFresh) and e.labels is not None:
            on_za[e.pos] = e.labels
        if isinstance(e, VCons):
            for a in e.args:
                hoist_fresh(a)

    hoist_fresh(target)

    for item in tpl.items:
        if item[0] not in ("labelin", "labeleq"):
            continue
        var = item[1]
        values = (
            _eval_class(item[2], scope)
            if item[0] == "labelin"
            else frozenset(v for v in (_eval_lexpr(item[2], env),) if v is not None)
        )
        if var in lhs_t:
            on_xa[lhs_t[var]] = values
        elif var in mid_t:
            on_ya[mid_t[var]] = values
        elif var in prem_results:
            on_za[prem_results[var]] = values
        else:
            anomalies.append(
                ("succ-premise-shape", f"label(...) condition on unknown variable {var!r}")
            )

    return SuccessorRule(
        name=name,
        r_group=r_group,
        s_group=s_group,
        premises=tuple(sorted(prem_pos)),
        target=target,
        on_r_label=on_r_label,
        on_s_label=on_s_label,
        on_xa=tuple(sorted(on_xa.items())),
        on_ya=tuple(sorted(on_ya.items())),
        on_za=tuple(sorted(on_za.items())),
        anomalies=tuple(anomalies),
    )


def _constraint_set(constraint, env: dict, scope: dict) -> frozenset | None:
    if constraint is None:
        return None
    val = _eval_lexpr(constraint, env)
    return frozenset((val,)) if val is not None else frozenset()
