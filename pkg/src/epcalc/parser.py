"""Parser for the textual term grammar.

Grammar, loosest binding first::

    expr    ->  par ('+' par)*
    par     ->  post ('|' post)*
    post    ->  pre ( '\\' '{' names '}' | '[' renames ']' )*
    pre     ->  label '.' pre | sig
    sig     ->  atom ('^' name)*
    atom    ->  '0' | '(' expr ')' | 'rec' NAME '{' NAME '=' expr, ... '}'
             |  NAME '(' expr, ... ')' | NAME

Labels are ``a``, ``'a`` (co-name), ``tau``, ``b!``, ``b?``.  Which of these
may actually prefix a process is decided by the language context passed in;
the parser itself is signature-free.
"""

from __future__ import annotations

import re

from .errors import ParseError
from .terms import Op, Rec, RecSpec, Term, Var

_TOKEN = re.compile(
    r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<arrow>->)"
    r"|(?P<punct>[(){}\[\]+|\\^.,='!?:]))"
)


def tokenize(text: str) -> list:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ParseError(f"unexpected character {text[pos:].lstrip()[0]!r}", pos)
            break
        if m.group("ident"):
            out.append(("ident", m.group("ident"), m.start("ident")))
        elif m.group("arrow"):
            out.append(("->", "->", m.start("arrow")))
        else:
            p = m.group("punct")
            out.append((p, p, m.start("punct")))
        pos = m.end()
    out.append(("eof", "", len(text)))
    return out


class TermParser:
    """Recursive-descent parser; `lang` supplies operator declarations."""

    def __init__(self, text: str, lang):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.lang = lang

    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.i]
        if t[0] != "eof":
            self.i += 1
        return t

    def expect(self, kind: str) -> tuple:
        t = self.next()
        if t[0] != kind:
            raise ParseError(f"expected {kind!r}, found {t[1]!r}", t[2])
        return t

    def parse(self) -> Term:
        t = self.expr()
        tail = self.peek()
        if tail[0] != "eof":
            raise ParseError(f"trailing input starting at {tail[1]!r}", tail[2])
        return t

    def expr(self) -> Term:
        left = self.par()
        while self.peek()[0] == "+":
            self.next()
            right = self.par()
            left = Op(self.lang.named_op("+", 2), (left, right))
        return left

    def par(self) -> Term:
        left = self.post()
        while self.peek()[0] == "|":
            self.next()
            right = self.post()
            left = Op(self.lang.named_op("|", 2), (left, right))
        return left

    def post(self) -> Term:
        t = self.pre()
        while True:
            tok = self.peek()
            if tok[0] == "\\":
                self.next()
                self.expect("{")
                names = []
                if self.peek()[0] != "}":
                    names.append(self.expect("ident")[1])
                    while self.peek()[0] == ",":
                        self.next()
                        names.append(self.expect("ident")[1])
                self.expect("}")
                t = Op(self._decl(tok, self.lang.restrict_op, frozenset(names)), (t,))
            elif tok[0] == "[":
                self.next()
                pairs = []
                while True:
                    a = self.expect("ident")[1]
                    self.expect("->")
                    b = self.expect("ident")[1]
                    pairs.append((a, b))
                    if self.peek()[0] != ",":
                        break
                    self.next()
                self.expect("]")
                t = Op(self._decl(tok, self.lang.relabel_op, tuple(pairs)), (t,))
            else:
                return t

    def _label_ahead(self) -> bool:
        # label '.' starts a prefix; a bare identifier might instead be a term
        t0, t1, t2 = self.peek(0), self.peek(1), self.peek(2)
        if t0[0] == "'" and t1[0] == "ident":
            return True
        if t0[0] == "ident":
            if t1[0] in ("!", "?", ":"):
                return True
            if t1[0] == ".":
                return True
        return False

    def _label(self) -> str:
        tok = self.peek()
        if tok[0] == "'":
            self.next()
            name = self.expect("ident")[1]
            return "'" + name
        name = self.expect("ident")[1]
        if self.peek()[0] in ("!", "?", ":"):
            return name + self.next()[0]
        return name

    def pre(self) -> Term:
        if self._label_ahead():
            start = self.peek()
            label = self._label()
            self.expect(".")
            decl = self._decl(start, self.lang.prefix_op, label)
            return Op(decl, (self.pre(),))
        return self.sig()

    def sig(self) -> Term:
        t = self.atom()
        while self.peek()[0] == "^":
            tok = self.next()
            name = self.expect("ident")[1]
            t = Op(self._decl(tok, self.lang.signal_op, name), (t,))
        return t

    def atom(self) -> Term:
        tok = self.next()
        if tok[0] == "(":
            t = self.expr()
            self.expect(")")
            return t
        if tok[0] == "ident" and tok[1] == "rec":
            var = self.expect("ident")[1]
            self.expect("{")
            bindings = {}
            while True:
                x = self.expect("ident")[1]
                self.expect("=")
                if x in bindings:
                    raise ParseError(f"variable {x!r} bound twice in rec", tok[2])
                bindings[x] = self.expr()
                if self.peek()[0] != ",":
                    break
                self.next()
            self.expect("}")
            if var not in bindings:
                raise ParseError(f"rec variable {var!r} has no equation", tok[2])
            return Rec(var, RecSpec.of(bindings))
        if tok[0] == "ident":
            if self.peek()[0] == "(":
                self.next()
                args = []
                if self.peek()[0] != ")":
                    args.append(self.expr())
                    while self.peek()[0] == ",":
                        self.next()
                        args.append(self.expr())
                self.expect(")")
                decl = self._decl(tok, self.lang.named_op, tok[1], len(args))
                return Op(decl, tuple(args))
            const = self._decl(tok, self.lang.constant, tok[1])
            if const is not None:
                return Op(const, ())
            return Var(tok[1])
        raise ParseError(f"unexpected {tok[1]!r}", tok[2])

    def _decl(self, tok, mint, *args):
        try:
            return mint(*args)
        except ValueError as exc:
            raise ParseError(str(exc), tok[2]) from None


def parse_term(text: str, lang) -> Term:
    return TermParser(_mark_zero(text), _ZeroView(lang)).parse()


def _mark_zero(text: str) -> str:
    # turn standalone 0 into an identifier the tokenizer accepts
    return re.sub(r"(?<![A-Za-z0-9_])0(?![A-Za-z0-9_])", " __nil ", text)


class _ZeroView:
    """Adapter exposing `lang` to the parser and resolving the 0 constant."""

    def __init__(self, lang):
        self.lang = lang

    def constant(self, name: str):
        if name == "__nil":
            return self.lang.named_op("0", 0)
        return self.lang.constant(name)

    def __getattr__(self, item):
        return getattr(self.lang, item)
