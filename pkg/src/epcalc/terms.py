"""Process expressions over an operator signature.

A term is a process variable, an operator application, or a recursive call
``rec(X, spec)`` binding every variable in the spec's domain.  Terms are
immutable; every public operation returns a fresh term, so values can be
shared freely between concurrent tasks.

Operator symbols are self-describing strings, which keeps rendering and
parsing signature-free:

    "0"            inaction constant
    "a."           prefix by action a          (unary, rendered ``a.p``)
    "+", "|"       choice / parallel           (binary infix)
    "\\{a,b}"      restriction                 (unary postfix)
    "[a->b]"       relabelling                 (unary postfix)
    "^s"           signalling                  (unary postfix)
    anything else  user-declared constant/operator, rendered ``f(p, q)``
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping


@dataclass(frozen=True)
class OperatorDecl:
    """An operator symbol with its arity; (symbol, arity) is unique per signature."""

    symbol: str
    arity: int

    def __repr__(self):
        return f"OperatorDecl({self.symbol!r}, {self.arity})"


def cached_hash(obj, *parts):
    """Structural trees get hashed constantly by the memo tables; compute once."""
    h = getattr(obj, "_hash", None)
    if h is None:
        h = hash(parts)
        object.__setattr__(obj, "_hash", h)
    return h


@dataclass(frozen=True)
class Var:
    name: str

    def __hash__(self):
        return cached_hash(self, "v", self.name)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Op:
    decl: OperatorDecl
    args: tuple

    def __post_init__(self):
        if len(self.args) != self.decl.arity:
            raise ValueError(
                f"operator {self.decl.symbol!r} expects {self.decl.arity} "
                f"arguments, got {len(self.args)}"
            )

    def __hash__(self):
        return cached_hash(self, "o", self.decl, self.args)

    def __str__(self):
        return render(self)


@dataclass(frozen=True)
class RecSpec:
    """A finite map from bound variables to their defining terms.

    Stored as a name-sorted tuple of pairs so that specs hash and compare
    structurally.
    """

    bindings: tuple

    def __hash__(self):
        return cached_hash(self, "s", self.bindings)

    @staticmethod
    def of(mapping: Mapping[str, "Term"]) -> "RecSpec":
        if not mapping:
            raise ValueError("recursive specification must bind at least one variable")
        return RecSpec(tuple(sorted(mapping.items())))

    @property
    def domain(self) -> frozenset:
        return frozenset(name for name, _ in self.bindings)

    def body(self, name: str) -> "Term":
        for var, term in self.bindings:
            if var == name:
                return term
        raise KeyError(name)

    def items(self) -> Iterator[tuple]:
        return iter(self.bindings)

    def __str__(self):
        inner = ", ".join(f"{x} = {render(t)}" for x, t in self.bindings)
        return "{" + inner + "}"


@dataclass(frozen=True)
class Rec:
    """Recursive call: the `var` component of a solution of `spec`."""

    var: str
    spec: RecSpec

    def __post_init__(self):
        if self.var not in self.spec.domain:
            raise ValueError(f"rec variable {self.var!r} not bound by its specification")

    def __hash__(self):
        return cached_hash(self, "r", self.var, self.spec)

    def __str__(self):
        return render(self)


Term = Var | Op | Rec

# Substitutions are plain partial maps from variable names to terms.
Subst = Mapping[str, Term]


def free_vars(term: Term) -> frozenset:
    """Variables with at least one free occurrence; rec binds its whole domain."""
    match term:
        case Var(name):
            return frozenset((name,))
        case Op(_, args):
            out = frozenset()
            for a in args:
                out |= free_vars(a)
            return out
        case Rec(_, spec):
            out = frozenset()
            for _, body in spec.items():
                out |= free_vars(body)
            return out - spec.domain
    raise TypeError(f"not a term: {term!r}")


def is_closed(term: Term) -> bool:
    return not free_vars(term)


def all_names(term: Term) -> frozenset:
    """Every variable name occurring in the term, free or bound."""
    match term:
        case Var(name):
            return frozenset((name,))
        case Op(_, args):
            out = frozenset()
            for a in args:
                out |= all_names(a)
            return out
        case Rec(_, spec):
            out = spec.domain
            for _, body in spec.items():
                out |= all_names(body)
            return out
    raise TypeError(f"not a term: {term!r}")


def _stem(name: str) -> str:
    return name.rstrip("0123456789") or name


def fresh_name(base: str, used: frozenset | set) -> str:
    """Deterministic fresh name: the stem of `base` plus the smallest unused index."""
    stem = _stem(base)
    k = 1
    while f"{stem}{k}" in used:
        k += 1
    return f"{stem}{k}"


def substitute(term: Term, sub: Subst) -> Term:
    """Capture-avoiding substitution of free variables.

    A rec binder is renamed (deterministically, see `fresh_name`) whenever its
    name occurs anywhere in a value that is about to be placed in its scope.
    Renaming on mere mention rather than on actual capture is conservative,
    but keeps the output independent of whether value occurrences are free or
    bound.
    """
    if not sub:
        return term
    return _subst(term, dict(sub))


def _subst(term: Term, sub: dict) -> Term:
    match term:
        case Var(name):
            return sub.get(name, term)
        case Op(decl, args):
            return Op(decl, tuple(_subst(a, sub) for a in args))
        case Rec(var, spec):
            dom = spec.domain
            inner = {x: v for x, v in sub.items() if x not in dom}
            # Drop bindings that cannot apply: no free occurrence under this rec.
            fv = frozenset()
            for _, body in spec.items():
                fv |= free_vars(body)
            inner = {x: v for x, v in inner.items() if x in fv}
            if not inner:
                return term
            clash = frozenset()
            for v in inner.values():
                clash |= all_names(v)
            if dom & clash:
                used = set(dom | clash | set(inner))
                for _, body in spec.items():
                    used |= all_names(body)
                renaming = {}
                for x, _ in spec.items():
                    if x in clash:
                        nx = fresh_name(x, used)
                        used.add(nx)
                        renaming[x] = nx
                ren_sub = {x: Var(nx) for x, nx in renaming.items()}
                spec = RecSpec(
                    tuple(
                        sorted(
                            (renaming.get(x, x), _subst(body, ren_sub))
                            for x, body in spec.items()
                        )
                    )
                )
                var = renaming.get(var, var)
            return Rec(
                var,
                RecSpec(tuple(sorted((x, _subst(body, inner)) for x, body in spec.items()))),
            )
    raise TypeError(f"not a term: {term!r}")


def alpha_canonical(term: Term) -> Term:
    """Rename binders so no rec variable shadows an enclosing binder or a free name.

    User-chosen names are kept whenever they do not conflict, so canonical
    forms stay readable.  Idempotent.
    """
    return _canon(term, free_vars(term), {})


def _canon(term: Term, taken: frozenset, renaming: dict) -> Term:
    match term:
        case Var(name):
            return Var(renaming.get(name, name))
        case Op(decl, args):
            return Op(decl, tuple(_canon(a, taken, renaming) for a in args))
        case Rec(var, spec):
            used = set(taken) | set(renaming.values())
            new_names = {}
            for x, _ in spec.items():
                if x in used:
                    nx = fresh_name(x, frozenset(used))
                else:
                    nx = x
                used.add(nx)
                new_names[x] = nx
            inner = dict(renaming)
            inner.update(new_names)
            new_taken = frozenset(used)
            return Rec(
                new_names[var],
                RecSpec(
                    tuple(
                        sorted(
                            (new_names[x], _canon(body, new_taken, inner))
                            for x, body in spec.items()
                        )
                    )
                ),
            )
    raise TypeError(f"not a term: {term!r}")


def unfold(call: Rec) -> Term:
    """One unfolding of a recursive call: the body with every bound variable
    replaced by the corresponding recursive call."""
    sub = {x: Rec(x, call.spec) for x in call.spec.domain}
    return substitute(call.spec.body(call.var), sub)


# --- rendering ---------------------------------------------------------------
#
# Precedence tiers, loosest first: choice < parallel < restriction/relabelling
# < prefix/signalling < atoms.

_CHOICE, _PAR, _POSTFIX, _TIGHT = 0, 1, 2, 3


def _op_kind(symbol: str) -> str:
    if symbol == "0":
        return "nil"
    if symbol.endswith(".") and len(symbol) > 1:
        return "prefix"
    if symbol in ("+", "|"):
        return "infix"
    if symbol.startswith("\\") or symbol.startswith("["):
        return "postfix"
    if symbol.startswith("^"):
        return "signal"
    return "const"


def op_family(symbol: str) -> str:
    """Operator family: instances of one parametric family share it."""
    if symbol == "0":
        return "0"
    if symbol.endswith(".") and len(symbol) > 1:
        return "prefix"
    if symbol in ("+", "|"):
        return symbol
    if symbol.startswith("\\"):
        return "restrict"
    if symbol.startswith("["):
        return "relabel"
    if symbol.startswith("^"):
        return "signal"
    return "const:" + symbol


def render(term: Term, prec: int = 0) -> str:
    match term:
        case Var(name):
            return name
        case Rec(var, spec):
            eqs = ", ".join(f"{x} = {render(t)}" for x, t in spec.items())
            return f"rec {var} {{{eqs}}}"
        case Op(decl, args):
            out, mine = _render_op(decl, args)
            if mine < prec:
                return f"({out})"
            return out
    raise TypeError(f"not a term: {term!r}")


def _render_op(decl: OperatorDecl, args: tuple) -> tuple:
    kind = _op_kind(decl.symbol)
    if kind == "nil":
        return "0", _TIGHT
    if kind == "prefix":
        return f"{decl.symbol}{render(args[0], _TIGHT)}", _TIGHT
    if kind == "signal":
        return f"{render(args[0], _TIGHT)} {decl.symbol}", _TIGHT
    if kind == "postfix":
        return f"{render(args[0], _POSTFIX)} {decl.symbol}", _POSTFIX
    if kind == "infix":
        if decl.symbol == "|":
            return f"{render(args[0], _PAR)} | {render(args[1], _PAR + 1)}", _PAR
        return f"{render(args[0], _CHOICE)} + {render(args[1], _CHOICE + 1)}", _CHOICE
    inner = ", ".join(render(a) for a in args)
    return (f"{decl.symbol}({inner})" if args else decl.symbol), _TIGHT


def term_key(term: Term) -> str:
    """Injective rendering used as a deterministic sort key; cached per node."""
    key = getattr(term, "_key", None)
    if key is not None:
        return key
    match term:
        case Var(name):
            key = f"v:{name}"
        case Op(decl, args):
            key = f"o:{decl.symbol}({','.join(term_key(a) for a in args)})"
        case Rec(var, spec):
            eqs = ";".join(f"{x}={term_key(t)}" for x, t in spec.items())
            key = f"r:{var}{{{eqs}}}"
        case _:
            raise TypeError(f"not a term: {term!r}")
    object.__setattr__(term, "_key", key)
    return key
