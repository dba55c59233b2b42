import pytest

from epcalc.errors import ParseError
from epcalc.parser import parse_term
from epcalc.terms import Op, Rec, Var, render


def p(ccs, text):
    return parse_term(text, ccs.tss)


def test_nil_and_prefix(ccs):
    t = p(ccs, "a.0")
    assert t.decl.symbol == "a." and t.args[0].decl.symbol == "0"


def test_coname_and_tau(ccs):
    t = p(ccs, "'a.tau.0")
    assert t.decl.symbol == "'a."
    assert t.args[0].decl.symbol == "tau."


def test_precedence_plus_binds_loosest(ccs):
    t = p(ccs, "a.0 + b.0 | c.0")
    assert t.decl.symbol == "+"
    assert t.args[1].decl.symbol == "|"


def test_prefix_tighter_than_restriction(ccs):
    t = p(ccs, "a.0 \\ {b}")
    assert t.decl.symbol == "\\{b}"
    assert t.args[0].decl.symbol == "a."


def test_restriction_tighter_than_par(ccs):
    t = p(ccs, "0 | 0 \\ {a}")
    assert t.decl.symbol == "|"
    assert t.args[1].decl.symbol == "\\{a}"


def test_relabelling(ccs):
    t = p(ccs, "a.0 [a->b, c->a]")
    assert t.decl.symbol == "[a->b,c->a]"


def test_relabelling_identity_pairs_dropped(ccs):
    t = p(ccs, "0 [a->a]")
    assert t.decl.symbol == "[]"


def test_rec(ccs):
    t = p(ccs, "rec X { X = a.X + b.Y, Y = a.Y }")
    assert isinstance(t, Rec)
    assert t.spec.domain == {"X", "Y"}


def test_variables_stay_variables(ccs):
    t = p(ccs, "x | 0")
    assert t.args[0] == Var("x")


def test_parens(ccs):
    t = p(ccs, "(a.0 + b.0) | 0")
    assert t.decl.symbol == "|"


def test_signal_prefixing_requires_abcde(ccs, abcde):
    with pytest.raises(ParseError):
        p(ccs, "0 ^ s")
    t = parse_term("(c.0) ^ s", abcde.tss)
    assert t.decl.symbol == "^s"


def test_broadcast_prefixes(abcde):
    t = parse_term("b!.0 + b?.0", abcde.tss)
    assert t.args[0].decl.symbol == "b!."
    assert t.args[1].decl.symbol == "b?."


def test_discard_cannot_prefix(abcde):
    with pytest.raises(ParseError):
        parse_term("b:.0", abcde.tss)


def test_unknown_prefix_label(ccs):
    with pytest.raises(ParseError):
        p(ccs, "zz.0")


def test_restriction_requires_channels(ccs):
    with pytest.raises(ParseError):
        p(ccs, "0 \\ {nochan}")


def test_trailing_junk(ccs):
    with pytest.raises(ParseError):
        p(ccs, "0 0")


@pytest.mark.parametrize(
    "text",
    [
        "0",
        "a.0",
        "'a.0",
        "tau.0",
        "a.0 + b.0",
        "a.0 | b.0 + c.0",
        "(a.0 + b.0) | c.0",
        "a.0 \\ {a,b}",
        "a.0 [a->b]",
        "rec X {X = a.X}",
        "rec X {X = a.X + b.Y, Y = a.Y}",
        "rec Z {Z = a.Z} | b.0",
        "(a.b.0 \\ {a}) [b->c]",
    ],
)
def test_render_parse_round_trip(ccs, text):
    t = p(ccs, text)
    assert p(ccs, render(t)) == t


@pytest.mark.parametrize(
    "text",
    ["b!.0 | b?.0", "(c.0 ^ s) | s.0", "rec X {X = b?.X} ^ s", "0 \\ {c}"],
)
def test_render_parse_round_trip_abcde(abcde, text):
    t = parse_term(text, abcde.tss)
    assert parse_term(render(t), abcde.tss) == t
