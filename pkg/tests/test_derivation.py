"""Transition derivation: enabled sets, canonical names, substitutions."""

import random

import pytest

from epcalc.derive import (
    TLeaf,
    TCons,
    TransSubst,
    apply_tsubst,
    enabled,
    expr_key,
    explore,
    make_transition,
    matches,
    name_of,
    proof_json,
    proof_tree,
    resolve,
)
from epcalc.errors import DepthLimitError, HorizonLimitError, MatchError, NotOpenTransition
from epcalc.parser import parse_term
from epcalc.terms import Var, render


def test_three_transitions_two_sharing_a_literal(ccs):
    pq = parse_term("rec X { X = a.X + c.X } | rec Y { Y = a.Y }", ccs.tss)
    ts = enabled(ccs.tss, pq)
    assert len(ts) == 3
    names = {t.key() for t in ts}
    assert len(names) == 3
    literals = [(t.source, t.label, t.target) for t in ts]
    assert len(set(literals)) == 2  # the two a-steps share their literal
    assert sorted(t.label for t in ts) == ["a", "a", "c"]


def test_nil_has_no_ccs_transitions(ccs):
    assert enabled(ccs.tss, parse_term("0", ccs.tss)) == ()


def test_nil_discards_in_abcde(abcde):
    ts = enabled(abcde.tss, parse_term("0", abcde.tss))
    assert [(t.label, str(t.target)) for t in ts] == [("b:", "0")]
    assert ts[0].source == ts[0].target


def test_choice_axioms(ccs):
    ts = enabled(ccs.tss, parse_term("a.0 + 'a.0", ccs.tss))
    assert sorted(t.label for t in ts) == ["'a", "a"]
    assert {t.expr.rule for t in ts} == {"plusL", "plusR"}


def test_handshake(ccs):
    ts = enabled(ccs.tss, parse_term("a.0 | 'a.0", ccs.tss))
    assert sorted(t.label for t in ts) == ["'a", "a", "tau"]
    tau = [t for t in ts if t.label == "tau"][0]
    assert tau.expr.rule == "parC"


def test_determinism(ccs):
    term = parse_term("(a.0 | b.0) + c.0", ccs.tss)
    first = enabled(ccs.tss, term)
    again = enabled(ccs.tss, term)
    assert first == again
    assert [t.key() for t in first] == sorted(t.key() for t in first)


def test_unguarded_recursion_reports(ccs):
    with pytest.raises(DepthLimitError):
        enabled(ccs.tss, parse_term("rec X { X = X }", ccs.tss))


def test_unguarded_parallel_recursion_reports(ccs):
    with pytest.raises(DepthLimitError):
        enabled(ccs.tss, parse_term("rec X { X = X | a.0 }", ccs.tss))


def test_horizon(ccs):
    # counter-ish process with unbounded state space
    term = parse_term("rec X { X = a.(X | b.0) }", ccs.tss)
    with pytest.raises(HorizonLimitError):
        explore(ccs.tss, term, horizon=10)


def test_indicator_transitions_are_self_loops(abcde):
    for text in ["0", "c.0 + d.0", "(c.0 ^ s) | 0", "rec X { X = c.X }"]:
        term = parse_term(text, abcde.tss)
        for t in enabled(abcde.tss, term):
            if abcde.tss.is_indicator(t.label):
                assert t.target == t.source, t


def test_signal_emission_is_an_indicator_self_loop(abcde):
    ts = enabled(abcde.tss, parse_term("0 ^ s", abcde.tss))
    em = [t for t in ts if t.label == "'s"]
    assert len(em) == 1 and em[0].target == em[0].source
    assert em[0].expr.rule == "sigS(s)"


def test_signal_read_synchronisation(abcde):
    # the emission synchronises with a read via the handshake rule and the
    # emitting side keeps its state; the emission itself frames through parL
    ts = enabled(abcde.tss, parse_term("(c.0) ^ s | s.0", abcde.tss))
    by_label = {t.label: t for t in ts}
    assert set(by_label) == {"b:", "tau", "c", "'s", "s"}
    assert str(by_label["tau"].target) == "c.0 ^s | 0"
    assert by_label["'s"].target == by_label["'s"].source


def test_broadcast_needs_composition(abcde):
    # a lone receive composes with the other side's discard, never frames
    ts = enabled(abcde.tss, parse_term("b?.0 | 0", abcde.tss))
    assert [(t.label, t.expr.rule) for t in ts] == [("b?", "parC")]


def _expr_from_tree(tss, node):
    # invert the naming: rebuild the canonical expression from the tree
    from epcalc.derive import TCons, TLeaf, TRec
    from epcalc.terms import Op, Rec

    if node.is_leaf_var:
        return TLeaf(node.rule, node.source, node.label, node.target)
    if node.rule in ("recAct", "recIn"):
        assert isinstance(node.source, Rec)
        kind = "act" if node.rule == "recAct" else "ind"
        return TRec(kind, node.source.var, node.source.spec, _expr_from_tree(tss, node.children[0]))
    rules = tss.rules_named(node.rule)
    trigger_set = sorted(rules[0].trigger_set())
    assert isinstance(node.source, Op)
    args = list(node.source.args)
    for pos, child in zip(trigger_set, node.children):
        args[pos - 1] = _expr_from_tree(tss, child)
    return TCons(node.rule, tuple(args))


def test_proof_round_trip(ccs, abcde):
    # naming is a bijection: expression -> tree -> expression is the identity
    corpus = [
        (ccs, "rec Z { Z = a.Z } | b.0"),
        (ccs, "rec X { X = a.X + c.X } | rec Y { Y = a.Y }"),
        (ccs, "(a.0 | 'a.0) \\ {a}"),
        (abcde, "b!.0 | b?.0"),
        (abcde, "(c.0) ^ s | s.0"),
    ]
    checked = 0
    for tsss, text in corpus:
        graph = explore(tsss.tss, parse_term(text, tsss.tss))
        for state in graph.states:
            for t in graph.transitions[state]:
                src, label, tgt = resolve(tsss.tss, name_of(t))
                assert (src, label, tgt) == (t.source, t.label, t.target)
                tree = proof_tree(tsss.tss, t.expr)
                assert _expr_from_tree(tsss.tss, tree) == t.expr
                checked += 1
    assert checked >= 20


def test_proof_json_shape(ccs):
    t = enabled(ccs.tss, parse_term("a.0 | b.0", ccs.tss))[0]
    data = proof_json(proof_tree(ccs.tss, t.expr))
    assert set(data) == {"literal", "rule", "children"}
    assert data["rule"] in ("parL", "parR")
    assert data["children"][0]["children"] == []


def test_paper_naming_example(ccs):
    # u = rec Z {Z = a.Z} parR act(b) 0
    q = parse_term("rec Z { Z = a.Z } | b.0", ccs.tss)
    u = [t for t in enabled(ccs.tss, q) if t.label == "b"][0]
    assert u.expr.rule == "parR"
    assert isinstance(u.expr.args[1], TCons) and u.expr.args[1].rule == "act(b)"
    assert render(u.expr.args[0]) == "rec Z {Z = a.Z}"


# -- open transitions and substitution ----------------------------------------


def _leaf(ccs, var, src_text, label, tgt_text):
    return TLeaf(
        var,
        parse_term(src_text, ccs.tss),
        label,
        parse_term(tgt_text, ccs.tss),
    )


def test_apply_empty_substitution_is_identity(ccs):
    leaf = _leaf(ccs, "tx", "x", "a", "x1")
    open_t = TCons("plusL", (leaf, Var("y")))
    assert apply_tsubst(ccs.tss, open_t, TransSubst.of()) == open_t


def test_matches_all_process_expressions(ccs):
    sigma = TransSubst.of(procs={"x": parse_term("0", ccs.tss)})
    assert matches(ccs.tss, sigma, parse_term("x | 0", ccs.tss))


def test_matching_and_application(ccs):
    # open transition (tx :: x -a-> x1) plusL y, closed by x:=0? no: x:=a.0's arg
    leaf = _leaf(ccs, "tx", "x", "a", "x1")
    open_t = TCons("plusL", (leaf, Var("y")))
    inner = enabled(ccs.tss, parse_term("a.0", ccs.tss))[0]
    sigma = TransSubst.of(
        procs={"x": parse_term("a.0", ccs.tss), "x1": parse_term("0", ccs.tss),
               "y": parse_term("b.0", ccs.tss)},
        trans={"tx": inner.expr},
    )
    assert matches(ccs.tss, sigma, open_t)
    out = apply_tsubst(ccs.tss, open_t, sigma)
    assert out.source == parse_term("a.0 + b.0", ccs.tss)
    assert out.label == "a"
    assert out.target == parse_term("0", ccs.tss)


def test_mismatched_label_rejected(ccs):
    leaf = _leaf(ccs, "tx", "x", "a", "x1")
    open_t = TCons("plusL", (leaf, Var("y")))
    wrong = enabled(ccs.tss, parse_term("b.0", ccs.tss))[0]
    sigma = TransSubst.of(
        procs={"x": parse_term("b.0", ccs.tss), "x1": parse_term("0", ccs.tss),
               "y": parse_term("0", ccs.tss)},
        trans={"tx": wrong.expr},
    )
    assert not matches(ccs.tss, sigma, open_t)
    with pytest.raises(MatchError):
        apply_tsubst(ccs.tss, open_t, sigma)


def test_substitution_reaches_rec_specs(ccs):
    # process substitution applies inside recursion wrappers of open proofs
    from epcalc.derive import TRec
    from epcalc.terms import RecSpec, render

    spec_src = parse_term("a.x", ccs.tss)
    spec = RecSpec.of({"W": spec_src})
    leaf = _leaf(ccs, "tx", "a.x", "a", "x")
    open_t = TRec("act", "W", spec, leaf)
    sigma = TransSubst.of(procs={"x": parse_term("b.0", ccs.tss)})
    out = apply_tsubst(ccs.tss, open_t, sigma)
    assert render(out.spec.body("W")) == "a.b.0"


def test_empty_restriction_set(ccs):
    ts = enabled(ccs.tss, parse_term("a.0 \\ {}", ccs.tss))
    assert [t.label for t in ts] == ["a"]


def test_nested_specifications(ccs):
    term = parse_term("rec X { X = a.rec Y { Y = b.X + a.Y } }", ccs.tss)
    graph = explore(ccs.tss, term)
    labels = sorted({t.label for ts in graph.transitions.values() for t in ts})
    assert labels == ["a", "b"]
    assert len(graph.states) == 2


def test_variable_reuse_is_not_an_open_transition(ccs):
    # binding ty to a leaf that reuses tx yields two pledges for tx
    tx_leaf = _leaf(ccs, "tx", "x", "a", "x1")
    ty_leaf = _leaf(ccs, "ty", "y", "'a", "y1")
    open_t = TCons("parC", (tx_leaf, ty_leaf))
    sigma = TransSubst.of(trans={"ty": _leaf(ccs, "tx", "y", "'a", "y1")})
    with pytest.raises(NotOpenTransition):
        apply_tsubst(ccs.tss, open_t, sigma)


def _carve(rng, expr, sigma, counter):
    """Replace random subproofs by leaf variables, recording the bindings."""
    from epcalc.derive import TRec, is_trans_expr

    if rng.random() < 0.35:
        var = f"tv{counter[0]}"
        counter[0] += 1
        return TLeaf(var, *_literal_of(expr)), {var: expr}
    if isinstance(expr, TRec):
        sub, binds = _carve(rng, expr.sub, sigma, counter)
        return TRec(expr.kind, expr.var, expr.spec, sub), binds
    if isinstance(expr, TCons):
        args = []
        binds = {}
        for a in expr.args:
            if is_trans_expr(a):
                na, b = _carve(rng, a, sigma, counter)
                args.append(na)
                binds.update(b)
            else:
                args.append(a)
        return TCons(expr.rule, tuple(args)), binds
    return expr, {}


_TSS_FOR_LITERAL = {}


def _literal_of(expr):
    return _TSS_FOR_LITERAL["resolve"](expr)


def test_observation_on_carved_proofs(ccs, abcde):
    # replacing subproofs by matching leaf variables and substituting back
    # reproduces the transition together with its literal
    rng = random.Random(7)
    checked = 0
    for tsss, texts in (
        (
            ccs,
            [
                "a.0 | b.0",
                "rec Z { Z = a.Z } | b.0",
                "(a.0 | 'a.0) \\ {a}",
                "a.b.0 + c.0",
                "(a.0 + b.0) [a->c]",
            ],
        ),
        (abcde, ["b!.0 | b?.0", "(c.0 ^ s) | s.0", "b?.0 + c.0"]),
    ):
        _TSS_FOR_LITERAL["resolve"] = lambda e, tss=tsss.tss: resolve(tss, e)
        for text in texts:
            term = parse_term(text, tsss.tss)
            for t in enabled(tsss.tss, term):
                for _ in range(4):
                    open_expr, binds = _carve(rng, t.expr, None, [0])
                    sigma = TransSubst.of(trans=binds)
                    assert matches(tsss.tss, sigma, open_expr)
                    out = apply_tsubst(tsss.tss, open_expr, sigma)
                    if binds or not isinstance(open_expr, TLeaf):
                        assert out.source == t.source
                        assert out.label == t.label
                        assert out.target == t.target
                        checked += 1
    assert checked >= 50
