"""Language-definition parsing, expansion, and user-defined languages."""

import pytest

from epcalc.errors import LangError
from epcalc.langfile import load_language
from epcalc.parser import parse_term
from epcalc.derive import enabled
from epcalc.rules import check_de_simone, co, relabel_apply
from epcalc.successors import check_de_simone_succ


def test_complement():
    assert co("a") == "'a"
    assert co("'a") == "a"
    assert co("tau") is None
    assert co("b!") is None


def test_relabel_apply():
    f = {"a": "b", "e": "e2"}
    assert relabel_apply(f, "a") == "b"
    assert relabel_apply(f, "'a") == "'b"
    assert relabel_apply(f, "tau") == "tau"
    assert relabel_apply(f, "e!") == "e2!"
    assert relabel_apply(f, "c") == "c"


def test_alphabet_overlap_rejected():
    with pytest.raises(LangError):
        load_language("language x\nchannels: a\nbroadcasts: a\n")


def test_tau_not_declarable():
    with pytest.raises(LangError):
        load_language("language x\nchannels: tau\n")


def test_alphabet_override():
    src = "language x\nchannels: a\ntransition rules:\n  act(?a) [?a in Act] :: => ?a.x -?a-> x\n"
    tsss = load_language(src, channels=("p", "q"))
    assert tsss.tss.channels == {"p", "q"}
    assert "p." in tsss.tss.signature and "a." not in tsss.tss.signature


def test_user_language_with_constants():
    src = """
language counterish
channels: tick
operators: zero/0 box/1
transition rules:
  tick(?l) [?l in {tick}] :: => box(x) -?l-> x
"""
    tsss = load_language(src)
    assert check_de_simone(tsss.tss) == []
    term = parse_term("box(zero)", tsss.tss)
    (t,) = enabled(tsss.tss, term)
    assert t.label == "tick"
    assert str(t.target) == "zero"


def test_metarule_shape_mismatch():
    src = """
language broken
broadcasts: e
metarule persist :: chi ~zeta> other [label(zeta) in Ind]
"""
    with pytest.raises(LangError):
        load_language(src)


def test_metarule_must_range_over_indicators():
    src = """
language broken
channels: a
operators: k/0
transition rules:
  kA :: => k() -a-> k()
metarule persist :: chi ~zeta> chi [label(zeta) in Act]
"""
    with pytest.raises(LangError):
        load_language(src)


def test_unknown_label_in_rule():
    src = """
language broken
channels: a
transition rules:
  bad :: => nope.x -z-> x
"""
    with pytest.raises(LangError):
        load_language(src)


def test_broadcast_sync_table():
    # the composition table: ! with ! is undefined, every other cell composes
    src = """
language bc
broadcasts: e
operators: 0/0
transition rules:
  act(?a) [?a in Act] :: => ?a.x -?a-> x
  disNil(?b) [?b in B] :: => 0 -?b:-> 0
  disAlpha(?b,?a) [?b in B, ?a in Act, ?a != ?b?] :: => ?a.x -?b:-> ?a.x
  parC [(?l1,?l2,?l3) in BroadcastSync] :: x -?l1-> x', y -?l2-> y' => x | y -?l3-> x' | y'
"""
    tsss = load_language(src)
    assert check_de_simone(tsss.tss) == []
    parc = [r for r in tsss.tss.rules if r.name == "parC"]
    triggers = {r.trigger() for r in parc}
    assert ("e!", "e!") not in {t for t in triggers}
    assert ("e!", "e?") in triggers and ("e?", "e!") in triggers
    assert len(parc) == 8
    # send | discard composes to a send
    term = parse_term("e!.0 | 0", tsss.tss)
    labels = sorted(t.label for t in enabled(tsss.tss, term))
    assert labels == ["e!", "e:"]


def test_successor_rules_survive_round_trip(ccs):
    names = {r.name for r in ccs.srules}
    assert {"sumLL", "parLR", "parCC", "restrS"} <= names
    assert check_de_simone_succ(ccs) == []


def test_user_language_end_to_end(tmp_path):
    # a fresh interleaving operator with frame successor rules: the parallel
    # form keeps concurrency triples, the sequenced form does not, so the two
    # split under ep-bisimilarity while staying strongly bisimilar
    src = """
language mixer
channels: tick tock
operators: mix/2

transition rules:
  act(?a) [?a in Act] :: => ?a.x -?a-> x
  plusL   [?a in Act] :: x -?a-> x' => x + y -?a-> x'
  plusR   [?a in Act] :: y -?a-> y' => x + y -?a-> y'
  mixL    [?a in Act] :: x -?a-> x' => mix(x, y) -?a-> mix(x', y)
  mixR    [?a in Act] :: y -?a-> y' => mix(x, y) -?a-> mix(x, y')

successor rules:
  mixLR :: => (t mixL Q) ~(P mixR w)> (t mixL tgt(w))
  mixRL :: => (P mixR u) ~(v mixL Q)> (tgt(v) mixR u)
  mixLL :: t ~v> t' => (t mixL Q) ~(v mixL Q)> (t' mixL Q)
  mixRR :: u ~w> u' => (P mixR u) ~(P mixR w)> (P mixR u')
"""
    path = tmp_path / "mixer.lang"
    path.write_text(src)

    from epcalc.equivalence import ep_bisim, strong_bisim_terms
    from epcalc.langs import resolve_language

    tsss = resolve_language(str(path))
    assert check_de_simone(tsss.tss) == []
    assert check_de_simone_succ(tsss) == []
    assert tsss.tss.signature["mix"].arity == 2
    p = parse_term("mix(tick.0, tock.0)", tsss.tss)
    q = parse_term("tick.tock.0 + tock.tick.0", tsss.tss)
    assert strong_bisim_terms(tsss, p, q).equivalent
    assert not ep_bisim(tsss, p, q).equivalent
    assert ep_bisim(tsss, p, p).equivalent


def test_comments_and_blank_lines():
    src = """
# leading comment
language c1

channels: a  # trailing comment

transition rules:
  # a rule
  act(?a) [?a in Act] :: => ?a.x -?a-> x
"""
    tsss = load_language(src)
    assert "a." in tsss.tss.signature
