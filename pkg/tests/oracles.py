"""Independent reference implementations used to cross-check the engines.

These deliberately take different routes from the package code: the successor
oracle saturates bottom-up and validates conclusions generate-and-test style,
and the ep-bisimilarity oracle plays the coinductive game recursively with
path assumptions instead of refining a global triple universe.
"""

from __future__ import annotations

import random
from itertools import chain, combinations, product

from epcalc.derive import TCons, TRec, enabled, make_transition, resolve
from epcalc.successors import VCons, VFresh, VLhs, VPrem, VProc
from epcalc.terms import Op, Rec


# -- bottom-up successor saturation -------------------------------------------


def _derivation_closure(tss, states, depth=64) -> list:
    """States plus every term a goal-directed derivation can recurse into."""
    seen = []
    seen_set = set()
    queue = list(states)
    while queue:
        s = queue.pop(0)
        if s in seen_set:
            continue
        seen_set.add(s)
        seen.append(s)
        match s:
            case Op(_, args):
                queue.extend(args)
            case Rec(_, _):
                from epcalc.terms import unfold

                queue.append(unfold(s))
    return seen


def saturate_successors(tsss, states, depth=64) -> set:
    """All (t, u, v) triples over the derivation closure, by fixpoint iteration."""
    tss = tsss.tss
    closure = _derivation_closure(tss, states, depth)
    pairs = []
    for s in closure:
        ts = enabled(tss, s, depth)
        for t in ts:
            for u in ts:
                pairs.append((t, u))
    triples: set = set()

    def known(t, u):
        return [v for (a, b, v) in triples if a == t and b == u]

    changed = True
    while changed:
        changed = False
        for (t, u) in pairs:
            for v in _conclusions(tsss, t, u, triples):
                if (t, u, v) not in triples:
                    triples.add((t, u, v))
                    changed = True
    return triples


def _conclusions(tsss, t, u, triples):
    tss = tsss.tss
    out = []
    if isinstance(t.expr, TRec) and isinstance(u.expr, TRec):
        t0 = make_transition(tss, t.expr.sub)
        u0 = make_transition(tss, u.expr.sub)
        inner = [v for (a, b, v) in triples if a == t0 and b == u0]
        if u.expr.kind == "act":
            out.extend(inner)
        elif inner:
            out.append(t)
        return out
    if not (isinstance(t.expr, TCons) and isinstance(u.expr, TCons)):
        return out
    rg = tss.group_of_rule_name(t.expr.rule)
    sg = tss.group_of_rule_name(u.expr.rule)
    for rule in tsss.candidates(rg, sg):
        if rule.broken():
            continue
        if rule.on_r_label is not None and t.label not in rule.on_r_label:
            continue
        if rule.on_s_label is not None and u.label not in rule.on_s_label:
            continue
        if not _label_constraints_hold(tss, rule.on_xa, t.expr.args) or not (
            _label_constraints_hold(tss, rule.on_ya, u.expr.args)
        ):
            continue
        prem_choices = [{}]
        ok = True
        for pos in rule.premises:
            t_i = make_transition(tss, t.expr.args[pos - 1])
            u_i = make_transition(tss, u.expr.args[pos - 1])
            found = [v for (a, b, v) in triples if a == t_i and b == u_i]
            allowed = rule.za_constraint(pos)
            found = [v for v in found if allowed is None or v.label in allowed]
            if not found:
                ok = False
                break
            nxt = []
            for c in prem_choices:
                for v in found:
                    d = dict(c)
                    d[pos] = v
                    nxt.append(d)
            prem_choices = nxt
        if not ok:
            continue
        # generate-and-test: every transition of the target state that fits
        for premres in prem_choices:
            for cand in enabled(tss, u.target):
                if _fits(tss, rule, cand, rule.target, t, u, premres):
                    out.append(cand)
    return out


def _label_constraints_hold(tss, constraints, args):
    from epcalc.derive import is_trans_expr

    for pos, labels in constraints:
        sub = args[pos - 1]
        if not is_trans_expr(sub):
            return False
        if resolve(tss, sub)[1] not in labels:
            return False
    return True


def _fits(tss, rule, cand, ve, t, u, premres) -> bool:
    if isinstance(ve, VPrem):
        return cand == premres[ve.pos]
    if isinstance(ve, VLhs):
        return cand.expr == t.expr.args[ve.pos - 1]
    if isinstance(ve, VFresh):
        allowed = rule.za_constraint(ve.pos)
        if allowed is not None and cand.label not in allowed:
            return False
        expect = (
            t.source.args[ve.pos - 1]
            if ve.over == "x"
            else resolve(tss, u.expr.args[ve.pos - 1])[2]
        )
        return cand.source == expect
    if isinstance(ve, VCons):
        if not isinstance(cand.expr, TCons):
            return False
        if tss.group_of_rule_name(cand.expr.rule) != ve.group:
            return False
        for i, (a, sub) in enumerate(zip(ve.args, cand.expr.args), start=1):
            if isinstance(a, VProc):
                expect = (
                    t.source.args[a.pos - 1]
                    if a.over == "x"
                    else resolve(tss, u.expr.args[a.pos - 1])[2]
                )
                if sub != expect:
                    return False
            else:
                from epcalc.derive import is_trans_expr

                if not is_trans_expr(sub):
                    return False
                if not _fits(tss, rule, make_transition(tss, sub), a, t, u, premres):
                    return False
        return True
    return False


# -- recursive game solver for ep-bisimilarity ----------------------------------


def _powerset(xs):
    return chain.from_iterable(combinations(xs, k) for k in range(len(xs) + 1))


def game_candidates(world, p, q):
    """All valid relations, by filtering the full powerset of matched cells."""
    en_p, en_q = world.en(p), world.en(q)
    cells = [
        (t, u) for t in en_p for u in en_q if world.label(t) == world.label(u)
    ]
    out = []
    for subset in _powerset(cells):
        rel = frozenset(subset)
        if {t for t, _ in rel} != set(en_p):
            continue
        if {u for _, u in rel} != set(en_q):
            continue
        out.append(rel)
    return out


def ep_game(world, p, q) -> bool:
    def compat(rel, v, w, rel2):
        for (t, u) in rel:
            for t2 in world.succ(t, v):
                if not any((t2, u2) in rel2 for u2 in world.succ(u, w)):
                    return False
            for u2 in world.succ(u, w):
                if not any((t2, u2) in rel2 for t2 in world.succ(t, v)):
                    return False
        return True

    # failures may be cached unconditionally: assumptions only ever enlarge
    # the set of admitted triples, so a loss under assumptions is a real loss
    failed: set = set()
    cands: dict = {}

    def candidates(pair):
        if pair not in cands:
            cands[pair] = game_candidates(world, *pair)
        return cands[pair]

    def win(pair, rel, stack) -> bool:
        if (pair, rel) in failed:
            return False
        if (pair, rel) in stack:
            return True
        stack = stack | {(pair, rel)}
        for (v, w) in rel:
            child = (world.target(v), world.target(w))
            if not any(
                compat(rel, v, w, rel2) and win(child, rel2, stack)
                for rel2 in candidates(child)
            ):
                failed.add((pair, rel))
                return False
        return True

    return any(win((p, q), rel, frozenset()) for rel in candidates((p, q)))


# -- seeded generators ------------------------------------------------------------


def random_ltss(rng: random.Random, max_states=3, max_out=3, labels=("x", "y")):
    from epcalc.equivalence import RawLTSS

    n = rng.randint(1, max_states)
    states = [f"s{i}" for i in range(n)]
    transitions = {}
    tid = 0
    for s in states:
        for _ in range(rng.randint(0, max_out)):
            transitions[f"t{tid}"] = (
                s,
                rng.choice(labels),
                rng.choice(states),
            )
            tid += 1
    valid = [
        (t, u, v)
        for t, (src_t, _, _) in transitions.items()
        for u, (src_u, _, tgt_u) in transitions.items()
        if src_t == src_u
        for v, (src_v, _, _) in transitions.items()
        if src_v == tgt_u
    ]
    succ = [triple for triple in valid if rng.random() < 0.3]
    return RawLTSS(states, transitions, succ, list(labels))


def random_term(rng: random.Random, tss, depth: int, signals=False):
    """A closed term of bounded depth; recursion is always action-guarded."""
    actions = sorted(tss.actions - {"tau"})
    if depth <= 0:
        return "0"
    roll = rng.random()
    sub = lambda: random_term(rng, tss, depth - 1, signals)
    if roll < 0.28:
        return f"{rng.choice(actions)}.{sub()}"
    if roll < 0.48:
        return f"({sub()} + {sub()})"
    if roll < 0.66:
        return f"({sub()} | {sub()})"
    if roll < 0.74:
        ch = sorted(tss.channels)
        if ch:
            return f"({sub()}) \\ {{{rng.choice(ch)}}}"
        return sub()
    if roll < 0.80 and signals and tss.signals:
        return f"({sub()}) ^ {rng.choice(sorted(tss.signals))}"
    if roll < 0.92:
        a1, a2 = rng.choice(actions), rng.choice(actions)
        body = f"{a1}.X" if rng.random() < 0.6 else f"{a1}.X + {a2}.{sub()}"
        return f"rec X {{ X = {body} }}"
    return "0"
