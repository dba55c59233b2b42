"""Deciding strong and enabling-preserving bisimilarity on finite fragments.

Both deciders run over a small world interface (states, enabled transitions,
successor lookup), so the same fixed point serves terms under a rule system
and raw transition-system data.

The ep decision is a greatest fixed point over triples (p, q, R): seed every
reachable state pair with all label-consistent total and surjective relations
between the enabled sets, then delete triples whose matched moves cannot be
answered by a surviving triple at the target pair.  The candidate universe is
exponential in the enabled-set sizes, so both an enabled-set cap and a
candidate-count cap guard the enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from .derive import enabled, expr_key, render_expr
from .errors import (
    EnabledCapError,
    EpcalcError,
    HorizonLimitError,
    LtssFormatError,
    RelationCapError,
)
from .successors import TSSS, successors
from .terms import Term, render, term_key

DEFAULT_ENCAP = 8
DEFAULT_MAX_RELATIONS = 20_000


@dataclass
class Verdict:
    equivalent: bool
    witness: dict | None = None
    refutation: dict | None = None


# -- worlds -------------------------------------------------------------------


class TermWorld:
    """States are closed terms of a language with successors."""

    mode = "terms"

    def __init__(self, tsss: TSSS, depth: int = 64):
        self.tsss = tsss
        self.depth = depth

    def en(self, state):
        return enabled(self.tsss.tss, state, self.depth)

    def succ(self, t, u):
        return successors(self.tsss, t, u)

    def label(self, t):
        return t.label

    def target(self, t):
        return t.target

    def state_key(self, s) -> str:
        return term_key(s)

    def state_display(self, s) -> str:
        return render(s)

    def trans_key(self, t) -> str:
        return expr_key(t.expr)

    def trans_display(self, t) -> str:
        return render_expr(t.expr)


class RawLTSS:
    """Explicit finite LTSS: states, transitions, successor triples."""

    def __init__(self, states, transitions, successors_, actions):
        self.states = list(states)
        self.transitions = dict(transitions)  # id -> (src, label, tgt)
        self.successor_map: dict = {}
        self.actions = frozenset(actions)
        state_set = set(self.states)
        for tid, (src, label, tgt) in self.transitions.items():
            if src not in state_set or tgt not in state_set:
                raise LtssFormatError(f"transition {tid!r} mentions an unknown state")
        for (t, u, v) in successors_:
            for x in (t, u, v):
                if x not in self.transitions:
                    raise LtssFormatError(f"successor triple mentions unknown transition {x!r}")
            if self.transitions[t][0] != self.transitions[u][0]:
                raise LtssFormatError(
                    f"successor triple ({t},{u},{v}): t and u must share their source"
                )
            if self.transitions[v][0] != self.transitions[u][2]:
                raise LtssFormatError(
                    f"successor triple ({t},{u},{v}): v must start at the target of u"
                )
            self.successor_map.setdefault((t, u), []).append(v)
        self._en: dict = {}
        for tid in sorted(self.transitions):
            self._en.setdefault(self.transitions[tid][0], []).append(tid)

    def disjoint_union(self, other: "RawLTSS", left: str = "L.", right: str = "R.") -> "RawLTSS":
        """One model containing both, states and transition ids prefixed."""
        states = [left + s for s in self.states] + [right + s for s in other.states]
        transitions = {}
        succ = []
        for pre, raw in ((left, self), (right, other)):
            for tid, (src, lab, tgt) in raw.transitions.items():
                transitions[pre + tid] = (pre + src, lab, pre + tgt)
            for (t, u), vs in raw.successor_map.items():
                for v in vs:
                    succ.append((pre + t, pre + u, pre + v))
        return RawLTSS(states, transitions, succ, self.actions | other.actions)

    @staticmethod
    def from_json(data: dict) -> "RawLTSS":
        try:
            states = list(data["states"])
            transitions = {
                t["id"]: (t["src"], t["label"], t["tgt"]) for t in data["transitions"]
            }
            succ = [tuple(x) for x in data.get("successors", [])]
            actions = data.get("actions", sorted({t["label"] for t in data["transitions"]}))
        except (KeyError, TypeError) as exc:
            raise LtssFormatError(f"malformed LTSS input: {exc}") from None
        if len(transitions) != len(data["transitions"]):
            raise LtssFormatError("duplicate transition ids")
        return RawLTSS(states, transitions, succ, actions)


class RawWorld:
    mode = "lts"

    def __init__(self, raw: RawLTSS):
        self.raw = raw

    def en(self, state):
        return tuple(self.raw._en.get(state, ()))

    def succ(self, t, u):
        return tuple(sorted(self.raw.successor_map.get((t, u), ())))

    def label(self, t):
        return self.raw.transitions[t][1]

    def target(self, t):
        return self.raw.transitions[t][2]

    def state_key(self, s) -> str:
        return str(s)

    def state_display(self, s) -> str:
        return str(s)

    def trans_key(self, t) -> str:
        return str(t)

    def trans_display(self, t) -> str:
        return str(t)


# -- strong bisimilarity --------------------------------------------------------


def _reachable(world, start, horizon: int):
    states = [start]
    seen = {start}
    i = 0
    while i < len(states):
        s = states[i]
        i += 1
        for t in world.en(s):
            tgt = world.target(t)
            if tgt not in seen:
                if len(states) >= horizon:
                    raise HorizonLimitError(f"more than {horizon} reachable states")
                seen.add(tgt)
                states.append(tgt)
    return states


def strong_bisim(world, p, q, horizon: int = 10_000) -> Verdict:
    """Partition refinement on the union of the two reachable fragments."""
    states = list(dict.fromkeys(_reachable(world, p, horizon) + _reachable(world, q, horizon)))
    block = {s: 0 for s in states}
    history = [dict(block)]
    while True:
        sigs = {}
        for s in states:
            sig = frozenset((world.label(t), block[world.target(t)]) for t in world.en(s))
            sigs[s] = (block[s], sig)
        renum: dict = {}
        new_block = {}
        for s in states:
            new_block[s] = renum.setdefault(sigs[s], len(renum))
        if new_block == block:
            break
        block = new_block
        history.append(dict(block))

    if block[p] == block[q]:
        reach_p = set(_reachable(world, p, horizon))
        reach_q = set(_reachable(world, q, horizon))
        matching = sorted(
            (world.state_display(s), world.state_display(t))
            for s in reach_p
            for t in reach_q
            if block[s] == block[t]
        )
        return Verdict(True, witness={"matching": matching})
    return Verdict(False, refutation=_distinguish(world, p, q, history))


def _distinguish(world, p, q, history) -> dict:
    """A move one side cannot answer, recursing into the earliest disagreement."""
    round_no = next(i for i, blocks in enumerate(history) if blocks[p] != blocks[q])
    for side, attacker, defender in (("left", p, q), ("right", q, p)):
        for t in world.en(attacker):
            answers = [u for u in world.en(defender) if world.label(u) == world.label(t)]
            prev = history[round_no - 1] if round_no > 0 else None
            bad = [
                u for u in answers
                if prev is None or prev[world.target(t)] != prev[world.target(u)]
            ]
            if len(bad) == len(answers):
                node = {
                    "side": side,
                    "label": world.label(t),
                    "from": world.state_display(attacker),
                    "to": world.state_display(world.target(t)),
                }
                if answers:
                    node["responses"] = [
                        _distinguish(world, world.target(t), world.target(u), history)
                        for u in answers[:3]
                    ]
                return node
    return {"note": "states differ but no single distinguishing move was isolated"}


# -- ep-bisimilarity ---------------------------------------------------------------


def _candidate_relations(world, en_p, en_q, max_relations: int):
    """All label-consistent, total, surjective relations between two enabled sets."""
    labels = sorted({world.label(t) for t in en_p} | {world.label(t) for t in en_q})
    blocks = []
    count = 1
    for lab in labels:
        rows = [t for t in en_p if world.label(t) == lab]
        cols = [u for u in en_q if world.label(u) == lab]
        if bool(rows) != bool(cols):
            return None  # clause 1a/1b cannot hold
        if not rows:
            continue
        row_choices = (1 << len(cols)) - 1
        count *= row_choices ** len(rows)
        if count > max_relations:
            raise RelationCapError(
                f"candidate relations exceed {max_relations} for one state pair"
            )
        blocks.append((rows, cols))
    per_block: list = []
    for rows, cols in blocks:
        col_subsets = []
        for mask in range(1, 1 << len(cols)):
            col_subsets.append([cols[i] for i in range(len(cols)) if mask >> i & 1])
        block_rels = []
        for assignment in product(col_subsets, repeat=len(rows)):
            hit = set()
            rel = []
            for t, us in zip(rows, assignment):
                for u in us:
                    rel.append((t, u))
                    hit.add(u)
            if len(hit) == len(cols):
                block_rels.append(rel)
        per_block.append(block_rels)
    out = []
    for combo in product(*per_block) if per_block else [()]:
        rel = []
        for part in combo:
            rel.extend(part)
        out.append(frozenset(rel))
    return out


def _rel_key(world, rel) -> str:
    return ";".join(
        sorted(f"{world.trans_key(t)}~{world.trans_key(u)}" for t, u in rel)
    )


def _compat(world, rel, v, w, rel2) -> bool:
    """Clauses 2a and 2b: successors of related transitions stay related."""
    for (t, u) in rel:
        for t2 in world.succ(t, v):
            if not any((t2, u2) in rel2 for u2 in world.succ(u, w)):
                return False
        for u2 in world.succ(u, w):
            if not any((t2, u2) in rel2 for t2 in world.succ(t, v)):
                return False
    return True


def ep_bisim_world(
    world,
    p,
    q,
    horizon: int = 10_000,
    encap: int = DEFAULT_ENCAP,
    max_relations: int = DEFAULT_MAX_RELATIONS,
) -> Verdict:
    root = (p, q)
    pairs: dict = {}
    queue = [root]
    qi = 0
    order = []
    while qi < len(queue):
        pair = queue[qi]
        qi += 1
        if pair in pairs:
            continue
        if len(pairs) >= horizon:
            raise HorizonLimitError(f"more than {horizon} state pairs explored")
        en_p = world.en(pair[0])
        en_q = world.en(pair[1])
        if len(en_p) > encap or len(en_q) > encap:
            raise EnabledCapError(
                f"enabled set of size {max(len(en_p), len(en_q))} exceeds the cap {encap}"
            )
        pairs[pair] = (en_p, en_q)
        order.append(pair)
        for t in en_p:
            for u in en_q:
                if world.label(t) == world.label(u):
                    nxt = (world.target(t), world.target(u))
                    if nxt not in pairs:
                        queue.append(nxt)

    alive: dict = {}
    reasons: dict = {}
    for pair in order:
        en_p, en_q = pairs[pair]
        rels = _candidate_relations(world, en_p, en_q, max_relations)
        if rels is None:
            alive[pair] = {}
            reasons[pair] = {
                None: {
                    "violated": "1a/1b",
                    "detail": "some label has transitions on one side only",
                }
            }
        else:
            # smallest candidates first: the existential search for a
            # compatible successor relation then short-circuits early
            rels.sort(key=lambda r: (len(r), _rel_key(world, r)))
            alive[pair] = {_rel_key(world, r): r for r in rels}
            reasons[pair] = {}

    def compat(rel, v, w, rel2) -> bool:
        return _compat(world, rel, v, w, rel2)

    def first_violation(rel, v, w, rel2):
        for (t, u) in rel:
            for t2 in world.succ(t, v):
                if not any((t2, u2) in rel2 for u2 in world.succ(u, w)):
                    return ("2a", t, u, t2)
            for u2 in world.succ(u, w):
                if not any((t2, u2) in rel2 for t2 in world.succ(t, v)):
                    return ("2b", t, u, u2)
        return None

    round_no = 0
    changed = True
    while changed:
        changed = False
        round_no += 1
        for pair in order:
            doomed = []
            for key, rel in alive[pair].items():
                culprit = None
                for (v, w) in sorted(
                    rel, key=lambda vw: (world.trans_key(vw[0]), world.trans_key(vw[1]))
                ):
                    child = (world.target(v), world.target(w))
                    survivors = alive.get(child, {})
                    if not any(compat(rel, v, w, r2) for r2 in survivors.values()):
                        sample = None
                        for r2 in survivors.values():
                            sample = first_violation(rel, v, w, r2)
                            if sample:
                                break
                        if sample is None and survivors:
                            sample = ("2a/2b", None, None, None)
                        culprit = (v, w, child, sample)
                        break
                if culprit is not None:
                    doomed.append((key, rel, culprit))
            for key, rel, culprit in doomed:
                del alive[pair][key]
                reasons[pair][key] = (rel, culprit)
                changed = True

    if alive[root]:
        witness = _build_witness(world, root, alive)
        return Verdict(True, witness=witness)
    return Verdict(False, refutation=_build_refutation(world, root, pairs, reasons, alive))


def _build_witness(world, root, alive) -> dict:
    index: dict = {}
    triples: list = []

    def visit(pair, rel_key) -> int:
        key = (world.state_key(pair[0]), world.state_key(pair[1]), rel_key)
        if key in index:
            return index[key]
        idx = len(triples)
        index[key] = idx
        rel = alive[pair][rel_key]
        entry = {
            "p": world.state_display(pair[0]),
            "q": world.state_display(pair[1]),
            "R": sorted(
                [world.trans_display(t), world.trans_display(u)] for t, u in rel
            ),
            "moves": [],
        }
        triples.append(entry)
        for (v, w) in sorted(
            rel, key=lambda vw: (world.trans_key(vw[0]), world.trans_key(vw[1]))
        ):
            child = (world.target(v), world.target(w))
            # the fixed point guarantees some surviving relation at the child
            # pair satisfies clauses 2a/2b for this move; record that one
            chosen = next(
                k
                for k in sorted(alive[child])
                if _compat(world, rel, v, w, alive[child][k])
            )
            entry["moves"].append(
                {
                    "v": world.trans_display(v),
                    "w": world.trans_display(w),
                    "child": visit(child, chosen),
                }
            )
        return idx

    root_idx = visit(root, sorted(alive[root])[0])
    return {"mode": world.mode, "root": root_idx, "triples": triples}


def _build_refutation(world, root, pairs, reasons, alive, depth: int = 3) -> dict:
    def for_pair(pair, remaining) -> dict:
        node = {
            "p": world.state_display(pair[0]),
            "q": world.state_display(pair[1]),
            "candidates": [],
        }
        reason_map = reasons.get(pair, {})
        if None in reason_map:
            node["candidates"].append(reason_map[None])
            return node
        for key in sorted(reason_map):
            rel, (v, w, child, sample) = reason_map[key]
            cand = {
                "R": sorted(
                    [world.trans_display(t), world.trans_display(u)] for t, u in rel
                ),
                "move": [world.trans_display(v), world.trans_display(w)],
                "child": [world.state_display(child[0]), world.state_display(child[1])],
            }
            if sample is not None:
                clause, t, u, uncovered = sample
                cand["violated"] = clause
                if t is not None:
                    cand["pair"] = [world.trans_display(t), world.trans_display(u)]
                    cand["unmatched"] = world.trans_display(uncovered)
            else:
                cand["violated"] = "2a/2b"
                cand["detail"] = "no candidate relation at the target pair"
            if remaining > 0 and child in reasons and not alive.get(child):
                cand["because"] = for_pair(child, remaining - 1)
            node["candidates"].append(cand)
        return node

    return for_pair(root, depth)


def verify_witness_world(world, witness: dict) -> tuple:
    """Re-check every clause of the definition against the world; independent
    of the search that produced the witness."""
    triples = witness.get("triples", [])
    if not triples:
        return False, "witness has no triples"
    root = witness.get("root", 0)
    if not (0 <= root < len(triples)):
        return False, "root index out of range"

    resolved = []
    for i, entry in enumerate(triples):
        try:
            p = world.parse_state(entry["p"])
            q = world.parse_state(entry["q"])
        except EpcalcError as exc:
            return False, f"triple {i}: cannot resolve states: {exc}"
        en_p = {world.trans_display(t): t for t in world.en(p)}
        en_q = {world.trans_display(t): t for t in world.en(q)}
        rel = []
        for t_disp, u_disp in entry["R"]:
            if t_disp not in en_p or u_disp not in en_q:
                return False, f"triple {i}: R mentions a transition not enabled"
            rel.append((en_p[t_disp], en_q[u_disp]))
        covered_t = {t for t, _ in rel}
        covered_u = {u for _, u in rel}
        if len(covered_t) != len(en_p):
            return False, f"triple {i}: clause 1a fails (some t has no partner)"
        if len(covered_u) != len(en_q):
            return False, f"triple {i}: clause 1b fails (some u has no partner)"
        for t, u in rel:
            if world.label(t) != world.label(u):
                return False, f"triple {i}: clause 1c fails (label mismatch)"
        resolved.append((p, q, rel, entry.get("moves", [])))

    for i, (p, q, rel, moves) in enumerate(resolved):
        move_map = {}
        for m in moves:
            move_map[(m["v"], m["w"])] = m["child"]
        for (v, w) in rel:
            mk = (world.trans_display(v), world.trans_display(w))
            if mk not in move_map:
                return False, f"triple {i}: matched pair {mk} has no chosen successor triple"
            child = move_map[mk]
            if not (0 <= child < len(resolved)):
                return False, f"triple {i}: child index out of range"
            cp, cq, crel, _ = resolved[child]
            if world.state_key(cp) != world.state_key(world.target(v)) or world.state_key(
                cq
            ) != world.state_key(world.target(w)):
                return False, f"triple {i}: child triple is not at the move's target pair"
            rel2 = set(crel)
            for (t, u) in rel:
                for t2 in world.succ(t, v):
                    if not any((t2, u2) in rel2 for u2 in world.succ(u, w)):
                        return False, f"triple {i}: clause 2a fails"
                for u2 in world.succ(u, w):
                    if not any((t2, u2) in rel2 for t2 in world.succ(t, v)):
                        return False, f"triple {i}: clause 2b fails"
    return True, "ok"


# -- term-level and raw entry points ------------------------------------------------


class _ParsingTermWorld(TermWorld):
    def parse_state(self, text: str):
        from .parser import parse_term

        return parse_term(text, self.tsss.tss)


class _ParsingRawWorld(RawWorld):
    def parse_state(self, text: str):
        if text not in self.raw.states:
            raise LtssFormatError(f"unknown state {text!r}")
        return text


def strong_bisim_terms(tsss: TSSS, p: Term, q: Term, horizon=10_000, depth=64) -> Verdict:
    return strong_bisim(TermWorld(tsss, depth), p, q, horizon)


def ep_bisim(
    tsss: TSSS,
    p: Term,
    q: Term,
    horizon: int = 10_000,
    depth: int = 64,
    encap: int = DEFAULT_ENCAP,
    max_relations: int = DEFAULT_MAX_RELATIONS,
) -> Verdict:
    world = _ParsingTermWorld(tsss, depth)
    return ep_bisim_world(world, p, q, horizon, encap, max_relations)


def verify_witness(tsss: TSSS, witness: dict, depth: int = 64) -> tuple:
    world = _ParsingTermWorld(tsss, depth)
    return verify_witness_world(world, witness)


def ep_bisim_on_lts(
    raw: RawLTSS,
    p: str,
    q: str,
    horizon: int = 10_000,
    encap: int = DEFAULT_ENCAP,
    max_relations: int = DEFAULT_MAX_RELATIONS,
) -> Verdict:
    world = _ParsingRawWorld(raw)
    if p not in raw.states or q not in raw.states:
        raise LtssFormatError("unknown start state")
    return ep_bisim_world(world, p, q, horizon, encap, max_relations)


def verify_witness_on_lts(raw: RawLTSS, witness: dict) -> tuple:
    return verify_witness_world(_ParsingRawWorld(raw), witness)
