"""HTTP service wrapping the core operations.

Each endpoint body is a pure function from a request model to a response
model; the CLI calls those functions in-process by default and over HTTP when
pointed at a running server (`epcalc serve`).  Languages are cached per
(name/source, alphabets) since loaded definitions are immutable.
"""

from __future__ import annotations

import hashlib

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .derive import explore, lts_dot, proof_json, proof_tree, render_expr
from .equivalence import (
    RawLTSS,
    ep_bisim,
    ep_bisim_on_lts,
    strong_bisim_terms,
    verify_witness,
    verify_witness_on_lts,
)
from .errors import EpcalcError
from .langfile import load_language
from .langs import BUILTINS, builtin_source, resolve_language
from .parser import parse_term
from .rules import check_de_simone
from .successors import check_de_simone_succ, successor_relation
from .terms import free_vars, render


class LanguageRef(BaseModel):
    language: str = "ccs"
    source: str | None = None  # inline language definition; overrides `language`
    channels: list[str] | None = None
    broadcasts: list[str] | None = None
    signals: list[str] | None = None


class LtsRequest(LanguageRef):
    term: str
    horizon: int = Field(default=10_000, ge=1)
    depth: int = Field(default=64, ge=1)
    include_proofs: bool = False


class TransitionModel(BaseModel):
    source: str
    label: str
    target: str
    name: str
    proof: dict | None = None


class LtsResponse(BaseModel):
    initial: str
    states: list[str]
    transitions: list[TransitionModel]
    dot: str


class SuccRequest(LanguageRef):
    term: str
    horizon: int = Field(default=10_000, ge=1)
    depth: int = Field(default=64, ge=1)


class SuccTriple(BaseModel):
    state: str
    t: str
    u: str
    v: str


class SuccResponse(BaseModel):
    triples: list[SuccTriple]


class CheckFormatRequest(LanguageRef):
    pass


class DiagnosticModel(BaseModel):
    code: str
    rule: str
    message: str


class CheckFormatResponse(BaseModel):
    valid: bool
    diagnostics: list[DiagnosticModel]


class BisimRequest(LanguageRef):
    left: str
    right: str
    horizon: int = Field(default=10_000, ge=1)
    depth: int = Field(default=64, ge=1)
    encap: int = Field(default=8, ge=1)
    witness: bool = False
    explain: bool = False


class VerdictResponse(BaseModel):
    equivalent: bool
    witness: dict | None = None
    refutation: dict | None = None


class LtssBisimRequest(BaseModel):
    lts: dict
    left: str
    right: str
    horizon: int = Field(default=10_000, ge=1)
    encap: int = Field(default=8, ge=1)
    witness: bool = False
    explain: bool = False


class WitnessVerifyRequest(LanguageRef):
    witness: dict
    lts: dict | None = None
    depth: int = Field(default=64, ge=1)


class WitnessVerifyResponse(BaseModel):
    valid: bool
    reason: str


_language_cache: dict = {}


def _get_language(ref: LanguageRef):
    key = (
        ref.source if ref.source is None else hashlib.sha256(ref.source.encode()).hexdigest(),
        ref.language,
        tuple(ref.channels) if ref.channels is not None else None,
        tuple(ref.broadcasts) if ref.broadcasts is not None else None,
        tuple(ref.signals) if ref.signals is not None else None,
    )
    if key not in _language_cache:
        if ref.source is not None:
            tsss = load_language(ref.source, ref.channels, ref.broadcasts, ref.signals)
        else:
            tsss = resolve_language(ref.language, ref.channels, ref.broadcasts, ref.signals)
        _language_cache[key] = tsss
    return _language_cache[key]


def _parse_closed(tsss, text: str):
    term = parse_term(text, tsss.tss)
    fv = free_vars(term)
    if fv:
        raise EpcalcError(f"term is not closed; free variables: {', '.join(sorted(fv))}")
    return term


def do_lts(req: LtsRequest) -> LtsResponse:
    tsss = _get_language(req)
    term = _parse_closed(tsss, req.term)
    graph = explore(tsss.tss, term, req.horizon, req.depth)
    transitions = []
    for state in graph.states:
        for t in graph.transitions[state]:
            transitions.append(
                TransitionModel(
                    source=render(state),
                    label=t.label,
                    target=render(t.target),
                    name=render_expr(t.expr),
                    proof=proof_json(proof_tree(tsss.tss, t.expr)) if req.include_proofs else None,
                )
            )
    return LtsResponse(
        initial=render(term),
        states=[render(s) for s in graph.states],
        transitions=transitions,
        dot=lts_dot(graph),
    )


def do_succ(req: SuccRequest) -> SuccResponse:
    tsss = _get_language(req)
    term = _parse_closed(tsss, req.term)
    triples = successor_relation(tsss, term, req.horizon, req.depth)
    return SuccResponse(
        triples=[
            SuccTriple(
                state=render(state),
                t=render_expr(t.expr),
                u=render_expr(u.expr),
                v=render_expr(v.expr),
            )
            for state, t, u, v in triples
        ]
    )


def do_check_format(req: CheckFormatRequest) -> CheckFormatResponse:
    if req.source is not None:
        tsss = load_language(req.source, req.channels, req.broadcasts, req.signals)
    else:
        tsss = resolve_language(req.language, req.channels, req.broadcasts, req.signals)
    diags = check_de_simone(tsss.tss) + check_de_simone_succ(tsss)
    return CheckFormatResponse(
        valid=not diags,
        diagnostics=[
            DiagnosticModel(code=d.code, rule=d.rule, message=d.message) for d in diags
        ],
    )


def _require_valid(tsss):
    diags = check_de_simone(tsss.tss) + check_de_simone_succ(tsss)
    if diags:
        raise EpcalcError(
            "language fails the rule format check: " + "; ".join(str(d) for d in diags[:5])
        )


def do_epbisim(req: BisimRequest) -> VerdictResponse:
    tsss = _get_language(req)
    _require_valid(tsss)
    p = _parse_closed(tsss, req.left)
    q = _parse_closed(tsss, req.right)
    verdict = ep_bisim(tsss, p, q, req.horizon, req.depth, req.encap)
    return VerdictResponse(
        equivalent=verdict.equivalent,
        witness=verdict.witness if req.witness else None,
        refutation=verdict.refutation if req.explain else None,
    )


def do_strongbisim(req: BisimRequest) -> VerdictResponse:
    tsss = _get_language(req)
    _require_valid(tsss)
    p = _parse_closed(tsss, req.left)
    q = _parse_closed(tsss, req.right)
    verdict = strong_bisim_terms(tsss, p, q, req.horizon, req.depth)
    return VerdictResponse(
        equivalent=verdict.equivalent,
        witness=verdict.witness if req.witness else None,
        refutation=verdict.refutation if req.explain else None,
    )


def do_epbisim_lts(req: LtssBisimRequest) -> VerdictResponse:
    raw = RawLTSS.from_json(req.lts)
    verdict = ep_bisim_on_lts(raw, req.left, req.right, req.horizon, req.encap)
    return VerdictResponse(
        equivalent=verdict.equivalent,
        witness=verdict.witness if req.witness else None,
        refutation=verdict.refutation if req.explain else None,
    )


def do_witness_verify(req: WitnessVerifyRequest) -> WitnessVerifyResponse:
    if req.lts is not None:
        ok, reason = verify_witness_on_lts(RawLTSS.from_json(req.lts), req.witness)
    else:
        tsss = _get_language(req)
        ok, reason = verify_witness(tsss, req.witness, req.depth)
    return WitnessVerifyResponse(valid=ok, reason=reason)


app = FastAPI(
    title="epcalc",
    description="Labelled transition systems with successors: derivation, "
    "rule-format checking, strong and enabling-preserving bisimilarity.",
)


def _wrap(fn, req):
    try:
        return fn(req)
    except EpcalcError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health")
def health():
    return {"status": "ok"}


@app.get("/languages")
def languages():
    return {"builtins": list(BUILTINS)}


@app.get("/languages/{name}")
def language_source(name: str):
    try:
        return {"name": name, "source": builtin_source(name)}
    except EpcalcError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc


@app.post("/lts", response_model=LtsResponse)
def lts_endpoint(req: LtsRequest):
    return _wrap(do_lts, req)


@app.post("/succ", response_model=SuccResponse)
def succ_endpoint(req: SuccRequest):
    return _wrap(do_succ, req)


@app.post("/check-format", response_model=CheckFormatResponse)
def check_format_endpoint(req: CheckFormatRequest):
    return _wrap(do_check_format, req)


@app.post("/epbisim", response_model=VerdictResponse)
def epbisim_endpoint(req: BisimRequest):
    return _wrap(do_epbisim, req)


@app.post("/strongbisim", response_model=VerdictResponse)
def strongbisim_endpoint(req: BisimRequest):
    return _wrap(do_strongbisim, req)


@app.post("/epbisim-lts", response_model=VerdictResponse)
def epbisim_lts_endpoint(req: LtssBisimRequest):
    return _wrap(do_epbisim_lts, req)


@app.post("/witness-verify", response_model=WitnessVerifyResponse)
def witness_verify_endpoint(req: WitnessVerifyRequest):
    return _wrap(do_witness_verify, req)
