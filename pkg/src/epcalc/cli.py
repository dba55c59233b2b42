"""Command-line front end.

Every command builds the same request model the HTTP service accepts and
either dispatches it in-process (default) or POSTs it to a running server
(`--server http://...`).  Exit codes: 0 equivalent / valid, 1 not equivalent /
diagnostics found, 2 error.
"""

from __future__ import annotations

import json
import os
import sys

import click

from . import service
from .errors import EpcalcError

_EXIT_ERROR = 2


def _lang_options(fn):
    fn = click.option(
        "--lang",
        default="ccs",
        show_default=True,
        help="Built-in language name or path to a .lang file "
        "(also searched on EPCALC_LANG_PATH).",
    )(fn)
    fn = click.option("--channels", default=None, help="Comma-separated channel names.")(fn)
    fn = click.option("--broadcasts", default=None, help="Comma-separated broadcast names.")(fn)
    fn = click.option("--signals", default=None, help="Comma-separated signal names.")(fn)
    return fn


def _common_options(fn):
    fn = click.option("--server", default=None, help="POST to a running epcalc service.")(fn)
    fn = click.option("--horizon", default=10_000, show_default=True, help="Reachable-state bound.")(fn)
    fn = click.option("--depth", default=64, show_default=True, help="Recursion unfolding bound.")(fn)
    fn = click.option("--seed", default=0, show_default=True, help="Seed for sampled output (reserved).")(fn)
    return fn


def _split(csv: str | None):
    if csv is None:
        return None
    return [x.strip() for x in csv.split(",") if x.strip()]


def _lang_ref(lang, channels, broadcasts, signals) -> dict:
    ref: dict = {
        "channels": _split(channels),
        "broadcasts": _split(broadcasts),
        "signals": _split(signals),
    }
    if os.path.exists(lang) or (os.sep in lang) or lang.endswith(".lang"):
        search = os.environ.get("EPCALC_LANG_PATH", "")
        path = lang
        if not os.path.exists(path):
            for d in filter(None, search.split(os.pathsep)):
                for cand in (os.path.join(d, lang), os.path.join(d, lang + ".lang")):
                    if os.path.exists(cand):
                        path = cand
                        break
        if not os.path.exists(path):
            raise EpcalcError(f"language file {lang!r} not found")
        with open(path, encoding="utf-8") as fh:
            ref["source"] = fh.read()
        ref["language"] = lang
    else:
        ref["language"] = lang
    return ref


_ENDPOINTS = {
    "/lts": (service.do_lts, service.LtsRequest),
    "/succ": (service.do_succ, service.SuccRequest),
    "/check-format": (service.do_check_format, service.CheckFormatRequest),
    "/epbisim": (service.do_epbisim, service.BisimRequest),
    "/strongbisim": (service.do_strongbisim, service.BisimRequest),
    "/epbisim-lts": (service.do_epbisim_lts, service.LtssBisimRequest),
    "/witness-verify": (service.do_witness_verify, service.WitnessVerifyRequest),
}


def _dispatch(server: str | None, endpoint: str, payload: dict):
    if server is None:
        fn, model = _ENDPOINTS[endpoint]
        return fn(model(**payload)).model_dump()
    import httpx

    resp = httpx.post(server.rstrip("/") + endpoint, json=payload, timeout=600.0)
    if resp.status_code != 200:
        detail = resp.json().get("detail", resp.text) if resp.content else resp.text
        raise EpcalcError(f"server error ({resp.status_code}): {detail}")
    return resp.json()


@click.group()
def main():
    """Derive transition systems with successors and decide bisimilarities."""


@main.command()
@click.argument("term")
@_lang_options
@_common_options
@click.option("--format", "fmt", type=click.Choice(["text", "json", "dot"]), default="text", show_default=True)
@click.option("--proofs", is_flag=True, help="Include proof trees in JSON output.")
def lts(term, lang, channels, broadcasts, signals, server, horizon, depth, seed, fmt, proofs):
    """Reachable states and transitions of TERM, with canonical names."""
    try:
        payload = _lang_ref(lang, channels, broadcasts, signals)
        payload.update(term=term, horizon=horizon, depth=depth, include_proofs=proofs)
        out = _dispatch(server, "/lts", payload)
    except EpcalcError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_EXIT_ERROR)
    if fmt == "json":
        click.echo(json.dumps(out, indent=2, sort_keys=True))
    elif fmt == "dot":
        click.echo(out["dot"], nl=False)
    else:
        click.echo(f"initial: {out['initial']}")
        click.echo(f"states: {len(out['states'])}")
        for s in out["states"]:
            click.echo(f"  {s}")
        click.echo(f"transitions: {len(out['transitions'])}")
        for t in out["transitions"]:
            click.echo(f"  {t['source']}  -{t['label']}->  {t['target']}")
            click.echo(f"    name: {t['name']}")


@main.command()
@click.argument("term")
@_lang_options
@_common_options
def succ(term, lang, channels, broadcasts, signals, server, horizon, depth, seed):
    """Successor triples t ~u> v over the reachable fragment, as JSON lines."""
    try:
        payload = _lang_ref(lang, channels, broadcasts, signals)
        payload.update(term=term, horizon=horizon, depth=depth)
        out = _dispatch(server, "/succ", payload)
    except EpcalcError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_EXIT_ERROR)
    for triple in out["triples"]:
        click.echo(json.dumps(triple, sort_keys=True))


@main.command("check-format")
@click.argument("langfile", required=False)
@_lang_options
@click.option("--server", default=None)
def check_format(langfile, lang, channels, broadcasts, signals, server):
    """Check a language against the rule format; print diagnostics."""
    try:
        payload = _lang_ref(langfile or lang, channels, broadcasts, signals)
        out = _dispatch(server, "/check-format", payload)
    except (EpcalcError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_EXIT_ERROR)
    for d in out["diagnostics"]:
        click.echo(f"[{d['code']}] {d['rule']}: {d['message']}")
    if out["valid"]:
        click.echo("ok: language is in De Simone format (with successors)")
        sys.exit(0)
    sys.exit(1)


def _bisim_command(name: str, endpoint: str, doc: str):
    @main.command(name, help=doc)
    @click.argument("left")
    @click.argument("right")
    @_lang_options
    @_common_options
    @click.option("--encap", default=8, show_default=True, help="Enabled-set size cap.")
    @click.option("--witness", is_flag=True, help="Emit a checkable witness as JSON.")
    @click.option("--explain", is_flag=True, help="Emit the refutation as JSON.")
    def cmd(left, right, lang, channels, broadcasts, signals, server, horizon, depth, seed, encap, witness, explain):
        try:
            payload = _lang_ref(lang, channels, broadcasts, signals)
            payload.update(
                left=left,
                right=right,
                horizon=horizon,
                depth=depth,
                encap=encap,
                witness=witness,
                explain=explain,
            )
            out = _dispatch(server, endpoint, payload)
        except EpcalcError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_EXIT_ERROR)
        click.echo("equivalent" if out["equivalent"] else "not equivalent")
        if witness and out.get("witness") is not None:
            click.echo(json.dumps(out["witness"], indent=2, sort_keys=True))
        if explain and out.get("refutation") is not None:
            click.echo(json.dumps(out["refutation"], indent=2, sort_keys=True))
        sys.exit(0 if out["equivalent"] else 1)

    return cmd


_bisim_command("epbisim", "/epbisim", "Decide enabling-preserving bisimilarity of LEFT and RIGHT.")
_bisim_command("strongbisim", "/strongbisim", "Decide strong bisimilarity of LEFT and RIGHT.")


@main.command("epbisim-lts")
@click.argument("ltsfile", type=click.Path(exists=True))
@click.argument("left")
@click.argument("right")
@click.option("--server", default=None)
@click.option("--horizon", default=10_000, show_default=True)
@click.option("--encap", default=8, show_default=True)
@click.option("--witness", is_flag=True)
@click.option("--explain", is_flag=True)
def epbisim_lts(ltsfile, left, right, server, horizon, encap, witness, explain):
    """Decide ep-bisimilarity of two states of an explicit LTSS (JSON file)."""
    try:
        with open(ltsfile, encoding="utf-8") as fh:
            data = json.load(fh)
        payload = {
            "lts": data,
            "left": left,
            "right": right,
            "horizon": horizon,
            "encap": encap,
            "witness": witness,
            "explain": explain,
        }
        out = _dispatch(server, "/epbisim-lts", payload)
    except (EpcalcError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_EXIT_ERROR)
    click.echo("equivalent" if out["equivalent"] else "not equivalent")
    if witness and out.get("witness") is not None:
        click.echo(json.dumps(out["witness"], indent=2, sort_keys=True))
    if explain and out.get("refutation") is not None:
        click.echo(json.dumps(out["refutation"], indent=2, sort_keys=True))
    sys.exit(0 if out["equivalent"] else 1)


@main.command("witness-verify")
@click.argument("witnessfile", type=click.Path(exists=True))
@_lang_options
@click.option("--lts-file", default=None, type=click.Path(exists=True), help="Verify against an explicit LTSS instead of a language.")
@click.option("--server", default=None)
@click.option("--depth", default=64, show_default=True)
def witness_verify(witnessfile, lang, channels, broadcasts, signals, lts_file, server, depth):
    """Re-check a witness produced by epbisim against the definition."""
    try:
        with open(witnessfile, encoding="utf-8") as fh:
            witness = json.load(fh)
        payload = _lang_ref(lang, channels, broadcasts, signals)
        payload.update(witness=witness, depth=depth)
        if lts_file is not None:
            with open(lts_file, encoding="utf-8") as fh:
                payload["lts"] = json.load(fh)
        out = _dispatch(server, "/witness-verify", payload)
    except (EpcalcError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_EXIT_ERROR)
    click.echo(("valid: " if out["valid"] else "invalid: ") + out["reason"])
    sys.exit(0 if out["valid"] else 1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("epcalc.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
