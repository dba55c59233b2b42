"""Built-in language definitions, shipped as `.lang` files."""

from __future__ import annotations

import os
from importlib import resources

from ..errors import LangError
from ..langfile import load_language
from ..parser import parse_term
from ..rules import check_de_simone
from ..successors import TSSS, check_de_simone_succ

BUILTINS = ("ccs", "abcde")


def builtin_source(name: str) -> str:
    try:
        return resources.files(__package__).joinpath(f"{name}.lang").read_text("utf-8")
    except FileNotFoundError:
        raise LangError(f"no built-in language {name!r}") from None


def _load_checked(source: str, channels, broadcasts, signals) -> TSSS:
    tsss = load_language(source, channels, broadcasts, signals)
    diags = check_de_simone(tsss.tss) + check_de_simone_succ(tsss)
    if diags:
        raise LangError(
            "built-in language failed its own format check: "
            + "; ".join(str(d) for d in diags)
        )
    return tsss


def load_ccs(channels=("a", "b", "c")) -> TSSS:
    if not channels:
        raise LangError("CCS needs a non-empty channel alphabet")
    return _load_checked(builtin_source("ccs"), channels, (), ())


def load_abcde(channels=("c", "d"), broadcasts=("b",), signals=("s",)) -> TSSS:
    return _load_checked(builtin_source("abcde"), channels, broadcasts, signals)


def resolve_language(
    name_or_path: str,
    channels=None,
    broadcasts=None,
    signals=None,
    search_path: str | None = None,
) -> TSSS:
    """A built-in name, a file path, or a name found on EPCALC_LANG_PATH."""
    if name_or_path == "ccs":
        return load_ccs(tuple(channels) if channels else ("a", "b", "c"))
    if name_or_path == "abcde":
        return load_abcde(
            tuple(channels) if channels is not None else ("c", "d"),
            tuple(broadcasts) if broadcasts is not None else ("b",),
            tuple(signals) if signals is not None else ("s",),
        )
    path = name_or_path
    if not os.path.exists(path):
        search = search_path if search_path is not None else os.environ.get(
            "EPCALC_LANG_PATH", ""
        )
        for d in filter(None, search.split(os.pathsep)):
            cand = os.path.join(d, name_or_path)
            if os.path.exists(cand):
                path = cand
                break
            cand = os.path.join(d, name_or_path + ".lang")
            if os.path.exists(cand):
                path = cand
                break
        else:
            raise LangError(f"language {name_or_path!r} not found")
    with open(path, encoding="utf-8") as fh:
        return load_language(fh.read(), channels, broadcasts, signals)


def ccs_example_pq():
    """The two-process discriminator: strongly bisimilar, not ep-bisimilar."""
    tsss = load_ccs(("a", "b", "c"))
    p = parse_term("rec X { X = a.X + b.Y, Y = a.Y }", tsss.tss)
    q = parse_term("rec Z { Z = a.Z } | b.0", tsss.tss)
    return tsss, p, q
