"""Exception hierarchy shared across the package."""


class EpcalcError(Exception):
    """Base class for all package errors."""


class ParseError(EpcalcError):
    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at offset {pos})"
        super().__init__(message)


class LangError(EpcalcError):
    """A language definition file could not be parsed or loaded."""


class UnknownRuleName(EpcalcError):
    pass


class DepthLimitError(EpcalcError):
    """Recursion-unfolding bound exceeded; the specification is likely unguarded."""


class HorizonLimitError(EpcalcError):
    """Reachable-state bound exceeded during exploration."""


class EnabledCapError(EpcalcError):
    """An enabled set grew past the configured cap for equivalence checking."""


class RelationCapError(EpcalcError):
    """The candidate-relation universe for one state pair is too large to enumerate."""


class MatchError(EpcalcError):
    """A transition substitution does not match the expression it is applied to."""


class NotOpenTransition(EpcalcError):
    """A substitution result reuses one transition variable for different literals."""


class InvalidTransition(EpcalcError):
    """A transition expression does not name a derivable proof."""


class LtssFormatError(EpcalcError):
    """Raw LTSS input violates the well-formedness equations."""
