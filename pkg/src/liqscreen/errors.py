"""Shared exception types for the pipeline."""


class LiqscreenError(Exception):
    """Base class for all pipeline errors."""


class ValidationError(LiqscreenError):
    """A configuration value or input parameter is out of contract."""


class MalformedRowError(LiqscreenError):
    """An input file row failed validation; carries the file and line number."""

    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}, line {line}: {reason}")


class MissingInputError(LiqscreenError):
    """A required input file or upstream artifact is absent."""


class EmptyUniverseError(LiqscreenError):
    """No usable input files or no stock-day survived loading."""


class NoIntradayNewsError(LiqscreenError):
    """Selection ratio is undefined because no article falls in the session."""


class InsufficientReturnsError(LiqscreenError):
    """Too few post-news returns to compute stable percentiles."""


class DegenerateCorpusError(LiqscreenError):
    """Training corpus is empty or single-class."""


class EmptyIntersectionError(LiqscreenError):
    """Two scorers cover disjoint article sets; nothing to compare."""
