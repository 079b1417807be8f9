"""Exception taxonomy shared across the ranking stages.

Exit-code mapping used by the CLI:
  1 -- usage / configuration problems (ConfigError)
  2 -- malformed or inconsistent data  (FormatError, DuplicateEntry, ...)
  3 -- a pipeline stage failed at runtime (StageFailure, Timeout, ProtocolError)
"""


class RankCascadeError(Exception):
    """Base class for all errors raised by this package."""


# -- configuration (exit 1) -------------------------------------------------

class ConfigError(RankCascadeError):
    """Invalid, missing, or contradictory configuration."""


# -- data errors (exit 2) ---------------------------------------------------

class DataError(RankCascadeError):
    """Base class for malformed or inconsistent input data."""


class EmptyDocument(DataError):
    """A document whose body yields no sentences cannot be segmented."""


class DuplicateId(DataError):
    """Two corpus records share an item id."""


class UnknownItem(DataError):
    """An item id was requested that the index does not contain."""


class EmptyQuery(DataError):
    """A query tokenized to nothing; there is no term to score."""


class DimMismatch(DataError):
    """Embedding dimensionalities disagree."""


class NormError(DataError):
    """A token embedding row is not unit-norm within tolerance."""


class FormatError(DataError):
    """A file does not conform to its documented format.

    Messages include the offending line number where one exists.
    """


class DuplicateEntry(DataError):
    """A run or qrels file repeats a (query_id, item_id) pair."""


# -- stage failures (exit 3) -------------------------------------------------

class StageFailure(RankCascadeError):
    """A pipeline stage could not produce output; carries diagnostics."""


class Timeout(StageFailure):
    """An external scorer did not answer within the deadline."""


class ProtocolError(StageFailure):
    """An external scorer violated the wire protocol."""
