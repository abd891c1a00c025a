"""Exception types raised across the package.

Everything derives from ArtsimError so callers can catch broadly; the
subclasses also derive from the closest builtin (ValueError / OSError /
KeyError) so generic handling keeps working.
"""


class ArtsimError(Exception):
    """Base class for all package-specific errors."""


# --- expression / genome evaluation ---

class UnboundInput(ArtsimError, KeyError):
    """An expression references an input symbol missing from the environment."""

    def __init__(self, symbol: str):
        super().__init__(symbol)
        self.symbol = symbol


class InvalidSegment(ArtsimError, ValueError):
    """A line segment endpoint is NaN or infinite."""


# --- filters ---

class DepthExceeded(ArtsimError, ValueError):
    """A filter tree is deeper than the allowed maximum."""


# --- feature extraction ---

class ImageTooSmall(ArtsimError, ValueError):
    """Image is below the minimum size the descriptor supports."""


class DimensionMismatch(ArtsimError, ValueError):
    """Vectors of different dimensions were combined."""


class AllZeroDescriptor(ArtsimError, ValueError):
    """A descriptor came out identically zero and cannot be normalized."""


class MalformedRow(ArtsimError, ValueError):
    """An embedding file row could not be parsed."""


class InconsistentDimension(ArtsimError, ValueError):
    """Embedding file rows disagree on vector dimension."""


class DuplicateId(ArtsimError, ValueError):
    """The same image id appeared twice."""


# --- index ---

class EmptyInput(ArtsimError, ValueError):
    """An index build was attempted with no vectors."""


class ZeroVector(ArtsimError, ValueError):
    """A vector with zero norm cannot be unit-normalized."""


class CorruptIndex(ArtsimError, OSError):
    """Index file failed magic / version / checksum validation."""


class TruncatedFile(ArtsimError, OSError):
    """Index file ended before all declared blocks were read."""


# --- corpus ---

class BudgetExhausted(ArtsimError, RuntimeError):
    """Curation rejected too many candidates to reach the requested count."""


class MissingEmbedding(ArtsimError, KeyError):
    """An external embedding file does not cover a manifest record."""

    def __init__(self, image_id: str):
        super().__init__(image_id)
        self.image_id = image_id


class ManifestError(ArtsimError, ValueError):
    """A manifest file or record is malformed."""


# --- service ---

class UndecodableImage(ArtsimError, ValueError):
    """Uploaded bytes could not be decoded as an image."""


class IndexUnavailable(ArtsimError, RuntimeError):
    """No search index is loaded."""


class UnknownImage(ArtsimError, KeyError):
    """Image reference does not resolve to an indexed id or stored upload."""


class UnknownBoard(ArtsimError, KeyError):
    """Board id does not exist."""


class HistoryEmpty(ArtsimError, LookupError):
    """Undo was requested on a session with no prior retrieval set."""


# --- evaluation ---

class DatasetTooSmall(ArtsimError, ValueError):
    """A trial dataset has fewer than 2 images."""


class InvalidParams(ArtsimError, ValueError):
    """Statistical routine called with out-of-range parameters."""


class ConstantSeries(ArtsimError, ValueError):
    """Pearson correlation is undefined for a constant series."""


class LengthMismatch(ArtsimError, ValueError):
    """Paired series have different lengths."""


class EmptyResponses(ArtsimError, ValueError):
    """No responses were supplied to the accuracy report."""


class NoRetrievals(ArtsimError, ValueError):
    """Yield is undefined for a session with zero retrieval actions."""
