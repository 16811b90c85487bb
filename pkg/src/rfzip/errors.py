"""Exception hierarchy shared across the codec."""


class RfzError(Exception):
    """Base class for all codec errors."""


class SchemaError(RfzError):
    """An interchange document is structurally malformed (missing field, wrong kind)."""


class InvariantError(RfzError):
    """A structurally well-formed input violates a semantic rule."""


class DimensionError(RfzError):
    """An observation vector has the wrong arity for the schema."""


class MalformedSequence(RfzError):
    """A bit string is not a feasible tree-shape sequence."""


class EmptyDistribution(RfzError):
    """A code table was requested for a distribution with no samples."""


class UnknownSymbol(RfzError):
    """A symbol without a codeword was passed to an encoder."""


class TruncatedStream(RfzError):
    """A bitstream ended before decoding completed."""


class AlphabetMismatch(RfzError):
    """Two distributions do not share an alphabet."""


class DegenerateInput(RfzError):
    """A clustering problem has no models to cluster."""


class CorruptContainer(RfzError):
    """A container file is damaged, truncated, or not a container at all."""


class RangeError(RfzError):
    """A value lies outside the declared quantization range."""


class TaskError(RfzError):
    """An operation was applied to the wrong task kind (classification vs regression)."""


class DataError(RfzError):
    """A training dataset is empty or inconsistent."""
