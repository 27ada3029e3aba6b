"""Exception hierarchy shared across the package.

Everything raised on purpose derives from :class:`GnnFecError`, so callers
(and the command line front end) can distinguish expected failures from
genuine bugs with a single ``except`` clause.
"""


class GnnFecError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameter(GnnFecError):
    """An argument is outside its documented domain."""


class LengthMismatch(GnnFecError):
    """A vector does not have the length required by the code or graph."""


class ShapeMismatch(GnnFecError):
    """An array operand has an incompatible shape."""


# --- finite fields / polynomials ---


class NotPrimitive(GnnFecError):
    """The candidate polynomial does not generate the full multiplicative group."""


class EmptyInput(GnnFecError):
    """An operation that needs at least one operand received none."""


# --- code construction and parsing ---


class InvalidLength(GnnFecError):
    """The block length is not admissible for the requested family."""


class DegenerateCode(GnnFecError):
    """Construction produced a code with no information bits."""


class ZeroRateCode(DegenerateCode):
    """A generator matrix was requested for a code with k = 0."""


class ConstructionFailed(GnnFecError):
    """Randomized construction exhausted its retry budget."""


class ParseError(GnnFecError):
    """A serialized code or checkpoint file is malformed.

    Parameters
    ----------
    message : str
        Description of the problem.
    line : int, optional
        1-based line number in the input, when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InconsistentDegrees(ParseError):
    """Degree declarations contradict the connection lists."""


# --- channel ---


class InvalidSigma(InvalidParameter):
    """Noise variance must be strictly positive."""


class InvalidRate(InvalidParameter):
    """Code rate must lie in (0, 1]."""


# --- automatic differentiation ---


class TapeMismatch(GnnFecError):
    """A gradient was requested from a tape that did not record the target."""


# --- learned decoder ---


class UnboundGraph(GnnFecError):
    """Parameters carry per-node state that does not match the given graph."""


class AttributeSizeMismatch(UnboundGraph):
    """Node attribute tables disagree with the graph's node counts."""


# --- training / checkpoints ---


class NonFiniteLoss(GnnFecError):
    """Training produced a NaN or infinite loss."""


class VersionMismatch(GnnFecError):
    """A checkpoint was written by an incompatible format version."""


class DigestMismatch(GnnFecError):
    """A checkpoint's code digest does not match the code it is applied to."""


# The evaluation harness talks about checksums; same failure, second name.
ChecksumMismatch = DigestMismatch


# --- evaluation ---


class TooLarge(GnnFecError):
    """The requested exhaustive computation exceeds the supported size."""
