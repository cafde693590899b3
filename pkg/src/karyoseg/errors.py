"""Exception hierarchy. Every error carries a stable machine-readable code
that the CLI and HTTP layers surface verbatim as ``{"code", "message"}``."""


class KaryosegError(Exception):
    code = "internal"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class InvalidArgumentError(KaryosegError):
    code = "invalid-argument"


class DegenerateHistogramError(KaryosegError):
    """Raised when an image has a single-bin histogram: every threshold
    yields zero between-class variance, so no split exists."""

    code = "degenerate-histogram"


class DanglingIntersectionError(KaryosegError):
    """An intersection-role seed produced a region that touches no
    chromosome region inside the object foreground."""

    code = "dangling-intersection"


class UnfillableGapError(KaryosegError):
    """A gap mask has no adjacent object pixels to interpolate from."""

    code = "unfillable-gap"


class MissingScoreError(KaryosegError):
    code = "missing-score"


class LayoutFailureError(KaryosegError):
    """Synthetic layout could not place an object on the canvas."""

    code = "layout-failure"


class DecodeError(KaryosegError):
    code = "decode-failure"


class NotFoundError(KaryosegError):
    code = "not-found"


class ConflictError(KaryosegError):
    """Operation violates a session status invariant (e.g. distribute
    before scores were uploaded)."""

    code = "conflict"
