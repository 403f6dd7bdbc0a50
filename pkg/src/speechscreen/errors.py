"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """Input data violates a declared invariant (bad file, bad manifest, bad config)."""


class ExtractionError(RuntimeError):
    """Feature extraction failed for an utterance."""


class ConvergenceError(RuntimeError):
    """The SMO solver hit its kernel-evaluation budget before converging."""
