"""Exception types shared across the package."""


class FlowXaiError(Exception):
    """Base class for all package-specific errors."""


class MissingValue(FlowXaiError):
    """A required cell is empty; message carries row/column."""


class WeightMismatch(FlowXaiError):
    """Synthetic class weights do not sum to 1."""


class ShapeMismatch(FlowXaiError):
    """Array shape incompatible with the model configuration."""


class NonFiniteLoss(FlowXaiError):
    """Training loss became NaN/Inf; carries epoch and batch index."""

    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class SampleTooSmall(FlowXaiError):
    """Dataset has fewer rows than the requested sample size."""


class SampleTooLarge(FlowXaiError):
    """Requested more sampled instances than available rows."""


class EmptyTrain(FlowXaiError):
    """Tree fitting called on an empty training set."""


class TooFewRules(FlowXaiError):
    """Pruning requires at least two rules."""


class LengthMismatch(FlowXaiError):
    """Label and prediction vectors differ in length."""


class TransportError(FlowXaiError):
    """All HTTP attempts failed; carries the attempt count."""

    def __init__(self, attempts: int, last_error: str):
        super().__init__(f"transport failure after {attempts} attempts: {last_error}")
        self.attempts = attempts
        self.last_error = last_error


class ApiError(FlowXaiError):
    """Non-retryable HTTP error; carries status and response body."""

    def __init__(self, status: int, body: str):
        super().__init__(f"API error {status}: {body[:500]}")
        self.status = status
        self.body = body


class EmptyResponse(FlowXaiError):
    """The chat endpoint returned no assistant text."""


class EmbeddingFailure(FlowXaiError):
    """The remote embedding endpoint failed."""


class UnparseableScore(FlowXaiError):
    """Judge reply contained no actionability score in 1..5."""


class MissingArtifact(FlowXaiError):
    """A pipeline stage dependency is absent; carries stage and path."""

    def __init__(self, stage: str, path: str):
        super().__init__(f"stage '{stage}' has not produced required artifact: {path}")
        self.stage = stage
        self.path = path


class ConfigInvalid(FlowXaiError):
    """Run configuration failed validation; message names the field."""
