"""Exception hierarchy. ``category`` is what the CLI prints on failure."""


class IrisPadError(Exception):
    category = "error"


class ConfigurationError(IrisPadError, ValueError):
    category = "configuration"


class InputError(IrisPadError, ValueError):
    category = "input"


class PretrainedWeightsUnavailable(IrisPadError, RuntimeError):
    category = "weights-unavailable"


class ManifestError(IrisPadError, ValueError):
    category = "manifest"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ProtocolError(IrisPadError, ValueError):
    category = "protocol"


class IngestionError(IrisPadError, RuntimeError):
    category = "ingestion"


class TrainingDivergedError(IrisPadError, RuntimeError):
    category = "diverged"

    def __init__(self, epoch, batch, value):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")


class ScoringError(IrisPadError, RuntimeError):
    category = "scoring"


class CheckpointError(IrisPadError, RuntimeError):
    category = "checkpoint"
