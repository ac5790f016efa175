"""Exception hierarchy for the engine.

Every error raised on a contract violation derives from PatchmemError so
callers (and the CLI) can map failures to exit codes without matching on
stdlib exceptions.
"""


class PatchmemError(Exception):
    """Base class for all engine errors."""


class FormatError(PatchmemError):
    """A file is structurally malformed (bad magic, header, or JSON)."""


class UnsupportedEncodingError(FormatError):
    """A file parses but uses an encoding the engine does not accept
    (wrong dtype, byte order, or memory layout)."""


class ValidationError(PatchmemError):
    """Data violates a documented invariant (non-finite values, shape
    mismatch, inconsistent manifest, bad configuration values)."""


class GridMismatchError(ValidationError):
    """A patch grid does not evenly divide a feature map."""


class IncompatibilityError(PatchmemError):
    """Artifacts produced under different configurations refuse to combine
    (config-hash or grid mismatch between bank, samples, and scores)."""


class UndefinedMetricError(PatchmemError):
    """A metric is requested on inputs where it is undefined
    (e.g. AUROC with single-class labels)."""


class WriteError(PatchmemError):
    """An I/O failure while persisting an artifact."""
