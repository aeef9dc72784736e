"""Exception types shared across the package."""


class FscondError(Exception):
    """Base class for all package-specific errors."""


class GateError(FscondError):
    """Invalid gate specification or gate/state mismatch."""


class DimensionMismatchError(FscondError):
    """Vector or matrix operands with incompatible shapes."""


class NonSymmetricMatrixError(FscondError):
    """A symmetric-only routine received an asymmetric matrix."""


class DegenerateSpectrumError(FscondError):
    """Every eigenvalue fell below the filtering floor; spectrum unusable."""


class SingularMetricError(FscondError):
    """Metric inversion requested on a (numerically) singular metric."""


class BarrenPlateauError(FscondError):
    """Meta-training aborted after persistently degenerate spectra."""


class DatasetError(FscondError):
    """CSV ingestion or dataset preparation failure."""


class CheckpointError(FscondError):
    """Checkpoint file missing, corrupt, or incompatible."""


class ConfigError(FscondError):
    """Invalid run configuration."""
