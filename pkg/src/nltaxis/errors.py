"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid user-facing configuration: grid sizes, parameters, kernels, files."""


class GridMismatchError(ValueError):
    """Two objects that must share a grid do not."""


class SnapshotError(RuntimeError):
    """A state snapshot could not be decoded (truncated, corrupt, wrong version)."""
