"""Exception types shared across the engine."""


class ShapeError(ValueError):
    """Shape, axis, or element-count mismatch."""


class BroadcastError(ShapeError):
    """Two shapes cannot be broadcast together."""


class GradError(RuntimeError):
    """Autograd misuse: missing graph, missing seed, or mutated saved value."""


class DeterminismError(RuntimeError):
    """A computation expected to be deterministic produced differing results."""
