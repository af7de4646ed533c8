"""
Exception hierarchy shared by every gestaltbind module.

Value-domain errors subclass ValueError so that callers catching the builtin keep working.
"""


class GestaltError(Exception):
    """Base class for all gestaltbind errors."""


class ShapeMismatchError(GestaltError, ValueError):
    """Raised when two connected graph nodes carry incompatible shapes."""

    def __init__(self, node_a, node_b, detail=""):
        self.node_a = node_a
        self.node_b = node_b
        msg = f"shape mismatch between {node_a!r} and {node_b!r}"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class NonFiniteError(GestaltError, ValueError):
    """Raised when a NaN or inf shows up in a value or gradient."""

    def __init__(self, where, detail=""):
        self.where = where
        msg = f"non-finite value encountered at {where}"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)


class GraphStateError(GestaltError, RuntimeError):
    """Raised when the graph is used out of order, e.g. backward before forward."""


class SequenceError(GestaltError, ValueError):
    """Raised for malformed feature sequences or invalid generator parameters."""


class CsvParseError(SequenceError):
    def __init__(self, path, line, detail):
        self.path = path
        self.line = line
        super().__init__(f"{path}, line {line}: {detail}")


class LatticeError(GestaltError, ValueError):
    """Raised when a neuron count has no admissible layout for a lattice kind."""


class RotationError(GestaltError, ValueError):
    """Raised when a matrix handed in as a rotation is not orthonormal."""


class ModelMismatchError(GestaltError, ValueError):
    """Raised when inference-time lattices differ from the ones a model was trained with."""


class TrainingDivergedError(GestaltError, RuntimeError):
    def __init__(self, submodality, epoch, batch, loss):
        self.submodality = submodality
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(
            f"{submodality} VAE diverged at epoch {epoch}, batch {batch} (loss={loss})"
        )


class InferenceHaltedError(GestaltError, RuntimeError):
    """Raised when retrospective inference hits a non-finite loss. Carries a state snapshot."""

    def __init__(self, step, snapshot):
        self.step = step
        self.snapshot = snapshot
        super().__init__(f"inference halted at step {step}: non-finite loss")


class ConfigError(GestaltError, ValueError):
    def __init__(self, field, detail):
        self.field = field
        super().__init__(f"config field '{field}': {detail}")


class ReportError(GestaltError, ValueError):
    """Raised when run directories cannot be aggregated together."""
