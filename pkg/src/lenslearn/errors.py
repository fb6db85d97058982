"""Exception hierarchy shared by every module."""


class LensLearnError(Exception):
    pass


class ContractError(LensLearnError):
    """Operands from different rigs, or some other broken precondition."""


class ShapeError(LensLearnError):
    pass


class CompositionError(LensLearnError):
    """Two lenses or parametric maps whose ports do not line up."""


class ExprTypeError(LensLearnError):
    """An ill-typed expression tree; the message carries the node path."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class RigSupportError(LensLearnError):
    """A primitive or loss used over a rig it is not defined for."""


class CatalogueError(LensLearnError):
    """Unknown primitive, activation, loss, or optimiser name."""


class ConfigError(LensLearnError):
    """Invalid run configuration; the message carries the field path."""
