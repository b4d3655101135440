class ConfigurationError(ValueError):
    """A parameter is outside its admissible range or a spec string is malformed."""


class UnsupportedOperation(TypeError):
    """The model lacks a capability the operation needs (e.g. a density)."""


class PreconditionError(ValueError):
    """The input is valid on its own but lacks what this operation requires."""
