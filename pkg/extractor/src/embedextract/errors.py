"""Error vocabulary for the extractor."""


class ExtractError(Exception):
    """Base class for everything this package raises on purpose."""


class SpecError(ExtractError):
    """A spec document is malformed or uses an unsupported format/version."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class EncodeFailure(ExtractError):
    """One stimulus could not be encoded (bad image, degenerate vector)."""


class UnknownModel(ExtractError):
    """Requested encoder name is not registered."""
