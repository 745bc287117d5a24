"""Exception types shared across the package."""


class HebbCLError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(HebbCLError, ValueError):
    """An argument violates an operation's precondition."""


class InvalidStateError(HebbCLError, RuntimeError):
    """The network is in a state that makes the requested operation undefined."""


class CapacityError(HebbCLError, RuntimeError):
    """The network cannot grow further (neuron cap reached or nothing trainable)."""


class CheckpointFormatError(HebbCLError, ValueError):
    """A checkpoint file is malformed; the message names the failing byte offset."""


class DataFormatError(HebbCLError, ValueError):
    """A dataset file is malformed; the message names the failing byte offset."""


class DatasetMissingError(HebbCLError, FileNotFoundError):
    """Expected dataset files were not found on disk."""
