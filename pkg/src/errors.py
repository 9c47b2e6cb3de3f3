"""
Error types for xmd

Library code raises these; the CLI handlers turn them into exit codes.
"""


class XmdError(Exception):
    """Base class for all xmd failures"""

    exit_code = 1


class ConfigurationError(XmdError):
    """Bad configuration, shapes or dimensions"""

    exit_code = 2


class UsageError(XmdError):
    """An operation was called out of order or with unusable arguments"""

    exit_code = 2


class DataError(XmdError):
    """Invalid data values (labels, degenerate vectors, empty inputs)"""

    exit_code = 3


class FormatError(DataError):
    """A binary file could not be decoded"""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericError(XmdError):
    """A non-finite value appeared during computation"""

    exit_code = 4

    def __init__(self, message, node_id=None):
        super().__init__(message)
        self.node_id = node_id


class InternalError(XmdError):
    """A contract between xmd modules was broken"""

    exit_code = 4
