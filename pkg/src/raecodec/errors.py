"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """Shapes, lengths or values that violate an operation's preconditions."""


class ConfigError(ValueError):
    pass


class NumericError(ArithmeticError):
    """Non-finite values appeared where finite ones are required."""


class FormatError(ValueError):
    """Malformed model file, bitstream or CSV input.

    ``location`` is a human readable pointer (byte offset, row/column).
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)


class ChecksumError(FormatError):
    pass


class ParseError(FormatError):
    def __init__(self, message, row, column=None):
        self.row = row
        self.column = column
        loc = f"row {row}" if column is None else f"row {row}, column {column}"
        super().__init__(message, loc)
