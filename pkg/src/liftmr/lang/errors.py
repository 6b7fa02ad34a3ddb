"""Error types shared across the MJ frontend."""

from __future__ import annotations


class MJError(Exception):
    """Base class for all MJ front-end errors."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.line:
            return f"{self.line}:{self.col}: {self.message}"
        return self.message


class MJSyntaxError(MJError):
    def __init__(self, message: str, line: int = 0, col: int = 0, expected: tuple = ()):
        self.expected = expected
        if expected:
            message = f"{message} (expected {', '.join(expected)})"
        super().__init__(message, line, col)


class MJTypeError(MJError):
    pass


class MJTrap(Exception):
    """Runtime error raised during MJ interpretation.

    kind is one of: index-out-of-bounds, division-by-zero, overflow,
    fuel-exhausted, negative-array-size.
    """

    def __init__(self, kind: str, detail: str = ""):
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind}: {detail}" if detail else kind)
