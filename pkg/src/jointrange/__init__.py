"""Joint numerical ranges of matrix tuples and constructive compression tools."""

__version__ = "0.1.0"
