"""Exceptions raised by the expression layer."""


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at offset {offset}")


class DimensionError(ExprError):
    """A variable index is outside the declared chart dimension."""


class DomainError(ExprError, ArithmeticError):
    """Evaluation left the domain of a field (division by zero, log of a
    non-positive number, fractional power of a negative base, overflow)."""
