"""
Exception types raised by the solver toolkit

Every error carries a machine-readable code, a human message and an
optional suggestion for the user.
"""

from typing import Optional


class MluflError(Exception):
    """Base exception for the toolkit"""

    def __init__(self, error_code: str, message: str, suggestion: str = ""):
        self.error_code = error_code
        self.message = message
        self.suggestion = suggestion
        super().__init__(self.message)

    def __str__(self):
        return f"[{self.error_code}] {self.message}" + (
            f" ({self.suggestion})" if self.suggestion else ""
        )

    def to_dict(self):
        return {
            "error_code": self.error_code,
            "message": self.message,
            "suggestion": self.suggestion,
        }


class InstanceError(MluflError):
    """Malformed instance data or instance file"""

    def __init__(
        self,
        error_code: str,
        message: str,
        field: str = "",
        line: Optional[int] = None,
        suggestion: str = "",
    ):
        self.field = field
        self.line = line
        location = field or ""
        if line is not None:
            location = f"line {line}" + (f", {field}" if field else "")
        super().__init__(error_code, f"{location}: {message}" if location else message, suggestion)

    def to_dict(self):
        data = super().to_dict()
        data.update({"field": self.field, "line": self.line})
        return data


class SolutionError(MluflError):
    """Solution is structurally invalid for its instance"""


class LpError(MluflError):
    """Inconsistent LP model"""


class TreeError(MluflError):
    """Invalid input to a tree routine"""


class RoundingError(MluflError):
    """Rounding could not produce a solution"""


class ExactLimitError(MluflError):
    """Instance exceeds the exact oracle caps"""


class ConfigError(MluflError):
    """Invalid or incompatible experiment configuration"""
