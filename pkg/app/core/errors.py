# Error hierarchy shared by every command; exit_code plays the role a status code plays for an HTTP API

from typing import Any, Optional


class WorkbenchError(Exception):
    """Base class for all workbench failures"""
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(WorkbenchError):
    """Invalid run configuration; carries the offending field path"""
    exit_code = 2

    def __init__(self, field: str, detail: str):
        super().__init__(f"{field}: {detail}")
        self.field = field


class TemplateError(WorkbenchError):
    exit_code = 2


class OutOfGroundError(WorkbenchError):
    """A value left a ground set that is not closed under the operation"""

    def __init__(self, value: Any, ground: str):
        super().__init__(f"value {value} is outside {ground}")
        self.value = value


class BudgetExceeded(WorkbenchError):
    pass


class SolverError(WorkbenchError):
    pass


class CoverFailure(WorkbenchError):
    """No member of the thick-index family fits inside A_x for some x"""

    def __init__(self, element: Optional[Any], detail: str):
        where = "" if element is None else f" at x={element}"
        super().__init__(f"cover failed{where}: {detail}")
        self.element = element


class ConstructionFailure(WorkbenchError):
    """The product-family construction ran out of room at some column"""

    def __init__(self, column: Optional[int], detail: str):
        where = "" if column is None else f" at column {column}"
        super().__init__(f"product construction failed{where}: {detail}")
        self.column = column


class UncoveredElement(WorkbenchError):
    exit_code = 3

    def __init__(self, element: Any):
        super().__init__(f"element {element} has no derived color; cover postcondition (ii) is broken")
        self.element = element


class WalkPreconditionError(WorkbenchError):
    exit_code = 2


class InternalVerificationError(WorkbenchError):
    """A certificate failed its own re-verification: always a bug"""
    exit_code = 3

    def __init__(self, detail: str, payload: Optional[Any] = None):
        super().__init__(detail)
        self.payload = payload


class RegistryError(WorkbenchError):
    """The runs file could not be written"""
