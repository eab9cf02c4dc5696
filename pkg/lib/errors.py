class DofCsitError(ValueError):
    """Base class for every failure raised by the dofcsit library."""


# --- PROFILE ERRORS ---
class LengthMismatch(DofCsitError):
    pass


class OutOfRange(DofCsitError):
    pass


class NotBalanced(DofCsitError):
    pass


# --- PAIRING / REDUCTION ERRORS ---
class Unbalanced(DofCsitError):
    pass


class InternalImbalance(DofCsitError):
    pass


# --- GEOMETRY ERRORS ---
class NegativeWeight(DofCsitError):
    pass


class OrderViolation(DofCsitError):
    pass


# --- SIMULATION ERRORS ---
class ZeroVector(DofCsitError):
    pass


class GridTooSmall(DofCsitError):
    pass


# --- I/O ERRORS ---
class ConfigError(DofCsitError):
    pass


class ParseError(DofCsitError):
    def __init__(self, message, path=None, line=None, field=None):
        self.path = path
        self.line = line
        self.field = field
        where = []
        if path:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")
