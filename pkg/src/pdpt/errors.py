"""Exception types shared across the package."""


class PdptError(Exception):
    """Base class for all package-specific errors."""


class InputError(PdptError, ValueError):
    """A caller violated a documented precondition (bad id, negative value, ...)."""


class ParseError(PdptError):
    """A text stream could not be parsed; carries the 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StructureError(PdptError):
    """A file parsed but its contents are inconsistent (unpaired siblings, no requests)."""


class ConfigError(PdptError):
    """An augmentation or benchmark configuration is invalid."""


class CyclicTransferError(PdptError):
    """Routes wait on each other's transfer hand-offs in a cycle; no schedule exists."""


class NoFeasibleInsertion(PdptError):
    """A constructor could not place a request in any vehicle."""

    def __init__(self, request, message=None):
        self.request = request
        super().__init__(message or f"no feasible insertion for request {request}")


class InsufficientFleet(PdptError):
    """Route merging produced more routes than there are vehicles."""

    def __init__(self, routes, vehicles):
        self.routes = routes
        self.vehicles = vehicles
        super().__init__(f"{routes} routes but only {vehicles} vehicles")


class TooLarge(PdptError):
    """An instance exceeds the exact solver's enumeration limits."""


class NoFeasibleSolution(PdptError):
    """The exact solver proved that no feasible solution exists."""


class SelectionError(PdptError):
    """Selection was asked to draw from a population with no finite-fitness member."""


class NoFeasibleMember(PdptError):
    """The genetic algorithm never found a feasible individual; carries the trace."""

    def __init__(self, trace):
        self.trace = trace
        super().__init__("no feasible individual found within the generation cap")
