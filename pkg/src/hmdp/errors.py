"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: contract errors are configuration
problems (2), numeric and capability errors are solver problems (3) and
resource errors signal exhausted budgets (4).
"""


class HmdpError(Exception):
    """Base class for every error raised by this package."""

    category = "error"


class ContractError(HmdpError, ValueError):
    """An input violates a documented precondition."""

    category = "contract"


class DomainError(ContractError):
    """A special function was called outside its domain."""

    category = "domain"


class ModelEvaluationError(HmdpError, ArithmeticError):
    """A model expression produced an invalid parameter (e.g. alpha <= 0)."""

    category = "numeric"


class CapabilityError(HmdpError, NotImplementedError):
    """No closed-form expectation exists for a basis/transition pairing."""

    category = "capability"


class ResourceError(HmdpError, MemoryError):
    """A table or grid would exceed its configured size cap."""

    category = "resource"


class DegenerateGridError(HmdpError, ArithmeticError):
    """A grid point has zero total transition mass after normalization."""

    category = "numeric"


class FittingError(HmdpError, ArithmeticError):
    """A least-squares design matrix is rank deficient."""

    category = "numeric"
