"""Exception hierarchy shared by every subpackage.

CLI exit codes map onto these: validation 2, solve 3, certification 4.
"""


class FleetFlowError(Exception):
    exit_code = 1


class ValidationError(FleetFlowError, ValueError):
    """Bad instance, plan, argument or file content."""
    exit_code = 2


class EstimationError(ValidationError):
    """Order data too degenerate to fit."""


class SolveError(FleetFlowError):
    """The LP could not be solved to a certified optimum."""
    exit_code = 3


class CertificationError(FleetFlowError):
    """A plan/certificate pair failed the KKT check."""
    exit_code = 4
