"""Shared exception types.

Numerical gates raise instead of degrading silently: a field that breaches its
boundary-mass budget, a trajectory that leaves the resolved region, or a run
whose conserved quantities drift past tolerance all abort with one of these.
"""


class ConfigError(ValueError):
    """Invalid configuration (bad grid size, non-elliptic jumps, ...)."""


class BoundaryMassError(RuntimeError):
    """Too much L1 mass in the outer band of the periodic box."""

    def __init__(self, fraction, threshold, when=None):
        self.fraction = fraction
        self.threshold = threshold
        self.when = when
        msg = f"boundary mass fraction {fraction:.3e} exceeds threshold {threshold:.3e}"
        if when is not None:
            msg += f" at t={when:.6g}"
        super().__init__(msg)


class FlowEscapeError(RuntimeError):
    """A characteristic left the configured escape radius."""


class GridMismatchError(ValueError):
    """Two fields/operators live on different grids."""


class NumericalGateError(RuntimeError):
    """A conservation or positivity gate failed mid-run."""

    def __init__(self, message, when=None):
        self.when = when
        super().__init__(message)


class DecompositionError(RuntimeError):
    """A dense decomposition (SVD/eig) did not converge."""
