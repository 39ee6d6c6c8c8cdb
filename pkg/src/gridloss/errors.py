"""Exception types shared across the toolkit."""


class GridlossError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(GridlossError, ValueError):
    """Invalid user-supplied value (parameter, graph definition, config)."""


class DisconnectedGraphError(GridlossError):
    """Graph is not connected, or a Laplacian has more than one zero mode."""


class EdgeListParseError(GridlossError):
    """Malformed edge-list file; message carries the offending line number."""


class GraphGenerationError(GridlossError):
    """Random graph generation failed to produce a connected sample."""


class AssemblyError(GridlossError):
    """State-space assembly requested outside its validity region."""


class StabilityError(GridlossError):
    """A computation that requires asymptotic stability met a marginal or
    unstable mode."""


class LyapunovSolveError(GridlossError):
    """Lyapunov solve produced a residual above tolerance."""


class TuningError(GridlossError):
    """Gain optimization could not bracket a stationary point."""


class StepSizeError(GridlossError):
    """Integration step too large for the system's fastest mode."""
