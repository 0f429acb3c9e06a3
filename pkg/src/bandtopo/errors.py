"""Exception types shared across the package.

Obstruction-type exceptions (ParityObstruction, ObstructedLoop) signal
theorems speaking, not numerical failure; callers are expected to treat
them as legitimate outcomes.
"""


class BandTopoError(Exception):
    """Base class for all package errors."""


class InvalidInput(BandTopoError):
    """Input violates a documented precondition (shape, hermiticity, parity...)."""


class SingularFactor(BandTopoError):
    """PSD factor has an eigenvalue below the floor; projectors too far apart."""


class BranchCutFailure(BandTopoError):
    """No branch cut direction with sufficient spectral margin was found."""


class RefinementNeeded(BandTopoError):
    """Sampling too coarse for a safe principal-branch step.

    Carries ``axis`` ('t', 'k2' or None) so pipelines can refine only the
    offending direction.
    """

    def __init__(self, message, axis=None):
        super().__init__(message)
        self.axis = axis


class Unresolved(BandTopoError):
    """Refinement ladder exhausted without reaching a stable answer."""


class ObstructedLoop(BandTopoError):
    """Loop has nonzero determinant winding; no contraction exists."""


class ContractionFailure(BandTopoError):
    """Antipode collisions persisted through all retry rotations."""


class TooFar(BandTopoError):
    """Projector pair at operator distance >= 1; intertwiner undefined."""


class GapClosed(BandTopoError):
    """Spectral gap below threshold at some quasi-momentum."""

    def __init__(self, k_point, gap):
        super().__init__(
            f"gap {gap:.3e} below threshold near k = ({k_point[0]:+.6f}, {k_point[1]:+.6f})"
        )
        self.k_point = tuple(k_point)
        self.gap = gap


class ModelConstructionError(BandTopoError):
    """A model failed its build-time self checks."""


class GenerationFailed(BandTopoError):
    """Rejection sampling budget exhausted while drawing a gapped model."""


class SymmetryBroken(BandTopoError):
    """A time-reversal constraint residual exceeded its tolerance."""


class OddQuaternionicDimension(BandTopoError):
    """Kramers-paired bases require even complex dimension."""


class NotInvariant(BandTopoError):
    """Subspace is not invariant under the antiunitary symmetry."""


class IntegralityViolation(BandTopoError):
    """A quantity that must land on the integer lattice did not."""


class ParityObstruction(BandTopoError):
    """Requested splitting parity is incompatible with the Z2 invariant."""

    def __init__(self, delta, h):
        super().__init__(
            f"splitting with Ch(P-) = {h} requires delta = {(-1) ** (h % 2):+d}, "
            f"but delta(P) = {delta:+d}"
        )
        self.delta = delta
        self.h = h


class ConfigError(BandTopoError):
    """Run configuration failed to validate."""
