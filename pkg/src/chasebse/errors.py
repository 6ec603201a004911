"""Exception hierarchy shared by all chasebse modules."""


class ChaseBSEError(Exception):
    """Base class for errors raised by chasebse."""


class DimensionError(ChaseBSEError, ValueError):
    """Operand shapes do not conform."""


class NotHermitianError(ChaseBSEError, ValueError):
    """Input matrix deviates from Hermitian symmetry beyond tolerance."""


class RankDeficiencyError(ChaseBSEError):
    """A block of vectors is numerically rank deficient."""

    def __init__(self, column, diag, threshold):
        self.column = column
        self.diag = diag
        self.threshold = threshold
        super().__init__(
            f"column {column} is numerically dependent "
            f"(|R[{column},{column}]| = {diag:.3e} < {threshold:.3e})")


class DegenerateIntervalError(ChaseBSEError, ValueError):
    """Filter interval has zero width."""


class InsideIntervalError(ChaseBSEError, ValueError):
    """Damping is undefined for points inside the filtered interval."""


class LanczosBreakdownError(ChaseBSEError):
    """Lanczos could not produce usable spectral bounds."""


class PartialConvergenceError(ChaseBSEError):
    """Iteration budget exhausted before all wanted pairs converged.

    The converged subset is available on ``result``.
    """

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


class EmptyBasisError(ChaseBSEError, ValueError):
    """Energy cutoff selects no electron-hole pairs."""


class FitError(ChaseBSEError, ValueError):
    """Linear extrapolation is not defined for the given points."""


class LayoutError(ChaseBSEError, ValueError):
    """Rank layout or file coverage is inconsistent."""


class FormatError(ChaseBSEError, ValueError):
    """Striped matrix file is corrupt or of an unknown version."""


class ChecksumMismatch(ChaseBSEError):
    """Reassembled matrix does not match the recorded checksum."""
