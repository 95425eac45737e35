"""Exception types shared across the package."""


class ViewPlanError(Exception):
    """Base class for all viewplan errors."""


class MeshFormatError(ViewPlanError):
    """A mesh file could not be parsed."""


class EmptySceneError(ViewPlanError):
    """A mesh contains no usable faces."""


class MeshDegradationError(ViewPlanError):
    """Decimation would collapse the mesh below a usable size."""


class DegenerateClusterError(ViewPlanError):
    """A face cluster cannot support a viewing rectangle (e.g. its mean
    normal cancels to zero and its points span no plane)."""


class BudgetExhaustedError(ViewPlanError):
    """The remaining view budget cannot accommodate another planning pass.

    ``partial_plan`` carries whatever trajectory could still be built, or
    None when nothing fits.
    """

    def __init__(self, message, partial_plan=None):
        super().__init__(message)
        self.partial_plan = partial_plan


class CertificateViolationError(ViewPlanError):
    """A constructed tour failed its own length-bound certificate."""


class DisconnectedTreeError(ViewPlanError):
    """The spanning tree handed to the stitcher does not connect all grids."""
