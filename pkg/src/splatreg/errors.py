"""Exception types shared across the toolkit."""


class SplatRegError(Exception):
    """Base class for all toolkit errors."""


class FormatError(SplatRegError):
    """A file does not follow the expected layout; the message names the offending part."""


class EmptyCloudError(SplatRegError):
    """An operation received or produced a point cloud with no usable points."""


class NoOverlapError(SplatRegError):
    """Descriptor matching produced zero correspondences."""


class RegistrationFailureError(SplatRegError):
    """No transform hypothesis reached the minimum inlier support."""


class InsufficientOverlapError(SplatRegError):
    """Camera overlap selection found no pair with usable shared view."""


class DegenerateGeometryError(SplatRegError):
    """Input geometry does not constrain the requested estimate (e.g. colinear points)."""
