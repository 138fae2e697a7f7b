"""Registration and fusion toolkit for Gaussian-splat scene models."""

from .errors import (
    DegenerateGeometryError,
    EmptyCloudError,
    FormatError,
    InsufficientOverlapError,
    NoOverlapError,
    RegistrationFailureError,
    SplatRegError,
)
from .gs_model import (
    CameraPose,
    ColoredPointCloud,
    Gaussian,
    GaussianModel,
    Sim3,
    extract_confident_points,
    load_cameras,
    load_ply,
    model_center,
    save_cameras,
    save_ply,
    sh_dc_to_color,
)

__version__ = "0.1.0"
