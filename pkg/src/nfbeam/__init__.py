"""Near-field beam focusing and tracking with dynamic metasurface antennas."""

from .analytics import BeamAnalytics, FocusWindow
from .errors import ConfigurationError, DomainError
from .geometry import DmaGeometry, PolarPosition, field_regions

__all__ = [
    "BeamAnalytics",
    "ConfigurationError",
    "DmaGeometry",
    "DomainError",
    "FocusWindow",
    "PolarPosition",
    "field_regions",
]
__version__ = "0.1.0"
