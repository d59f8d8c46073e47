"""Desk-scale FMCW radar toolkit.

Submodules: core (types and axis geometry), signal (DFT chain, CFAR,
MIMO), simulate (range-Doppler scene generator), annotate (mean-shift
tracking and morphology), fusion (radar-lidar propagation), metrics and
losses (segmentation numerics), io (RTF / CSV / manifests), cli.
"""

__version__ = "0.1.0"

from .core import (AxisSpec, FormatError, FusedPoint, LidarPoint, OutOfScopeError,
                   Provenance, RadTensor, RadarPoint, RadarView, SensorMode,
                   SensorSpec, ToolkitError, axis_value, bin_of,
                   nuscenes_sensor_spec)

__all__ = [
    "__version__",
    "AxisSpec", "RadTensor", "RadarView", "RadarPoint", "LidarPoint",
    "FusedPoint", "Provenance", "SensorMode", "SensorSpec",
    "ToolkitError", "FormatError", "OutOfScopeError",
    "axis_value", "bin_of", "nuscenes_sensor_spec",
]
