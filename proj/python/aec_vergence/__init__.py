"""Active efficient coding vergence control."""

from ._aec import (
    ACTIONS,
    CHECKPOINT_VERSION,
    Config,
    FormatError,
    Model,
    NumericalFault,
    disparity_tuning,
    oscillation_metric,
    plane_scene,
)

__all__ = [
    "ACTIONS",
    "CHECKPOINT_VERSION",
    "Config",
    "FormatError",
    "Model",
    "NumericalFault",
    "disparity_tuning",
    "oscillation_metric",
    "plane_scene",
]
