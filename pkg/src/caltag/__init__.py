"""Radar-LiDAR extrinsic calibration with a Doppler-shifting backscatter tag."""

from .calibrate import Correspondences, Transform2D, calibration_rmse, kabsch_2d
from .config import RadarConfig, load_config
from .detect import CalTagParams, Detection, NotFoundError, detect_caltag, detect_corner_reflector
from .radar_sim import DataCube, Scatterer, Scene, TagModel, synthesize_frame

__version__ = "0.1.0"

__all__ = [
    "CalTagParams",
    "Correspondences",
    "DataCube",
    "Detection",
    "NotFoundError",
    "RadarConfig",
    "Scatterer",
    "Scene",
    "TagModel",
    "Transform2D",
    "calibration_rmse",
    "detect_caltag",
    "detect_corner_reflector",
    "kabsch_2d",
    "load_config",
    "synthesize_frame",
]
