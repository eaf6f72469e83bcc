"""Scale calibration of monocular SLAM from human joint depths."""

__version__ = "0.1.0"
