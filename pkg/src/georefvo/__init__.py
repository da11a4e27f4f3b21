"""Georeferencing and evaluation of stereo visual odometry against 1 Hz GPS."""
from .geo import GpsFix, LocalTrack, local_to_wgs84, wgs84_to_local
from .metrics import MetricReport, evaluate
from .registration import Alignment, Registration, RegistrationError, TimeOffset, register
from .trajectory import DegenerateIncrementError, Pose, Trajectory, accumulate
from .vocore import ClampPolicy, MotionEstimationError, run_vo

__all__ = [
    "GpsFix", "LocalTrack", "local_to_wgs84", "wgs84_to_local",
    "MetricReport", "evaluate",
    "Alignment", "Registration", "RegistrationError", "TimeOffset", "register",
    "DegenerateIncrementError", "Pose", "Trajectory", "accumulate",
    "ClampPolicy", "MotionEstimationError", "run_vo",
]
