"""Dual-modal EEG/EMG prosthetic control: signal pipelines, link protocol, actuation and simulator."""

from .config import SimConfig
from .signal import Quality, TimedSample, compute_alpha, filter_step, make_windows

__all__ = ["SimConfig", "Quality", "TimedSample", "compute_alpha", "filter_step", "make_windows"]
__version__ = "0.1.0"
