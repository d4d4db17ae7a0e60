"""Frame-based keypoint detection and matching exported as SEKP/SEMT files."""

from .classical import ClassicalConfig, detect_and_describe
from .export import ExportConfig, export_sequence, match_frames
from .formats import (
    FrameKeypoints,
    FrameMatches,
    read_sekp,
    read_semt,
    write_sekp,
    write_semt,
)
from .frames import discover_frames, load_gray
from .matching import match_mutual

__version__ = "0.1.0"
