"""Event-stream keypoint toolkit.

Time-surface representations, detector decoding and NMS, descriptor
matching, training-pair generation, reference loss math, and the
rotation-change pose-estimation benchmark, tied together by a CLI with a
pluggable prediction provider.
"""

from .detection import Keypoint, decode_cells, detect, nms_local_maxima
from .epipolar import PoseEstimate, RansacConfig, eight_point, estimate_relative_pose
from .events import (
    CameraIntrinsics,
    Event,
    EventStream,
    FormatError,
    PoseStamped,
    read_events,
    read_intrinsics,
    read_trajectory,
    write_events,
)
from .labelgen import LabelGenConfig, LabelPair, generate_pairs, median_displacement, rasterize_targets
from .losses import (
    DescriptorTarget,
    DetectorTarget,
    LossConfig,
    descriptor_loss,
    detector_loss,
    total_loss,
)
from .matching import (
    KeypointSet,
    MatchSet,
    match_mutual_nn,
    normalize_grid,
    read_keypoints,
    read_matches,
    sample_descriptor,
    sample_descriptors,
    write_keypoints,
    write_matches,
)
from .posebench import (
    BenchConfig,
    BenchmarkReport,
    PoseSample,
    auc,
    rotation_error,
    run_benchmark,
    select_samples,
    undistort,
)
from .providers import RefNetProvider, SekpDirectoryProvider
from .refnet import Prediction, RefNet
from .representation import (
    DEFAULT_WINDOWS,
    ActiveEventSurface,
    Mcts,
    TimeWindowSet,
    build_mcts,
    mcts_from_aes,
    read_mcts,
    time_surface,
    write_mcts,
)

__version__ = "0.1.0"
