"""Room geometry inference from multi-channel room impulse responses."""

__version__ = "0.1.0"

from . import errors  # noqa: F401
from .dataset import (  # noqa: F401
    DatasetManifest,
    SampleRecord,
    compute_loss,
    generate,
    iter_split,
    read_manifest,
    read_sample,
)
from .estimator import (  # noqa: F401
    EstimatorConfig,
    estimate_labels,
    estimate_labels_verbose,
    infer_room,
    read_predictions,
    write_predictions,
)
from .geometry import (  # noqa: F401
    WALL_ORDER,
    SIDE_WALLS,
    LabelVector,
    MicPose,
    PolarPoint,
    RoomConstraints,
    RoomGeometry,
    Wall,
    floor_ceiling_distance,
    labels_from_room,
    polar_projection,
    reflect_point,
    room_from_labels,
    sample_room,
    sidewall_candidates,
    wall_from_image_pair,
)
from .metrics import (  # noqa: F401
    AggregateReport,
    aggregate,
    render_report,
    room_error,
    wall_error,
)
from .radon import (  # noqa: F401
    RadonGrid,
    RadonMap,
    build_steering,
    radon_map,
    read_map,
    write_map,
)
from .simulator import (  # noqa: F401
    RIRSet,
    SimParams,
    ULAConfig,
    enumerate_images,
    read_rir_set,
    simulate_rirs,
    synthesize_rir,
    write_rir_set,
)
