"""Spatiotemporal analysis and activity-tier partitioning of cell-grid
internet activity records."""

from .analysis import AcfResult, AcfUndefinedError, CorrelationMap, acf, pearson, spatial_corr_map
from .classifier import (
    ClassifierModel,
    DegenerateSplitError,
    TrainingReport,
    evaluate,
    forward,
    init_model,
    load_model,
    loss,
    save_model,
    train,
)
from .clustering import (
    ClusterModel,
    FeatureMatrix,
    KSelectionReport,
    extract_features,
    kmeans,
    score_k,
    tier_labels,
    tier_ranks,
    zscore_normalize,
)
from .cube import (
    MILAN_GRID,
    ActivityCube,
    AlignmentError,
    GridSpec,
    build_cube,
    downsample,
    hourly,
    slot_aggregate,
    stream_cube,
)
from .ingest import (
    GAP,
    ActivityRecord,
    RecordParseError,
    TimeSeries,
    UnimputableSeriesError,
    impute_gaps,
    parse_records,
    series_by_cell,
    to_series,
    write_records,
)
from .synth import SynthConfig, generate

__version__ = "0.1.0"
