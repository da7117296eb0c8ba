"""contour-lab: do melodic phrase contours form discrete types?

The package turns symbolic melodies into fixed-length contour vectors,
samples pairwise distances under several representations and metrics, and
asks whether those distance distributions are multimodal (which discrete
contour types would imply). It also provides the classic discrete typologies
with tolerance calibration, synthetic control corpora, and a reproducible
experiment pipeline with SVG figures.
"""

from .contour import (
    DEFAULT_N,
    REPRESENTATIONS,
    ContourVector,
    MissingMetadataError,
    contour_matrix,
    cosine_contour,
    dct_basis,
    intervals,
    phrase_to_contour,
    read_contours,
    standardize,
    step_curve_sample,
    write_contours,
)
from .embed import PcaModel, UmapModel, pca, umap, umap_transform
from .ingest import (
    Melody,
    Note,
    ParseError,
    Phrase,
    UnsupportedInputError,
    aggregate_sample,
    derive_rng,
    derive_seed,
    extract_phrases,
    load_kern_dir,
    parse_kern,
    random_segments,
    read_melodies,
    read_phrases,
    read_phrases_or_melodies,
    segment_corpus,
    write_melodies,
    write_phrases,
)
from .metrics import METRICS, DistanceSample, dtw, euclidean, pairwise_sample
from .pipeline import (
    VERSION,
    ConfigError,
    ExperimentConfig,
    Report,
    load_config,
    parse_config,
    read_report,
    run_experiment,
    write_report,
)
from .render import render_average, render_epsilon, render_grid, render_panel
from .stats import DipResult, KdeCurve, dip_statistic, dip_test, dist_dip_test, kde
from .synth import MarkovContourModel, make_clustered, sample_uniform
from .typology import (
    ADAMS_LABELS,
    AXIS_PATTERNS,
    HURON_LABELS,
    AverageContour,
    EpsilonSweep,
    KMeansResult,
    TypeDistribution,
    adams_type,
    average_contour,
    axis_pattern,
    huron_type,
    kmeans,
    max_entropy_epsilon,
    type_distribution,
)

__version__ = VERSION

__all__ = [
    "__version__",
    "VERSION",
    # ingest
    "Note",
    "Melody",
    "Phrase",
    "ParseError",
    "UnsupportedInputError",
    "parse_kern",
    "extract_phrases",
    "random_segments",
    "segment_corpus",
    "aggregate_sample",
    "load_kern_dir",
    "read_melodies",
    "write_melodies",
    "read_phrases",
    "write_phrases",
    "read_phrases_or_melodies",
    "derive_rng",
    "derive_seed",
    # contour
    "ContourVector",
    "MissingMetadataError",
    "REPRESENTATIONS",
    "DEFAULT_N",
    "step_curve_sample",
    "standardize",
    "intervals",
    "cosine_contour",
    "phrase_to_contour",
    "contour_matrix",
    "dct_basis",
    "read_contours",
    "write_contours",
    # synth
    "MarkovContourModel",
    "sample_uniform",
    "make_clustered",
    # metrics
    "METRICS",
    "DistanceSample",
    "euclidean",
    "dtw",
    "pairwise_sample",
    # stats
    "DipResult",
    "KdeCurve",
    "dip_statistic",
    "dip_test",
    "dist_dip_test",
    "kde",
    # embed
    "PcaModel",
    "UmapModel",
    "pca",
    "umap",
    "umap_transform",
    # typology
    "HURON_LABELS",
    "ADAMS_LABELS",
    "AXIS_PATTERNS",
    "axis_pattern",
    "TypeDistribution",
    "EpsilonSweep",
    "KMeansResult",
    "AverageContour",
    "huron_type",
    "adams_type",
    "type_distribution",
    "max_entropy_epsilon",
    "kmeans",
    "average_contour",
    # pipeline
    "ConfigError",
    "ExperimentConfig",
    "Report",
    "load_config",
    "parse_config",
    "run_experiment",
    "write_report",
    "read_report",
    # render
    "render_grid",
    "render_panel",
    "render_epsilon",
    "render_average",
]
