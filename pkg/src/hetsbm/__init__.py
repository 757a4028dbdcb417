"""Heterophilous stochastic block models and separability gains of graph convolutions."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AssumptionViolation,
    ConfigError,
    DegeneratePattern,
    DimensionError,
    EmptyClass,
    HsbmError,
    InfeasibleModel,
    OutOfRange,
    ParseError,
    ShapeError,
)
from .hsbm import (  # noqa: E402
    GraphSample,
    HsbmParams,
    derive_edge_probabilities,
    pattern_family_a,
    pattern_family_group,
    pattern_family_homophilous,
    pattern_from_spec,
    sample_features,
    sample_graph,
    sample_hsbm,
    sample_labels,
)
from .bundle import load_bundle, save_bundle  # noqa: E402
from .theory import GainReport, SeparabilityInputs  # noqa: E402
from .aggregate import AggregationConfig, aggregate_l, aggregate_once  # noqa: E402
from .classify import TrainConfig, train_gcn, train_mlp  # noqa: E402
from .analyze import audit, load_graph  # noqa: E402
