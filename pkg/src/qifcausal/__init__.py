"""Quantitative information flow features for pairwise causal discovery."""

from .channel import (
    BandwidthRule,
    Channel,
    Distribution,
    FlowDirection,
    JointDistribution,
    discretize_numeric,
    estimate_joint_categorical,
    estimate_joint_kde,
    joint_to_prior_channel,
)
from .datasets import (
    DataSource,
    PairDataset,
    PairLabel,
    generate_synthetic_anm,
    load_challenge,
    load_tuebingen,
    randomize_directions,
)
from .features import (
    FEATURE_NAMES,
    ExtractionConfig,
    FeatureVector,
    VariableKind,
    VariablePair,
    extract_features,
    feature_matrix,
    select_bins,
)
from .gbdt import BoostedModel, TrainConfig, feature_importance, fit, predict, predict_proba
from .measures import (
    GainFunction,
    LeakageMode,
    MeasureKind,
    bayes_capacity,
    leakage,
    posterior_measure,
    prior_measure,
)

__version__ = "0.1.0"
