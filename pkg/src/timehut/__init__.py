"""Self-supervised time-series representation learning with
temperature-scheduled hierarchical contrastive and angular-margin losses."""

from .data import (
    AnomalySeries,
    CropPair,
    TimeSeriesDataset,
    load_anomaly_csv,
    load_ucr_tsv,
    load_uea_ts,
    normalize,
    sample_crop_pair,
    segment_long_series,
)
from .encoder import EncoderConfig, TimeSeriesEncoder, generate_mask, load_checkpoint, save_checkpoint
from .estimator import TimeHUT
from .evaluation import (
    EvalResult,
    anomaly_eval,
    anomaly_scores,
    classify_eval,
    cold_start_eval,
    encode_instances,
    forecast_eval,
    tolerance,
    uniformity,
)
from .comparison import ComparisonResult, compare_models, wilcoxon_signed_rank
from .hpo import SearchSpace, search
from .losses import (
    LossConfig,
    hierarchical_angular_loss,
    hierarchical_contrastive_baseline,
    hierarchical_sched_loss,
    instance_angular,
    instance_contrastive,
    temporal_angular,
    temporal_contrastive,
    total_loss,
)
from .schedulers import SchedulerConfig, make_schedule, tau_at
from .trainer import TrainConfig, TrainHistory, resolve_epochs, train

__version__ = "0.1.0"

__all__ = [
    "AnomalySeries",
    "ComparisonResult",
    "CropPair",
    "EncoderConfig",
    "EvalResult",
    "LossConfig",
    "SchedulerConfig",
    "SearchSpace",
    "TimeHUT",
    "TimeSeriesDataset",
    "TimeSeriesEncoder",
    "TrainConfig",
    "TrainHistory",
    "anomaly_eval",
    "anomaly_scores",
    "classify_eval",
    "cold_start_eval",
    "compare_models",
    "encode_instances",
    "forecast_eval",
    "generate_mask",
    "hierarchical_angular_loss",
    "hierarchical_contrastive_baseline",
    "hierarchical_sched_loss",
    "instance_angular",
    "instance_contrastive",
    "load_anomaly_csv",
    "load_checkpoint",
    "load_ucr_tsv",
    "load_uea_ts",
    "make_schedule",
    "normalize",
    "resolve_epochs",
    "sample_crop_pair",
    "save_checkpoint",
    "search",
    "segment_long_series",
    "tau_at",
    "temporal_angular",
    "temporal_contrastive",
    "tolerance",
    "total_loss",
    "train",
    "uniformity",
    "wilcoxon_signed_rank",
]
