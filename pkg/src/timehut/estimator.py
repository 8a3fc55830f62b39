"""Scikit-learn style estimator facade over the training pipeline.

``TimeHUT`` is a transformer: ``fit`` learns the self-supervised encoder on
an ``(n, T, N)`` array of series and ``transform`` produces one max-pooled
feature vector per series, so the representations drop straight into
sklearn pipelines and downstream heads.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .data import TimeSeriesDataset
from .encoder import EncoderConfig, load_checkpoint, save_checkpoint
from .evaluation import anomaly_scores, encode_instances
from .losses import LossConfig
from .schedulers import SchedulerConfig
from .trainer import TrainConfig, train
from .validation import as_series_array, check_fitted


class TimeHUT(BaseEstimator, TransformerMixin):
    """Self-supervised time-series representation learner.

    Parameters mirror the training configuration: encoder shape
    (``hidden_dims``, ``repr_dims``, ``depth``), the combined loss
    (``ci``/``ct``/``ma`` angular weights, enable flags, optional
    ``fixed_tau``), and the temperature schedule (``scheduler``,
    ``tau_min``/``tau_max``/``period``, ``sched_params``).
    """

    def __init__(
        self,
        repr_dims: int = 320,
        hidden_dims: int = 64,
        depth: int = 10,
        lr: float = 1e-3,
        batch_size: int = 8,
        epochs: Optional[int] = None,
        ci: float = 3.0,
        ct: float = 3.0,
        ma: float = 0.5,
        enable_sched: bool = True,
        enable_angular: bool = True,
        fixed_tau: Optional[float] = None,
        scheduler: str = "cosine_squared",
        tau_min: float = 0.07,
        tau_max: float = 0.8,
        period: float = 30.0,
        sched_params: Optional[dict] = None,
        max_train_length: int = 3000,
        seed: int = 0,
    ):
        self.repr_dims = repr_dims
        self.hidden_dims = hidden_dims
        self.depth = depth
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.ci = ci
        self.ct = ct
        self.ma = ma
        self.enable_sched = enable_sched
        self.enable_angular = enable_angular
        self.fixed_tau = fixed_tau
        self.scheduler = scheduler
        self.tau_min = tau_min
        self.tau_max = tau_max
        self.period = period
        self.sched_params = sched_params
        self.max_train_length = max_train_length
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        loss = LossConfig(
            angular_margin=self.ma,
            instance_coeff=self.ci,
            temporal_coeff=self.ct,
            enable_sched=self.enable_sched,
            enable_angular=self.enable_angular,
            fixed_tau=self.fixed_tau,
        )
        sched = SchedulerConfig(
            kind=self.scheduler,
            tau_min=self.tau_min,
            tau_max=self.tau_max,
            period=self.period,
            extra=dict(self.sched_params or {}),
        )
        return TrainConfig(
            learning_rate=self.lr,
            batch_size=self.batch_size,
            epochs=self.epochs,
            loss=loss,
            scheduler=sched,
            seed=self.seed,
            max_train_length=self.max_train_length,
        )

    def fit(self, X, y=None):
        """Learn the encoder from unlabeled series; ``y`` is ignored."""
        X = as_series_array(X)
        dataset = TimeSeriesDataset(X)
        encoder_config = EncoderConfig(
            input_dims=X.shape[2],
            hidden_dims=self.hidden_dims,
            output_dims=self.repr_dims,
            depth=self.depth,
        )
        self.encoder_, self.history_ = train(dataset, encoder_config, self._train_config())
        self.n_features_in_ = X.shape[2]
        return self

    def transform(self, X) -> np.ndarray:
        """Per-series features: unmasked encoding max-pooled over time."""
        check_fitted(self, "encoder_")
        X = as_series_array(X)
        if X.shape[2] != self.n_features_in_:
            raise ValueError(
                f"fitted on {self.n_features_in_} channels, got {X.shape[2]}"
            )
        return encode_instances(self.encoder_, X, max_len=self.max_train_length)

    def score_anomalies(self, values, window: int = 64, lookback: int = 21) -> np.ndarray:
        """Streaming anomaly scores for a single series."""
        check_fitted(self, "encoder_")
        return anomaly_scores(self.encoder_, np.asarray(values, float), window, lookback)

    def save(self, path) -> None:
        check_fitted(self, "encoder_")
        save_checkpoint(self.encoder_, path)

    @classmethod
    def from_checkpoint(cls, path) -> "TimeHUT":
        """Rebuild a fitted transformer from an encoder checkpoint."""
        encoder = load_checkpoint(path)
        est = cls(
            repr_dims=encoder.config.output_dims,
            hidden_dims=encoder.config.hidden_dims,
            depth=encoder.config.depth,
        )
        est.encoder_ = encoder
        est.n_features_in_ = encoder.config.input_dims
        return est
