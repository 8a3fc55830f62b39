"""Training loop: crop-pair augmentation, encoding, loss, Adam updates.

One crop pair is drawn per batch (shared across its members) so the
instance-wise terms compare aligned timestamps.  The schedule position
``sigma`` advances once per epoch and equals the 0-based epoch index.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from .data import TimeSeriesDataset, sample_crop_pair, segment_long_series
from .encoder import EncoderConfig, TimeSeriesEncoder
from .losses import LossConfig, hierarchical_angular_loss, hierarchical_sched_loss
from .schedulers import SchedulerConfig, tau_at

SMALL_DATASET_TIMESTAMPS = 100_000
EPOCHS_SMALL = 200
EPOCHS_LARGE = 600


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: Optional[int] = None  # None -> size-based rule
    loss: LossConfig = field(default_factory=LossConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    seed: int = 0
    max_train_length: int = 3000

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class EpochRecord:
    epoch: int
    tau: float
    total: float
    sched: float
    angular: float
    seconds: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final_loss(self) -> float:
        return self.records[-1].total

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "tau", "total", "sched", "angular", "seconds"])
            for r in self.records:
                writer.writerow([r.epoch, r.tau, r.total, r.sched, r.angular, r.seconds])


class TrainingDiverged(RuntimeError):
    """Raised when the loss turns non-finite; carries the failure site."""

    def __init__(self, epoch: int, batch_index: int, tau: float):
        self.epoch = epoch
        self.batch_index = batch_index
        self.tau = tau
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch_index}, tau={tau:.6g}"
        )


def resolve_epochs(dataset: TimeSeriesDataset, override: Optional[int] = None) -> int:
    """Size-based epoch count: 200 below 100k total timestamps, else 600."""
    if override is not None:
        return int(override)
    return EPOCHS_SMALL if dataset.total_timestamps < SMALL_DATASET_TIMESTAMPS else EPOCHS_LARGE


def _training_array(dataset: TimeSeriesDataset, max_train_length: int) -> np.ndarray:
    """Stack samples, splitting series longer than ``max_train_length``.

    Tail segments shorter than the segment length are NaN-padded so the
    result stays rectangular; the encoder masks padded positions.
    """
    samples = dataset.samples
    if samples.shape[1] <= max_train_length:
        return samples
    pieces = []
    for i in range(samples.shape[0]):
        pieces.extend(segment_long_series(samples[i], max_train_length))
    width = max(len(p) for p in pieces)
    out = np.full((len(pieces), width, samples.shape[2]), np.nan)
    for j, piece in enumerate(pieces):
        out[j, : len(piece)] = piece
    return out


def train(
    dataset: TimeSeriesDataset,
    encoder_config: EncoderConfig,
    train_config: TrainConfig,
) -> tuple[TimeSeriesEncoder, TrainHistory]:
    """Fit an encoder on ``dataset``; deterministic given the config seed."""
    cfg = train_config
    if not cfg.loss.enable_sched and not cfg.loss.enable_angular:
        raise ValueError("both loss terms disabled: refusing to train without an objective")
    if dataset.n < 1:
        raise ValueError("dataset is empty")
    if encoder_config.input_dims != dataset.channels:
        raise ValueError(
            f"encoder expects {encoder_config.input_dims} channels, dataset has {dataset.channels}"
        )

    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)
    encoder = TimeSeriesEncoder(encoder_config)
    encoder.train()
    optimizer = torch.optim.Adam(encoder.parameters(), lr=cfg.learning_rate, betas=(0.9, 0.999))

    samples = _training_array(dataset, cfg.max_train_length)
    n, T, _ = samples.shape
    if T < 2:
        raise ValueError(f"series too short to crop (T={T})")
    epochs = resolve_epochs(dataset, cfg.epochs)
    fixed_tau = cfg.loss.fixed_tau

    history = TrainHistory()
    for epoch in range(epochs):
        sigma = epoch
        tau = tau_at(cfg.scheduler, float(sigma))
        effective_tau = fixed_tau if fixed_tau is not None else tau
        started = time.perf_counter()
        sums = np.zeros(3)
        order = rng.permutation(n)
        batches = [order[i : i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
        for batch_index, idx in enumerate(batches):
            crop = sample_crop_pair(T, rng)
            x = samples[idx]
            x1 = torch.as_tensor(x[:, crop.a1 : crop.b1], dtype=torch.float32)
            x2 = torch.as_tensor(x[:, crop.a2 : crop.b2], dtype=torch.float32)
            z1 = encoder(x1, mask_mode="binomial", rng=rng)
            z2 = encoder(x2, mask_mode="binomial", rng=rng)
            if not (torch.isfinite(z1).all() and torch.isfinite(z2).all()):
                raise TrainingDiverged(epoch, batch_index, effective_tau)

            sched = (
                hierarchical_sched_loss(z1, z2, crop, effective_tau)
                if cfg.loss.enable_sched
                else z1.new_zeros(())
            )
            angular = (
                hierarchical_angular_loss(z1, z2, crop, cfg.loss)
                if cfg.loss.enable_angular
                else z1.new_zeros(())
            )
            loss = sched + angular
            if not torch.isfinite(loss):
                raise TrainingDiverged(epoch, batch_index, effective_tau)

            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            sums += (loss.item(), sched.item(), angular.item())

        means = sums / len(batches)
        history.append(
            EpochRecord(
                epoch=epoch,
                tau=effective_tau,
                total=means[0],
                sched=means[1],
                angular=means[2],
                seconds=time.perf_counter() - started,
            )
        )

    encoder.eval()
    return encoder, history
