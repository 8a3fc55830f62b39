"""Downstream protocols: classification, anomaly detection, forecasting,
and embedding-geometry diagnostics.

All protocols are read-only over a trained encoder.  Instance features are
max-pooled over time; streaming scores come from trailing context windows
encoded with and without their final timestamp.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import torch
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.linear_model import Ridge
from sklearn.metrics import average_precision_score
from sklearn.model_selection import GridSearchCV, StratifiedKFold
from sklearn.svm import SVC

from .data import AnomalySeries, TimeSeriesDataset
from .encoder import TimeSeriesEncoder


@dataclass
class EvalResult:
    """Metric bundle for one evaluation run."""

    task: str
    metrics: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        bounded = ("accuracy", "auprc", "f1", "precision", "recall")
        for key in bounded:
            if key in self.metrics and not (0.0 <= self.metrics[key] <= 1.0):
                raise ValueError(f"{key}={self.metrics[key]} outside [0, 1]")

    def to_json(self) -> str:
        return json.dumps({"task": self.task, "metrics": self.metrics, "metadata": self.metadata})


def _as_batched(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    return values


def _forward_numpy(encoder: TimeSeriesEncoder, batch: np.ndarray, mask_mode: str) -> np.ndarray:
    dtype = next(encoder.parameters()).dtype
    with torch.no_grad():
        out = encoder(torch.as_tensor(batch, dtype=dtype), mask_mode=mask_mode)
    return out.numpy()


def encode_instances(
    encoder: TimeSeriesEncoder,
    data: TimeSeriesDataset | np.ndarray,
    max_len: int = 3000,
    batch_size: int = 32,
) -> np.ndarray:
    """Per-sample features: unmasked forward, then max-pool over time.

    Series longer than ``max_len`` are encoded in consecutive segments and
    the segment-level maxima pooled again, bounding encoder memory.
    """
    samples = data.samples if isinstance(data, TimeSeriesDataset) else np.asarray(data, float)
    if samples.ndim == 2:
        samples = samples[:, :, None]
    was_training = encoder.training
    encoder.eval()
    try:
        pooled = []
        for start in range(0, samples.shape[0], batch_size):
            batch = samples[start : start + batch_size]
            parts = []
            for seg_start in range(0, batch.shape[1], max_len):
                seg = batch[:, seg_start : seg_start + max_len]
                reps = _forward_numpy(encoder, seg, "all_true")
                parts.append(reps.max(axis=1))
            pooled.append(np.max(parts, axis=0) if len(parts) > 1 else parts[0])
        return np.concatenate(pooled, axis=0)
    finally:
        encoder.train(was_training)


def trailing_window_representations(
    encoder: TimeSeriesEncoder,
    values: np.ndarray,
    window: int,
    mask_mode: str = "all_true",
    batch_size: int = 128,
) -> np.ndarray:
    """Final-timestep representation of every length-``window`` trailing slice.

    Row ``k`` encodes ``values[k : k + window]``, i.e. the context ending at
    timestamp ``t = k + window - 1``.
    """
    values = _as_batched(values)
    L = len(values)
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    if L < window:
        raise ValueError(f"series of length {L} is shorter than window {window}")
    windows = sliding_window_view(values, window, axis=0)  # (L-window+1, N, window)
    windows = np.ascontiguousarray(windows.transpose(0, 2, 1))
    was_training = encoder.training
    encoder.eval()
    try:
        chunks = []
        for start in range(0, len(windows), batch_size):
            reps = _forward_numpy(encoder, windows[start : start + batch_size], mask_mode)
            chunks.append(reps[:, -1, :])
        return np.concatenate(chunks, axis=0)
    finally:
        encoder.train(was_training)


# ---------------------------------------------------------------------------
# classification


def classify_eval(
    train_features: np.ndarray,
    train_labels: np.ndarray,
    test_features: np.ndarray,
    test_labels: np.ndarray,
    seed: int = 0,
) -> EvalResult:
    """RBF-kernel classification on frozen features.

    The penalty is picked from ``10**-4 .. 10**4`` by stratified
    cross-validation on the training split (folds capped by the smallest
    class); reports accuracy and macro one-vs-rest AUPRC.
    """
    train_features = np.asarray(train_features, float)
    test_features = np.asarray(test_features, float)
    train_labels = np.asarray(train_labels)
    test_labels = np.asarray(test_labels)
    classes, counts = np.unique(train_labels, return_counts=True)
    if len(classes) < 2:
        raise ValueError("training split has a single class; nothing to separate")

    grid = [10.0**k for k in range(-4, 5)]
    folds = int(min(5, counts.min()))
    if folds >= 2:
        cv = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
        search = GridSearchCV(SVC(kernel="rbf"), {"C": grid}, cv=cv)
        search.fit(train_features, train_labels)
        clf = search.best_estimator_
    else:
        clf = SVC(kernel="rbf", C=1.0).fit(train_features, train_labels)

    predictions = clf.predict(test_features)
    accuracy = float(np.mean(predictions == test_labels))

    scores = clf.decision_function(test_features)
    if scores.ndim == 1:
        scores = np.column_stack([-scores, scores])
    onehot = (test_labels[:, None] == classes[None, :]).astype(float)
    auprc = float(average_precision_score(onehot, scores, average="macro"))
    return EvalResult(
        task="classification",
        metrics={"accuracy": accuracy, "auprc": auprc},
        metadata={"seed": seed, "C": float(getattr(clf, "C", 1.0)), "folds": folds},
    )


# ---------------------------------------------------------------------------
# anomaly detection


def masked_unmasked_distances(
    encoder: TimeSeriesEncoder, values: np.ndarray, window: int
) -> np.ndarray:
    """Raw per-timestamp score: L1 gap between hidden-last and full encodings.

    The first ``window - 1`` positions have no complete context window and
    are backfilled with the first computable score.
    """
    full = trailing_window_representations(encoder, values, window, "all_true")
    masked = trailing_window_representations(encoder, values, window, "mask_last")
    distances = np.abs(full - masked).sum(axis=1)
    out = np.empty(len(_as_batched(values)))
    out[: window - 1] = distances[0]
    out[window - 1 :] = distances
    return out


def locally_normalized(raw: np.ndarray, lookback: int = 21, eps: float = 1e-8) -> np.ndarray:
    """Drift-robust score: deviation from the trailing mean, in units of it."""
    raw = np.asarray(raw, float)
    out = np.zeros_like(raw)
    csum = np.concatenate([[0.0], np.cumsum(raw)])
    for t in range(1, len(raw)):
        lo = max(0, t - lookback)
        mean = (csum[t] - csum[lo]) / (t - lo)
        out[t] = (raw[t] - mean) / max(mean, eps)
    return out


def anomaly_scores(
    encoder: TimeSeriesEncoder, values: np.ndarray, window: int, lookback: int = 21
) -> np.ndarray:
    """Locally normalized masked-vs-unmasked divergence scores."""
    return locally_normalized(masked_unmasked_distances(encoder, values, window), lookback)


def adjust_alarms(alarms: np.ndarray, labels: np.ndarray, delay: int = 7) -> np.ndarray:
    """Delay-tolerant credit assignment over ground-truth anomaly segments.

    A contiguous labeled segment counts fully detected when an alarm fires
    within its first ``delay`` points; the whole segment is then marked,
    otherwise cleared.  Alarms outside true segments are left unchanged.
    """
    alarms = np.asarray(alarms, bool)
    labels = np.asarray(labels, bool)
    if alarms.shape != labels.shape:
        raise ValueError("alarms and labels must align")
    out = alarms.copy()
    t, L = 0, len(labels)
    while t < L:
        if labels[t]:
            end = t
            while end < L and labels[end]:
                end += 1
            detected = alarms[t : min(t + delay, end)].any()
            out[t:end] = detected
            t = end
        else:
            t += 1
    return out


def anomaly_eval(
    scores: np.ndarray,
    labels: np.ndarray,
    train_end: int,
    delay: int = 7,
    threshold_sigmas: float = 3.0,
    task: str = "anomaly",
) -> EvalResult:
    """Threshold on the training half, delay-adjust, and score point-wise.

    The threshold is ``mean + threshold_sigmas * std`` of the training-split
    scores; precision/recall/F1 are computed on the evaluation split after
    segment adjustment.
    """
    scores = np.asarray(scores, float)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must align")
    if not (0 <= train_end <= len(scores)):
        raise ValueError(f"train_end {train_end} out of range")
    train_scores = scores[:train_end]
    threshold = float(train_scores.mean() + threshold_sigmas * train_scores.std())
    alarms = scores > threshold
    adjusted = adjust_alarms(alarms, labels, delay)

    eval_pred = adjusted[train_end:]
    eval_true = labels[train_end:]
    positives = int(eval_true.sum())
    if positives == 0:
        raise ValueError("no anomalies in the evaluation split; recall is undefined")
    tp = int((eval_pred & eval_true).sum())
    alarm_count = int(eval_pred.sum())
    precision = tp / alarm_count if alarm_count else 0.0
    recall = tp / positives
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return EvalResult(
        task=task,
        metrics={"f1": f1, "precision": precision, "recall": recall},
        metadata={"threshold": threshold, "delay": delay, "train_end": int(train_end)},
    )


def _standardized_values(series: AnomalySeries) -> np.ndarray:
    head = series.values[: series.train_end]
    mean = head.mean() if len(head) else series.values.mean()
    std = head.std() if len(head) else series.values.std()
    return (series.values - mean) / (std if std > 1e-8 else 1.0)


def anomaly_detection_eval(
    encoder: TimeSeriesEncoder,
    series: AnomalySeries,
    window: int = 64,
    delay: int = 7,
    lookback: int = 21,
    threshold_sigmas: float = 3.0,
    task: str = "anomaly",
) -> tuple[EvalResult, np.ndarray]:
    """Full streaming pipeline on one series; returns the result and scores."""
    values = _standardized_values(series)
    scores = anomaly_scores(encoder, values, window, lookback)
    result = anomaly_eval(scores, series.labels, series.train_end, delay, threshold_sigmas, task)
    result.metadata["series"] = series.name
    return result, scores


def cold_start_eval(
    encoder: TimeSeriesEncoder,
    series: AnomalySeries,
    window: int = 64,
    delay: int = 7,
    lookback: int = 21,
    threshold_sigmas: float = 3.0,
) -> tuple[EvalResult, np.ndarray]:
    """Anomaly pipeline with an encoder pre-trained elsewhere (no target training)."""
    return anomaly_detection_eval(
        encoder, series, window, delay, lookback, threshold_sigmas, task="anomaly_cold_start"
    )


# ---------------------------------------------------------------------------
# forecasting

RepresentationFn = Callable[[np.ndarray], np.ndarray]


def forecast_eval(
    encoder: TimeSeriesEncoder | RepresentationFn,
    values: np.ndarray,
    horizons: Iterable[int],
    split: tuple[float, float] = (0.6, 0.2),
    window: int = 128,
    alphas: Sequence[float] = (0.1, 1.0, 10.0, 100.0, 1000.0),
) -> EvalResult:
    """Ridge heads from per-timestamp representations to the next ``H`` values.

    The series is standardized with training-split statistics and MSE is
    reported on that scale.  ``encoder`` may also be a callable mapping the
    ``(L, N)`` value array to per-timestamp ``(L, M)`` representations,
    which keeps the protocol testable with hand-built features.
    """
    values = _as_batched(values)
    L = len(values)
    train_frac, val_frac = split
    n_train = int(L * train_frac)
    n_val_end = int(L * (train_frac + val_frac))
    if not (0 < n_train < n_val_end < L):
        raise ValueError(f"degenerate split {split} for series of length {L}")

    mean = values[:n_train].mean(axis=0)
    std = values[:n_train].std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    scaled = (values - mean) / std
    target = scaled[:, 0]

    if isinstance(encoder, TimeSeriesEncoder):
        reps = np.full((L, encoder.config.output_dims), np.nan)
        reps[window - 1 :] = trailing_window_representations(encoder, scaled, window)
        first_anchor = window - 1
    else:
        reps = np.asarray(encoder(scaled), float)
        if len(reps) != L:
            raise ValueError("representation callable must return one row per timestamp")
        first_anchor = 0

    mse_per_horizon: dict[str, float] = {}
    for H in sorted(set(int(h) for h in horizons)):
        if H < 1:
            raise ValueError(f"horizon must be >= 1, got {H}")

        def anchors(lo: int, hi: int) -> np.ndarray:
            # anchor t predicts target[t+1 : t+1+H]; targets must stay in range
            return np.arange(max(lo, first_anchor), min(hi, L - H))

        tr = anchors(0, n_train)
        va = anchors(n_train, n_val_end)
        te = anchors(n_val_end, L)
        if len(te) == 0:
            raise ValueError(f"horizon {H} exceeds the available test span")
        if len(tr) == 0 or len(va) == 0:
            raise ValueError(f"horizon {H} leaves no training/validation anchors")

        def targets(idx: np.ndarray) -> np.ndarray:
            return np.stack([target[t + 1 : t + 1 + H] for t in idx])

        def mse_on(model, idx: np.ndarray) -> float:
            # Ridge flattens single-column targets; reshape before comparing
            pred = model.predict(reps[idx]).reshape(len(idx), H)
            return float(np.mean((pred - targets(idx)) ** 2))

        best_alpha, best_val = None, np.inf
        for alpha in alphas:
            model = Ridge(alpha=alpha).fit(reps[tr], targets(tr))
            val_mse = mse_on(model, va)
            if val_mse < best_val:
                best_alpha, best_val = alpha, val_mse
        model = Ridge(alpha=best_alpha).fit(reps[tr], targets(tr))
        mse_per_horizon[str(H)] = mse_on(model, te)

    return EvalResult(
        task="forecast",
        metrics={
            "mse_per_horizon": mse_per_horizon,
            "mse_average": float(np.mean(list(mse_per_horizon.values()))),
        },
        metadata={"split": list(split), "window": window},
    )


# ---------------------------------------------------------------------------
# embedding diagnostics


def _unit_rows(features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, float)
    norms = np.linalg.norm(features, axis=1, keepdims=True)
    return features / np.where(norms < 1e-12, 1.0, norms)


def uniformity(features: np.ndarray) -> float:
    """log mean_{i != j} exp(-2 ||zi - zj||^2) over L2-normalized rows.

    Always <= 0; equals 0 only when all normalized rows coincide.
    """
    z = _unit_rows(features)
    n = len(z)
    if n < 2:
        raise ValueError("uniformity needs at least two feature rows")
    sq = np.sum((z[:, None, :] - z[None, :, :]) ** 2, axis=-1)
    off = ~np.eye(n, dtype=bool)
    return float(np.log(np.mean(np.exp(-2.0 * sq[off]))))


def tolerance(features: np.ndarray, labels: np.ndarray) -> float:
    """Mean cosine similarity over same-class pairs of normalized rows."""
    z = _unit_rows(features)
    labels = np.asarray(labels)
    if len(z) < 2:
        raise ValueError("tolerance needs at least two feature rows")
    sims = []
    for cls in np.unique(labels):
        members = z[labels == cls]
        k = len(members)
        if k < 2:
            continue  # singleton classes contribute no pairs
        gram = members @ members.T
        sims.append(gram[~np.eye(k, dtype=bool)])
    if not sims:
        raise ValueError("no class has two or more members")
    return float(np.concatenate(sims).mean())
