"""Command-line interface: train, classify, anomaly, forecast, hpo,
compare, export-embeddings.

Every command writes a resolved-config JSON snapshot next to its outputs so
a run can be reproduced from the snapshot alone.  Flags override values from
an optional ``--config`` JSON file; relative data paths fall back to the
``TIMEHUT_DATA_DIR`` root.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .comparison import compare_models, load_accuracy_table
from .data import (
    TimeSeriesDataset,
    channel_stats,
    load_anomaly_csv,
    load_ucr_tsv,
    load_uea_ts,
    normalize,
)
from .encoder import EncoderConfig, load_checkpoint, save_checkpoint
from .evaluation import (
    anomaly_detection_eval,
    classify_eval,
    cold_start_eval,
    encode_instances,
    forecast_eval,
    tolerance,
    uniformity,
)
from .hpo import SearchSpace, search, write_trial_log
from .losses import LossConfig
from .schedulers import SchedulerConfig, make_schedule
from .trainer import TrainConfig, train

DATA_DIR_ENV = "TIMEHUT_DATA_DIR"


class CliError(RuntimeError):
    pass


def resolve_data_path(path: str) -> Path:
    candidate = Path(path)
    if candidate.exists():
        return candidate
    root = os.environ.get(DATA_DIR_ENV)
    if root:
        fallback = Path(root) / path
        if fallback.exists():
            return fallback
    raise CliError(f"data file not found: {path}")


def load_training_dataset(path: Path, normalize_mode: str, split_fraction: float) -> TimeSeriesDataset:
    """Load any supported format as a training dataset.

    Anomaly CSVs contribute their training half as a single standardized
    series; archive formats load as-is with optional z-scoring.
    """
    suffix = path.suffix.lower()
    if suffix == ".csv":
        series = load_anomaly_csv(path, split_fraction)
        head = series.values[: series.train_end]
        mean, std = head.mean(), head.std()
        values = (series.values[: series.train_end] - mean) / (std if std > 1e-8 else 1.0)
        return TimeSeriesDataset(values[None, :, None], name=series.name)
    dataset = load_uea_ts(path) if suffix == ".ts" else load_ucr_tsv(path)
    if normalize_mode != "none":
        dataset = normalize(dataset, normalize_mode)
    return dataset


def _merge_config(args: argparse.Namespace, keys: list[str]) -> dict:
    """Resolve run values: explicit flag > config file > built-in default."""
    file_values = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_values = json.load(fh)
    resolved = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in file_values:
            resolved[key] = file_values[key]
        else:
            resolved[key] = _DEFAULTS[key]
    return resolved


_DEFAULTS = {
    "epochs": None,
    "seed": 0,
    "lr": 1e-3,
    "batch_size": 8,
    "repr_dims": 320,
    "hidden_dims": 64,
    "depth": 10,
    "max_train_length": 3000,
    "ci": 3.0,
    "ct": 3.0,
    "ma": 0.5,
    "tau_min": 0.07,
    "tau_max": 0.8,
    "period": 30.0,
    "scheduler": "cosine_squared",
    "sched_param": [],
    "fixed_tau": None,
    "disable_sched": False,
    "disable_angular": False,
    "normalize": "none",
    "split_fraction": 0.5,
    "window": 64,
    "delay": 7,
    "lookback": 21,
    "sigmas": 3.0,
}

_TRAIN_KEYS = [
    "epochs", "seed", "lr", "batch_size", "repr_dims", "hidden_dims", "depth",
    "max_train_length", "ci", "ct", "ma", "tau_min", "tau_max", "period",
    "scheduler", "sched_param", "fixed_tau", "disable_sched", "disable_angular",
    "normalize", "split_fraction",
]


def _parse_sched_params(pairs) -> dict:
    if isinstance(pairs, dict):  # config files carry a mapping directly
        return {str(k): float(v) for k, v in pairs.items()}
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise CliError(f"--sched-param expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = float(value)
    return out


def build_train_config(values: dict) -> TrainConfig:
    loss = LossConfig(
        angular_margin=values["ma"],
        instance_coeff=values["ci"],
        temporal_coeff=values["ct"],
        enable_sched=not values["disable_sched"],
        enable_angular=not values["disable_angular"],
        fixed_tau=values["fixed_tau"],
    )
    sched = SchedulerConfig(
        kind=values["scheduler"],
        tau_min=values["tau_min"],
        tau_max=values["tau_max"],
        period=float(values["period"]),
        extra=_parse_sched_params(values["sched_param"]),
    )
    return TrainConfig(
        learning_rate=values["lr"],
        batch_size=int(values["batch_size"]),
        epochs=values["epochs"],
        loss=loss,
        scheduler=sched,
        seed=int(values["seed"]),
        max_train_length=int(values["max_train_length"]),
    )


def _write_snapshot(out_dir: Path, command: str, values: dict, extra: dict) -> Path:
    snapshot = {"command": command, **values, **extra}
    path = out_dir / "config.json"
    with open(path, "w") as fh:
        json.dump(snapshot, fh, indent=2, default=str)
    return path


def _write_results(out_dir: Path, results) -> Path:
    path = out_dir / "results.json"
    with open(path, "w") as fh:
        for result in results if isinstance(results, list) else [results]:
            fh.write(result.to_json() + "\n")
    return path


def _plot_training(history, schedule, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = [r.epoch for r in history.records]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(epochs, [r.total for r in history.records], label="total")
    ax1.plot(epochs, [r.sched for r in history.records], label="contrastive")
    ax1.plot(epochs, [r.angular for r in history.records], label="angular")
    ax1.set_ylabel("loss")
    ax1.legend()
    ax2.plot(epochs, schedule[: len(epochs)], color="tab:red")
    ax2.set_ylabel("temperature")
    ax2.set_xlabel("epoch")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_scores(scores, labels, threshold, train_end, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(9, 3.5))
    ax.plot(scores, lw=0.8, label="score")
    ax.axhline(threshold, color="tab:red", ls="--", lw=0.8, label="threshold")
    ax.axvline(train_end, color="gray", ls=":", lw=0.8, label="train end")
    marked = np.where(np.asarray(labels) == 1)[0]
    if len(marked):
        ax.scatter(marked, np.asarray(scores)[marked], s=12, color="tab:orange", label="labeled")
    ax.set_xlabel("timestamp")
    ax.set_ylabel("normalized score")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _finish(out_dir: Path, artifacts: list[Path]) -> int:
    missing = [str(p) for p in artifacts if not p.exists()]
    if missing:
        print(f"error: missing artifacts: {missing}", file=sys.stderr)
        return 1
    for p in artifacts:
        print(f"wrote {p}")
    return 0


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    values = _merge_config(args, _TRAIN_KEYS)
    data = args.data
    if data is None and args.config:  # replay from an emitted snapshot
        with open(args.config) as fh:
            data = json.load(fh).get("data")
    if data is None:
        raise CliError("train needs --data (or a --config snapshot carrying one)")
    data_path = resolve_data_path(data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    dataset = load_training_dataset(data_path, values["normalize"], values["split_fraction"])
    train_config = build_train_config(values)
    encoder_config = EncoderConfig(
        input_dims=dataset.channels,
        hidden_dims=int(values["hidden_dims"]),
        output_dims=int(values["repr_dims"]),
        depth=int(values["depth"]),
    )
    encoder, history = train(dataset, encoder_config, train_config)

    ckpt = out_dir / "checkpoint.npz"
    save_checkpoint(encoder, ckpt)
    hist = out_dir / "history.csv"
    history.to_csv(hist)
    snapshot = _write_snapshot(out_dir, "train", values, {"data": str(data_path)})
    plot = out_dir / "train_curves.png"
    schedule = make_schedule(train_config.scheduler, max(len(history), 1))
    _plot_training(history, schedule, plot)
    return _finish(out_dir, [ckpt, hist, snapshot, plot])


def _load_labeled(path: Path):
    dataset = load_uea_ts(path) if path.suffix.lower() == ".ts" else load_ucr_tsv(path)
    if dataset.labels is None:
        raise CliError(f"{path} has no labels")
    return dataset


def _derive_test_path(train_path: Path) -> Path:
    name = train_path.name
    for token, replacement in (("TRAIN", "TEST"), ("train", "test")):
        if token in name:
            candidate = train_path.with_name(name.replace(token, replacement))
            if candidate.exists():
                return candidate
    raise CliError(f"cannot derive test file from {train_path}; pass --test-data")


def cmd_classify(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_path = resolve_data_path(args.data)
    test_path = resolve_data_path(args.test_data) if args.test_data else _derive_test_path(train_path)

    train_set = _load_labeled(train_path)
    test_set = _load_labeled(test_path)
    if args.normalize != "none":
        stats = channel_stats(train_set.samples)
        train_set = normalize(train_set, args.normalize, stats)
        test_set = normalize(test_set, args.normalize, stats)

    encoder = load_checkpoint(resolve_data_path(args.checkpoint))
    train_features = encode_instances(encoder, train_set)
    test_features = encode_instances(encoder, test_set)
    result = classify_eval(
        train_features, train_set.labels, test_features, test_set.labels, seed=args.seed
    )
    result.metadata["dataset"] = train_set.name
    result.metrics["uniformity"] = uniformity(test_features)
    result.metrics["tolerance"] = tolerance(test_features, test_set.labels)

    results = _write_results(out_dir, result)
    snapshot = _write_snapshot(
        out_dir, "classify",
        {"seed": args.seed, "normalize": args.normalize},
        {"data": str(train_path), "test_data": str(test_path), "checkpoint": str(args.checkpoint)},
    )
    print(f"accuracy={result.metrics['accuracy']:.4f} auprc={result.metrics['auprc']:.4f}")
    return _finish(out_dir, [results, snapshot])


def cmd_anomaly(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = resolve_data_path(args.data)
    series = load_anomaly_csv(data_path, args.split_fraction)

    if args.cold_start:
        if not args.source:
            raise CliError("--cold-start requires --source CHECKPOINT")
        encoder = load_checkpoint(resolve_data_path(args.source))
        result, scores = cold_start_eval(
            encoder, series, args.window, args.delay, args.lookback, args.sigmas
        )
    else:
        if not args.checkpoint:
            raise CliError("anomaly requires --checkpoint (or --cold-start --source)")
        encoder = load_checkpoint(resolve_data_path(args.checkpoint))
        result, scores = anomaly_detection_eval(
            encoder, series, args.window, args.delay, args.lookback, args.sigmas
        )

    results = _write_results(out_dir, result)
    plot = out_dir / "anomaly_scores.png"
    _plot_scores(scores, series.labels, result.metadata["threshold"], series.train_end, plot)
    trace = out_dir / "anomaly_scores.csv"
    np.savetxt(trace, np.column_stack([series.timestamps, scores, series.labels]),
               delimiter=",", header="timestamp,score,label", comments="")
    snapshot = _write_snapshot(
        out_dir, "anomaly",
        {"window": args.window, "delay": args.delay, "lookback": args.lookback,
         "sigmas": args.sigmas, "split_fraction": args.split_fraction,
         "cold_start": bool(args.cold_start)},
        {"data": str(data_path), "checkpoint": str(args.checkpoint or args.source)},
    )
    print(
        f"f1={result.metrics['f1']:.4f} precision={result.metrics['precision']:.4f} "
        f"recall={result.metrics['recall']:.4f}"
    )
    return _finish(out_dir, [results, plot, trace, snapshot])


def _load_univariate_values(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".csv":
        try:
            return load_anomaly_csv(path).values
        except Exception:
            return np.loadtxt(path, delimiter=",", skiprows=1, usecols=1)
    return np.loadtxt(path)


def cmd_forecast(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = resolve_data_path(args.data)
    values = _load_univariate_values(data_path)
    encoder = load_checkpoint(resolve_data_path(args.checkpoint))
    horizons = [int(h) for h in args.horizons.split(",")]
    result = forecast_eval(
        encoder, values, horizons,
        split=(args.train_frac, args.val_frac), window=args.window,
    )
    result.metadata["dataset"] = data_path.name
    results = _write_results(out_dir, result)
    snapshot = _write_snapshot(
        out_dir, "forecast",
        {"window": args.window, "horizons": args.horizons,
         "train_frac": args.train_frac, "val_frac": args.val_frac},
        {"data": str(data_path), "checkpoint": str(args.checkpoint)},
    )
    for h, mse in result.metrics["mse_per_horizon"].items():
        print(f"H={h}: mse={mse:.4f}")
    return _finish(out_dir, [results, snapshot])


def cmd_hpo(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = resolve_data_path(args.data)
    dataset = _load_labeled(data_path)
    if args.normalize != "none":
        dataset = normalize(dataset, args.normalize)

    rng = np.random.default_rng(args.seed)
    n = dataset.n
    holdout = max(1, int(round(n * args.holdout)))
    order = rng.permutation(n)
    val_idx, fit_idx = order[:holdout], order[holdout:]
    if len(fit_idx) == 0 or len(np.unique(dataset.labels[fit_idx])) < 2:
        raise CliError("training split too small for a labeled holdout objective")

    def objective(params: dict) -> float:
        values = dict(_DEFAULTS)
        values.update(
            ci=params["ci"], ct=params["ct"], ma=params["ma"],
            tau_min=params["tau_min"], tau_max=params["tau_max"], period=params["period"],
            epochs=args.epochs, seed=args.seed,
            repr_dims=args.repr_dims, hidden_dims=args.hidden_dims, depth=args.depth,
        )
        config = build_train_config(values)
        encoder_config = EncoderConfig(
            input_dims=dataset.channels, hidden_dims=args.hidden_dims,
            output_dims=args.repr_dims, depth=args.depth,
        )
        sub = TimeSeriesDataset(dataset.samples[fit_idx], dataset.labels[fit_idx])
        encoder, _ = train(sub, encoder_config, config)
        fit_features = encode_instances(encoder, sub)
        val_features = encode_instances(encoder, dataset.samples[val_idx])
        result = classify_eval(
            fit_features, sub.labels, val_features, dataset.labels[val_idx], seed=args.seed
        )
        return result.metrics["accuracy"]

    outcome = search(
        SearchSpace(), objective, budget=args.budget, strategy=args.strategy,
        seed=args.seed, workers=args.workers,
    )
    log_path = out_dir / "trials.csv"
    write_trial_log(outcome.trials, log_path)
    best_path = out_dir / "best_params.json"
    with open(best_path, "w") as fh:
        json.dump({"params": outcome.best_params, "score": outcome.best_score}, fh, indent=2)
    snapshot = _write_snapshot(
        out_dir, "hpo",
        {"budget": args.budget, "strategy": args.strategy, "seed": args.seed,
         "epochs": args.epochs, "holdout": args.holdout, "workers": args.workers},
        {"data": str(data_path)},
    )
    print(f"best score={outcome.best_score:.4f} params={outcome.best_params}")
    return _finish(out_dir, [log_path, best_path, snapshot])


def cmd_compare(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    table_path = resolve_data_path(args.table)
    table = load_accuracy_table(table_path)
    result = compare_models(table)
    pair = result.pair(args.a, args.b)
    print(
        f"{args.a} vs {args.b}: MD={pair['mean_difference']:+.4f} "
        f"W/D/L={pair['wins']}/{pair['draws']}/{pair['losses']} p={pair['p_value']:.3g}"
    )
    out_path = out_dir / "comparison.json"
    with open(out_path, "w") as fh:
        json.dump(
            {
                "pair": pair,
                "models": result.models,
                "average_ranks": result.average_ranks,
                "mean_difference": result.mean_difference.tolist(),
                "p_values": result.p_values.tolist(),
            },
            fh,
            indent=2,
        )
    snapshot = _write_snapshot(
        out_dir, "compare", {"a": args.a, "b": args.b}, {"table": str(table_path)}
    )
    return _finish(out_dir, [out_path, snapshot])


def cmd_export_embeddings(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = resolve_data_path(args.data)
    suffix = data_path.suffix.lower()
    dataset = load_uea_ts(data_path) if suffix == ".ts" else load_ucr_tsv(data_path)
    if args.normalize != "none":
        dataset = normalize(dataset, args.normalize)
    encoder = load_checkpoint(resolve_data_path(args.checkpoint))
    features = encode_instances(encoder, dataset)
    labels = dataset.labels if dataset.labels is not None else -np.ones(dataset.n, dtype=int)

    out_path = out_dir / "embeddings.csv"
    header = ",".join([f"z{i}" for i in range(features.shape[1])] + ["label"])
    np.savetxt(
        out_path,
        np.column_stack([features, labels]),
        delimiter=",",
        header=header,
        comments="",
    )
    snapshot = _write_snapshot(
        out_dir, "export-embeddings", {"normalize": args.normalize},
        {"data": str(data_path), "checkpoint": str(args.checkpoint)},
    )
    print(f"exported {features.shape[0]} x {features.shape[1]} embeddings")
    return _finish(out_dir, [out_path, snapshot])


# ---------------------------------------------------------------------------
# parser


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--repr-dims", dest="repr_dims", type=int)
    p.add_argument("--hidden-dims", dest="hidden_dims", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--max-train-length", dest="max_train_length", type=int)
    p.add_argument("--ci", type=float, help="instance angular coefficient")
    p.add_argument("--ct", type=float, help="temporal angular coefficient")
    p.add_argument("--ma", type=float, help="angular margin (radians)")
    p.add_argument("--tau-min", dest="tau_min", type=float)
    p.add_argument("--tau-max", dest="tau_max", type=float)
    p.add_argument("--period", type=float, help="temperature schedule period")
    p.add_argument("--scheduler", help="temperature schedule kind")
    p.add_argument("--sched-param", dest="sched_param", action="append",
                   help="kind-specific key=value, repeatable")
    p.add_argument("--fixed-tau", dest="fixed_tau", type=float,
                   help="constant temperature override (ablation)")
    p.add_argument("--disable-sched", dest="disable_sched", action="store_const", const=True)
    p.add_argument("--disable-angular", dest="disable_angular", action="store_const", const=True)
    p.add_argument("--normalize", choices=["none", "zscore_per_channel"])
    p.add_argument("--split-fraction", dest="split_fraction", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timehut",
        description="Self-supervised time-series representation learning toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an encoder and save a checkpoint")
    p.add_argument("--data", help="dataset path (may come from --config instead)")
    p.add_argument("--out", default="timehut_train")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="evaluate frozen features with an RBF classifier")
    p.add_argument("--data", required=True, help="training split archive file")
    p.add_argument("--test-data", dest="test_data")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", choices=["none", "zscore_per_channel"], default="none")
    p.add_argument("--out", default="timehut_classify")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("anomaly", help="streaming anomaly detection on a labeled series")
    p.add_argument("--data", required=True, help="timestamp,value,label CSV")
    p.add_argument("--checkpoint")
    p.add_argument("--cold-start", dest="cold_start", action="store_true")
    p.add_argument("--source", help="checkpoint pre-trained on a source dataset")
    p.add_argument("--window", type=int, default=64)
    p.add_argument("--delay", type=int, default=7)
    p.add_argument("--lookback", type=int, default=21)
    p.add_argument("--sigmas", type=float, default=3.0)
    p.add_argument("--split-fraction", dest="split_fraction", type=float, default=0.5)
    p.add_argument("--out", default="timehut_anomaly")
    p.set_defaults(func=cmd_anomaly)

    p = sub.add_parser("forecast", help="ridge forecasting from frozen representations")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--horizons", default="24,48,168,336,720")
    p.add_argument("--window", type=int, default=128)
    p.add_argument("--train-frac", dest="train_frac", type=float, default=0.6)
    p.add_argument("--val-frac", dest="val_frac", type=float, default=0.2)
    p.add_argument("--out", default="timehut_forecast")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("hpo", help="search loss/schedule hyperparameters")
    p.add_argument("--data", required=True, help="labeled training archive file")
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--strategy", choices=["random", "mcmc"], default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=20, help="epochs per trial")
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--normalize", choices=["none", "zscore_per_channel"], default="none")
    p.add_argument("--repr-dims", dest="repr_dims", type=int, default=320)
    p.add_argument("--hidden-dims", dest="hidden_dims", type=int, default=64)
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--out", default="timehut_hpo")
    p.set_defaults(func=cmd_hpo)

    p = sub.add_parser("compare", help="pairwise statistics over an accuracy table")
    p.add_argument("--table", required=True, help="dataset,model1,model2,... CSV")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", default="timehut_compare")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-embeddings", help="write per-series features to CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--normalize", choices=["none", "zscore_per_channel"], default="none")
    p.add_argument("--out", default="timehut_embeddings")
    p.set_defaults(func=cmd_export_embeddings)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
