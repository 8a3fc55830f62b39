"""Acceptance suite: one test per exit criterion, each at its stated
tolerance and runtime budget.  A pass/fail line per criterion is printed in
the terminal summary.

Criteria 5 and 6 run on the UCR Chinatown files when TIMEHUT_DATA_DIR
points at the archive; in their absence the identical pipeline runs on a
deterministic stand-in with Chinatown's exact shape (20 univariate training
series of length 24, two classes, 345 test series).  Criterion 9 is the
explicit non-reproducibility statement: headline benchmark averages need
the full archives and are out of desk-scale scope.
"""

import time

import numpy as np
import pytest
import torch

from timehut.comparison import compare_models
from timehut.data import CropPair, TimeSeriesDataset, load_ucr_tsv
from timehut.encoder import EncoderConfig, TimeSeriesEncoder
from timehut.evaluation import anomaly_eval, anomaly_scores, classify_eval, encode_instances
from timehut.losses import (
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
from timehut.schedulers import SCHEDULER_KINDS, SchedulerConfig, tau_at
from timehut.trainer import TrainConfig, train

from conftest import ACCEPTANCE_RESULTS, make_profile_dataset, make_spiky_series, ucr_archive_path
from oracles import (
    oracle_hierarchical_angular,
    oracle_hierarchical_sched,
    oracle_instance_angular,
    oracle_instance_contrastive,
    oracle_temporal_angular,
    oracle_temporal_contrastive,
)


def record(number, note=""):
    """Mark a criterion passed (tests that fail never reach their record call)."""
    ACCEPTANCE_RESULTS[number] = f"PASS {note}".rstrip()


@pytest.fixture(autouse=True)
def _mark_failure_by_default(request):
    marker = request.node.get_closest_marker("criterion")
    if marker:
        ACCEPTANCE_RESULTS.setdefault(marker.args[0], "FAIL")
    yield


# ---------------------------------------------------------------------------
# criterion 1: loss oracle equivalence


@pytest.mark.criterion(1)
def test_criterion_1_loss_oracle_equivalence():
    started = time.perf_counter()
    for seed in range(100):
        rng = np.random.default_rng(seed)
        B = int(rng.integers(1, 5))
        T = int(rng.integers(1, 9))
        M = int(rng.integers(1, 9))
        tau = float(rng.uniform(0.1, 2.0))
        margin = float(rng.uniform(0.2, 0.8))
        ci, ct = float(rng.uniform(0, 5)), float(rng.uniform(0, 5))
        z1 = torch.tensor(rng.standard_normal((B, T, M)))
        z2 = torch.tensor(rng.standard_normal((B, T, M)))
        crop = CropPair(a1=0, b1=T, a2=0, b2=T)

        checks = [
            (instance_contrastive(z1, z2, tau).item(),
             oracle_instance_contrastive(z1.numpy(), z2.numpy(), tau)),
            (instance_angular(z1, z2, margin).item(),
             oracle_instance_angular(z1.numpy(), z2.numpy(), margin)),
            (hierarchical_sched_loss(z1, z2, crop, tau).item(),
             oracle_hierarchical_sched(z1.numpy(), z2.numpy(), tau)),
            (hierarchical_angular_loss(
                z1, z2, crop,
                LossConfig(angular_margin=margin, instance_coeff=ci, temporal_coeff=ct),
            ).item(),
             oracle_hierarchical_angular(z1.numpy(), z2.numpy(), margin, ci, ct)),
        ]
        if T > 1:
            checks.append(
                (temporal_contrastive(z1, z2, tau).item(),
                 oracle_temporal_contrastive(z1.numpy(), z2.numpy(), tau)))
            checks.append(
                (temporal_angular(z1, z2, margin).item(),
                 oracle_temporal_angular(z1.numpy(), z2.numpy(), margin)))
        for ours, reference in checks:
            assert ours == pytest.approx(reference, abs=1e-6)

    elapsed = time.perf_counter() - started
    assert elapsed < 30.0
    record(1, f"(100 seeds, {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# criterion 2: gradient checks


def _rel_error(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def _numeric_grad(fn, tensor, eps):
    flat = tensor.detach().clone().reshape(-1)
    grad = np.zeros(flat.numel())
    for k in range(flat.numel()):
        orig = flat[k].item()
        flat[k] = orig + eps
        up = fn(flat.reshape(tensor.shape))
        flat[k] = orig - eps
        down = fn(flat.reshape(tensor.shape))
        flat[k] = orig
        grad[k] = (up - down) / (2 * eps)
    return grad


def _near_nonsmooth_point(z1, z2, margin, band):
    """True when the loss pyramid sits within ``band`` of a kink.

    Finite differences only approximate the gradient where the objective is
    differentiable across the stencil; max-pool near-ties, hinge boundaries,
    and the arccos clamp are all measure-zero kinks a random instance can
    straddle, so such instances are resampled.
    """
    a, b = z1.detach().clone(), z2.detach().clone()
    while True:
        rows = torch.cat([a.reshape(-1, a.shape[-1]), b.reshape(-1, b.shape[-1])])
        unit = rows / rows.norm(dim=1, keepdim=True).clamp_min(1e-12)
        cos = (unit @ unit.T).clamp(-1, 1)
        angles = torch.acos(cos.clamp(-1 + 1e-6, 1 - 1e-6))
        off_diag = ~torch.eye(len(rows), dtype=torch.bool)
        if (angles[off_diag] - margin).abs().min() < band:
            return True
        if (1.0 - cos[off_diag].abs()).min() < 1e-5:
            return True
        T2 = a.shape[1] // 2
        if T2 < 1:
            return False
        for z in (a, b):
            gaps = (z[:, 0 : 2 * T2 : 2] - z[:, 1 : 2 * T2 : 2]).abs()
            if gaps.min() < band:
                return True
        a, b = losses_halve(a), losses_halve(b)


def losses_halve(z):
    import torch.nn.functional as F

    return F.max_pool1d(z.transpose(1, 2), kernel_size=2).transpose(1, 2)


def _smooth_instance(seed_stream, margin, band=1e-3):
    while True:
        rng = np.random.default_rng(next(seed_stream))
        z1 = torch.tensor(rng.standard_normal((2, 4, 5)))
        z2 = torch.tensor(rng.standard_normal((2, 4, 5)))
        if not _near_nonsmooth_point(z1, z2, margin, band):
            return z1.requires_grad_(True), z2.requires_grad_(True)


@pytest.mark.criterion(2)
def test_criterion_2_gradient_checks():
    started = time.perf_counter()
    crop = CropPair(a1=0, b1=4, a2=0, b2=4)
    cfg = LossConfig(instance_coeff=1.1, temporal_coeff=0.9)

    losses = {
        "sched": lambda a, b: hierarchical_sched_loss(a, b, crop, 0.6),
        "angular": lambda a, b: hierarchical_angular_loss(a, b, crop, cfg),
    }
    seed_stream = iter(range(10_000))
    for _ in range(10):
        z1, z2 = _smooth_instance(seed_stream, cfg.angular_margin)
        for loss_fn in losses.values():
            value = loss_fn(z1, z2)
            g1, g2 = torch.autograd.grad(value, (z1, z2))
            n1 = _numeric_grad(lambda t: loss_fn(t, z2.detach()).item(), z1, 1e-5)
            n2 = _numeric_grad(lambda t: loss_fn(z1.detach(), t).item(), z2, 1e-5)
            assert _rel_error(g1.numpy().ravel(), n1) < 1e-4
            assert _rel_error(g2.numpy().ravel(), n2) < 1e-4

    # parameter gradients through a two-block probe encoder (B=2, T=8, N=1)
    probe_crop = CropPair(a1=0, b1=6, a2=2, b2=8)
    checked = 0
    instance = 0
    while checked < 10:
        instance += 1
        torch.manual_seed(instance)
        encoder = TimeSeriesEncoder(
            EncoderConfig(input_dims=1, hidden_dims=6, output_dims=5, depth=2)
        ).double()
        encoder.eval()
        x = torch.tensor(np.random.default_rng(instance).standard_normal((2, 8, 1)))

        def loss_of_params():
            z1 = encoder(x[:, probe_crop.a1 : probe_crop.b1], mask_mode="all_true")
            z2 = encoder(x[:, probe_crop.a2 : probe_crop.b2], mask_mode="all_true")
            return total_loss(z1, z2, probe_crop, 0.7, cfg)

        with torch.no_grad():
            z1_probe = encoder(x[:, probe_crop.a1 : probe_crop.b1], mask_mode="all_true")
            z2_probe = encoder(x[:, probe_crop.a2 : probe_crop.b2], mask_mode="all_true")
        ov1, ov2 = z1_probe[:, 2:6], z2_probe[:, 0:4]
        if _near_nonsmooth_point(ov1, ov2, cfg.angular_margin, band=1e-3):
            continue
        checked += 1
        params = list(encoder.parameters())
        grads = torch.autograd.grad(loss_of_params(), params)
        eps = 1e-4
        for param, grad in zip(params, grads):
            flat = param.data.reshape(-1)
            numeric = np.zeros(flat.numel())
            for k in range(flat.numel()):
                orig = flat[k].item()
                flat[k] = orig + eps
                up = loss_of_params().item()
                flat[k] = orig - eps
                down = loss_of_params().item()
                flat[k] = orig
                numeric[k] = (up - down) / (2 * eps)
            assert _rel_error(grad.numpy().ravel(), numeric) < 1e-3

    elapsed = time.perf_counter() - started
    assert elapsed < 120.0
    record(2, f"({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# criterion 3: scheduler identities


@pytest.mark.criterion(3)
def test_criterion_3_scheduler_identities():
    cfg = SchedulerConfig(kind="cosine_squared", tau_min=0.1, tau_max=0.75, period=10)
    assert tau_at(cfg, 0.0) == 0.75
    assert tau_at(cfg, 5.0) == 0.10
    assert tau_at(cfg, 2.5) == 0.425

    rng = np.random.default_rng(0)
    sigmas = rng.uniform(0.0, 1000.0, size=10_000)
    for kind in SCHEDULER_KINDS:
        kcfg = SchedulerConfig(kind=kind, tau_min=0.1, tau_max=0.75, period=10)
        values = np.array([tau_at(kcfg, float(s)) for s in sigmas])
        assert values.min() >= 0.1 - 1e-12
        assert values.max() <= 0.75 + 1e-12
    record(3)


# ---------------------------------------------------------------------------
# criterion 4: constant-tau ablation reduces to the plain pyramid


@pytest.mark.criterion(4)
def test_criterion_4_ablation_reduction_bitwise():
    for seed in range(25):
        rng = np.random.default_rng(seed)
        B = int(rng.integers(1, 5))
        T = int(rng.integers(1, 9))
        M = int(rng.integers(1, 9))
        z1 = torch.tensor(rng.standard_normal((B, T, M)))
        z2 = torch.tensor(rng.standard_normal((B, T, M)))
        crop = CropPair(a1=0, b1=T, a2=0, b2=T)
        cfg = LossConfig(enable_angular=False, fixed_tau=1.0)
        ablated = total_loss(z1, z2, crop, tau=0.31, cfg=cfg).item()
        baseline = hierarchical_contrastive_baseline(z1, z2, crop).item()
        assert ablated == baseline
    record(4)


# ---------------------------------------------------------------------------
# criteria 5 and 6: desk-scale classification and ablation direction


def _desk_data():
    """Real Chinatown when mounted; otherwise the shape-matched stand-in."""
    found = ucr_archive_path("Chinatown")
    if found:
        return load_ucr_tsv(found[0]), load_ucr_tsv(found[1]), "Chinatown"
    train_set = make_profile_dataset(n_per_class=10, seed=101)
    big = make_profile_dataset(n_per_class=173, seed=202)
    test_set = TimeSeriesDataset(big.samples[:345], big.labels[:345], name="standin-test")
    return train_set, test_set, "stand-in"


def _desk_accuracy(train_set, test_set, seed, loss):
    config = TrainConfig(seed=seed, loss=loss)
    encoder, _ = train(train_set, EncoderConfig(input_dims=1), config)
    features_train = encode_instances(encoder, train_set)
    features_test = encode_instances(encoder, test_set)
    result = classify_eval(
        features_train, train_set.labels, features_test, test_set.labels, seed=seed
    )
    return result.metrics["accuracy"]


@pytest.fixture(scope="module")
def desk_runs():
    train_set, test_set, source = _desk_data()
    assert (train_set.n, train_set.length, train_set.channels) == (20, 24, 1)
    assert train_set.num_classes == 2

    started = time.perf_counter()
    full = [_desk_accuracy(train_set, test_set, seed, LossConfig()) for seed in (0, 1, 2)]
    full_seconds = time.perf_counter() - started
    ablated = [
        _desk_accuracy(
            train_set, test_set, seed, LossConfig(enable_angular=False, fixed_tau=1.0)
        )
        for seed in (0, 1, 2)
    ]
    return {
        "source": source,
        "full": full,
        "ablated": ablated,
        "full_seconds": full_seconds,
    }


@pytest.mark.criterion(5)
def test_criterion_5_desk_scale_classification(desk_runs):
    mean_accuracy = float(np.mean(desk_runs["full"]))
    assert mean_accuracy >= 0.96
    assert desk_runs["full_seconds"] < 300.0
    record(
        5,
        f"({desk_runs['source']}: mean acc {mean_accuracy:.4f}, "
        f"{desk_runs['full_seconds']:.0f}s for 3 seeds)",
    )


@pytest.mark.criterion(6)
def test_criterion_6_ablation_direction(desk_runs):
    mean_full = float(np.mean(desk_runs["full"]))
    mean_ablated = float(np.mean(desk_runs["ablated"]))
    assert mean_full >= mean_ablated - 0.005
    record(
        6,
        f"({desk_runs['source']}: full {mean_full:.4f} vs constant-tau {mean_ablated:.4f})",
    )


# ---------------------------------------------------------------------------
# criterion 7: statistics reproduction on published accuracy columns

# Accuracies of the two methods on the 30 multivariate benchmark datasets
# (three printed decimals).
UEA_ACCURACIES = {
    "ArticularyWordRecognition": (0.993, 0.987),
    "AtrialFibrillation": (0.533, 0.200),
    "BasicMotions": (1.000, 0.975),
    "CharacterTrajectories": (0.997, 0.995),
    "Cricket": (1.000, 0.972),
    "DuckDuckGeese": (0.600, 0.680),
    "EigenWorms": (0.962, 0.847),
    "Epilepsy": (0.964, 0.964),
    "ERing": (0.926, 0.874),
    "EthanolConcentration": (0.373, 0.308),
    "FaceDetection": (0.551, 0.501),
    "FingerMovements": (0.642, 0.480),
    "HandMovementDirection": (0.432, 0.338),
    "Handwriting": (0.582, 0.515),
    "Heartbeat": (0.810, 0.683),
    "JapaneseVowels": (0.984, 0.984),
    "Libras": (0.883, 0.867),
    "LSST": (0.586, 0.537),
    "MotorImagery": (0.660, 0.510),
    "NATOPS": (0.966, 0.928),
    "PEMS-SF": (0.855, 0.682),
    "PenDigits": (0.989, 0.989),
    "PhonemeSpectra": (0.243, 0.233),
    "RacketSports": (0.921, 0.855),
    "SelfRegulationSCP1": (0.860, 0.812),
    "SelfRegulationSCP2": (0.583, 0.578),
    "SpokenArabicDigits": (0.995, 0.988),
    "StandWalkJump": (0.600, 0.467),
    "UWaveGestureLibrary": (0.916, 0.906),
    "InsectWingbeat": (0.466, 0.466),
}


@pytest.mark.criterion(7)
def test_criterion_7_statistics_reproduction():
    table = {
        "TimeHUT": {d: a for d, (a, _) in UEA_ACCURACIES.items()},
        "TS2Vec": {d: b for d, (_, b) in UEA_ACCURACIES.items()},
    }
    result = compare_models(table)
    pair = result.pair("TimeHUT", "TS2Vec")
    assert (pair["wins"], pair["draws"], pair["losses"]) == (25, 4, 1)
    assert pair["p_value"] < 1e-4
    assert pair["mean_difference"] == pytest.approx(0.06, abs=0.005)
    record(7, f"(W/D/L 25/4/1, p={pair['p_value']:.2e})")


# ---------------------------------------------------------------------------
# criterion 8: synthetic anomaly detection


@pytest.mark.criterion(8)
def test_criterion_8_synthetic_anomaly():
    started = time.perf_counter()
    values, labels, _ = make_spiky_series(length=1600, n_spikes=5, seed=5)
    half = len(values) // 2
    mean, std = values[:half].mean(), values[:half].std()
    scaled = (values - mean) / std

    clean_half = TimeSeriesDataset(scaled[:half][None, :, None])
    config = TrainConfig(seed=0, max_train_length=200)
    encoder, _ = train(clean_half, EncoderConfig(input_dims=1), config)

    scores = anomaly_scores(encoder, scaled, window=64)
    result = anomaly_eval(scores, labels, train_end=half, delay=7)
    elapsed = time.perf_counter() - started
    assert result.metrics["f1"] >= 0.8
    assert elapsed < 180.0
    record(8, f"(F1 {result.metrics['f1']:.3f}, {elapsed:.0f}s)")


# ---------------------------------------------------------------------------
# criterion 9: explicit non-reproducibility statement


@pytest.mark.criterion(9)
def test_criterion_9_scope_statement():
    statement = (
        "Headline benchmark averages (86.4% over 128 univariate datasets, "
        "77.3% over 30 multivariate datasets, and the Yahoo/KPI F1 scores) "
        "require the full 160-dataset campaign and are NOT reproduced at "
        "desk scale; criteria 1-8 provide the coverage."
    )
    print(statement)
    record(9, "(scope statement)")