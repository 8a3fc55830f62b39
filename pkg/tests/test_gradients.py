"""Finite-difference verification of analytic gradients.

Central differences at double precision against autograd, with norm-based
relative error.  Random inputs keep cosine similarities away from the
arccos clamp boundary.
"""

import numpy as np
import pytest
import torch

from timehut.data import CropPair
from timehut.encoder import EncoderConfig, TimeSeriesEncoder
from timehut.losses import (
    LossConfig,
    hierarchical_angular_loss,
    hierarchical_sched_loss,
    instance_angular,
    instance_contrastive,
    temporal_angular,
    temporal_contrastive,
    total_loss,
)


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def numeric_grad(fn, tensor: torch.Tensor, eps: float) -> np.ndarray:
    flat = tensor.detach().clone().reshape(-1)
    grad = np.zeros(flat.numel())
    for k in range(flat.numel()):
        orig = flat[k].item()
        flat[k] = orig + eps
        up = fn(flat.reshape(tensor.shape)).item()
        flat[k] = orig - eps
        down = fn(flat.reshape(tensor.shape)).item()
        flat[k] = orig
        grad[k] = (up - down) / (2 * eps)
    return grad


def check_embedding_grads(loss_fn, z1, z2, eps=1e-5, tol=1e-4):
    z1 = z1.clone().requires_grad_(True)
    z2 = z2.clone().requires_grad_(True)
    loss = loss_fn(z1, z2)
    g1, g2 = torch.autograd.grad(loss, (z1, z2))
    for tensor, grad, other in ((z1, g1, z2), (z2, g2, z1)):
        if tensor is z1:
            num = numeric_grad(lambda t: loss_fn(t, z2.detach()), tensor, eps)
        else:
            num = numeric_grad(lambda t: loss_fn(z1.detach(), t), tensor, eps)
        assert rel_error(grad.detach().numpy().ravel(), num) < tol


def random_pair(seed, B=2, T=4, M=5):
    rng = np.random.default_rng(seed)
    z1 = torch.tensor(rng.standard_normal((B, T, M)))
    z2 = torch.tensor(rng.standard_normal((B, T, M)))
    return z1, z2


@pytest.mark.parametrize("seed", range(3))
def test_contrastive_embedding_gradients(seed):
    z1, z2 = random_pair(seed)
    check_embedding_grads(lambda a, b: temporal_contrastive(a, b, 0.6), z1, z2)
    check_embedding_grads(lambda a, b: instance_contrastive(a, b, 0.6), z1, z2)


@pytest.mark.parametrize("seed", range(3))
def test_angular_embedding_gradients(seed):
    z1, z2 = random_pair(seed + 10)
    check_embedding_grads(lambda a, b: temporal_angular(a, b, 0.5), z1, z2)
    check_embedding_grads(lambda a, b: instance_angular(a, b, 0.5), z1, z2)


@pytest.mark.parametrize("seed", range(3))
def test_pyramid_embedding_gradients(seed):
    z1, z2 = random_pair(seed + 20)
    crop = CropPair(a1=0, b1=4, a2=0, b2=4)
    cfg = LossConfig(instance_coeff=1.3, temporal_coeff=0.7)
    check_embedding_grads(lambda a, b: hierarchical_sched_loss(a, b, crop, 0.5), z1, z2)
    check_embedding_grads(lambda a, b: hierarchical_angular_loss(a, b, crop, cfg), z1, z2)


def encoder_loss(encoder, x, crop, cfg, tau):
    z1 = encoder(x[:, crop.a1 : crop.b1], mask_mode="all_true")
    z2 = encoder(x[:, crop.a2 : crop.b2], mask_mode="all_true")
    return total_loss(z1, z2, crop, tau, cfg)


@pytest.mark.parametrize("seed", range(2))
def test_encoder_parameter_gradients(seed):
    # two-block probe encoder on a B=2, T=8, N=1 instance
    torch.manual_seed(seed)
    encoder = TimeSeriesEncoder(
        EncoderConfig(input_dims=1, hidden_dims=8, output_dims=6, depth=2)
    ).double()
    encoder.eval()
    rng = np.random.default_rng(seed)
    x = torch.tensor(rng.standard_normal((2, 8, 1)))
    crop = CropPair(a1=0, b1=6, a2=2, b2=8)
    cfg = LossConfig(instance_coeff=1.0, temporal_coeff=1.0)

    loss = encoder_loss(encoder, x, crop, cfg, tau=0.8)
    params = list(encoder.parameters())
    grads = torch.autograd.grad(loss, params)

    eps = 1e-4
    for param, grad in zip(params, grads):
        flat = param.data.reshape(-1)
        numeric = np.zeros(flat.numel())
        for k in range(flat.numel()):
            orig = flat[k].item()
            flat[k] = orig + eps
            up = encoder_loss(encoder, x, crop, cfg, 0.8).item()
            flat[k] = orig - eps
            down = encoder_loss(encoder, x, crop, cfg, 0.8).item()
            flat[k] = orig
            numeric[k] = (up - down) / (2 * eps)
        assert rel_error(grad.detach().numpy().ravel(), numeric) < 1e-3
