"""Contrastive and angular-margin losses over paired crop representations.

All functions take batched representations of shape ``(B, T, M)`` where the
two tensors cover the same timestamps (the overlap of the two crops).  The
softmax losses use raw dot-product similarity; the angular losses use cosine
similarity clamped away from +-1 so arccos stays differentiable.

Anchors live in the first crop: the positive partner of ``z1[i, t]`` is
``z2[i, t]``, and negatives come from other timestamps (temporal terms) or
other batch instances (instance terms), drawn from both crops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn.functional as F

from .data import CropPair

COSINE_CLAMP_EPS = 1e-7


@dataclass
class LossConfig:
    """Weights and switches for the combined training objective.

    ``fixed_tau`` overrides the scheduled temperature (the constant-tau
    ablation); disabling both terms leaves no objective and is rejected.
    """

    angular_margin: float = 0.5  # m_a, radians
    instance_coeff: float = 3.0  # c_i
    temporal_coeff: float = 3.0  # c_t
    enable_sched: bool = True
    enable_angular: bool = True
    fixed_tau: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.angular_margin <= math.pi / 2):
            raise ValueError(f"angular_margin must be in (0, pi/2], got {self.angular_margin}")
        if self.instance_coeff < 0 or self.temporal_coeff < 0:
            raise ValueError("instance_coeff and temporal_coeff must be >= 0")
        if self.fixed_tau is not None and self.fixed_tau <= 0:
            raise ValueError(f"fixed_tau must be positive, got {self.fixed_tau}")


def _check_pair(z1: torch.Tensor, z2: torch.Tensor) -> None:
    if z1.shape != z2.shape or z1.dim() != 3:
        raise ValueError(f"expected matching (B, T, M) tensors, got {tuple(z1.shape)} and {tuple(z2.shape)}")
    if z1.shape[1] < 1:
        raise ValueError("overlap is empty (T=0)")
    if not (torch.isfinite(z1).all() and torch.isfinite(z2).all()):
        raise ValueError("non-finite values in representations")


def _softmax_loss(cross: torch.Tensor, within: torch.Tensor) -> torch.Tensor:
    """Shared log-softmax core: -log exp(pos) / sum(cross + within off-diagonal).

    ``cross``/``within`` are ``(G, K, K)`` similarity grids already divided
    by the temperature; the positive sits on the diagonal of ``cross``.
    """
    K = cross.shape[-1]
    eye = torch.eye(K, dtype=torch.bool, device=cross.device)
    within = within.masked_fill(eye, float("-inf"))
    logits = torch.cat([cross, within], dim=-1)
    lse = torch.logsumexp(logits, dim=-1)
    pos = cross.diagonal(dim1=-2, dim2=-1)
    return (lse - pos).mean()


def temporal_contrastive(z1: torch.Tensor, z2: torch.Tensor, tau: float) -> torch.Tensor:
    """Timestamp-discriminating loss within each instance.

    For anchor ``z1[i, t]`` the denominator runs over the cross-crop
    similarities at every overlap timestamp plus the same-crop similarities
    at the other timestamps; evaluated in log-space.
    """
    _check_pair(z1, z2)
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    cross = torch.matmul(z1, z2.transpose(1, 2)) / tau
    within = torch.matmul(z1, z1.transpose(1, 2)) / tau
    return _softmax_loss(cross, within)


def instance_contrastive(z1: torch.Tensor, z2: torch.Tensor, tau: float) -> torch.Tensor:
    """Instance-discriminating loss across the batch at each timestamp."""
    _check_pair(z1, z2)
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    a = z1.transpose(0, 1)  # (T, B, M)
    b = z2.transpose(0, 1)
    cross = torch.matmul(a, b.transpose(1, 2)) / tau
    within = torch.matmul(a, a.transpose(1, 2)) / tau
    return _softmax_loss(cross, within)


def _clamped_angles(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Pairwise angles arccos(cos_sim) over the last two grid axes."""
    an = a / a.norm(dim=-1, keepdim=True).clamp_min(1e-12)
    bn = b / b.norm(dim=-1, keepdim=True).clamp_min(1e-12)
    cos = torch.matmul(an, bn.transpose(-2, -1))
    cos = cos.clamp(-1.0 + COSINE_CLAMP_EPS, 1.0 - COSINE_CLAMP_EPS)
    return torch.acos(cos)


def _angular_loss(a: torch.Tensor, b: torch.Tensor, margin: float) -> torch.Tensor:
    """Shared angular core over ``(G, K, M)`` grids.

    Positive term: squared angle to the diagonal partner in ``b``.  Negative
    terms: squared hinge ``max(0, margin - angle)`` against off-diagonal
    entries of both grids, averaged per anchor.
    """
    if not (0.0 < margin <= math.pi / 2):
        raise ValueError(f"margin must be in (0, pi/2], got {margin}")
    K = a.shape[1]
    ang_cross = _clamped_angles(a, b)
    pos = ang_cross.diagonal(dim1=-2, dim2=-1) ** 2
    if K == 1:
        return pos.mean()
    ang_within = _clamped_angles(a, a)
    off = 1.0 - torch.eye(K, dtype=a.dtype, device=a.device)
    hinge_cross = (F.relu(margin - ang_cross) ** 2) * off
    hinge_within = (F.relu(margin - ang_within) ** 2) * off
    neg_mean = (hinge_cross.sum(dim=-1) + hinge_within.sum(dim=-1)) / (2 * (K - 1))
    return (pos + neg_mean).mean()


def temporal_angular(z1: torch.Tensor, z2: torch.Tensor, margin: float) -> torch.Tensor:
    """Angular-margin loss between timestamps of one instance's two crops."""
    _check_pair(z1, z2)
    return _angular_loss(z1, z2, margin)


def instance_angular(z1: torch.Tensor, z2: torch.Tensor, margin: float) -> torch.Tensor:
    """Angular-margin loss between batch instances at a shared timestamp."""
    _check_pair(z1, z2)
    return _angular_loss(z1.transpose(0, 1), z2.transpose(0, 1), margin)


def overlap_views(z1_full: torch.Tensor, z2_full: torch.Tensor, crop: CropPair) -> tuple[torch.Tensor, torch.Tensor]:
    """Slice full-crop representations down to the shared overlap window."""
    t0, t1 = crop.overlap
    z1 = z1_full[:, t0 - crop.a1 : t1 - crop.a1]
    z2 = z2_full[:, 0 : t1 - crop.a2]
    if z1.shape[1] != crop.overlap_length or z2.shape[1] != crop.overlap_length:
        raise ValueError(
            f"representations do not cover the overlap: got lengths "
            f"{z1_full.shape[1]}/{z2_full.shape[1]} for crop {crop}"
        )
    return z1, z2


def _halve_time(z: torch.Tensor) -> torch.Tensor:
    # Kernel-2 stride-2 max pooling along time; an odd trailing step is dropped.
    return F.max_pool1d(z.transpose(1, 2), kernel_size=2).transpose(1, 2)


def hierarchical_sched_loss(
    z1_full: torch.Tensor, z2_full: torch.Tensor, crop: CropPair, tau: float
) -> torch.Tensor:
    """Temperature-scaled contrastive pyramid over the crop overlap.

    Both contrastive terms are evaluated at the native resolution and after
    each kernel-2 max-pooling step; at time-length 1 only the instance term
    remains.  The level sum is divided by the level count.
    """
    z1, z2 = overlap_views(z1_full, z2_full, crop)
    total = z1.new_zeros(())
    levels = 0
    while z1.shape[1] > 1:
        total = total + temporal_contrastive(z1, z2, tau) + instance_contrastive(z1, z2, tau)
        levels += 1
        z1, z2 = _halve_time(z1), _halve_time(z2)
    total = total + instance_contrastive(z1, z2, tau)
    levels += 1
    return total / levels


def hierarchical_contrastive_baseline(
    z1_full: torch.Tensor, z2_full: torch.Tensor, crop: CropPair
) -> torch.Tensor:
    """The unscheduled contrastive pyramid: no temperature anywhere.

    This is the fixed-temperature baseline that the constant-tau=1 ablation
    reduces to; kept as an independent code path (raw similarities, never
    divided) so the reduction is testable rather than tautological.
    """

    def untempered_temporal(z1, z2):
        cross = torch.matmul(z1, z2.transpose(1, 2))
        within = torch.matmul(z1, z1.transpose(1, 2))
        return _softmax_loss(cross, within)

    def untempered_instance(z1, z2):
        a, b = z1.transpose(0, 1), z2.transpose(0, 1)
        cross = torch.matmul(a, b.transpose(1, 2))
        within = torch.matmul(a, a.transpose(1, 2))
        return _softmax_loss(cross, within)

    z1, z2 = overlap_views(z1_full, z2_full, crop)
    _check_pair(z1, z2)
    total = z1.new_zeros(())
    levels = 0
    while z1.shape[1] > 1:
        total = total + untempered_temporal(z1, z2) + untempered_instance(z1, z2)
        levels += 1
        z1, z2 = _halve_time(z1), _halve_time(z2)
    total = total + untempered_instance(z1, z2)
    levels += 1
    return total / levels


def hierarchical_angular_loss(
    z1_full: torch.Tensor, z2_full: torch.Tensor, crop: CropPair, cfg: LossConfig
) -> torch.Tensor:
    """Angular-margin pyramid over the crop overlap.

    Each level adds ``temporal_coeff * temporal + instance_coeff * instance``;
    the temporal term is skipped at the length-1 level.  The level sum is
    divided by the level count.
    """
    z1, z2 = overlap_views(z1_full, z2_full, crop)
    m = cfg.angular_margin
    total = z1.new_zeros(())
    levels = 0
    while z1.shape[1] > 1:
        level = z1.new_zeros(())
        if cfg.temporal_coeff:
            level = level + cfg.temporal_coeff * temporal_angular(z1, z2, m)
        if cfg.instance_coeff:
            level = level + cfg.instance_coeff * instance_angular(z1, z2, m)
        total = total + level
        levels += 1
        z1, z2 = _halve_time(z1), _halve_time(z2)
    if cfg.instance_coeff:
        total = total + cfg.instance_coeff * instance_angular(z1, z2, m)
    levels += 1
    return total / levels


def total_loss(
    z1_full: torch.Tensor,
    z2_full: torch.Tensor,
    crop: CropPair,
    tau: float,
    cfg: LossConfig,
) -> torch.Tensor:
    """Combined objective: scheduled contrastive pyramid + angular pyramid.

    ``cfg.fixed_tau`` takes precedence over the scheduler-provided ``tau``.
    Raises if both terms are disabled (no objective left).
    """
    if not cfg.enable_sched and not cfg.enable_angular:
        raise ValueError("both loss terms disabled: nothing to optimize")
    effective_tau = cfg.fixed_tau if cfg.fixed_tau is not None else tau
    total = z1_full.new_zeros(())
    if cfg.enable_sched:
        total = total + hierarchical_sched_loss(z1_full, z2_full, crop, effective_tau)
    if cfg.enable_angular:
        total = total + hierarchical_angular_loss(z1_full, z2_full, crop, cfg)
    return total
