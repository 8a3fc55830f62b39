"""Independent brute-force reference implementations for the loss tests.

Everything here is written as plain index-by-index loops over numpy arrays,
mirroring the per-anchor definitions directly (no log-sum-exp tricks, no
batched linear algebra), so it stays independent of the library code paths
it is used to check.
"""

import math

import numpy as np

COS_EPS = 1e-7


def oracle_temporal_contrastive(z1, z2, tau):
    z1, z2 = np.asarray(z1, float), np.asarray(z2, float)
    B, T, _ = z1.shape
    total = 0.0
    for i in range(B):
        for t in range(T):
            num = math.exp(np.dot(z1[i, t], z2[i, t]) / tau)
            den = 0.0
            for tp in range(T):
                den += math.exp(np.dot(z1[i, t], z2[i, tp]) / tau)
                if tp != t:
                    den += math.exp(np.dot(z1[i, t], z1[i, tp]) / tau)
            total += -math.log(num / den)
    return total / (B * T)


def oracle_instance_contrastive(z1, z2, tau):
    z1, z2 = np.asarray(z1, float), np.asarray(z2, float)
    B, T, _ = z1.shape
    total = 0.0
    for i in range(B):
        for t in range(T):
            num = math.exp(np.dot(z1[i, t], z2[i, t]) / tau)
            den = 0.0
            for j in range(B):
                den += math.exp(np.dot(z1[i, t], z2[j, t]) / tau)
                if j != i:
                    den += math.exp(np.dot(z1[i, t], z1[j, t]) / tau)
            total += -math.log(num / den)
    return total / (B * T)


def _angle(u, v):
    cos = np.dot(u, v) / max(np.linalg.norm(u) * np.linalg.norm(v), 1e-12)
    cos = min(max(cos, -1.0 + COS_EPS), 1.0 - COS_EPS)
    return math.acos(cos)


def oracle_temporal_angular(z1, z2, margin):
    z1, z2 = np.asarray(z1, float), np.asarray(z2, float)
    B, T, _ = z1.shape
    per_anchor = []
    for i in range(B):
        for t in range(T):
            pos = _angle(z1[i, t], z2[i, t]) ** 2
            negs = []
            for tp in range(T):
                if tp == t:
                    continue
                negs.append(max(0.0, margin - _angle(z1[i, t], z2[i, tp])) ** 2)
                negs.append(max(0.0, margin - _angle(z1[i, t], z1[i, tp])) ** 2)
            per_anchor.append(pos + (np.mean(negs) if negs else 0.0))
    return float(np.mean(per_anchor))


def oracle_instance_angular(z1, z2, margin):
    z1, z2 = np.asarray(z1, float), np.asarray(z2, float)
    B, T, _ = z1.shape
    per_anchor = []
    for i in range(B):
        for t in range(T):
            pos = _angle(z1[i, t], z2[i, t]) ** 2
            negs = []
            for j in range(B):
                if j == i:
                    continue
                negs.append(max(0.0, margin - _angle(z1[i, t], z1[j, t])) ** 2)
                negs.append(max(0.0, margin - _angle(z1[i, t], z2[j, t])) ** 2)
            per_anchor.append(pos + (np.mean(negs) if negs else 0.0))
    return float(np.mean(per_anchor))


def pool_pairs(z):
    """Kernel-2 stride-2 max pooling along time, odd tail dropped."""
    z = np.asarray(z, float)
    T2 = z.shape[1] // 2
    return np.maximum(z[:, : 2 * T2 : 2], z[:, 1 : 2 * T2 : 2])


def pyramid_levels(z1, z2):
    """Materialize every pooled level: [(z1_l, z2_l), ...] down to length 1."""
    levels = [(np.asarray(z1, float), np.asarray(z2, float))]
    while levels[-1][0].shape[1] > 1:
        a, b = levels[-1]
        levels.append((pool_pairs(a), pool_pairs(b)))
    return levels


def oracle_hierarchical_sched(z1_ov, z2_ov, tau):
    levels = pyramid_levels(z1_ov, z2_ov)
    total = 0.0
    for a, b in levels:
        total += oracle_instance_contrastive(a, b, tau)
        if a.shape[1] > 1:
            total += oracle_temporal_contrastive(a, b, tau)
    return total / len(levels)


def oracle_hierarchical_angular(z1_ov, z2_ov, margin, ci, ct):
    levels = pyramid_levels(z1_ov, z2_ov)
    total = 0.0
    for a, b in levels:
        total += ci * oracle_instance_angular(a, b, margin)
        if a.shape[1] > 1:
            total += ct * oracle_temporal_angular(a, b, margin)
    return total / len(levels)
