"""Pairwise model comparison over an accuracy table.

Produces mean differences, win/draw/loss counts, Wilcoxon signed-rank
p-values, and average ranks.  The signed-rank test uses the exact permutation
distribution (mid-ranked ties, zero differences dropped) for up to 30 pairs
and the normal approximation with tie correction beyond that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.stats import norm, rankdata

DRAW_DECIMALS = 3  # printed-precision equality counts as a draw
EXACT_LIMIT = 30


def wilcoxon_signed_rank(differences: np.ndarray) -> float:
    """Two-sided signed-rank p-value for paired differences.

    Zero differences are dropped and tied magnitudes mid-ranked.  With no
    nonzero differences the test is vacuous and 1.0 is returned.
    """
    d = np.asarray(differences, float)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 1.0
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_LIMIT:
        return _exact_pvalue(ranks, w_plus)
    return _approx_pvalue(ranks, w_plus, n)


def _exact_pvalue(ranks: np.ndarray, w_plus: float) -> float:
    """Exact distribution of W+ over all 2^n sign assignments.

    Mid-ranks are doubled to integers and the distribution built by dynamic
    programming, which is equivalent to full enumeration.
    """
    doubled = np.rint(2 * ranks).astype(int)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=float)
    counts[0] = 1.0
    for r in doubled:
        counts[r:] += counts[: total + 1 - r]
    w2 = int(round(2 * w_plus))
    n_assignments = counts.sum()
    p_low = counts[: w2 + 1].sum() / n_assignments
    p_high = counts[w2:].sum() / n_assignments
    return float(min(1.0, 2.0 * min(p_low, p_high)))


def _approx_pvalue(ranks: np.ndarray, w_plus: float, n: int) -> float:
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction over groups of equal magnitude
    _, counts = np.unique(ranks, return_counts=True)
    var -= float(np.sum(counts**3 - counts)) / 48.0
    if var <= 0:
        return 1.0
    z = (w_plus - mean) / math.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(abs(z))))


@dataclass
class ComparisonResult:
    models: list[str]
    datasets: list[str]
    mean_difference: np.ndarray  # (m, m), row minus column
    wins: np.ndarray  # (m, m) ints
    draws: np.ndarray
    losses: np.ndarray
    p_values: np.ndarray  # (m, m), symmetric, diagonal 1.0
    average_ranks: dict[str, float]

    def pair(self, a: str, b: str) -> dict:
        i, j = self.models.index(a), self.models.index(b)
        return {
            "a": a,
            "b": b,
            "mean_difference": float(self.mean_difference[i, j]),
            "wins": int(self.wins[i, j]),
            "draws": int(self.draws[i, j]),
            "losses": int(self.losses[i, j]),
            "p_value": float(self.p_values[i, j]),
        }


def compare_models(table: Mapping[str, Mapping[str, float]]) -> ComparisonResult:
    """Pairwise statistics over a ``{model: {dataset: accuracy}}`` table.

    All models must cover the same datasets.  Draws are counted at
    3-decimal printed precision; rank 1 is best per dataset with ties
    averaged.
    """
    models = list(table.keys())
    if len(models) < 2:
        raise ValueError("need at least two models to compare")
    datasets = list(table[models[0]].keys())
    for m in models:
        if set(table[m].keys()) != set(datasets):
            missing = set(datasets) ^ set(table[m].keys())
            raise ValueError(f"model {m!r} has mismatched datasets: {sorted(missing)}")

    acc = np.array([[float(table[m][d]) for d in datasets] for m in models])
    m = len(models)
    md = np.zeros((m, m))
    wins = np.zeros((m, m), dtype=int)
    draws = np.zeros((m, m), dtype=int)
    losses = np.zeros((m, m), dtype=int)
    pvals = np.ones((m, m))

    rounded = np.round(acc, DRAW_DECIMALS)
    for i in range(m):
        for j in range(m):
            if i == j:
                draws[i, j] = len(datasets)
                continue
            diff = acc[i] - acc[j]
            md[i, j] = float(diff.mean())
            wins[i, j] = int(np.sum(rounded[i] > rounded[j]))
            draws[i, j] = int(np.sum(rounded[i] == rounded[j]))
            losses[i, j] = int(np.sum(rounded[i] < rounded[j]))
            if j > i:
                p = wilcoxon_signed_rank(diff)
                pvals[i, j] = pvals[j, i] = p

    # rank 1 = best accuracy on each dataset, ties averaged
    ranks = np.vstack([rankdata(-acc[:, k]) for k in range(acc.shape[1])]).T
    average_ranks = {models[i]: float(ranks[i].mean()) for i in range(m)}

    return ComparisonResult(
        models=models,
        datasets=datasets,
        mean_difference=md,
        wins=wins,
        draws=draws,
        losses=losses,
        p_values=pvals,
        average_ranks=average_ranks,
    )


def load_accuracy_table(path) -> dict[str, dict[str, float]]:
    """Read a ``dataset,model1,model2,...`` CSV into a comparison table."""
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 3:
            raise ValueError(f"{path} must have columns dataset,model1,model2,...")
        models = [h.strip() for h in header[1:]]
        table: dict[str, dict[str, float]] = {mdl: {} for mdl in models}
        for row in reader:
            if not row:
                continue
            dataset = row[0].strip()
            for mdl, cell in zip(models, row[1:]):
                table[mdl][dataset] = float(cell)
    return table
