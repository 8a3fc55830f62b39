"""Hyperparameter search over the loss/scheduler space.

Two strategies: independent uniform sampling, and a Gaussian random-walk
accept/reject chain whose acceptance temperature anneals linearly to zero.
Failed objective calls are logged and skipped, never fatal.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

PARAM_ORDER = ("ci", "ct", "ma", "tau_min", "tau_max", "period")


@dataclass
class SearchSpace:
    """Box bounds for each tunable; ``period`` is integer-valued."""

    ma: tuple[float, float] = (0.2, 0.8)
    ci: tuple[float, float] = (0.0, 10.0)
    ct: tuple[float, float] = (0.0, 10.0)
    tau_min: tuple[float, float] = (0.0, 0.4)
    tau_max: tuple[float, float] = (0.5, 1.0)
    period: tuple[int, int] = (10, 50)

    def bounds(self, name: str) -> tuple[float, float]:
        return getattr(self, name)

    def sample(self, rng: np.random.Generator) -> dict[str, float]:
        params = {}
        for name in PARAM_ORDER:
            lo, hi = self.bounds(name)
            if name == "period":
                params[name] = int(rng.integers(int(lo), int(hi) + 1))
            else:
                params[name] = float(rng.uniform(lo, hi))
        return params

    def clip(self, params: dict[str, float]) -> dict[str, float]:
        out = {}
        for name in PARAM_ORDER:
            lo, hi = self.bounds(name)
            value = min(max(params[name], lo), hi)
            out[name] = int(round(value)) if name == "period" else float(value)
        return out

    def contains(self, params: dict[str, float]) -> bool:
        return all(
            self.bounds(name)[0] <= params[name] <= self.bounds(name)[1]
            for name in PARAM_ORDER
        )


@dataclass
class Trial:
    index: int
    params: dict[str, float]
    score: float  # NaN when failed
    status: str  # "ok" | "failed"
    seconds: float
    error: str = ""


@dataclass
class SearchResult:
    best_params: dict[str, float]
    best_score: float
    trials: list[Trial] = field(default_factory=list)


def _run_objective(objective, params, index) -> Trial:
    started = time.perf_counter()
    try:
        score = float(objective(params))
        status, error = "ok", ""
    except Exception as exc:  # noqa: BLE001 - a bad trial must not kill the search
        score, status, error = float("nan"), "failed", f"{type(exc).__name__}: {exc}"
    return Trial(index, dict(params), score, status, time.perf_counter() - started, error)


def search(
    space: SearchSpace,
    objective: Callable[[dict[str, float]], float],
    budget: int,
    strategy: str = "random",
    seed: int = 0,
    workers: int = 1,
    initial_temperature: float = 0.1,
    log_path: Optional[str] = None,
) -> SearchResult:
    """Run ``budget`` trials and return the best-scoring parameters.

    ``random`` draws each trial from a per-trial seeded stream, so results
    are reproducible regardless of worker count.  ``mcmc`` walks from the
    incumbent with per-parameter Gaussian proposals (std = 10% of the
    range), accepting improvements always and regressions with probability
    ``exp(delta / temperature)`` under a linear anneal; it runs sequentially.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if strategy not in ("random", "mcmc"):
        raise ValueError(f"unknown strategy {strategy!r}; expected 'random' or 'mcmc'")

    if strategy == "random":
        param_sets = [
            space.sample(np.random.default_rng((seed, k))) for k in range(budget)
        ]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                trials = list(pool.map(lambda kp: _run_objective(objective, kp[1], kp[0]), enumerate(param_sets)))
        else:
            trials = [_run_objective(objective, p, k) for k, p in enumerate(param_sets)]
    else:
        trials = _mcmc_chain(space, objective, budget, seed, initial_temperature)

    if log_path:
        write_trial_log(trials, log_path)

    ok = [t for t in trials if t.status == "ok"]
    if not ok:
        raise RuntimeError("no successful trial")
    best = max(ok, key=lambda t: t.score)
    return SearchResult(best_params=dict(best.params), best_score=best.score, trials=trials)


def _mcmc_chain(space, objective, budget, seed, initial_temperature) -> list[Trial]:
    rng = np.random.default_rng(seed)
    scales = {
        name: 0.1 * (space.bounds(name)[1] - space.bounds(name)[0]) for name in PARAM_ORDER
    }
    trials: list[Trial] = []
    incumbent: Optional[dict[str, float]] = None
    incumbent_score = -math.inf
    for k in range(budget):
        if incumbent is None:
            candidate = space.sample(rng)
        else:
            candidate = space.clip(
                {name: incumbent[name] + rng.normal(0.0, scales[name]) for name in PARAM_ORDER}
            )
        trial = _run_objective(objective, candidate, k)
        trials.append(trial)
        if trial.status != "ok":
            continue
        temperature = initial_temperature * (1.0 - k / budget)
        delta = trial.score - incumbent_score
        if incumbent is None or delta >= 0:
            incumbent, incumbent_score = candidate, trial.score
        elif temperature > 0 and rng.random() < math.exp(delta / temperature):
            incumbent, incumbent_score = candidate, trial.score
    return trials


def write_trial_log(trials: list[Trial], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["trial", "ci", "ct", "ma", "tau_min", "tau_max", "period", "score", "status", "seconds"]
        )
        for t in trials:
            writer.writerow(
                [t.index]
                + [t.params[name] for name in PARAM_ORDER]
                + [t.score, t.status, f"{t.seconds:.4f}"]
            )
