"""Temperature schedules for the contrastive losses.

The default schedule sweeps the softmax temperature periodically between
``tau_max`` (tolerance-friendly, smooth gradients) and ``tau_min``
(uniformity-friendly, sharp gradients) as training progresses.  A set of
common alternative schedules is provided for comparison runs; every kind is
clamped into ``[tau_min, tau_max]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

SCHEDULER_KINDS = (
    "cosine_squared",
    "exponential",
    "sigmoid",
    "warmup_cosine",
    "sawtooth_cyclic",
    "logarithmic",
    "step_decay",
    "cosine_restarts",
    "tanh",
    "constant",
)

# Per-kind extra parameters and their defaults.
_EXTRA_DEFAULTS = {
    "exponential": {"decay": 0.95},
    "sigmoid": {"steepness": 1.0},
    "warmup_cosine": {"warmup": 2.0},
    "sawtooth_cyclic": {"cycle": None},  # None -> period / 3
    "logarithmic": {"offset": 1.0},
    "step_decay": {"gamma": 0.5},
    "cosine_restarts": {"restart": 5.0},
    "tanh": {"steepness": 2.0},
}


@dataclass
class SchedulerConfig:
    """Configuration of a temperature schedule.

    ``period`` is the oscillation period (in epochs) of the periodic kinds
    and the decay horizon of the monotone ones.  ``extra`` holds
    kind-specific parameters (decay, steepness, warmup, cycle, offset,
    gamma, restart).
    """

    kind: str = "cosine_squared"
    tau_min: float = 0.07
    tau_max: float = 0.8
    period: float = 30.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCHEDULER_KINDS:
            raise ValueError(
                f"unknown scheduler kind {self.kind!r}; expected one of {SCHEDULER_KINDS}"
            )
        if not (0.0 < self.tau_min <= self.tau_max):
            raise ValueError(
                f"need 0 < tau_min <= tau_max, got ({self.tau_min}, {self.tau_max})"
            )
        if self.period <= 0:
            raise ValueError(f"period must be positive, got {self.period}")

    def param(self, name: str) -> float:
        """Kind-specific extra parameter with its documented default."""
        default = _EXTRA_DEFAULTS.get(self.kind, {}).get(name)
        value = self.extra.get(name, default)
        if value is None and name == "cycle":
            return self.period / 3.0
        return float(value)


def _cosine_squared(cfg: SchedulerConfig, sigma: float, period: float) -> float:
    # cos^2(pi*s/P) written as (1+cos(2*pi*s/P))/2 and applied as a convex
    # combination, so the extremes hit tau_max / tau_min exactly.
    c = 0.5 * (1.0 + math.cos(2.0 * math.pi * sigma / period))
    return cfg.tau_min * (1.0 - c) + cfg.tau_max * c


def tau_at(cfg: SchedulerConfig, sigma: float) -> float:
    """Temperature at schedule position ``sigma`` (>= 0, typically the epoch).

    Always returns a value in ``[tau_min, tau_max]``; the constant kind
    returns ``tau_max``.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    lo, hi = cfg.tau_min, cfg.tau_max
    delta = hi - lo
    kind = cfg.kind

    if kind == "cosine_squared":
        return _cosine_squared(cfg, sigma, cfg.period)
    if kind == "constant":
        return hi
    if kind == "exponential":
        value = lo + delta * cfg.param("decay") ** sigma
    elif kind == "sigmoid":
        steep = cfg.param("steepness")
        value = lo + delta * (1.0 - 1.0 / (1.0 + math.exp(-steep * (sigma - cfg.period / 2.0))))
    elif kind == "warmup_cosine":
        warm = cfg.param("warmup")
        if sigma <= warm:
            value = lo + delta * (sigma / warm if warm > 0 else 1.0)
        elif sigma >= cfg.period:
            value = lo
        else:
            phase = (sigma - warm) / (cfg.period - warm)
            value = lo + delta * 0.5 * (1.0 + math.cos(math.pi * phase))
    elif kind == "sawtooth_cyclic":
        # Snap to an integer number of cycles per period so the schedule is
        # exactly period-periodic even when the cycle length is inexact.
        cycles = max(1, round(cfg.period / cfg.param("cycle")))
        frac = math.fmod(sigma, cfg.period) * cycles / cfg.period
        frac -= math.floor(frac)
        value = hi - delta * frac
    elif kind == "logarithmic":
        off = cfg.param("offset")
        value = hi - delta * math.log(off + sigma) / math.log(off + cfg.period)
    elif kind == "step_decay":
        step = max(cfg.period / 4.0, 1e-12)
        value = hi * cfg.param("gamma") ** math.floor(sigma / step)
    elif kind == "cosine_restarts":
        return _cosine_squared(cfg, sigma, cfg.param("restart"))
    elif kind == "tanh":
        value = lo + delta * (1.0 - math.tanh(cfg.param("steepness") * sigma / cfg.period))
    else:  # pragma: no cover - guarded by SchedulerConfig
        raise ValueError(f"unknown scheduler kind {kind!r}")

    return min(hi, max(lo, value))


def make_schedule(cfg: SchedulerConfig, total_steps: int) -> list[float]:
    """Precompute ``[tau_at(cfg, k) for k in 0..total_steps-1]``."""
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    return [tau_at(cfg, float(k)) for k in range(total_steps)]
