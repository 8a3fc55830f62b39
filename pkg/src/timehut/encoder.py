"""Per-timestamp representation encoder: projection, masking, dilated convs.

The encoder maps a ``(B, T, N)`` window to ``(B, T, M)`` representations.
Timestamps that are NaN in any channel are zero-filled before projection and
forcibly masked, so padded/missing positions never contribute content.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

CHECKPOINT_MAGIC = "TIMEHUT1"

MASK_MODES = ("binomial", "all_true", "mask_last")


@dataclass
class EncoderConfig:
    input_dims: int
    hidden_dims: int = 64
    output_dims: int = 320
    depth: int = 10
    mask_mode: str = "binomial"

    def __post_init__(self):
        if min(self.input_dims, self.hidden_dims, self.output_dims, self.depth) < 1:
            raise ValueError(f"all encoder dimensions must be >= 1, got {self}")
        if self.mask_mode not in MASK_MODES:
            raise ValueError(f"unknown mask mode {self.mask_mode!r}; expected one of {MASK_MODES}")


def generate_mask(T: int, mode: str, rng: np.random.Generator | None = None) -> np.ndarray:
    """Boolean keep-mask of length ``T`` (True = timestamp kept).

    ``binomial`` keeps each timestamp independently with probability 0.5,
    ``all_true`` keeps everything, ``mask_last`` hides the final timestamp.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if mode == "all_true":
        return np.ones(T, dtype=bool)
    if mode == "mask_last":
        mask = np.ones(T, dtype=bool)
        mask[-1] = False
        return mask
    if mode == "binomial":
        if rng is None:
            rng = np.random.default_rng()
        return rng.random(T) < 0.5
    raise ValueError(f"unknown mask mode {mode!r}; expected one of {MASK_MODES}")


class _DilatedBlock(nn.Module):
    """Residual block: pre-activation GELU, two same-length dilated convs."""

    def __init__(self, channels: int, dilation: int):
        super().__init__()
        self.conv1 = nn.Conv1d(channels, channels, 3, padding=dilation, dilation=dilation)
        self.conv2 = nn.Conv1d(channels, channels, 3, padding=dilation, dilation=dilation)

    def forward(self, x):  # (B, C, T)
        h = self.conv1(F.gelu(x))
        h = self.conv2(F.gelu(h))
        return x + h


class TimeSeriesEncoder(nn.Module):
    """Projection -> masking -> dilated residual stack -> output affine.

    Block ``d`` uses dilation ``2**d`` so the receptive field grows
    geometrically with depth.  The forward pass is length-preserving and
    depends only on window content (no positional input).
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.project = nn.Linear(config.input_dims, config.hidden_dims)
        self.blocks = nn.Sequential(
            *[_DilatedBlock(config.hidden_dims, 2**d) for d in range(config.depth)]
        )
        self.output = nn.Linear(config.hidden_dims, config.output_dims)

    def forward(
        self,
        x: torch.Tensor,
        mask_mode: str | None = None,
        rng: np.random.Generator | None = None,
    ) -> torch.Tensor:
        """Encode a ``(B, T, N)`` batch to ``(B, T, M)``.

        ``mask_mode`` defaults to the configured mode in training mode and
        to ``all_true`` in eval mode.  NaN timestamps are always masked.
        """
        if x.dim() != 3 or x.shape[-1] != self.config.input_dims:
            raise ValueError(
                f"expected (B, T, {self.config.input_dims}) input, got {tuple(x.shape)}"
            )
        B, T, _ = x.shape
        if mask_mode is None:
            mask_mode = self.config.mask_mode if self.training else "all_true"

        present = ~torch.isnan(x).any(dim=-1)  # (B, T)
        x = torch.where(torch.isnan(x), torch.zeros((), dtype=x.dtype, device=x.device), x)
        h = self.project(x)

        if mask_mode == "binomial":
            keep = np.stack([generate_mask(T, "binomial", rng) for _ in range(B)])
            mask = torch.as_tensor(keep, device=x.device)
        else:
            mask = torch.as_tensor(generate_mask(T, mask_mode), device=x.device).expand(B, T)
        mask = mask & present
        h = h * mask.unsqueeze(-1).to(h.dtype)

        h = self.blocks(h.transpose(1, 2)).transpose(1, 2)
        return self.output(h)


def encode_batch(
    encoder: TimeSeriesEncoder,
    batch: np.ndarray,
    mask_mode: str = "all_true",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Gradient-free numpy wrapper around :meth:`TimeSeriesEncoder.forward`."""
    was_training = encoder.training
    encoder.eval()
    try:
        with torch.no_grad():
            dtype = next(encoder.parameters()).dtype
            x = torch.as_tensor(np.asarray(batch), dtype=dtype)
            if x.dim() == 2:
                x = x.unsqueeze(-1)
            out = encoder(x, mask_mode=mask_mode, rng=rng)
        return out.numpy()
    finally:
        encoder.train(was_training)


def save_checkpoint(encoder: TimeSeriesEncoder, path) -> None:
    """Write config plus flat named parameter arrays to a single file."""
    arrays = {f"param/{k}": v.detach().cpu().numpy() for k, v in encoder.state_dict().items()}
    with open(path, "wb") as fh:  # keep the exact filename (np.savez appends .npz)
        np.savez(
            fh,
            magic=np.array(CHECKPOINT_MAGIC),
            config=np.array(json.dumps(asdict(encoder.config))),
            **arrays,
        )


def load_checkpoint(path) -> TimeSeriesEncoder:
    """Rebuild an encoder from a checkpoint written by :func:`save_checkpoint`."""
    with np.load(path, allow_pickle=False) as blob:
        magic = str(blob["magic"])
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a TimeHUT checkpoint (magic {magic!r})")
        config = EncoderConfig(**json.loads(str(blob["config"])))
        encoder = TimeSeriesEncoder(config)
        state = {
            key[len("param/") :]: torch.as_tensor(blob[key])
            for key in blob.files
            if key.startswith("param/")
        }
    encoder.load_state_dict(state)
    encoder.eval()
    return encoder
