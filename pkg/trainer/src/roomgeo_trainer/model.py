"""The convolutional-recurrent regressor and its training loss.

The polar map enters as a one-channel image with time (radius) on one
axis and angle on the other.  Convolution blocks pool only the angular
axis, so the time resolution survives into the recurrent stage: the
feature volume is reshaped across the angular direction into a sequence
of per-time-step feature vectors for a bidirectional GRU.  Two fully
connected layers finish the job; the second is linear because the xy
targets are signed.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .errors import ShapeMismatch

OUT_DIM = 12


@dataclass(frozen=True)
class CRNNConfig:
    """Architecture and optimisation settings.

    Pooling factors pair one-to-one with the conv channel counts and
    act on the angular axis only, so the radial axis keeps its length
    all the way into the recurrent stage.
    """

    conv_channels: tuple[int, ...] = (16, 32, 64)
    kernel_size: int = 3
    angular_pool: tuple[int, ...] = (2, 2, 1)
    dropout: float = 0.2
    gru_hidden: int = 128
    gru_layers: int = 2
    fc_hidden: int = 256
    learning_rate: float = 5e-4
    weight_decay: float = 1e-2
    batch_size: int = 50
    patience: int = 10
    max_epochs: int = 200

    def __post_init__(self):
        # JSON round trips hand these back as lists; canonicalise so
        # configs compare equal regardless of where they came from.
        object.__setattr__(self, "conv_channels", tuple(self.conv_channels))
        object.__setattr__(self, "angular_pool", tuple(self.angular_pool))
        if len(self.angular_pool) != len(self.conv_channels):
            raise ValueError("need one pooling factor per conv block")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch size, epochs and patience must be >= 1")


def label_loss(pred: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
    """Mean over the batch of the seven-term label error.

    Matches the dataset's scalar loss: Euclidean distance for the five
    xy pairs, absolute difference for the two heights, averaged.
    """
    if pred.shape != truth.shape or pred.shape[-1] != OUT_DIM:
        raise ShapeMismatch(
            f"loss needs matching (*, {OUT_DIM}) tensors, got "
            f"{tuple(pred.shape)} and {tuple(truth.shape)}")
    diff = pred - truth
    xy = diff[..., :10].reshape(*diff.shape[:-1], 5, 2)
    planar = torch.linalg.vector_norm(xy, dim=-1).sum(dim=-1)
    heights = diff[..., 10].abs() + diff[..., 11].abs()
    return ((planar + heights) / 7.0).mean()


class CRNN(nn.Module):
    """Map (batch, radii, angles) to 12 label values."""

    def __init__(self, config: CRNNConfig, theta_count: int):
        super().__init__()
        self.config = config
        self.theta_count = theta_count

        blocks = []
        in_ch = 1
        width = theta_count
        pad = config.kernel_size // 2
        for ch, pool in zip(config.conv_channels, config.angular_pool):
            blocks.append(nn.Sequential(
                nn.Conv2d(in_ch, ch, config.kernel_size, padding=pad),
                nn.BatchNorm2d(ch),
                nn.ReLU(),
                nn.Dropout2d(config.dropout),
                nn.MaxPool2d((1, pool)),
            ))
            in_ch = ch
            width = width // pool
        if width < 1:
            raise ShapeMismatch(
                f"{theta_count} angles collapse to nothing under "
                f"pooling {config.angular_pool}")
        self.blocks = nn.ModuleList(blocks)
        self.feature_width = in_ch * width

        self.gru = nn.GRU(self.feature_width, config.gru_hidden,
                          num_layers=config.gru_layers, batch_first=True,
                          bidirectional=True)
        self.head = nn.Sequential(
            nn.Linear(2 * config.gru_hidden, config.fc_hidden),
            nn.ReLU(),
            nn.Linear(config.fc_hidden, OUT_DIM),
        )

    def sequence_features(self, x: torch.Tensor) -> torch.Tensor:
        """Convolutional features as a (batch, time, features) sequence."""
        if x.dim() != 3 or x.shape[-1] != self.theta_count:
            raise ShapeMismatch(
                f"expected (batch, radii, {self.theta_count}) input, "
                f"got {tuple(x.shape)}")
        h = x.unsqueeze(1)
        for block in self.blocks:
            h = block(h)
        # fold channels and the pooled angular axis into one feature
        # vector per time step
        b, c, t, a = h.shape
        return h.permute(0, 2, 1, 3).reshape(b, t, c * a)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        seq = self.sequence_features(x)
        _, h_n = self.gru(seq)
        # final hidden states of the last layer, both directions
        last = torch.cat([h_n[-2], h_n[-1]], dim=-1)
        return self.head(last)
