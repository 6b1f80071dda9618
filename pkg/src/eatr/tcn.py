"""Sequence-to-sequence 3D temporal convolutional network.

Dilated residual 3x3x3 convolutions over (range, doppler, time): the first
layers halve the spatial dimensions (shape-variant), the rest preserve them,
and dilation doubles per layer along time only. A per-frame linear head maps
the flattened features to 3 class logits. The loss couples frame-wise
cross-entropy with a truncated MSE over consecutive log-probabilities that
discourages over-segmentation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

PROB_FLOOR = 1e-8


def receptive_field(n_layers: int) -> int:
    """Frames influencing one output frame for the non-causal network."""
    if n_layers < 1:
        raise ValueError("need at least one layer")
    return 2 ** (n_layers + 1) - 1


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 9
    n_variant: int = 4  # shape-variant layers come first
    n_kernels: int = 32
    n_classes: int = 3
    input_range: int = 32
    input_doppler: int = 64
    causal: bool = False
    dropout_rate: float = 0.30

    def __post_init__(self):
        if self.n_layers < 1 or not 1 <= self.n_variant <= self.n_layers:
            raise ValueError("need 1 <= n_variant <= n_layers")
        r_div = 2 ** (self.n_variant - 1)  # first variant layer keeps range
        d_div = 2 ** self.n_variant
        if self.input_range % r_div or self.input_range < r_div:
            raise ValueError(f"range dim {self.input_range} does not survive "
                             f"{self.n_variant - 1} halvings")
        if self.input_doppler % d_div or self.input_doppler < d_div:
            raise ValueError(f"doppler dim {self.input_doppler} does not survive "
                             f"{self.n_variant} halvings")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0,1)")

    @property
    def out_range(self) -> int:
        return self.input_range // 2 ** (self.n_variant - 1)

    @property
    def out_doppler(self) -> int:
        return self.input_doppler // 2 ** self.n_variant

    @property
    def flatten_dim(self) -> int:
        return self.n_kernels * self.out_range * self.out_doppler

    @property
    def receptive_field(self) -> int:
        return receptive_field(self.n_layers)


class DilatedResidualLayer3D(nn.Module):
    """3x3x3 convolution (dilated along time) -> ReLU -> dropout, plus the input
    carried by a strided 3x3x3 projection whenever shapes change. SAME padding:
    symmetric in time for the non-causal network, left-only for the causal one."""

    def __init__(self, c_in: int, c_out: int, stride: tuple[int, int, int],
                 dilation_t: int, dropout: float, causal: bool):
        super().__init__()
        self.stride = stride
        self.dilation_t = dilation_t
        self.causal = causal
        pad_t = 0 if causal else dilation_t
        self.conv = nn.Conv3d(c_in, c_out, 3, stride=stride, padding=(1, 1, pad_t),
                              dilation=(1, 1, dilation_t))
        if c_in != c_out or stride != (1, 1, 1):
            self.proj = nn.Conv3d(c_in, c_out, 3, stride=stride,
                                  padding=(1, 1, 0 if causal else 1))
        else:
            self.proj = None
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.causal:
            y = self.conv(F.pad(x, (2 * self.dilation_t, 0)))
            res = self.proj(F.pad(x, (2, 0))) if self.proj is not None else x
        else:
            y = self.conv(x)
            res = self.proj(x) if self.proj is not None else x
        return self.dropout(F.relu(y)) + res


class GestureTCN(nn.Module):
    """Input (N, 1, range, doppler, T) -> logits (N, n_classes, T)."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        layers = []
        c_in = 1
        for layer_idx in range(1, config.n_layers + 1):
            if layer_idx == 1:
                stride = (1, 2, 1)  # doppler starts at twice the range size
            elif layer_idx <= config.n_variant:
                stride = (2, 2, 1)
            else:
                stride = (1, 1, 1)
            layers.append(DilatedResidualLayer3D(
                c_in, config.n_kernels, stride, 2 ** (layer_idx - 1),
                config.dropout_rate, config.causal))
            c_in = config.n_kernels
        self.layers = nn.ModuleList(layers)
        self.head = nn.Conv1d(config.flatten_dim, config.n_classes, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        cfg = self.config
        if x.ndim != 5 or x.shape[1] != 1 or x.shape[2] != cfg.input_range \
                or x.shape[3] != cfg.input_doppler:
            raise ValueError(f"expected input (N, 1, {cfg.input_range}, "
                             f"{cfg.input_doppler}, T), got {tuple(x.shape)}")
        if not torch.isfinite(x).all():
            raise ValueError("non-finite values in the model input")
        for layer in self.layers:
            x = layer(x)
        n, _, _, _, t = x.shape
        return self.head(x.reshape(n, cfg.flatten_dim, t))


def build_model(config: ModelConfig, seed: int = 0) -> GestureTCN:
    """Deterministic construction: fan-in-scaled uniform init under a fixed seed.
    Returned in eval mode (dropout off); train() enables it."""
    torch.manual_seed(seed)
    model = GestureTCN(config)
    model.eval()
    return model


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def shape_trace(model: GestureTCN, n_frames: int = 1000) -> list[tuple[str, tuple[int, ...]]]:
    """Per-layer output shapes (channels/range/doppler/time, no batch dim)."""
    cfg = model.config
    was_training = model.training
    model.eval()
    rows = [("input", (1, cfg.input_range, cfg.input_doppler, n_frames))]
    with torch.no_grad():
        x = torch.zeros(1, 1, cfg.input_range, cfg.input_doppler, n_frames)
        for i, layer in enumerate(model.layers, start=1):
            x = layer(x)
            rows.append((f"layer {i}", tuple(x.shape[1:])))
        x = x.reshape(1, cfg.flatten_dim, x.shape[-1])
        rows.append(("flatten", tuple(x.shape[1:])))
        x = model.head(x)
        rows.append(("conv1d", tuple(x.shape[1:])))
        rows.append(("softmax", tuple(x.shape[1:])))
    model.train(was_training)
    return rows


def sequence_probs(model: GestureTCN, window: torch.Tensor) -> torch.Tensor:
    """Frame probabilities for one window given as (T, doppler, range)."""
    if window.ndim != 3:
        raise ValueError(f"expected window (T, doppler, range), got {tuple(window.shape)}")
    x = window.permute(2, 1, 0)[None, None].contiguous()
    logits = model(x)[0]  # (classes, T)
    return torch.softmax(logits, dim=0).T


def frame_probs(model: GestureTCN, window) -> np.ndarray:
    """Inference-mode probabilities as a numpy array [T, n_classes]."""
    was_training = model.training
    model.eval()
    with torch.no_grad():
        dtype = next(model.parameters()).dtype
        probs = sequence_probs(model, torch.as_tensor(np.asarray(window), dtype=dtype))
    model.train(was_training)
    return probs.numpy()


@dataclass(frozen=True)
class LossParams:
    lambda_smooth: float = 0.15
    gamma_trunc: float = 4.0

    def __post_init__(self):
        if self.lambda_smooth < 0 or self.gamma_trunc <= 0:
            raise ValueError("lambda_smooth must be >= 0 and gamma_trunc > 0")


def loss_cls(probs: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Frame-averaged cross-entropy on probabilities; targets are one-hot (T, C)."""
    if probs.shape != targets.shape:
        raise ValueError(f"probs {tuple(probs.shape)} vs targets {tuple(targets.shape)}")
    logp = torch.log(probs.clamp(min=PROB_FLOOR))
    return -(targets * logp).sum() / probs.shape[0]


def loss_tmse(probs: torch.Tensor, gamma: float = 4.0) -> torch.Tensor:
    """Mean squared consecutive log-probability change, truncated at gamma."""
    if probs.shape[0] < 2:
        raise ValueError("need at least 2 frames for the smoothing loss")
    logp = torch.log(probs.clamp(min=PROB_FLOOR))
    delta = (logp[1:] - logp[:-1]).abs().clamp(max=gamma)
    return delta.square().sum() / (probs.shape[0] * probs.shape[1])


def loss_total(probs: torch.Tensor, targets: torch.Tensor,
               params: LossParams = LossParams()) -> torch.Tensor:
    return loss_cls(probs, targets) + params.lambda_smooth * loss_tmse(
        probs, params.gamma_trunc)


def grad_check(model: GestureTCN, window: torch.Tensor, targets: torch.Tensor,
               params: LossParams = LossParams(), eps: float = 1e-5) -> float:
    """Max relative error between autograd and central finite-difference gradients
    of the total loss over every parameter. Run on a small double-precision model
    with dropout off."""
    if next(model.parameters()).dtype != torch.float64:
        raise ValueError("grad_check expects a double-precision model")
    model.eval()

    def evaluate() -> torch.Tensor:
        return loss_total(sequence_probs(model, window), targets, params)

    model.zero_grad()
    evaluate().backward()
    worst = 0.0
    for param in model.parameters():
        analytic = param.grad.reshape(-1)
        flat = param.data.reshape(-1)
        with torch.no_grad():
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                up = evaluate().item()
                flat[i] = orig - eps
                down = evaluate().item()
                flat[i] = orig
                fd = (up - down) / (2.0 * eps)
                err = abs(analytic[i].item() - fd)
                rel = err / max(abs(analytic[i].item()) + abs(fd), 1e-8)
                worst = max(worst, rel)
    return worst


def nominal_delay_s(n_layers: int, fps: float) -> float:
    """Prediction lag of the non-causal network: half the receptive field."""
    return 0.5 * receptive_field(n_layers) / fps


def parameter_summary(config: ModelConfig) -> str:
    model = GestureTCN(config)
    n = count_parameters(model)
    return f"{n} parameters ({n / 1e6:.3f}M), receptive field {config.receptive_field} frames"
