"""Training loop, whole-meal inference, and checkpoint files.

Training samples fixed-length windows with random offsets from each meal per
epoch and minimizes the combined classification + smoothing loss with Adam.
The model snapshot with the lowest validation loss is kept. Whole meals are
predicted in overlapping chunks stitched so that every frame sees its full
receptive field, which makes chunked output identical to a single pass.
"""

from __future__ import annotations

import copy
import csv
import json
import struct
import warnings
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .tcn import (GestureTCN, LossParams, ModelConfig, loss_total, receptive_field,
                  sequence_probs)

CKPT_MAGIC = b"EATM"
CKPT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    window_frames: int = 1000  # 40 s at 25 fps
    epochs: int = 20
    seed: int = 0
    threads: int | None = None  # pin for reproducible runs
    windows_per_meal: int | None = None  # default: ceil(frames / window_frames)
    verbose: bool = False  # per-epoch progress on stdout


@dataclass
class Meal:
    """A normalized RD cube [T, doppler, range] and its frame labels [T]."""
    meal_id: str
    rd: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.rd.ndim != 3 or len(self.labels) != self.rd.shape[0]:
            raise ValueError(f"meal {self.meal_id}: labels do not align with the cube "
                             f"({len(self.labels)} vs {self.rd.shape})")


def _meal_tensors(meals: list[Meal]):
    return [(torch.as_tensor(m.rd, dtype=torch.float32),
             torch.as_tensor(np.asarray(m.labels), dtype=torch.int64)) for m in meals]


def _one_hot(labels: torch.Tensor, n_classes: int) -> torch.Tensor:
    return F.one_hot(labels, n_classes).to(torch.float32)


def train(model: GestureTCN, train_meals: list[Meal], val_meals: list[Meal],
          cfg: TrainConfig = TrainConfig(),
          loss_params: LossParams = LossParams()) -> list[dict]:
    """Optimize in place; returns the per-epoch history. The weights with the best
    validation loss (training loss when no validation meals are given) are restored
    at the end. Deterministic for a fixed seed and thread count."""
    if not train_meals:
        raise ValueError("empty training set")
    r_field = receptive_field(model.config.n_layers)
    if cfg.window_frames < r_field:
        warnings.warn(f"window_frames {cfg.window_frames} is shorter than the "
                      f"receptive field {r_field}; boundary frames train on "
                      f"truncated context", stacklevel=2)
    if cfg.threads:
        torch.set_num_threads(cfg.threads)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    train_data = _meal_tensors(train_meals)
    val_data = _meal_tensors(val_meals)
    n_classes = model.config.n_classes
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate,
                                 betas=(cfg.beta1, cfg.beta2), eps=cfg.adam_eps)

    history = []
    best = (float("inf"), copy.deepcopy(model.state_dict()))
    for epoch in range(cfg.epochs):
        windows = []
        for mi, (rd, _) in enumerate(train_data):
            n = rd.shape[0]
            span = min(cfg.window_frames, n)
            count = cfg.windows_per_meal or -(-n // cfg.window_frames)
            for off in rng.integers(0, n - span + 1, size=count):
                windows.append((mi, int(off), span))
        order = rng.permutation(len(windows))

        model.train()
        train_loss = 0.0
        for wi in order:
            mi, off, span = windows[wi]
            rd, labels = train_data[mi]
            probs = sequence_probs(model, rd[off:off + span])
            loss = loss_total(probs, _one_hot(labels[off:off + span], n_classes),
                              loss_params)
            if not torch.isfinite(loss):
                raise RuntimeError(f"non-finite loss at epoch {epoch}, meal "
                                   f"{train_meals[mi].meal_id}, offset {off}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            train_loss += loss.item()
        train_loss /= len(windows)

        if val_data:
            val_loss, val_acc = _validate(model, val_data, loss_params, n_classes)
        else:
            val_loss, val_acc = train_loss, float("nan")
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_loss": val_loss, "val_frame_acc": val_acc})
        if cfg.verbose:
            print(f"epoch {epoch}: train_loss {train_loss:.4f} val_loss {val_loss:.4f} "
                  f"val_frame_acc {val_acc:.4f}", flush=True)
        if val_loss < best[0]:
            best = (val_loss, copy.deepcopy(model.state_dict()))
    model.load_state_dict(best[1])
    model.eval()
    return history


def _validate(model: GestureTCN, val_data, loss_params: LossParams,
              n_classes: int) -> tuple[float, float]:
    model.eval()
    losses = []
    hits = total = 0
    with torch.no_grad():
        for rd, labels in val_data:
            probs = torch.as_tensor(predict_probs(model, rd.numpy()))
            losses.append(loss_total(probs, _one_hot(labels, n_classes),
                                     loss_params).item())
            hits += int((probs.argmax(dim=1) == labels).sum())
            total += labels.shape[0]
    return float(np.mean(losses)), hits / total


def predict_probs(model: GestureTCN, rd: np.ndarray, max_chunk: int = 2000) -> np.ndarray:
    """Frame probabilities for a whole normalized meal [T, doppler, range].

    Meals longer than max_chunk are processed in chunks overlapping by
    receptive_field - 1 frames and center-cropped, so every emitted frame sees
    exactly the context it would in a single pass."""
    r_field = receptive_field(model.config.n_layers)
    max_chunk = max(max_chunk, r_field)
    half = (r_field - 1) // 2
    n = rd.shape[0]
    was_training = model.training
    model.eval()
    dtype = next(model.parameters()).dtype
    out = np.empty((n, model.config.n_classes), dtype=np.float32)
    with torch.no_grad():
        if n <= max_chunk:
            out[:] = sequence_probs(model, torch.as_tensor(rd, dtype=dtype)).numpy()
        else:
            step = max_chunk - 2 * half
            for a in range(0, n, step):
                b = min(a + step, n)
                lo = max(0, a - half)
                hi = min(n, b + half)
                window = torch.as_tensor(rd[lo:hi], dtype=dtype)
                out[a:b] = sequence_probs(model, window).numpy()[a - lo:b - lo]
    model.train(was_training)
    return out


def predict_meal(model: GestureTCN, rd: np.ndarray, max_chunk: int = 2000) -> np.ndarray:
    """Frame-wise argmax labels; ties resolve to the lowest class id."""
    return np.argmax(predict_probs(model, rd, max_chunk), axis=1).astype(np.int64)


def save_checkpoint(path, model: GestureTCN) -> None:
    """Header (config + parameter manifest as JSON) followed by little-endian
    float32 blobs in manifest order."""
    state = model.state_dict()
    manifest = [{"name": name, "shape": list(tensor.shape)} for name, tensor in state.items()]
    header = json.dumps({"model": asdict(model.config), "params": manifest}).encode()
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<HI", CKPT_VERSION, len(header)))
        fh.write(header)
        for tensor in state.values():
            fh.write(tensor.numpy().astype("<f4").tobytes(order="C"))


def load_checkpoint(path) -> GestureTCN:
    from .io import FormatError

    with open(path, "rb") as fh:
        if fh.read(4) != CKPT_MAGIC:
            raise FormatError(f"{path}: not a model checkpoint")
        version, header_len = struct.unpack("<HI", fh.read(6))
        if version != CKPT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        meta = json.loads(fh.read(header_len).decode())
        model = GestureTCN(ModelConfig(**meta["model"]))
        state = {}
        for entry in meta["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            blob = fh.read(count * 4)
            if len(blob) != count * 4:
                raise FormatError(f"{path}: checkpoint truncated at {entry['name']}")
            state[entry["name"]] = torch.as_tensor(
                np.frombuffer(blob, dtype="<f4").reshape(shape).copy())
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after parameters")
    model.load_state_dict(state)
    model.eval()
    return model


def write_history_csv(path, history: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_frame_acc"])
        for row in history:
            writer.writerow([row["epoch"], f"{row['train_loss']:.6f}",
                             f"{row['val_loss']:.6f}", f"{row['val_frame_acc']:.6f}"])
