"""Figure exports: 16-bit PGM images and bit-exact CSV dumps of 2D maps."""

from __future__ import annotations

import numpy as np


def save_pgm16(path, frame: np.ndarray) -> None:
    """Min-max scaled 16-bit binary PGM (P5, big-endian samples per the format)."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise ValueError(f"expected a 2D map, got shape {frame.shape}")
    lo, hi = frame.min(), frame.max()
    scaled = np.zeros_like(frame) if hi == lo else (frame - lo) / (hi - lo) * 65535.0
    pixels = np.round(scaled).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{frame.shape[1]} {frame.shape[0]}\n65535\n".encode("ascii"))
        fh.write(pixels.tobytes(order="C"))


def save_frame_csv(path, frame: np.ndarray) -> None:
    """Comma-separated rows; 9 significant digits round-trip float32 exactly."""
    frame = np.asarray(frame, dtype=np.float32)
    if frame.ndim != 2:
        raise ValueError(f"expected a 2D map, got shape {frame.shape}")
    np.savetxt(path, frame, delimiter=",", fmt="%.9g")


def load_frame_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=np.float32, ndmin=2)
