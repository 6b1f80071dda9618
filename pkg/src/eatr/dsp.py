"""Range-Doppler processing chain.

Raw 4D beat-signal cube [frames, antennas, chirps, samples]
  -> range FFT (fast time)
  -> static-object removal (mean chirp subtraction per frame)
  -> Doppler FFT (slow time, center-shifted)
  -> RX superposition (mean of per-antenna magnitudes)
  -> ROI crop (low velocities, short ranges)
plus the Doppler-time map and the model input normalization.

Every stage is a pure per-frame map, so chunked and whole-meal processing
give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class RadarConfig:
    """Radar frame geometry and resolutions. Defaults match a 77 GHz
    short-range configuration: 25 fps, 4 cm range bins, 4 cm/s Doppler bins,
    128x128 frames cropped to 64x32."""
    n_frames: int = 0  # 0 = take from the data
    n_virtual_antennas: int = 4
    n_chirps: int = 128
    n_samples: int = 128
    fps: float = 25.0
    range_resolution: float = 0.04
    velocity_resolution: float = 0.04
    crop_doppler: int = 64
    crop_range: int = 32

    def __post_init__(self):
        if not _is_pow2(self.n_chirps) or not _is_pow2(self.n_samples):
            raise ValueError("n_chirps and n_samples must be powers of two")
        if self.n_virtual_antennas < 1:
            raise ValueError("need at least one virtual antenna")
        if not 0 < self.crop_doppler <= self.n_chirps:
            raise ValueError("crop_doppler must be in 1..n_chirps")
        if not 0 < self.crop_range <= self.n_samples:
            raise ValueError("crop_range must be in 1..n_samples")
        if min(self.fps, self.range_resolution, self.velocity_resolution) <= 0:
            raise ValueError("fps and resolutions must be positive")

    @property
    def max_range(self) -> float:
        """Upper edge of the cropped range axis, meters."""
        return self.crop_range * self.range_resolution

    @property
    def max_velocity(self) -> float:
        """Magnitude of the lower edge of the cropped velocity axis, m/s."""
        return (self.crop_doppler // 2) * self.velocity_resolution

    def raw_shape(self, n_frames: int) -> tuple[int, int, int, int]:
        return (n_frames, self.n_virtual_antennas, self.n_chirps, self.n_samples)


def _check_raw(data: np.ndarray, config: RadarConfig, stage: str) -> np.ndarray:
    data = np.asarray(data)
    if data.ndim != 4 or data.shape[1:] != (config.n_virtual_antennas, config.n_chirps,
                                            config.n_samples):
        raise ValueError(f"{stage}: expected shape [frames, {config.n_virtual_antennas}, "
                         f"{config.n_chirps}, {config.n_samples}], got {data.shape}")
    return data


def range_fft(raw: np.ndarray) -> np.ndarray:
    """DFT along fast time (samples), no window, no shift.

    Output bin j corresponds to range j * range_resolution."""
    raw = np.asarray(raw)
    if raw.ndim != 4:
        raise ValueError(f"expected 4D raw cube, got shape {raw.shape}")
    return np.fft.fft(raw, axis=-1).astype(np.complex64)


def remove_static(rp: np.ndarray) -> np.ndarray:
    """Subtract the mean chirp per frame/antenna/range bin (zero-Doppler clutter removal)."""
    rp = np.asarray(rp)
    if rp.ndim != 4:
        raise ValueError(f"expected 4D range-profile cube, got shape {rp.shape}")
    if rp.shape[2] < 2:
        raise ValueError("need at least 2 chirps to estimate the mean chirp")
    return (rp - rp.mean(axis=2, keepdims=True)).astype(np.complex64)


def doppler_fft(rp: np.ndarray) -> np.ndarray:
    """DFT along slow time (chirps), center-shifted.

    Output Doppler index n_chirps/2 + m corresponds to velocity
    m * velocity_resolution, positive = approaching the radar."""
    rp = np.asarray(rp)
    if rp.ndim != 4:
        raise ValueError(f"expected 4D range-profile cube, got shape {rp.shape}")
    return np.fft.fftshift(np.fft.fft(rp, axis=2), axes=2).astype(np.complex64)


def rx_superpose(rd1: np.ndarray) -> np.ndarray:
    """Noncoherent antenna combining: mean of per-antenna magnitudes."""
    rd1 = np.asarray(rd1)
    if rd1.ndim != 4:
        raise ValueError(f"expected 4D range-Doppler cube, got shape {rd1.shape}")
    return np.abs(rd1).mean(axis=1).astype(np.float32)


def crop_roi(rd2: np.ndarray, config: RadarConfig) -> np.ndarray:
    """Keep crop_doppler bins centered on zero velocity and the first crop_range range bins."""
    rd2 = np.asarray(rd2)
    if rd2.ndim != 3:
        raise ValueError(f"expected 3D magnitude cube, got shape {rd2.shape}")
    n_d, n_r = rd2.shape[1], rd2.shape[2]
    if config.crop_doppler > n_d or config.crop_range > n_r:
        raise ValueError(f"crop {config.crop_doppler}x{config.crop_range} larger than "
                         f"frame {n_d}x{n_r}")
    lo = n_d // 2 - config.crop_doppler // 2
    return np.ascontiguousarray(rd2[:, lo:lo + config.crop_doppler, :config.crop_range])


def dt_map(rd: np.ndarray) -> np.ndarray:
    """Doppler-time map: range-mean of each cropped RD frame."""
    rd = np.asarray(rd)
    if rd.ndim != 3:
        raise ValueError(f"expected 3D RD cube, got shape {rd.shape}")
    return rd.mean(axis=-1, dtype=np.float64).astype(np.float32)


def process_meal(raw: np.ndarray, config: RadarConfig) -> np.ndarray:
    """Full chain raw -> cropped RD cube [frames, crop_doppler, crop_range]."""
    raw = _check_raw(raw, config, "process_meal")
    return crop_roi(rx_superpose(doppler_fft(remove_static(range_fft(raw)))), config)


def normalize_for_model(rd: np.ndarray) -> np.ndarray:
    """log(1+x) then per-meal standardization; all-constant meals map to zeros."""
    rd = np.asarray(rd)
    x = np.log1p(rd.astype(np.float64))
    std = x.std()
    if std == 0.0:
        return np.zeros_like(rd, dtype=np.float32)
    return ((x - x.mean()) / std).astype(np.float32)
