"""Synthetic point-scatterer meal sessions.

Generates complex beat-signal cubes plus ground-truth gesture intervals.
The signal is synthesized directly in normalized bin coordinates: a
scatterer at range d and radial velocity v contributes, for chirp i and
sample n,

    A * exp(j*(2*pi*(d/(dr*Ns))*n + 2*pi*(v/(dv*Nc))*i + phi0))

so the range FFT peaks at bin d/dr and the center-shifted Doppler FFT at
bin Nc/2 + v/dv (positive velocity = approaching the radar). This keeps the
frequency-proportional-to-range and phase-proportional-to-velocity structure
without modeling RF units.

Geometry: the radar sits nearest the plate, so the plate-to-mouth raise
recedes (negative Doppler) and the return approaches. Range is held constant
within a frame; kinematics are evaluated at frame centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dsp import RadarConfig, process_meal
from .io import DRINKING, EATING, Interval, validate_track

Trajectory = Callable[[float], tuple[float, float]]  # time -> (range m, velocity m/s)

GESTURE_KINDS = ("eating_fork_knife", "eating_chopsticks", "eating_spoon", "eating_hand",
                 "drinking")


@dataclass(frozen=True)
class Scatterer:
    amplitude: float
    trajectory: Trajectory
    phase0: float = 0.0


def static_scatterer(range_m: float, amplitude: float, phase0: float = 0.0) -> Scatterer:
    return Scatterer(amplitude, lambda t: (range_m, 0.0), phase0)


def sway_scatterer(center_m: float, sway_m: float, period_s: float, amplitude: float,
                   phase0: float = 0.0) -> Scatterer:
    """Slow sinusoidal torso sway around a fixed range."""
    w = 2.0 * math.pi / period_s

    def traj(t: float) -> tuple[float, float]:
        return center_m + sway_m * math.sin(w * t), -sway_m * w * math.cos(w * t)

    return Scatterer(amplitude, traj, phase0)


@dataclass(frozen=True)
class GestureTemplate:
    """Hand-to-mouth reach: raised-cosine raise, still dwell, raised-cosine return."""
    kind: str
    d_start: float  # plate/rest range, meters
    d_mouth: float  # mouth range, meters
    raise_time: float
    dwell_time: float
    return_time: float

    def __post_init__(self):
        if self.kind not in GESTURE_KINDS:
            raise ValueError(f"unknown gesture kind {self.kind!r}")
        if min(self.d_start, self.d_mouth) <= 0 or self.d_start == self.d_mouth:
            raise ValueError("d_start and d_mouth must be positive and distinct")
        if min(self.raise_time, self.return_time) <= 0 or self.dwell_time < 0:
            raise ValueError("phase durations must be positive (dwell may be zero)")

    @property
    def label(self) -> int:
        return DRINKING if self.kind == "drinking" else EATING

    @property
    def duration(self) -> float:
        return self.raise_time + self.dwell_time + self.return_time

    @property
    def peak_speed(self) -> float:
        reach = abs(self.d_mouth - self.d_start)
        return math.pi * reach / (2.0 * min(self.raise_time, self.return_time))


def _raised_cosine(d0: float, d1: float, tau: float, phase_len: float) -> tuple[float, float]:
    """Position and range rate along a smooth d0 -> d1 ramp."""
    s = 0.5 * (1.0 - math.cos(math.pi * tau / phase_len))
    d = d0 + (d1 - d0) * s
    d_dot = (d1 - d0) * math.pi / (2.0 * phase_len) * math.sin(math.pi * tau / phase_len)
    return d, d_dot


def gesture_trajectory(template: GestureTemplate) -> Trajectory:
    """Trajectory relative to the gesture start; v = -d' (positive = approaching)."""
    t_raise = template.raise_time
    t_hold = t_raise + template.dwell_time
    t_end = t_hold + template.return_time

    def traj(t: float) -> tuple[float, float]:
        if t <= 0.0 or t >= t_end:
            return template.d_start, 0.0
        if t < t_raise:
            d, d_dot = _raised_cosine(template.d_start, template.d_mouth, t, t_raise)
        elif t < t_hold:
            return template.d_mouth, 0.0
        else:
            d, d_dot = _raised_cosine(template.d_mouth, template.d_start, t - t_hold,
                                      template.return_time)
        return d, -d_dot

    return traj


@dataclass(frozen=True)
class MealScript:
    """Scripted meal: gestures plus torso sway, static clutter, noise, and any
    extra custom scatterers (used by the verification oracles)."""
    duration_s: float
    gestures: tuple[tuple[float, GestureTemplate], ...] = ()
    hand_amplitude: float = 1.0
    drink_amplitude: float = 1.5  # cup + hand reflect more strongly
    torso_range: float = 0.90
    torso_sway_m: float = 0.012
    torso_period_s: float = 4.0
    torso_amplitude: float = 0.5
    clutter: tuple[tuple[float, float], ...] = ((0.20, 2.0), (1.10, 1.5))  # (range, amplitude)
    noise_snr_db: float = 20.0  # relative to the strongest scatterer; inf = noiseless
    extra_scatterers: tuple[Scatterer, ...] = ()

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("meal duration must be positive")
        last_end = 0.0
        for start, template in sorted(self.gestures, key=lambda g: g[0]):
            if start < last_end:
                raise ValueError(f"gesture at {start:.2f}s overlaps the previous one")
            if start + template.duration > self.duration_s:
                raise ValueError(f"gesture at {start:.2f}s runs past the meal end")
            last_end = start + template.duration

    def intervals(self) -> list[Interval]:
        return validate_track([Interval(start, start + tpl.duration, tpl.label)
                               for start, tpl in self.gestures])


def _hand_trajectory(gestures) -> Trajectory:
    """One hand scatterer: the active gesture's path, else resting at the next plate
    position. Rest jumps between different plate ranges are invisible after static
    removal (v = 0)."""
    starts = [g[0] for g in gestures]
    trajs = [gesture_trajectory(tpl) for _, tpl in gestures]

    def traj(t: float) -> tuple[float, float]:
        idx = int(np.searchsorted(starts, t, side="right")) - 1
        if idx >= 0:
            start, tpl = gestures[idx]
            if t < start + tpl.duration:
                return trajs[idx](t - start)
        nxt = min(idx + 1, len(gestures) - 1)
        return gestures[nxt][1].d_start, 0.0

    return traj


def _gesture_amplitude(script: MealScript, label: int) -> float:
    return script.drink_amplitude if label == DRINKING else script.hand_amplitude


def _tracks(script: MealScript, times: np.ndarray):
    """Per-scatterer (amplitude, range, velocity) arrays sampled at frame centers,
    plus the constant phase offset."""
    tracks = []
    const = [(static_scatterer(r, a)) for r, a in script.clutter]
    if script.torso_amplitude > 0:
        const.append(sway_scatterer(script.torso_range, script.torso_sway_m,
                                    script.torso_period_s, script.torso_amplitude))
    const.extend(script.extra_scatterers)
    for scat in const:
        d = np.empty(times.shape)
        v = np.empty(times.shape)
        for i, t in enumerate(times):
            d[i], v[i] = scat.trajectory(t)
        tracks.append((np.full(times.shape, scat.amplitude), d, v, scat.phase0))
    gestures = sorted(script.gestures, key=lambda g: g[0])
    if gestures:
        hand = _hand_trajectory(gestures)
        d = np.empty(times.shape)
        v = np.empty(times.shape)
        for i, t in enumerate(times):
            d[i], v[i] = hand(t)
        amp = np.full(times.shape, script.hand_amplitude)
        for start, tpl in gestures:
            inside = (times >= start) & (times < start + tpl.duration)
            amp[inside] = _gesture_amplitude(script, tpl.label)
        tracks.append((amp, d, v, 0.0))
    return tracks


def _peak_amplitude(script: MealScript) -> float:
    amps = [a for _, a in script.clutter] + [s.amplitude for s in script.extra_scatterers]
    if script.torso_amplitude > 0:
        amps.append(script.torso_amplitude)
    for _, tpl in script.gestures:
        amps.append(_gesture_amplitude(script, tpl.label))
    return max(amps) if amps else 1.0


def _frame_rng(seed: int, frame: int) -> np.random.Generator:
    """Counter-style per-frame stream so chunked synthesis is schedule-independent."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(frame,)))


def synth_frames(script: MealScript, config: RadarConfig, seed: int, frame_start: int,
                 frame_count: int, allow_aliasing: bool = False) -> np.ndarray:
    """Beat-signal chunk [frame_count, antennas, chirps, samples], complex64."""
    n_v, n_c, n_s = config.n_virtual_antennas, config.n_chirps, config.n_samples
    signal = np.zeros((frame_count, n_c, n_s), dtype=np.complex64)
    times = (np.arange(frame_start, frame_start + frame_count) + 0.5) / config.fps
    chirp_idx = np.arange(n_c, dtype=np.float64)
    samp_idx = np.arange(n_s, dtype=np.float64)
    for amp, d, v, phase0 in _tracks(script, times):
        r_bins = d / config.range_resolution
        v_bins = v / config.velocity_resolution
        if not allow_aliasing:
            if (r_bins < 0).any() or (r_bins >= n_s).any():
                raise ValueError("scatterer range outside the representable span")
            if (v_bins < -n_c / 2).any() or (v_bins >= n_c / 2).any():
                raise ValueError("scatterer velocity aliases; "
                                 "pass allow_aliasing=True to permit")
        range_tone = np.exp(2j * np.pi * np.outer(r_bins / n_s, samp_idx))
        dopp_tone = np.exp(1j * (2.0 * np.pi * np.outer(v_bins / n_c, chirp_idx) + phase0))
        signal += (amp[:, None, None] * np.einsum("fc,fs->fcs", dopp_tone, range_tone)
                   ).astype(np.complex64)

    out = np.empty((frame_count, n_v, n_c, n_s), dtype=np.complex64)
    out[:] = signal[:, None, :, :]
    sigma = _peak_amplitude(script) * 10.0 ** (-script.noise_snr_db / 20.0)
    if sigma > 0:
        per_comp = np.float32(sigma / math.sqrt(2.0))
        for i in range(frame_count):
            rng = _frame_rng(seed, frame_start + i)
            noise = rng.standard_normal((n_v, n_c, 2 * n_s), dtype=np.float32)
            out[i] += noise.view(np.complex64) * per_comp
    return out


def n_frames_for(script: MealScript, config: RadarConfig) -> int:
    return int(round(script.duration_s * config.fps))


def synth_raw_cube(script: MealScript, config: RadarConfig, seed: int,
                   allow_aliasing: bool = False) -> tuple[np.ndarray, list[Interval]]:
    """Whole-meal raw cube plus the scripted ground-truth intervals."""
    n = n_frames_for(script, config)
    raw = synth_frames(script, config, seed, 0, n, allow_aliasing)
    return raw, script.intervals()


def synth_rd_cube(script: MealScript, config: RadarConfig, seed: int,
                  chunk_frames: int = 256) -> tuple[np.ndarray, list[Interval]]:
    """Simulate and process in frame chunks, bounding memory; bit-identical to
    processing the whole raw cube (all stages are per-frame maps)."""
    n = n_frames_for(script, config)
    rd = np.empty((n, config.crop_doppler, config.crop_range), dtype=np.float32)
    for start in range(0, n, chunk_frames):
        count = min(chunk_frames, n - start)
        rd[start:start + count] = process_meal(
            synth_frames(script, config, seed, start, count), config)
    return rd, script.intervals()


@dataclass(frozen=True)
class StatsProfile:
    """Gesture duration statistics and class-time ratios used by the sampler."""
    eating_mean: float = 2.76
    eating_std: float = 1.32
    eating_range: tuple[float, float] = (1.04, 17.08)
    drinking_mean: float = 5.22
    drinking_std: float = 2.14
    drinking_range: tuple[float, float] = (2.36, 20.60)
    time_ratio: tuple[float, float, float] = (11.09, 2.71, 1.0)  # other : eating : drinking
    plate_range: tuple[float, float] = (0.30, 0.45)
    reach_range: tuple[float, float] = (0.30, 0.50)
    min_gap_s: float = 1.0
    eating_kinds: tuple[str, ...] = ("eating_fork_knife", "eating_chopsticks",
                                     "eating_spoon", "eating_hand")


PROFILES = {"default": StatsProfile()}

# largest reach per second of raise time that keeps the raised-cosine peak
# speed comfortably inside the +-1.28 m/s ROI (peak = pi*reach/(2*t_raise))
_REACH_PER_RAISE = 0.78


def _lognormal_params(mean: float, std: float) -> tuple[float, float]:
    var_ratio = (std / mean) ** 2
    sigma2 = math.log1p(var_ratio)
    return math.log(mean) - 0.5 * sigma2, math.sqrt(sigma2)


def sample_gesture_duration(profile: StatsProfile, label: int,
                            rng: np.random.Generator) -> float:
    """Log-normal matched to the profile's moments, clipped to its observed range."""
    if label == DRINKING:
        mu, sigma = _lognormal_params(profile.drinking_mean, profile.drinking_std)
        lo, hi = profile.drinking_range
    else:
        mu, sigma = _lognormal_params(profile.eating_mean, profile.eating_std)
        lo, hi = profile.eating_range
    return float(np.clip(rng.lognormal(mu, sigma), lo, hi))


def _make_template(profile: StatsProfile, label: int, duration: float,
                   rng: np.random.Generator) -> GestureTemplate:
    """Class-distinct kinematics: eating is a quick stroke to the mouth
    (peak speeds ~0.6-1.2 m/s), drinking a slow deliberate lift of the cup
    (~0.3-0.6 m/s), so the Doppler bands barely overlap."""
    if label == DRINKING:
        kind = "drinking"
        t_move = min(max(0.30 * duration, 1.1), 1.7)
        reach = rng.uniform(0.30, 0.45)
    else:
        kind = profile.eating_kinds[rng.integers(len(profile.eating_kinds))]
        t_move = min(0.35 * duration, 0.8)
        reach = rng.uniform(*profile.reach_range)
    d_start = rng.uniform(*profile.plate_range)
    reach = min(reach, _REACH_PER_RAISE * t_move, 1.20 - d_start)
    return GestureTemplate(kind=kind, d_start=d_start, d_mouth=d_start + reach,
                           raise_time=t_move, dwell_time=duration - 2.0 * t_move,
                           return_time=t_move)


def sample_meal_script(profile: StatsProfile, duration_s: float, seed: int) -> MealScript:
    """Random meal with class mix matching the profile's time ratios.

    The first two gestures are forced to eating then drinking so that short
    desk-scale meals still contain both classes."""
    rng = np.random.default_rng(seed)
    _, r_eat, r_drink = profile.time_ratio
    rate_e = r_eat / profile.eating_mean
    rate_d = r_drink / profile.drinking_mean
    p_eat = rate_e / (rate_e + rate_d)
    mean_gesture = p_eat * profile.eating_mean + (1 - p_eat) * profile.drinking_mean
    mean_gap = mean_gesture * profile.time_ratio[0] / (r_eat + r_drink)

    gestures = []
    t = profile.min_gap_s + 0.5 * rng.exponential(max(mean_gap - profile.min_gap_s, 0.1))
    while True:
        if len(gestures) == 0:
            label = EATING
        elif len(gestures) == 1:
            label = DRINKING
        else:
            label = EATING if rng.random() < p_eat else DRINKING
        duration = sample_gesture_duration(profile, label, rng)
        if t + duration > duration_s - 0.5:
            break
        gestures.append((t, _make_template(profile, label, duration, rng)))
        t += duration + profile.min_gap_s + rng.exponential(
            max(mean_gap - profile.min_gap_s, 0.1))
    return MealScript(duration_s=duration_s, gestures=tuple(gestures))
