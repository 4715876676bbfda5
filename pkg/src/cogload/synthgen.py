"""Deterministic synthetic multimodal sessions with known ground truth.

Each session emits fNIRS-, eye-, and driving-shaped streams over a block
schedule of workload levels. A configurable subset of fNIRS channels carries
a class-dependent mean shift (plus slow sinusoidal drift); pupil diameters
get a smaller shift; car speed drops and throttle rises with level while
brake stays class-independent. Everything else is Gaussian noise, so the
discriminative channels are known exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .datafusion import (
    DEFAULT_EYE_CHANNELS,
    DRIVING_CHANNELS,
    FNIRS_CHANNEL_COUNT,
    DrivingStream,
    EyeStream,
    FnirsStream,
    LabelInterval,
    LabelTrack,
    fnirs_channel_names,
    write_labels_csv,
    write_stream_csv,
)
from .errors import ValidationError
from .featsel import FeatureMatrix

# class-effect multipliers, in units of level * effect_size * noise_sigma
PUPIL_EFFECT = 0.5
SPEED_EFFECT = -1.0
THROTTLE_EFFECT = 0.8

# quiet baselines the effects and noise ride on (no physiological claim)
PUPIL_BASELINE_MM = 3.5
SPEED_BASELINE = 27.8
THROTTLE_BASELINE = 0.5
BRAKE_BASELINE = 0.1

DRIFT_FREQUENCY_HZ = 0.03


def default_block_schedule(cycles: int = 8, block_s: float = 30.0) -> List[Tuple[int, float]]:
    """cycles repetitions of levels 0, 1, 2, each block_s seconds long."""
    return [(level, block_s) for _ in range(cycles) for level in (0, 1, 2)]


@dataclass
class SynthConfig:
    seed: int = 0
    fnirs_rate: float = 8.0
    eye_rate: float = 120.0
    driving_rate: float = 60.0
    block_schedule: List[Tuple[int, float]] = field(default_factory=default_block_schedule)
    n_informative_fnirs: int = 10
    effect_size: float = 3.0
    noise_sigma: float = 1.0
    drift_amplitude: float = 0.5
    sessions: int = 1

    def __post_init__(self):
        for name in ("fnirs_rate", "eye_rate", "driving_rate"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if not self.block_schedule:
            raise ValidationError("block schedule is empty")
        self.block_schedule = [(int(lv), float(d)) for lv, d in self.block_schedule]
        for lv, d in self.block_schedule:
            if lv not in (0, 1, 2):
                raise ValidationError(f"schedule level must be 0, 1, or 2, got {lv}")
            if d <= 0:
                raise ValidationError("block durations must be positive")
        if not (0 <= self.n_informative_fnirs <= FNIRS_CHANNEL_COUNT):
            raise ValidationError(
                f"n_informative_fnirs must lie in [0, {FNIRS_CHANNEL_COUNT}]"
            )
        if self.effect_size < 0:
            raise ValidationError("effect_size must be >= 0")
        if self.noise_sigma <= 0:
            raise ValidationError("noise_sigma must be positive")
        if self.drift_amplitude < 0:
            raise ValidationError("drift_amplitude must be >= 0")
        if self.sessions < 1:
            raise ValidationError("sessions must be >= 1")

    @property
    def duration_s(self) -> float:
        return float(sum(d for _, d in self.block_schedule))


@dataclass
class SynthSession:
    fnirs: FnirsStream
    eye: EyeStream
    driving: DrivingStream
    labels: LabelTrack
    ground_truth: List[str]
    session_index: int


def informative_fnirs_names(cfg: SynthConfig) -> List[str]:
    """The class-discriminative fNIRS channels; a function of the seed only,
    so every session of a dataset shares them."""
    names = fnirs_channel_names()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    idx = np.sort(rng.choice(FNIRS_CHANNEL_COUNT, size=cfg.n_informative_fnirs, replace=False))
    return [names[i] for i in idx]


def _schedule_track(cfg: SynthConfig) -> LabelTrack:
    intervals = []
    t = 0.0
    for block_id, (level, duration) in enumerate(cfg.block_schedule):
        intervals.append(LabelInterval(t, t + duration, level, block_id))
        t += duration
    return LabelTrack(intervals)


def _levels_at(track: LabelTrack, ts: np.ndarray) -> np.ndarray:
    inside, levels, _ = track.lookup(ts)
    if not inside.all():
        raise ValidationError("generated timestamps escaped the schedule")
    return levels


def generate_session(cfg: SynthConfig, session_index: int = 0) -> SynthSession:
    """One synthetic session, bit-deterministic per (cfg.seed, session_index)."""
    if session_index < 0:
        raise ValidationError("session_index must be >= 0")
    track = _schedule_track(cfg)
    duration = cfg.duration_s
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, session_index]))

    informative = informative_fnirs_names(cfg)
    names = fnirs_channel_names()
    info_idx = [names.index(n) for n in informative]

    # fNIRS: noise everywhere, class shift + slow drift on informative channels
    n_f = int(round(duration * cfg.fnirs_rate))
    t_f = np.arange(n_f) / cfg.fnirs_rate
    lv_f = _levels_at(track, t_f)
    fnirs_vals = rng.normal(0.0, cfg.noise_sigma, size=(n_f, FNIRS_CHANNEL_COUNT))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(info_idx))
    shift = lv_f * cfg.effect_size * cfg.noise_sigma
    for j, col in enumerate(info_idx):
        drift = cfg.drift_amplitude * np.sin(2.0 * np.pi * DRIFT_FREQUENCY_HZ * t_f + phases[j])
        fnirs_vals[:, col] += shift + drift
    fnirs = FnirsStream(t_f, fnirs_vals, names)

    # eye: pupil diameters carry a half-strength class effect, gaze is noise
    n_e = int(round(duration * cfg.eye_rate))
    t_e = np.arange(n_e) / cfg.eye_rate
    lv_e = _levels_at(track, t_e)
    eye_vals = rng.normal(0.0, cfg.noise_sigma, size=(n_e, len(DEFAULT_EYE_CHANNELS)))
    pupil_shift = PUPIL_BASELINE_MM + PUPIL_EFFECT * lv_e * cfg.effect_size * cfg.noise_sigma
    eye_vals[:, 0] += pupil_shift
    eye_vals[:, 1] += pupil_shift
    eye = EyeStream(t_e, eye_vals, list(DEFAULT_EYE_CHANNELS))

    # driving: speed drops and throttle rises with level, brake does not
    n_d = int(round(duration * cfg.driving_rate))
    t_d = np.arange(n_d) / cfg.driving_rate
    lv_d = _levels_at(track, t_d)
    drv_vals = rng.normal(0.0, cfg.noise_sigma, size=(n_d, len(DRIVING_CHANNELS)))
    level_term = lv_d * cfg.effect_size * cfg.noise_sigma
    drv_vals[:, DRIVING_CHANNELS.index("car_speed")] += SPEED_BASELINE + SPEED_EFFECT * level_term
    drv_vals[:, DRIVING_CHANNELS.index("throttle")] += THROTTLE_BASELINE + THROTTLE_EFFECT * level_term
    drv_vals[:, DRIVING_CHANNELS.index("brake")] += BRAKE_BASELINE
    driving = DrivingStream(t_d, drv_vals, list(DRIVING_CHANNELS))

    if cfg.effect_size > 0:
        ground_truth = list(informative) + ["pupil_diameter_left", "pupil_diameter_right",
                                            "car_speed", "throttle"]
    else:
        ground_truth = []
    return SynthSession(fnirs, eye, driving, track, ground_truth, session_index)


def generate_dataset(cfg: SynthConfig) -> List[SynthSession]:
    """Sessions 0..cfg.sessions-1: distinct noise, shared schedule and ground truth."""
    return [generate_session(cfg, i) for i in range(cfg.sessions)]


# ---------------------------------------------------------------------------
# tabular mode: plain rows for feature-selection tests


def generate_tabular(
    n_samples: int,
    n_informative: int,
    n_noise: int,
    effect_size: float,
    seed: int,
    noise_sigma: float = 1.0,
) -> Tuple[FeatureMatrix, np.ndarray, List[str]]:
    """Rows of (informative + noise) features with known informative names.

    Informative columns get mean level * effect_size * noise_sigma; noise
    columns are pure Gaussian. Informative positions are scattered among the
    columns by the seed. Returns (matrix, labels, informative_names).
    """
    if n_samples < 2:
        raise ValidationError("n_samples must be >= 2")
    if n_informative < 0 or n_noise < 0 or n_informative + n_noise < 1:
        raise ValidationError("need a non-negative split with at least one feature")
    if noise_sigma <= 0:
        raise ValidationError("noise_sigma must be positive")
    if effect_size < 0:
        raise ValidationError("effect_size must be >= 0")
    n_features = n_informative + n_noise
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    labels = rng.integers(0, 3, size=n_samples)
    values = rng.normal(0.0, noise_sigma, size=(n_samples, n_features))
    info_cols = np.sort(rng.choice(n_features, size=n_informative, replace=False))
    values[:, info_cols] += (labels * effect_size * noise_sigma)[:, None]
    names = [f"feat{i:03d}" for i in range(n_features)]
    informative = [names[i] for i in info_cols]
    return FeatureMatrix(values, names), labels.astype(np.int64), informative


# ---------------------------------------------------------------------------
# file output


def write_session(session: SynthSession, directory) -> dict:
    """Write the four per-session CSVs; returns relative file names."""
    os.makedirs(directory, exist_ok=True)
    files = {
        "fnirs": "fnirs.csv",
        "eye": "eye.csv",
        "driving": "driving.csv",
        "labels": "labels.csv",
    }
    write_stream_csv(os.path.join(directory, files["fnirs"]), session.fnirs)
    write_stream_csv(os.path.join(directory, files["eye"]), session.eye)
    write_stream_csv(os.path.join(directory, files["driving"]), session.driving)
    write_labels_csv(os.path.join(directory, files["labels"]), session.labels)
    return files


def write_dataset(cfg: SynthConfig, sessions: List[SynthSession], directory) -> str:
    """Write all sessions plus a manifest.json recording config and ground truth.

    Returns the manifest path.
    """
    os.makedirs(directory, exist_ok=True)
    session_dirs = []
    for session in sessions:
        name = f"session_{session.session_index:02d}"
        write_session(session, os.path.join(directory, name))
        session_dirs.append(name)
    manifest = {
        "config": {
            "seed": cfg.seed,
            "fnirs_rate": cfg.fnirs_rate,
            "eye_rate": cfg.eye_rate,
            "driving_rate": cfg.driving_rate,
            "block_schedule": [[lv, d] for lv, d in cfg.block_schedule],
            "n_informative_fnirs": cfg.n_informative_fnirs,
            "effect_size": cfg.effect_size,
            "noise_sigma": cfg.noise_sigma,
            "drift_amplitude": cfg.drift_amplitude,
            "sessions": cfg.sessions,
        },
        "ground_truth": sessions[0].ground_truth if sessions else [],
        "sessions": session_dirs,
    }
    path = os.path.join(directory, "manifest.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
