"""Excitation signals and closed-loop collection of inversion training data.

After every payload change the platform is held by a plain PID loop while
position commands excite all six channels; the commanded virtual wrench,
the measured pose and the measured accelerations are logged in pairs at a
fixed sample period.  The resulting (pose, accelerations) -> wrench pairs
are what the inversion network trains on.

Two excitation kinds are provided.  The random Gaussian signal (band
limited, independent per channel) covers the input space densely; the
logarithmic sine sweep visits each frequency once and leaves much more
correlated data, which is why it needs larger networks for the same fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .control import PidController
from .engine import LoopConfig, PidLoopController, make_inverter, run_closed_loop
from .errors import ConfigurationError, DatasetError, DivergenceError
from .plant import PlatformParams
from .rbf import Normalization

DATASET_SCHEMA = "mvip-dataset-v1"

INPUT_COLUMNS = ["r_cx", "r_cy", "r_cz", "theta_x", "theta_y", "theta_z",
                 "acc_x", "acc_y", "acc_z", "acc_tx", "acc_ty", "acc_tz"]
TARGET_COLUMNS = ["u_fx", "u_fy", "u_fz", "u_tx", "u_ty", "u_tz"]


@dataclass
class ExcitationConfig:
    """Amplitudes and bands of the position-command excitation."""

    amplitude_translation: float = 0.06    # m (RMS for rgs, peak for sweep)
    amplitude_rotation: float = 0.025      # rad
    band: tuple = (0.2, 2.5)               # Hz, rgs band limits
    sweep_range: tuple = (1.0, 20.0)       # Hz, sweep start/end


@dataclass
class TrainingDataset:
    """Aligned (input, target) pairs sampled at a fixed period."""

    inputs: np.ndarray         # (Q, 12) pose + accelerations
    targets: np.ndarray        # (Q, 6) commanded virtual wrench
    times: np.ndarray          # (Q,)
    sample_period: float
    excitation_kind: str = "none"

    def __post_init__(self):
        if (self.inputs.ndim != 2 or self.inputs.shape[1] != 12
                or self.targets.shape != (self.inputs.shape[0], 6)
                or self.times.shape != (self.inputs.shape[0],)):
            raise DatasetError("dataset arrays are inconsistent")

    def __len__(self):
        return self.inputs.shape[0]


def split_dataset(data: TrainingDataset, train_fraction: float = 2.0 / 3.0):
    """Contiguous split into a training part and a held-out validation part."""
    q = len(data)
    cut = int(round(q * train_fraction))
    if cut < 1 or cut >= q:
        raise DatasetError("dataset too small to split")

    def make(sl):
        return TrainingDataset(inputs=data.inputs[sl], targets=data.targets[sl],
                               times=data.times[sl],
                               sample_period=data.sample_period,
                               excitation_kind=data.excitation_kind)

    return make(slice(0, cut)), make(slice(cut, q))


def normalize_dataset(data: TrainingDataset):
    """Map every dimension onto [-1, 1]; returns the mapped copy and the maps."""
    norm = Normalization.from_data(data.inputs, data.targets)
    mapped = TrainingDataset(
        inputs=norm.normalize_inputs(data.inputs),
        targets=norm.normalize_outputs(data.targets),
        times=data.times.copy(),
        sample_period=data.sample_period,
        excitation_kind=data.excitation_kind,
    )
    return mapped, norm


# ---------------------------------------------------------------------------
# Excitation signals
# ---------------------------------------------------------------------------

def generate_excitation(kind: str, duration: float, rate: float, seed: int = 0,
                        config: ExcitationConfig | None = None) -> np.ndarray:
    """Per-channel position commands, shape (n, 6); deterministic per seed."""
    if duration <= 0:
        raise ConfigurationError("duration must be positive")
    cfg = config or ExcitationConfig()
    n = int(round(duration * rate))
    t = np.arange(n) / rate
    amps = np.array([cfg.amplitude_translation] * 3
                    + [cfg.amplitude_rotation] * 3)

    if kind == "rgs":
        rng = np.random.default_rng(seed)
        lo, hi = cfg.band
        sos = signal.butter(4, [lo, hi], btype="bandpass", fs=rate, output="sos")
        out = np.empty((n, 6))
        for ch in range(6):
            raw = signal.sosfilt(sos, rng.standard_normal(n))
            rms = np.sqrt(np.mean(raw ** 2))
            out[:, ch] = raw * (amps[ch] / rms)
        return out

    if kind == "sweep":
        f0, f1 = cfg.sweep_range
        if not 0 < f0 < f1:
            raise ConfigurationError("sweep range must be increasing and positive")
        L = duration / np.log(f1 / f0)
        phase = 2.0 * np.pi * f0 * L * (np.exp(t / L) - 1.0)
        offsets = np.pi * np.arange(6) / 3.0  # decorrelate the six channels
        return amps * np.sin(phase[:, None] + offsets[None, :])

    raise ConfigurationError(f"unknown excitation kind '{kind}'")


# ---------------------------------------------------------------------------
# Closed-loop collection
# ---------------------------------------------------------------------------

@dataclass
class CollectionConfig:
    """PID gains, rates and noise for the sampling run."""

    duration: float = 240.0
    sample_period: float = 0.002   # s, logging and control period
    substeps: int = 5
    pid_kp: float = 250.0          # 1/s^2 (acceleration per unit pose error)
    pid_ki: float = 80.0
    pid_kd: float = 32.0
    accel_noise: float = 0.0       # m/s^2, accelerometer noise sigma
    excitation: ExcitationConfig = field(default_factory=ExcitationConfig)


def collect_dataset(params: PlatformParams, kind: str,
                    config: CollectionConfig | None = None,
                    nominal: PlatformParams | None = None,
                    seed: int = 0) -> TrainingDataset:
    """Excite the PID-held plant and log (pose, accel) -> wrench pairs.

    The PID maps pose error to acceleration demands which reach the plant
    through the fixed nominal model (no decoupling knowledge), exactly the
    situation before an inversion exists.  Aborts with a diagnostic when
    the loop loses the plant.
    """
    cfg = config or CollectionConfig()
    rate = 1.0 / cfg.sample_period
    commands = generate_excitation(kind, cfg.duration, rate, seed=seed,
                                   config=cfg.excitation)
    loop_cfg = LoopConfig(duration=cfg.duration, control_rate=rate,
                          substeps=cfg.substeps, accel_noise=cfg.accel_noise,
                          seed=seed, collect_pairs=True)
    pid = PidController(cfg.pid_kp, cfg.pid_ki, cfg.pid_kd)
    controller = PidLoopController(pid).bind(loop_cfg.dt)
    inverter = make_inverter("none", params, nominal=nominal)
    result = run_closed_loop(params, controller, inverter, loop_cfg,
                             r_d=commands[: loop_cfg.n_ticks])
    if result.status != "ok":
        raise DivergenceError(
            f"collection aborted ({result.status} at t={result.fail_time:.3f} s); "
            "lower the excitation amplitude or retune the PID"
        )
    return TrainingDataset(inputs=result.pair_inputs,
                           targets=result.pair_targets,
                           times=result.time,
                           sample_period=cfg.sample_period,
                           excitation_kind=kind)


# ---------------------------------------------------------------------------
# CSV schema
# ---------------------------------------------------------------------------

def save_dataset(data: TrainingDataset, path: str | Path):
    header = ",".join(["time"] + INPUT_COLUMNS + TARGET_COLUMNS)
    table = np.column_stack([data.times, data.inputs, data.targets])
    np.savetxt(
        path, table, delimiter=",", fmt="%.12g",
        header=f"{DATASET_SCHEMA} kind={data.excitation_kind} "
               f"period={data.sample_period:.12g}\n{header}",
        comments="# ",
    )


def load_dataset(path: str | Path) -> TrainingDataset:
    path = Path(path)
    with open(path) as fh:
        meta = fh.readline().strip()
        header = fh.readline().strip()
    if DATASET_SCHEMA not in meta:
        raise DatasetError(f"{path.name}: not a {DATASET_SCHEMA} file")
    expected = ",".join(["time"] + INPUT_COLUMNS + TARGET_COLUMNS)
    got = header.lstrip("# ")
    if got != expected:
        missing = set(expected.split(",")) - set(got.split(","))
        raise DatasetError(
            f"{path.name}: column mismatch, missing {sorted(missing)}"
        )
    kind = "none"
    period = None
    for token in meta.split():
        if token.startswith("kind="):
            kind = token.split("=", 1)[1]
        if token.startswith("period="):
            period = float(token.split("=", 1)[1])
    table = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    if period is None:
        raise DatasetError(f"{path.name}: missing sample period")
    return TrainingDataset(inputs=table[:, 1:13], targets=table[:, 13:19],
                           times=table[:, 0], sample_period=period,
                           excitation_kind=kind)
