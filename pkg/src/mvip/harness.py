"""Scenario engine: disturbances, cable path, end-to-end runs and metrics.

A scenario prescribes base (stator) motion, picks a controller mode
(pid / imc / hafimc) and an inversion mode (analytic / learned / none),
runs the multi-rate loop, and reduces the logs to the standard metrics:
per-tone attenuation in dB, acceleration RMS, transmissibility spectra and
cross-channel step coupling.

Base motion is synthesized in the frequency domain (band-limited noise by
seeded random phases, pure tones added in closed form), so position and
acceleration series are mutually consistent and every run is reproducible
from its seed.  The umbilical-cable transmission path is a per-channel
linear model - a sub-0.2 Hz second-order resonance plus a configurable
first-order leakage term that carries the mid/high-frequency coupling -
driven by the base acceleration and emitting a disturbance wrench on the
floater.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy import signal

from .control import FxLmsChannel, HafimcController, PidController
from .dataset import TrainingDataset
from .engine import (HybridLoopController, LoopConfig, PidLoopController,
                     make_inverter, run_closed_loop)
from .errors import ConfigurationError
from .plant import PlatformParams, params_from_dict, params_to_dict

AXIS_NAMES = {"x": 0, "y": 1, "z": 2, "tx": 3, "ty": 4, "tz": 5}


# ---------------------------------------------------------------------------
# Base disturbance
# ---------------------------------------------------------------------------

@dataclass
class DisturbanceSpec:
    """Stator acceleration content: band noise plus pure tones on one axis."""

    random_level: float = 0.0          # m/s^2 RMS of the band noise
    band: tuple = (2.0, 400.0)         # Hz
    tones: list = field(default_factory=list)  # [(frequency Hz, amplitude m/s^2)]
    axis: int | str = 0
    seed: int = 0

    def axis_index(self) -> int:
        return AXIS_NAMES.get(self.axis, self.axis) if isinstance(self.axis, str) \
            else int(self.axis)


@dataclass
class BaseMotion:
    """Sampled stator motion along one axis."""

    accel: np.ndarray
    pos: np.ndarray
    rate: float
    axis: int

    def expand(self, idx_max: int | None = None):
        """(n, 6) arrays with the motion placed on its axis."""
        n = len(self.accel) if idx_max is None else idx_max
        acc = np.zeros((n, 6))
        pos = np.zeros((n, 6))
        acc[:, self.axis] = self.accel[:n]
        pos[:, self.axis] = self.pos[:n]
        return pos, acc


def generate_disturbance(spec: DisturbanceSpec, duration: float,
                         rate: float) -> BaseMotion:
    """Deterministic base-motion series at the given sample rate."""
    nyq = rate / 2.0
    for f, _ in spec.tones:
        if f >= nyq:
            raise ConfigurationError(f"tone {f} Hz at or above Nyquist {nyq} Hz")
    if spec.random_level > 0 and spec.band[1] >= nyq:
        raise ConfigurationError("noise band reaches Nyquist; raise the rate")

    n = int(round(duration * rate))
    t = np.arange(n) / rate
    accel = np.zeros(n)
    pos = np.zeros(n)

    if spec.random_level > 0:
        rng = np.random.default_rng(spec.seed)
        freqs = np.fft.rfftfreq(n, 1.0 / rate)
        mask = (freqs >= spec.band[0]) & (freqs <= spec.band[1])
        spect = np.zeros(len(freqs), dtype=complex)
        spect[mask] = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, int(mask.sum())))
        accel_noise = np.fft.irfft(spect, n)
        scale = spec.random_level / np.sqrt(np.mean(accel_noise ** 2))
        accel += accel_noise * scale
        pos_spect = np.zeros_like(spect)
        w = 2.0 * np.pi * freqs[mask]
        pos_spect[mask] = spect[mask] / -(w ** 2)
        pos += np.fft.irfft(pos_spect, n) * scale

    for f, amp in spec.tones:
        w = 2.0 * np.pi * f
        accel += amp * np.sin(w * t)
        pos += -(amp / w ** 2) * np.sin(w * t)

    return BaseMotion(accel=accel, pos=pos, rate=rate, axis=spec.axis_index())

# ---------------------------------------------------------------------------
# Umbilical-cable transmission path
# ---------------------------------------------------------------------------

@dataclass
class TransmissionPath:
    """Per-channel linear model from stator acceleration to floater force.

    The main section is a second-order low-pass with the cable resonance
    (must stay below 0.2 Hz); the leakage section is a first-order low-pass
    carrying the residual mid/high-frequency coupling of the real cable
    bundle.  Forces scale with the bare-platform inertia so the path does
    not depend on the (unknown) payload.
    """

    resonance_hz: float = 0.15
    damping: float = 0.2
    leak_gain: float = 0.3
    leak_corner_hz: float = 60.0

    def __post_init__(self):
        if not 0 < self.resonance_hz < 0.2:
            raise ConfigurationError("cable resonance must stay below 0.2 Hz")
        if self.leak_gain < 0 or self.leak_corner_hz <= 0:
            raise ConfigurationError("bad leakage parameters")

    def accel_response(self, freq_hz) -> np.ndarray:
        """Complex floater/stator acceleration transfer of the path alone."""
        s = 2j * np.pi * np.asarray(freq_hz, dtype=float)
        w0 = 2.0 * np.pi * self.resonance_hz
        main = w0 ** 2 / (s ** 2 + 2.0 * self.damping * w0 * s + w0 ** 2)
        wl = 2.0 * np.pi * self.leak_corner_hz
        leak = self.leak_gain * wl / (s + wl)
        return main + leak

    def wrench_series(self, base: BaseMotion, nominal: PlatformParams,
                      n_sub: int) -> np.ndarray:
        """(n_sub, 6) disturbance wrench from the sampled base acceleration."""
        w0 = 2.0 * np.pi * self.resonance_hz
        wl = 2.0 * np.pi * self.leak_corner_hz
        fs = base.rate
        b1, a1 = signal.bilinear([w0 ** 2], [1.0, 2.0 * self.damping * w0, w0 ** 2], fs)
        b2, a2 = signal.bilinear([self.leak_gain * wl], [1.0, wl], fs)
        acc = base.accel[:n_sub]
        dist = signal.lfilter(b1, a1, acc) + signal.lfilter(b2, a2, acc)
        inertia_diag = np.concatenate([[nominal.mass] * 3, nominal.inertia])
        out = np.zeros((n_sub, 6))
        out[:, base.axis] = dist * inertia_diag[base.axis]
        return out


# ---------------------------------------------------------------------------
# Scenario configuration and result
# ---------------------------------------------------------------------------

@dataclass
class StepCommand:
    """A reference step on one pose channel."""

    channel: int
    time: float
    amplitude: float


def reference_series(steps, n_ticks: int, dt: float,
                     prefilter_tau: float = 0.08) -> np.ndarray:
    """(n, 6) prefiltered reference trajectories from step commands.

    Steps pass through a first-order lag so the acceleration demand stays
    within the envelope the inversion network was trained on.
    """
    t = np.arange(n_ticks) * dt
    raw = np.zeros((n_ticks, 6))
    for step in steps:
        raw[t >= step.time, step.channel] += step.amplitude
    if prefilter_tau <= 0:
        return raw
    alpha = np.exp(-dt / prefilter_tau)
    out = np.zeros_like(raw)
    for k in range(1, n_ticks):
        out[k] = alpha * out[k - 1] + (1.0 - alpha) * raw[k - 1]
    return out


@dataclass
class ControllerParams:
    """Tuning shared by the isolation controllers (defaults from the rig)."""

    f_l: float = 10.0            # Hz, lowest isolation frequency
    f_h: float = 300.0           # Hz, highest isolation frequency
    filter_length: int = 65      # adaptive FIR taps
    mu: float = 0.004            # learning rate
    p: float = 0.001             # anti-saturation regularizer
    lam: float = 0.998           # forgetting factor
    eps1: float = 31.4           # rad/s, command-tracking filter corner
    eps2: float = 69.08          # rad/s, position-keeping filter corner
    secondary_path: tuple = (0.0, 1.0)   # estimate: one sample of delay
    reference_band: bool = True  # band-pass the feedforward reference to [f_l, f_h]

    def fxlms_kwargs(self, sample_rate: float) -> dict:
        return dict(
            taps=self.filter_length, mu=self.mu, forgetting=self.lam,
            regularizer=self.p, secondary_path=self.secondary_path,
            band=(self.f_l, self.f_h) if self.reference_band else None,
            sample_rate=sample_rate,
        )


@dataclass
class PidParams:
    kp: float = 160.0
    ki: float = 60.0
    kd: float = 22.0


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one closed-loop run."""

    params: PlatformParams
    controller_mode: str = "imc"          # pid | imc | hafimc
    inversion_mode: str = "analytic"      # analytic | learned | none
    duration: float = 20.0
    control_rate: float = 2000.0
    substeps: int = 5
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    transmission: TransmissionPath = field(default_factory=TransmissionPath)
    steps: list = field(default_factory=list)
    prefilter_tau: float = 0.08
    controller: ControllerParams = field(default_factory=ControllerParams)
    pid: PidParams = field(default_factory=PidParams)
    nominal: PlatformParams | None = None  # bare platform for "none" inversion
    accel_noise: float = 0.0
    pose_noise: float = 0.0
    seed: int = 0

    def to_dict(self) -> dict:
        doc = {
            "params": params_to_dict(self.params),
            "controller_mode": self.controller_mode,
            "inversion_mode": self.inversion_mode,
            "duration": self.duration,
            "control_rate": self.control_rate,
            "substeps": self.substeps,
            "disturbance": asdict(self.disturbance),
            "transmission": asdict(self.transmission),
            "steps": [asdict(s) for s in self.steps],
            "prefilter_tau": self.prefilter_tau,
            "controller": asdict(self.controller),
            "pid": asdict(self.pid),
            "nominal": params_to_dict(self.nominal) if self.nominal else None,
            "accel_noise": self.accel_noise,
            "pose_noise": self.pose_noise,
            "seed": self.seed,
        }
        return doc


def scenario_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ScenarioResult:
    """Logged series (control rate) plus derived metadata of one run."""

    time: np.ndarray
    stator_accel: np.ndarray   # (n, 6)
    floater_accel: np.ndarray  # (n, 6)
    rel_pose: np.ndarray       # (n, 6)
    r_d: np.ndarray            # (n, 6)
    accel_cmd: np.ndarray      # (n, 6)
    imc_part: np.ndarray       # (n, 6)
    ff_part: np.ndarray        # (n, 6)
    wrench_cmd: np.ndarray     # (n, 6)
    forces: np.ndarray         # (n, 8)
    currents: np.ndarray       # (n, 8)
    control_rate: float
    axis: int
    tones: list
    status: str = "ok"
    fail_time: float | None = None
    scenario: dict | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def steady_slice(self, fraction: float = 0.5) -> slice:
        n = len(self.time)
        return slice(int(n * (1.0 - fraction)), n)

    def column_table(self):
        cols = ["time"]
        arrays = [self.time]
        groups = [
            ("stator_accel", self.stator_accel, 6), ("floater_accel", self.floater_accel, 6),
            ("rel_pose", self.rel_pose, 6), ("r_d", self.r_d, 6),
            ("accel_cmd", self.accel_cmd, 6), ("imc_part", self.imc_part, 6),
            ("ff_part", self.ff_part, 6), ("wrench_cmd", self.wrench_cmd, 6),
            ("force", self.forces, 8), ("current", self.currents, 8),
        ]
        channel_names = ["x", "y", "z", "tx", "ty", "tz"]
        for name, arr, width in groups:
            for j in range(width):
                suffix = channel_names[j] if width == 6 else str(j + 1)
                cols.append(f"{name}_{suffix}")
            arrays.append(arr)
        return cols, np.column_stack(arrays)

    def to_csv(self, path):
        cols, table = self.column_table()
        np.savetxt(path, table, delimiter=",", fmt="%.10g",
                   header="mvip-run-v1\n" + ",".join(cols), comments="# ")

    def metrics(self) -> dict:
        out = {
            "status": self.status,
            "axis": self.axis,
            "duration": float(self.time[-1] + 1.0 / self.control_rate)
            if len(self.time) else 0.0,
            "stator_accel_rms": float(np.sqrt(np.mean(
                self.stator_accel[self.steady_slice(), self.axis] ** 2)))
            if len(self.time) else 0.0,
            "floater_accel_rms": float(np.sqrt(np.mean(
                self.floater_accel[self.steady_slice(), self.axis] ** 2)))
            if len(self.time) else 0.0,
            "tones_db": {},
        }
        if self.ok:
            for f, _ in self.tones:
                out["tones_db"][f"{f:g}"] = attenuation_db(self, f)
        return out

    def save(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.to_csv(out_dir / "run.csv")
        doc = self.metrics()
        if self.scenario is not None:
            doc["scenario_hash"] = hashlib.sha256(
                json.dumps(self.scenario, sort_keys=True).encode()).hexdigest()[:16]
        with open(out_dir / "metrics.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

# ---------------------------------------------------------------------------
# Scenario execution
# ---------------------------------------------------------------------------

def _build_controller(cfg: ScenarioConfig, loop_cfg: LoopConfig):
    cp = cfg.controller
    if cfg.controller_mode == "pid":
        return PidLoopController(
            PidController(cfg.pid.kp, cfg.pid.ki, cfg.pid.kd)).bind(loop_cfg.dt)
    if cfg.controller_mode in ("imc", "hafimc"):
        hafimc = HafimcController.design(
            cp.eps1, cp.eps2, cfg.control_rate,
            fxlms_kwargs=cp.fxlms_kwargs(cfg.control_rate),
            feedforward_enabled=cfg.controller_mode == "hafimc",
        )
        return HybridLoopController(hafimc)
    raise ConfigurationError(f"unknown controller mode '{cfg.controller_mode}'")


def run_scenario(cfg: ScenarioConfig, network=None) -> ScenarioResult:
    """Execute one scenario deterministically and reduce it to a result."""
    loop_cfg = LoopConfig(duration=cfg.duration, control_rate=cfg.control_rate,
                          substeps=cfg.substeps, accel_noise=cfg.accel_noise,
                          pose_noise=cfg.pose_noise, seed=cfg.seed)
    n_sub = loop_cfg.n_ticks * cfg.substeps
    sub_rate = cfg.control_rate * cfg.substeps

    active = (cfg.disturbance.random_level > 0) or cfg.disturbance.tones
    base_pos = base_accel = cable = None
    if active:
        base = generate_disturbance(cfg.disturbance, cfg.duration, sub_rate)
        nominal = cfg.nominal if cfg.nominal is not None else cfg.params
        cable = cfg.transmission.wrench_series(base, nominal, n_sub)
        base_pos, base_accel = base.expand(n_sub)

    r_d = reference_series(cfg.steps, loop_cfg.n_ticks, loop_cfg.dt,
                           cfg.prefilter_tau) if cfg.steps else None

    controller = _build_controller(cfg, loop_cfg)
    inverter = make_inverter(cfg.inversion_mode, cfg.params,
                             nominal=cfg.nominal, network=network)
    raw = run_closed_loop(cfg.params, controller, inverter, loop_cfg,
                          base_pos=base_pos, base_accel=base_accel,
                          cable_wrench=cable, r_d=r_d)
    return ScenarioResult(
        time=raw.time, stator_accel=raw.stator_accel,
        floater_accel=raw.floater_accel, rel_pose=raw.rel_pose, r_d=raw.r_d,
        accel_cmd=raw.accel_cmd, imc_part=raw.imc_part, ff_part=raw.ff_part,
        wrench_cmd=raw.wrench_cmd, forces=raw.forces, currents=raw.currents,
        control_rate=cfg.control_rate, axis=cfg.disturbance.axis_index(),
        tones=list(cfg.disturbance.tones), status=raw.status,
        fail_time=raw.fail_time, scenario=cfg.to_dict(),
    )


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def tone_amplitude(series: np.ndarray, rate: float, frequency: float) -> float:
    """Amplitude of one tone by least-squares sin/cos projection."""
    n = len(series)
    t = np.arange(n) / rate
    w = 2.0 * np.pi * frequency
    s, c = np.sin(w * t), np.cos(w * t)
    return float(np.hypot(2.0 * np.mean(series * s), 2.0 * np.mean(series * c)))

def attenuation_db(result: ScenarioResult, frequency: float,
                   window_fraction: float = 0.5) -> float:
    """Floater-to-stator acceleration ratio at one excited tone, in dB."""
    if not any(abs(f - frequency) < 1e-9 for f, _ in result.tones):
        raise ConfigurationError(f"tone {frequency} Hz not present in the scenario")
    sl = result.steady_slice(window_fraction)
    num = tone_amplitude(result.floater_accel[sl, result.axis],
                         result.control_rate, frequency)
    den = tone_amplitude(result.stator_accel[sl, result.axis],
                         result.control_rate, frequency)
    return 20.0 * np.log10(num / den)


def psd_ratio_db(y: np.ndarray, x: np.ndarray, rate: float,
                 band: tuple = (0.5, 300.0), segment_seconds: float = 4.0):
    """Welch PSD ratio of y over x restricted to a band: (freqs, dB)."""
    nper = min(len(x), int(round(segment_seconds * rate)))
    freqs, pxx = signal.welch(x, fs=rate, nperseg=nper)
    _, pyy = signal.welch(y, fs=rate, nperseg=nper)
    keep = (freqs >= band[0]) & (freqs <= band[1]) & (pxx > 0)
    return freqs[keep], 10.0 * np.log10(pyy[keep] / pxx[keep])


def transmissibility_spectrum(result: ScenarioResult,
                              band: tuple = (0.5, 300.0),
                              segment_seconds: float = 4.0):
    """Floater/stator acceleration transmissibility from a finished run."""
    f_low = max(band[0], 1e-3)
    duration = len(result.time) / result.control_rate
    if duration < 10.0 / f_low:
        raise ConfigurationError(
            f"duration {duration:.1f} s too short for {f_low} Hz resolution")
    return psd_ratio_db(result.floater_accel[:, result.axis],
                        result.stator_accel[:, result.axis],
                        result.control_rate, band, segment_seconds)


def fit_rolloff_slope(freqs: np.ndarray, db: np.ndarray,
                      f_lo: float, f_hi: float) -> float:
    """Log-log slope of a dB curve between two frequencies [dB/decade]."""
    keep = (freqs >= f_lo) & (freqs <= f_hi)
    if keep.sum() < 2:
        raise ConfigurationError("not enough spectral points for a slope fit")
    return float(np.polyfit(np.log10(freqs[keep]), db[keep], 1)[0])


def cross_coupling_metric(result: ScenarioResult, steps,
                          window: float = 1.5) -> float:
    """Largest step-caused off-channel excursion over the commanded step.

    For each step command, the non-commanded channels are watched for
    ``window`` seconds from the step instant, relative to their value when
    the step fired, which attributes the excursion to the step rather than
    to slow drift.  ``steps`` is a list of StepCommand (or anything with
    channel/time/amplitude fields).
    """
    if not steps:
        raise ConfigurationError("no step commands to evaluate")
    stepped = sorted(set(int(s.channel) for s in steps))
    others = [c for c in range(6) if c not in stepped]
    amp = max(abs(s.amplitude) for s in steps)
    fs = result.control_rate
    worst = 0.0
    for s in steps:
        i0 = int(s.time * fs)
        i1 = min(int((s.time + window) * fs), len(result.time))
        if i1 <= i0:
            continue
        base = result.rel_pose[i0, others]
        worst = max(worst, float(np.max(np.abs(
            result.rel_pose[i0:i1][:, others] - base))))
    return worst / amp


def acceleration_rms(result: ScenarioResult, which: str = "floater",
                     window_fraction: float = 0.5) -> float:
    series = (result.floater_accel if which == "floater"
              else result.stator_accel)[result.steady_slice(window_fraction),
                                        result.axis]
    return float(np.sqrt(np.mean(series ** 2)))


# ---------------------------------------------------------------------------
# Step-response validation of an inversion (decoupling check)
# ---------------------------------------------------------------------------

def step_response_check(cfg: ScenarioConfig, network=None) -> dict:
    """Compare a stepped run against the ideal decoupled channel.

    Runs the configured scenario (quiet base, reference steps) and
    re-plays the same references through the exact-model channel loop.
    Returns the per-step tracking RMSE relative to the step size and the
    cross-channel coupling metric.
    """
    from .control import design_imc, simulate_channel_loop

    result = run_scenario(cfg, network=network)
    n = len(result.time)
    ideal = np.zeros((n, 6))
    for ch in sorted(set(s.channel for s in cfg.steps)):
        imc = design_imc(cfg.controller.eps1, cfg.controller.eps2,
                         cfg.control_rate)
        loop = simulate_channel_loop(imc, base_pos=np.zeros(n),
                                     r_d=result.r_d[:, ch])
        ideal[:, ch] = loop["floater_pos"]

    stepped = sorted(set(s.channel for s in cfg.steps))
    amp = max(abs(s.amplitude) for s in cfg.steps)
    err = result.rel_pose[:, stepped] - ideal[:, stepped]
    tracking_rmse = float(np.sqrt(np.mean(err ** 2)))
    return {
        "result": result,
        "ideal": ideal,
        "tracking_rmse_rel": tracking_rmse / amp,
        "cross_coupling": cross_coupling_metric(result, cfg.steps),
    }


# ---------------------------------------------------------------------------
# Parallel sweeps
# ---------------------------------------------------------------------------

def _run_and_save(entry):
    cfg_doc, out_dir, network_path = entry
    from .rbf import load_network
    cfg = scenario_from_dict(cfg_doc)
    network = load_network(network_path) if network_path else None
    result = run_scenario(cfg, network=network)
    dest = Path(out_dir) / scenario_hash(cfg)
    result.save(dest)
    return str(dest)


def run_sweep(configs, out_dir, workers: int = 1, network_path=None):
    """Run many scenarios, each saved under its configuration hash.

    Results are keyed by content, so execution order (or parallelism)
    cannot change what lands on disk.
    """
    entries = [(cfg.to_dict(), str(out_dir), network_path) for cfg in configs]
    if workers <= 1:
        return [_run_and_save(e) for e in entries]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_and_save, entries))


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    """Rebuild a scenario from its serialized form."""
    return ScenarioConfig(
        params=params_from_dict(doc["params"]),
        controller_mode=doc["controller_mode"],
        inversion_mode=doc["inversion_mode"],
        duration=doc["duration"],
        control_rate=doc["control_rate"],
        substeps=doc["substeps"],
        disturbance=DisturbanceSpec(**{**doc["disturbance"],
                                       "tones": [tuple(t) for t in
                                                 doc["disturbance"]["tones"]],
                                       "band": tuple(doc["disturbance"]["band"])}),
        transmission=TransmissionPath(**doc["transmission"]),
        steps=[StepCommand(**s) for s in doc["steps"]],
        prefilter_tau=doc["prefilter_tau"],
        controller=ControllerParams(**{**doc["controller"],
                                       "secondary_path":
                                       tuple(doc["controller"]["secondary_path"])}),
        pid=PidParams(**doc["pid"]),
        nominal=params_from_dict(doc["nominal"]) if doc.get("nominal") else None,
        accel_noise=doc["accel_noise"],
        pose_noise=doc["pose_noise"],
        seed=doc["seed"],
    )
