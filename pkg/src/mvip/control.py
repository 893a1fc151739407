"""Vibration isolation controllers for the decoupled pseudo-linear channels.

After inversion each pose channel behaves as a double integrator from the
commanded acceleration, so the controllers here are all single-channel:

* A two-filter internal-model position keeper.  Filters Q1 (command
  tracking) and Q2 (base-motion rejection) are second-order low-passes
  eps^2/(s+eps)^2; the realized blocks are Gs = Q1/Q2 applied to the
  command and Gt = Q2 s^2 / (1 - Q2) closing the loop on the relative
  position.  With an exact model the loop satisfies E/Xb = 1 - Q2 and
  E/rd = 1 - Q1, i.e. the floater follows the stator below the Q2 corner
  and holds still above it.

* A leaky, power-normalized filtered-reference LMS feedforward that
  cancels periodic base vibration inside the isolation band.  The
  reference is the stator acceleration band-passed to [f_l, f_h]; the
  update is

      W <- lambda W + 2 mu e X' / (mean(X'^2) + p)

  with X' the reference filtered through the secondary-path estimate.

* The hybrid controller pairs one of each per channel and sums the
  position-keeping command with the (negated) feedforward output into a
  per-channel acceleration command handed to the inversion stage.

Continuous blocks are discretized with the bilinear transform at the
control rate; corner frequencies sit far below Nyquist so no prewarping
is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ConfigurationError, DesignError


# ---------------------------------------------------------------------------
# Rational transfer functions and discrete realizations
# ---------------------------------------------------------------------------

def _trim(p):
    p = np.atleast_1d(np.asarray(p, dtype=float))
    nz = np.flatnonzero(np.abs(p) > 0)
    return p[nz[0]:] if nz.size else np.array([0.0])


def _cancel(num, den, tol=1e-7):
    """Cancel common roots of a rational function (relative tolerance)."""
    num, den = _trim(num), _trim(den)
    if num.size == 1 or den.size == 1:
        return num, den
    nr = list(np.roots(num))
    dr = list(np.roots(den))
    scale = 1.0 + max([abs(r) for r in nr + dr], default=0.0)
    kept_d = []
    for r in dr:
        hit = next((i for i, q in enumerate(nr) if abs(q - r) < tol * scale), None)
        if hit is None:
            kept_d.append(r)
        else:
            nr.pop(hit)
    lead = num[0] / den[0]
    num = np.real(np.poly(nr)) * lead if nr else np.array([lead])
    den = np.real(np.poly(kept_d)) if kept_d else np.array([1.0])
    return num, den


def _rmul(a, b):
    return np.polymul(a[0], b[0]), np.polymul(a[1], b[1])


def _rdiv(a, b):
    return np.polymul(a[0], b[1]), np.polymul(a[1], b[0])


def _rsub_from_one(a):
    num = np.polysub(a[1], a[0])
    return num, a[1]


class DiscreteTF:
    """Single-input filter realized in transposed direct form II."""

    def __init__(self, b, a):
        b = np.atleast_1d(np.asarray(b, dtype=float))
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if abs(a[0]) < 1e-300:
            raise DesignError("leading denominator coefficient is zero")
        self.b = b / a[0]
        self.a = a / a[0]
        n = max(len(self.b), len(self.a))
        self.b = np.pad(self.b, (0, n - len(self.b)))
        self.a = np.pad(self.a, (0, n - len(self.a)))
        self.state = np.zeros(n - 1)

    @classmethod
    def from_continuous(cls, num, den, fs: float, method: str = "bilinear"):
        num, den = _trim(num), _trim(den)
        if len(num) > len(den):
            raise DesignError("improper continuous transfer function")
        if method == "bilinear":
            b, a = signal.bilinear(num, den, fs)
        elif method == "zoh":
            sysd = signal.cont2discrete((num, den), 1.0 / fs, method="zoh")
            b, a = np.squeeze(sysd[0]), np.squeeze(sysd[1])
        else:
            raise ConfigurationError(f"unknown discretization '{method}'")
        return cls(b, a)

    def reset(self):
        self.state[:] = 0.0

    def copy(self) -> "DiscreteTF":
        return DiscreteTF(self.b.copy(), self.a.copy())

    def peek(self) -> float:
        """Next output for zero new input; exact for strictly proper filters."""
        return float(self.state[0]) if self.state.size else 0.0

    def step(self, x: float) -> float:
        b, a, z = self.b, self.a, self.state
        y = b[0] * x + (z[0] if z.size else 0.0)
        for i in range(z.size - 1):
            z[i] = b[i + 1] * x + z[i + 1] - a[i + 1] * y
        if z.size:
            z[-1] = b[-1] * x - a[-1] * y
        return float(y)

    def is_stable(self) -> bool:
        poles = np.roots(self.a)
        return bool(np.all(np.abs(poles) <= 1.0 + 1e-9))

    def response(self, omega: np.ndarray, fs: float) -> np.ndarray:
        """Frequency response at angular frequencies omega [rad/s]."""
        _, h = signal.freqz(self.b, self.a, worN=np.asarray(omega, dtype=float) / fs)
        return h


def q_response(eps: float, omega) -> np.ndarray:
    """Frequency response of the low-pass eps^2 / (s + eps)^2."""
    s = 1j * np.asarray(omega, dtype=float)
    return eps ** 2 / (s + eps) ** 2


# ---------------------------------------------------------------------------
# Internal-model channel
# ---------------------------------------------------------------------------

@dataclass
class ImcChannel:
    """One designed position-keeping channel with its discrete filter states."""

    eps1: float
    eps2: float
    sample_rate: float
    g_s: DiscreteTF = None
    g_t: DiscreteTF = None

    def step(self, r_d: float, r: float) -> float:
        """Advance one tick: acceleration command from command and measurement."""
        shaped = self.g_s.step(r_d)
        return self.g_t.step(shaped - r)

    def reset(self):
        self.g_s.reset()
        self.g_t.reset()

    def clone(self) -> "ImcChannel":
        return ImcChannel(self.eps1, self.eps2, self.sample_rate,
                          self.g_s.copy(), self.g_t.copy())


def design_imc(eps1: float, eps2: float, sample_rate: float) -> ImcChannel:
    """Compose and discretize the two-filter internal-model channel.

    Builds C1 = Q1/Gx and C2 = Q2/Gx on the nominal double integrator,
    then Gs = C2^-1 C1 and Gt = C2/(1 - Gx C2), cancelling exact common
    factors.  Raises DesignError naming the block if a composition turns
    out improper (cannot be realized).
    """
    if eps1 <= 0 or eps2 <= 0:
        raise ConfigurationError("filter corner frequencies must be positive")
    if sample_rate < 10.0 * eps2 / (2.0 * np.pi):
        raise ConfigurationError("sample rate too low for the Q2 corner")
    g_x = (np.array([1.0]), np.array([1.0, 0.0, 0.0]))
    q1 = (np.array([eps1 ** 2]), np.array([1.0, 2.0 * eps1, eps1 ** 2]))
    q2 = (np.array([eps2 ** 2]), np.array([1.0, 2.0 * eps2, eps2 ** 2]))
    c1 = _rdiv(q1, g_x)
    c2 = _rdiv(q2, g_x)

    blocks = {}
    for name, (num, den) in (("G_s", _rdiv(c1, c2)),
                             ("G_T", _rdiv(c2, _rsub_from_one(_rmul(g_x, c2))))):
        num, den = _cancel(num, den)
        if len(_trim(num)) > len(_trim(den)):
            raise DesignError(f"{name} is improper after composition")
        blocks[name] = DiscreteTF.from_continuous(num, den, sample_rate)
        if not blocks[name].is_stable():
            raise DesignError(f"{name} discretized to an unstable realization")
    return ImcChannel(eps1=eps1, eps2=eps2, sample_rate=sample_rate,
                      g_s=blocks["G_s"], g_t=blocks["G_T"])


def imc_step(ch: ImcChannel, r_d: float, r: float) -> float:
    return ch.step(r_d, r)


# ---------------------------------------------------------------------------
# Stability margin of the position-keeping loop
# ---------------------------------------------------------------------------

@dataclass
class MarginReport:
    omegas: np.ndarray
    margins: np.ndarray
    min_margin: float
    worst_omega: float
    l_bar: float
    satisfied: bool
    note: str = ""


def margin_at(ch_or_eps2, omega) -> np.ndarray:
    """|(j w / eps2 + 1)^2 - 1|: how much model error the loop absorbs at w."""
    eps2 = ch_or_eps2.eps2 if isinstance(ch_or_eps2, ImcChannel) else float(ch_or_eps2)
    s = 1j * np.asarray(omega, dtype=float) / eps2
    return np.abs((s + 1.0) ** 2 - 1.0)


def stability_margin(ch: ImcChannel, l_bar: float,
                     omegas: np.ndarray | None = None) -> MarginReport:
    """Evaluate the smallest margin over a frequency grid against a bound.

    The margin vanishes as w -> 0, so any positive model-error bound is
    violated at sufficiently low frequency; the report surfaces where.
    """
    if l_bar < 0:
        raise ConfigurationError("model error bound must be non-negative")
    if omegas is None:
        omegas = np.logspace(-3, 4, 600)
    omegas = np.asarray(omegas, dtype=float)
    margins = margin_at(ch, omegas)
    idx = int(np.argmin(margins))
    min_margin = float(margins[idx])
    satisfied = bool(min_margin > l_bar)
    note = ""
    if not satisfied and l_bar > 0:
        above = np.flatnonzero(margins > l_bar)
        note = ("margin tends to zero toward DC; bound violated below "
                f"{omegas[above[0]]:.3g} rad/s" if above.size else
                "bound exceeds the margin everywhere on the grid")
    return MarginReport(omegas=omegas, margins=margins, min_margin=min_margin,
                        worst_omega=float(omegas[idx]), l_bar=l_bar,
                        satisfied=satisfied, note=note)


# ---------------------------------------------------------------------------
# Filtered-reference LMS feedforward
# ---------------------------------------------------------------------------

class _BiquadChain:
    """Scalar-path cascade of second-order sections (transposed DF-II)."""

    def __init__(self, sos):
        self.sections = [tuple(row) for row in sos]
        self.reset()

    def reset(self):
        self.state = [[0.0, 0.0] for _ in self.sections]

    def step(self, x: float) -> float:
        for (b0, b1, b2, _, a1, a2), z in zip(self.sections, self.state):
            y = b0 * x + z[0]
            z[0] = b1 * x - a1 * y + z[1]
            z[1] = b2 * x - a2 * y
            x = y
        return x


class FxLmsChannel:
    """Adaptive FIR canceller for one channel of periodic base vibration.

    ``secondary_path`` holds the FIR taps of the estimated path from the
    injected command to the floater accelerometer (default: one sample of
    pure delay, which is what the decoupled channel plus the control hold
    looks like).  ``band`` optionally restricts the reference to the
    isolation band so the canceller never fights the low-frequency
    tracking objective.
    """

    def __init__(self, taps: int = 65, mu: float = 0.004, forgetting: float = 0.998,
                 regularizer: float = 0.001, secondary_path=(0.0, 1.0),
                 band: tuple | None = None, sample_rate: float = 2000.0,
                 band_order: int = 2):
        if taps < 1 or mu <= 0 or not (0.0 < forgetting <= 1.0) or regularizer <= 0:
            raise ConfigurationError("bad adaptive filter parameters")
        self.taps = taps
        self.mu = mu
        self.forgetting = forgetting
        self.regularizer = regularizer
        self.sample_rate = sample_rate
        self.weights = np.zeros(taps)
        self.ref_history = np.zeros(taps)
        self.filtered_history = np.zeros(taps)
        self.secondary_path = np.asarray(secondary_path, dtype=float)
        if self.secondary_path.size > taps:
            raise ConfigurationError("secondary path longer than the filter")
        self.fault = False
        self._ref_filter = None
        self._upd_filters = None
        if band is not None:
            lo, hi = band
            nyq = 0.5 * sample_rate
            if not 0 < lo < hi < nyq:
                raise ConfigurationError("reference band must fit below Nyquist")
            bp = signal.butter(band_order, [lo, hi], btype="bandpass",
                               fs=sample_rate, output="sos")
            # light high-pass for the update paths: keeps the adaptation
            # blind to the tracking band at small extra loop delay
            hp = signal.butter(2, lo, btype="highpass",
                               fs=sample_rate, output="sos")
            self._ref_filter = _BiquadChain(bp)
            self._upd_filters = (_BiquadChain(hp), _BiquadChain(hp))

    def reset(self):
        self.weights[:] = 0.0
        self.ref_history[:] = 0.0
        self.filtered_history[:] = 0.0
        self.fault = False
        if self._ref_filter is not None:
            self._ref_filter.reset()
            for f in self._upd_filters:
                f.reset()

    def step(self, x_n: float, e_n: float) -> float:
        """One tick: emit the cancelling command, then adapt on the error.

        With a band configured, the reference is band-passed before the
        filter and the update signals (error and filtered reference alike,
        keeping them aligned) are additionally high-passed at the lower
        band edge, so the adaptation never responds to the low-frequency
        tracking motion the position loop deliberately causes.
        """
        if self.fault:
            return 0.0
        if self._ref_filter is not None:
            x_n = self._ref_filter.step(x_n)
        self.ref_history[1:] = self.ref_history[:-1]
        self.ref_history[0] = x_n
        u = float(self.weights @ self.ref_history)
        xf = float(self.secondary_path @ self.ref_history[: self.secondary_path.size])
        if self._ref_filter is not None:
            xf = self._upd_filters[0].step(xf)
            e_n = self._upd_filters[1].step(e_n)
        self.filtered_history[1:] = self.filtered_history[:-1]
        self.filtered_history[0] = xf
        power = float(self.filtered_history @ self.filtered_history) / self.taps
        self.weights = (self.forgetting * self.weights
                        + 2.0 * self.mu * e_n * self.filtered_history
                        / (power + self.regularizer))
        if not np.all(np.isfinite(self.weights)) or not np.isfinite(u):
            self.fault = True
            self.weights[:] = 0.0
            return 0.0
        return u


def fxlms_step(ch: FxLmsChannel, x_n: float, e_n: float) -> float:
    return ch.step(x_n, e_n)


# ---------------------------------------------------------------------------
# PID (used to stabilize the plant while collecting training data)
# ---------------------------------------------------------------------------

class PidController:
    """Per-channel PID from relative-position error to acceleration command."""

    def __init__(self, kp, ki, kd, channels: int = 6, integral_limit: float = 10.0):
        self.kp = np.broadcast_to(np.asarray(kp, dtype=float), (channels,)).copy()
        self.ki = np.broadcast_to(np.asarray(ki, dtype=float), (channels,)).copy()
        self.kd = np.broadcast_to(np.asarray(kd, dtype=float), (channels,)).copy()
        self.integral = np.zeros(channels)
        self.prev_error = None
        self.integral_limit = integral_limit

    def reset(self):
        self.integral[:] = 0.0
        self.prev_error = None

    def step(self, error: np.ndarray, dt: float) -> np.ndarray:
        error = np.asarray(error, dtype=float)
        if self.prev_error is None:
            deriv = np.zeros_like(error)
        else:
            deriv = (error - self.prev_error) / dt
        self.prev_error = error.copy()
        self.integral = np.clip(self.integral + error * dt,
                                -self.integral_limit, self.integral_limit)
        return self.kp * error + self.ki * self.integral + self.kd * deriv


# ---------------------------------------------------------------------------
# Hybrid controller
# ---------------------------------------------------------------------------

@dataclass
class HafimcController:
    """Six position-keeping channels plus six adaptive feedforward channels."""

    imc: list
    fxlms: list
    imc_enabled: bool = True
    feedforward_enabled: bool = True
    fault: bool = False

    @classmethod
    def design(cls, eps1: float, eps2: float, sample_rate: float,
               fxlms_kwargs: dict | None = None,
               imc_enabled: bool = True,
               feedforward_enabled: bool = True) -> "HafimcController":
        proto = design_imc(eps1, eps2, sample_rate)
        fxlms_kwargs = dict(fxlms_kwargs or {})
        fxlms_kwargs.setdefault("sample_rate", sample_rate)
        return cls(
            imc=[proto.clone() for _ in range(6)],
            fxlms=[FxLmsChannel(**fxlms_kwargs) for _ in range(6)],
            imc_enabled=imc_enabled,
            feedforward_enabled=feedforward_enabled,
        )

    def step(self, stator_accel, floater_accel, rel_pose,
             r_d=None) -> np.ndarray:
        """Per-channel acceleration commands (pre-inversion) for one tick."""
        stator_accel = np.asarray(stator_accel, dtype=float)
        floater_accel = np.asarray(floater_accel, dtype=float)
        rel_pose = np.asarray(rel_pose, dtype=float)
        r_d = np.zeros(6) if r_d is None else np.asarray(r_d, dtype=float)
        cmd = np.zeros(6)
        for i in range(6):
            v = self.imc[i].step(r_d[i], rel_pose[i]) if self.imc_enabled else 0.0
            u = (self.fxlms[i].step(stator_accel[i], floater_accel[i])
                 if self.feedforward_enabled else 0.0)
            cmd[i] = v - u
        if np.any([ch.fault for ch in self.fxlms]) or not np.all(np.isfinite(cmd)):
            self.fault = True
            return np.zeros(6)
        return cmd


def hafimc_step(ctrl: HafimcController, stator_accel, floater_accel,
                rel_pose, r_d=None) -> np.ndarray:
    return ctrl.step(stator_accel, floater_accel, rel_pose, r_d)


# ---------------------------------------------------------------------------
# Exact-model channel loop (validation harness for the designs above)
# ---------------------------------------------------------------------------

def simulate_channel_loop(imc: ImcChannel, base_pos: np.ndarray,
                          base_accel: np.ndarray | None = None,
                          r_d: np.ndarray | None = None,
                          disturbance_accel: np.ndarray | None = None,
                          fxlms: FxLmsChannel | None = None) -> dict:
    """Run one channel against an ideal double-integrator plant.

    The plant is the zero-order-hold discretization of 1/s^2 (the command
    is held between ticks), so the loop reproduces the design equations up
    to discretization effects.  Returns the relative position, tracking
    error, floater position/acceleration and command series.
    """
    n = len(base_pos)
    fs = imc.sample_rate
    plant = DiscreteTF.from_continuous([1.0], [1.0, 0.0, 0.0], fs, method="zoh")
    base_accel = np.zeros(n) if base_accel is None else base_accel
    r_d = np.zeros(n) if r_d is None else r_d
    disturbance_accel = (np.zeros(n) if disturbance_accel is None
                         else disturbance_accel)
    out = {k: np.zeros(n) for k in
           ("rel", "err", "cmd", "floater_pos", "floater_accel")}
    prev_accel = 0.0
    for k in range(n):
        y = plant.peek()
        rel = y - base_pos[k]
        v = imc.step(r_d[k], rel)
        u_ff = fxlms.step(base_accel[k], prev_accel) if fxlms is not None else 0.0
        a_total = v - u_ff + disturbance_accel[k]
        plant.step(a_total)
        out["rel"][k] = rel
        out["err"][k] = r_d[k] - rel
        out["cmd"][k] = v
        out["floater_pos"][k] = y
        out["floater_accel"][k] = prev_accel
        prev_accel = a_total
    return out
