"""Rigid-body plant of the maglev vibration isolation platform.

The floater (plus an optional payload) is a single rigid body levitated
inside the stator by eight maglev actuators.  State is the 12-vector

    X = [r_cx, r_cy, r_cz, theta_x, theta_y, theta_z,
         dr_cx, dr_cy, dr_cz, omega_x, omega_y, omega_z]

i.e. pose of the geometric centre O expressed in the stator frame followed
by its rates.  Angles are treated as small, so pose rates equal body rates
directly and no attitude kinematics are involved.

The payload shifts the centre of mass away from O by ``com_shift``
(written ``dr`` below), which couples translation and rotation:

    r̈  = F/m - dω/dt x dr - ω x (ω x dr)  [- g*theta when gravity on]
    dω/dt = J^-1 (tau + dr x F - ω x (J ω))  [Euler term optional]

The cross terms ``ω x (ω x dr)`` and ``ω x (J ω)`` are second order in the
rates and are dropped by default (``rate_products_enabled = False``), as is
gravity; that reduced model is what the analytic inversion is built on.

Actuators 1 and 5 push along ±x, 3 and 7 along ±y, and 2, 4, 6, 8 along +z.
Their lever arms populate the 6x8 actuation map C; each unit produces

    force = (K1*yc^2 + K2*zc^2 + K3) * I + residual

where (yc, zc) is the winding position transverse to the force axis, so the
plant keeps the position-dependent current stiffness of the real hardware.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import CollisionError, ConfigurationError, DivergenceError

# Force direction of each actuator in the stator frame (unit vectors).
ACTUATOR_AXES = np.array(
    [
        [1.0, 0.0, 0.0],   # 1: +x
        [0.0, 0.0, 1.0],   # 2: +z
        [0.0, 1.0, 0.0],   # 3: +y
        [0.0, 0.0, 1.0],   # 4: +z
        [-1.0, 0.0, 0.0],  # 5: -x
        [0.0, 0.0, 1.0],   # 6: +z
        [0.0, -1.0, 0.0],  # 7: -y
        [0.0, 0.0, 1.0],   # 8: +z
    ]
)

# Transverse axes spanning each actuator's local (yc, zc) plane.
_TRANSVERSE = {
    0: (1, 2),  # x-forcers: transverse displacement in (y, z)
    1: (0, 2),  # y-forcers: (x, z)
    2: (0, 1),  # z-forcers: (x, y)
}

STANDARD_GRAVITY = 9.80665  # m/s^2


@dataclass
class ResidualModel:
    """Smooth bounded perturbation standing in for unmodelled actuator features.

    A fixed quadratic polynomial of the pose (coefficients drawn once from
    ``seed``) scaled by ``amplitude``.  ``amplitude = 0`` disables it.  The
    stated bound holds for poses inside ``pose_scale`` per dimension.
    """

    amplitude: float = 0.0
    seed: int = 0
    pose_scale: float = 0.05  # domain half-width over which bound() holds

    def __post_init__(self):
        if not np.isfinite(self.amplitude):
            raise ConfigurationError("residual amplitude must be finite")
        rng = np.random.default_rng(self.seed)
        self._lin = rng.uniform(-1.0, 1.0, size=(6, 6))
        self._quad = rng.uniform(-1.0, 1.0, size=(6, 6))

    def accel(self, pose: np.ndarray) -> np.ndarray:
        """Per-channel acceleration residual delta(pose), shape (6,)."""
        if self.amplitude == 0.0:
            return np.zeros(6)
        p = np.asarray(pose, dtype=float) / self.pose_scale
        return self.amplitude * (self._lin @ p + self._quad @ (p * p)) / 12.0

    def bound(self) -> float:
        """Finite bound on |accel| over the stated pose domain."""
        return self.amplitude * (np.abs(self._lin).sum(axis=1).max()
                                 + np.abs(self._quad).sum(axis=1).max()) / 12.0


@dataclass
class PlatformParams:
    """Mass, geometry and actuator properties of the floater assembly."""

    mass: float = 20.0                        # kg
    inertia: np.ndarray = None                # kg m^2, diag (Jx, Jy, Jz)
    com_shift: np.ndarray = None              # m, CoM offset from O
    actuator_positions: np.ndarray = None     # m, (8, 2) of (x_mi, y_mi)
    stiffness_coeffs: np.ndarray = None       # (8, 3) of (K1, K2, K3)
    stroke: float = 0.40                      # m, travel before collision
    gravity_enabled: bool = False
    rate_products_enabled: bool = False
    residual: ResidualModel | None = None

    def __post_init__(self):
        if self.inertia is None:
            self.inertia = np.array([0.8, 0.8, 1.2])
        if self.com_shift is None:
            self.com_shift = np.zeros(3)
        if self.actuator_positions is None:
            self.actuator_positions = default_actuator_layout()
        if self.stiffness_coeffs is None:
            # +-20% force variation over the full stroke (0.2*K3/stroke^2)
            self.stiffness_coeffs = np.tile([25.0, -25.0, 20.0], (8, 1))
        self.inertia = np.asarray(self.inertia, dtype=float)
        self.com_shift = np.asarray(self.com_shift, dtype=float)
        self.actuator_positions = np.asarray(self.actuator_positions, dtype=float)
        self.stiffness_coeffs = np.asarray(self.stiffness_coeffs, dtype=float)
        self.validate()

    def validate(self):
        if not (np.isfinite(self.mass) and self.mass > 0):
            raise ConfigurationError("mass must be positive")
        if self.inertia.shape != (3,) or not np.all(self.inertia > 0):
            raise ConfigurationError("inertia must be three positive entries")
        if self.com_shift.shape != (3,) or not np.all(np.isfinite(self.com_shift)):
            raise ConfigurationError("com_shift must be three finite entries")
        if self.actuator_positions.shape != (8, 2):
            raise ConfigurationError("exactly 8 actuator positions required")
        if self.stiffness_coeffs.shape != (8, 3):
            raise ConfigurationError("stiffness_coeffs must be (8, 3)")
        if not (np.isfinite(self.stroke) and self.stroke > 0):
            raise ConfigurationError("stroke must be positive")


def default_actuator_layout() -> np.ndarray:
    """Symmetric layout: axial pushers on opposite sides, z pushers on corners."""
    L = 0.25  # m
    return np.array(
        [
            [0.0, L],     # 1: +x force at y=+L
            [L, L],       # 2: +z corner
            [L, 0.0],     # 3: +y force at x=+L
            [-L, L],      # 4: +z corner
            [0.0, -L],    # 5: -x force at y=-L
            [-L, -L],     # 6: +z corner
            [-L, 0.0],    # 7: -y force at x=-L
            [L, -L],      # 8: +z corner
        ]
    )


def default_params() -> PlatformParams:
    """Bare floater with no payload."""
    return PlatformParams()


def with_payload(params: PlatformParams, payload_mass: float,
                 offset: np.ndarray) -> PlatformParams:
    """Redeploy a point-mass payload at ``offset`` from O.

    Updates total mass, CoM shift and the diagonal inertia via the
    parallel-axis rule about the new CoM.  Inertia products are dropped to
    keep the diagonal inertia model.
    """
    if payload_mass < 0:
        raise ConfigurationError("payload mass must be non-negative")
    offset = np.asarray(offset, dtype=float)
    m0, mp = params.mass, payload_mass
    total = m0 + mp
    com = (m0 * params.com_shift + mp * offset) / total

    def _diag_terms(r):
        return np.array([r[1] ** 2 + r[2] ** 2,
                         r[0] ** 2 + r[2] ** 2,
                         r[0] ** 2 + r[1] ** 2])

    inertia = (params.inertia
               + m0 * _diag_terms(com - params.com_shift)
               + mp * _diag_terms(offset - com))
    return replace(params, mass=total, com_shift=com, inertia=inertia)


# ---------------------------------------------------------------------------
# State and wrench helpers
# ---------------------------------------------------------------------------

def zero_state() -> np.ndarray:
    return np.zeros(12)


def make_state(pose, rates) -> np.ndarray:
    state = np.concatenate([np.asarray(pose, dtype=float),
                            np.asarray(rates, dtype=float)])
    if state.shape != (12,) or not np.all(np.isfinite(state)):
        raise ConfigurationError("state must be 12 finite entries")
    return state


def check_state(state: np.ndarray):
    state = np.asarray(state, dtype=float)
    if state.shape != (12,) or not np.all(np.isfinite(state)):
        raise DivergenceError("state is not 12 finite entries")
    return state


def check_wrench(wrench: np.ndarray):
    wrench = np.asarray(wrench, dtype=float)
    if wrench.shape != (6,) or not np.all(np.isfinite(wrench)):
        raise ConfigurationError("wrench must be 6 finite entries")
    return wrench


# ---------------------------------------------------------------------------
# Actuation geometry
# ---------------------------------------------------------------------------

def actuation_map(params: PlatformParams) -> np.ndarray:
    """6x8 map C from actuator forces to the virtual wrench about O.

    Columns follow the fixed push directions; lever arms come from the
    configured (x_mi, y_mi).  Raises if the layout loses rank (some wrench
    direction unreachable).
    """
    x = params.actuator_positions[:, 0]
    y = params.actuator_positions[:, 1]
    C = np.zeros((6, 8))
    C[0, 0], C[0, 4] = 1.0, -1.0
    C[1, 2], C[1, 6] = 1.0, -1.0
    C[2, 1] = C[2, 3] = C[2, 5] = C[2, 7] = 1.0
    for i in (1, 3, 5, 7):  # z pushers: torque arms (y, -x)
        C[3, i] = y[i]
        C[4, i] = -x[i]
    C[5, 0] = -y[0]
    C[5, 2] = x[2]
    C[5, 4] = y[4]
    C[5, 6] = -x[6]
    if np.linalg.matrix_rank(C) < 6:
        raise ConfigurationError("degenerate actuator layout: rank(C) < 6")
    return C


@dataclass
class CoilPosition:
    """Winding position in one actuator's local frame."""

    y_c: float = 0.0   # m
    z_c: float = 0.0   # m
    current: float = 0.0  # A


def current_stiffness(y_c, z_c, coeffs) -> float:
    """Position-dependent current stiffness K1*yc^2 + K2*zc^2 + K3 [N/A]."""
    k1, k2, k3 = coeffs
    return k1 * y_c ** 2 + k2 * z_c ** 2 + k3


def actuator_force(coil: CoilPosition, coeffs, residual: float = 0.0) -> float:
    """Force of one actuator at the given coil position and current."""
    if not np.isfinite(coil.current):
        raise ConfigurationError("current must be finite")
    return current_stiffness(coil.y_c, coil.z_c, coeffs) * coil.current + residual


def coil_positions(pose: np.ndarray, params: PlatformParams) -> np.ndarray:
    """(8, 2) local transverse displacements (yc, zc) of every winding.

    Small-angle displacement of the floater at actuator location p is
    t + theta x p; the two components transverse to the force axis are the
    coil coordinates entering the stiffness surface.
    """
    t = pose[:3]
    th = pose[3:6]
    out = np.empty((8, 2))
    for i in range(8):
        p = np.array([params.actuator_positions[i, 0],
                      params.actuator_positions[i, 1], 0.0])
        disp = t + np.cross(th, p)
        axis = int(np.argmax(np.abs(ACTUATOR_AXES[i])))
        a, b = _TRANSVERSE[axis]
        out[i, 0] = disp[a]
        out[i, 1] = disp[b]
    return out


def check_stroke(pose: np.ndarray, params: PlatformParams):
    """Raise CollisionError when any winding leaves the stroke envelope."""
    t = pose[:3]
    th = pose[3:6]
    pos = params.actuator_positions
    for i in range(8):
        p = np.array([pos[i, 0], pos[i, 1], 0.0])
        disp = t + np.cross(th, p)
        if np.max(np.abs(disp)) > params.stroke:
            raise CollisionError(
                f"actuator {i + 1} displacement {np.max(np.abs(disp)):.4f} m "
                f"exceeds stroke {params.stroke:.4f} m"
            )


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------

def accelerations(state: np.ndarray, wrench: np.ndarray,
                  params: PlatformParams) -> np.ndarray:
    """Rigid-body accelerations [r̈; dω/dt] for the given virtual wrench."""
    dr = params.com_shift
    J = params.inertia
    F = wrench[:3]
    tau = wrench[3:]
    torque = tau + np.cross(dr, F)
    if params.rate_products_enabled:
        w = state[9:12]
        torque = torque - np.cross(w, J * w)
    wdot = torque / J
    acc_t = F / params.mass - np.cross(wdot, dr)
    if params.rate_products_enabled:
        w = state[9:12]
        acc_t = acc_t - np.cross(w, np.cross(w, dr))
    if params.gravity_enabled:
        acc_t = acc_t - STANDARD_GRAVITY * state[3:6]
    if params.residual is not None:
        res = params.residual.accel(state[:6])
        acc_t = acc_t + res[:3]
        wdot = wdot + res[3:]
    return np.concatenate([acc_t, wdot])


def _derivative(state, wrench, params):
    acc = accelerations(state, wrench, params)
    return np.concatenate([state[6:], acc])


def step_dynamics(state: np.ndarray, wrench: np.ndarray,
                  params: PlatformParams, dt: float) -> np.ndarray:
    """Advance the state by one classical 4th-order Runge-Kutta step.

    The wrench is held constant over the step.  ``dt`` must stay at or
    below 1 ms for the scheme to hold its accuracy at plant stiffness.
    """
    if not 0.0 < dt <= 1e-3:
        raise ConfigurationError("dt must be in (0, 1 ms]")
    state = np.asarray(state, dtype=float)
    wrench = np.asarray(wrench, dtype=float)
    k1 = _derivative(state, wrench, params)
    k2 = _derivative(state + 0.5 * dt * k1, wrench, params)
    k3 = _derivative(state + 0.5 * dt * k2, wrench, params)
    k4 = _derivative(state + dt * k3, wrench, params)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("state diverged (non-finite after step)")
    return out


def coupling_acceleration_x(state: np.ndarray, params: PlatformParams,
                            f1: float, f5: float, d: float = 0.0,
                            gravity: bool = False) -> float:
    """Expanded x-translation acceleration with CoM-shift coupling terms.

    Analytic diagnostic: evaluates the term-by-term expansion of r̈_cx
    given only the two x actuators plus a disturbance force d, using the
    plant's own rotational solution for the angular accelerations.  With
    ``gravity`` the -g*cos(theta_x) variant is added (off by default, to
    match the reduced model).
    """
    f = np.zeros(8)
    f[0], f[4] = f1, f5
    wrench = actuation_map(params) @ f
    wrench[0] += d
    full = replace(params, rate_products_enabled=True, gravity_enabled=False)
    acc = accelerations(state, wrench, full)
    wdot_y, wdot_z = acc[4], acc[5]
    dr = params.com_shift
    w = state[9:12]
    out = (
        (f1 - f5 + d) / params.mass
        + (w[1] ** 2 + w[2] ** 2) * dr[0]
        + (wdot_z - w[0] * w[1]) * dr[1]
        - (wdot_y + w[0] * w[2]) * dr[2]
    )
    if gravity:
        out -= STANDARD_GRAVITY * np.cos(state[3])
    return out


# ---------------------------------------------------------------------------
# Parameter file I/O
# ---------------------------------------------------------------------------

def params_to_dict(params: PlatformParams) -> dict:
    doc = {
        "mass": params.mass,
        "inertia": params.inertia.tolist(),
        "com_shift": params.com_shift.tolist(),
        "actuators": [{"x": float(x), "y": float(y)}
                      for x, y in params.actuator_positions],
        "stiffness": [{"k1": float(a), "k2": float(b), "k3": float(c)}
                      for a, b, c in params.stiffness_coeffs],
        "stroke": params.stroke,
        "gravity_enabled": params.gravity_enabled,
        "rate_products_enabled": params.rate_products_enabled,
    }
    if params.residual is not None:
        doc["residual"] = {
            "amplitude": params.residual.amplitude,
            "seed": params.residual.seed,
            "pose_scale": params.residual.pose_scale,
        }
    return doc


def params_from_dict(doc: dict) -> PlatformParams:
    try:
        residual = None
        if doc.get("residual"):
            residual = ResidualModel(**doc["residual"])
        return PlatformParams(
            mass=float(doc["mass"]),
            inertia=np.asarray(doc["inertia"], dtype=float),
            com_shift=np.asarray(doc["com_shift"], dtype=float),
            actuator_positions=np.array([[a["x"], a["y"]]
                                         for a in doc["actuators"]], dtype=float),
            stiffness_coeffs=np.array([[s["k1"], s["k2"], s["k3"]]
                                       for s in doc["stiffness"]], dtype=float),
            stroke=float(doc.get("stroke", 0.05)),
            gravity_enabled=bool(doc.get("gravity_enabled", False)),
            rate_products_enabled=bool(doc.get("rate_products_enabled", False)),
            residual=residual,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad platform document: {exc}") from exc


def load_platform(path: str | Path) -> PlatformParams:
    with open(path) as fh:
        return params_from_dict(json.load(fh))


def save_platform(params: PlatformParams, path: str | Path):
    with open(path, "w") as fh:
        json.dump(params_to_dict(params), fh, indent=2)
        fh.write("\n")
