"""Multi-rate closed-loop simulation core.

One loop serves every experiment: the controller runs at the control rate
and commands per-channel accelerations; those pass through an inversion
stage (analytic, learned, or a fixed nominal model) to a virtual wrench,
through the allocator to winding currents, and the plant integrates at a
faster substep rate with the currents held.  Actuator forces are
re-evaluated every substep at the instantaneous coil positions, so the
position-dependent current stiffness stays in the loop.

Timing per control tick n (dt = 1 / control_rate, substeps of dt/k):

    sensors   pose/rates at tick start, accelerometer value from the end
              of the previous tick (one-tick measurement delay)
    control   acceleration commands from the active controller
    actuation allocate -> currents, held for the whole tick
    plant     k Runge-Kutta substeps with per-substep coil positions and
              the per-substep cable disturbance wrench

All randomness (sensor noise) comes from a generator seeded by the caller,
so identical configurations reproduce identical logs bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocation import AllocationProblem, allocate, allocation_weights
from .plant import PlatformParams, accelerations, actuation_map

_TRANSVERSE_IDX = np.array([
    [1, 2],  # 1: +x pusher, transverse (y, z)
    [0, 1],  # 2: +z pusher, transverse (x, y)
    [0, 2],  # 3: +y pusher, transverse (x, z)
    [0, 1],
    [1, 2],
    [0, 1],
    [0, 2],
    [0, 1],
])


class _CoilGeometry:
    """Vectorized coil-position and stroke computations for one layout.

    Winding displacement is linear in the relative pose (small angles), so
    every quantity reduces to one precomputed matrix-vector product.
    """

    def __init__(self, params: PlatformParams):
        pos = np.column_stack([params.actuator_positions, np.zeros(8)])
        disp_map = np.zeros((8, 3, 6))
        for i, p in enumerate(pos):
            disp_map[i, :, :3] = np.eye(3)
            # theta x p = -(p x theta)
            disp_map[i, :, 3:] = -np.array([[0, -p[2], p[1]],
                                            [p[2], 0, -p[0]],
                                            [-p[1], p[0], 0]])
        self._disp_map = disp_map.reshape(24, 6)
        coil_rows = []
        for i in range(8):
            for t in _TRANSVERSE_IDX[i]:
                coil_rows.append(disp_map[i, t])
        self._coil_map = np.array(coil_rows)  # (16, 6)
        self.stroke = params.stroke

    def displacements(self, pose: np.ndarray) -> np.ndarray:
        """(8, 3) displacement of each winding for a relative pose."""
        return (self._disp_map @ pose).reshape(8, 3)

    def coils(self, pose: np.ndarray) -> np.ndarray:
        return (self._coil_map @ pose).reshape(8, 2)

    def max_excursion(self, pose: np.ndarray) -> float:
        return float(np.max(np.abs(self._disp_map @ pose)))


@dataclass
class LoopConfig:
    """Rates and options of one closed-loop run."""

    duration: float
    control_rate: float = 2000.0
    substeps: int = 5
    accel_noise: float = 0.0      # sensor noise sigma on measured accelerations
    pose_noise: float = 0.0       # sensor noise sigma on relative pose
    seed: int = 0
    collect_pairs: bool = False   # also log (state, accel) -> wrench pairs

    def __post_init__(self):
        if self.duration <= 0 or self.control_rate <= 0 or self.substeps < 1:
            raise ValueError("bad loop configuration")
        self.dt = 1.0 / self.control_rate
        self.dt_sub = self.dt / self.substeps
        if self.dt_sub > 1e-3:
            raise ValueError("plant substep above 1 ms; raise substeps")
        self.n_ticks = int(round(self.duration * self.control_rate))


@dataclass
class LoopResult:
    """Raw logs of one run, one row per control tick."""

    time: np.ndarray
    rel_pose: np.ndarray       # (n, 6) measured relative pose
    floater_accel: np.ndarray  # (n, 6) accelerometer (one-tick delay)
    stator_accel: np.ndarray   # (n, 6) base acceleration at the tick
    accel_cmd: np.ndarray      # (n, 6) controller output
    imc_part: np.ndarray       # (n, 6) position-keeping share
    ff_part: np.ndarray        # (n, 6) feedforward share
    wrench_cmd: np.ndarray     # (n, 6)
    forces: np.ndarray         # (n, 8) commanded actuator forces
    currents: np.ndarray       # (n, 8)
    r_d: np.ndarray            # (n, 6) reference fed to the controller
    status: str = "ok"
    fail_time: float | None = None
    pair_inputs: np.ndarray | None = None   # (n, 12) when collecting
    pair_targets: np.ndarray | None = None  # (n, 6)

    def truncate(self, n):
        for name in ("time", "rel_pose", "floater_accel", "stator_accel",
                     "accel_cmd", "imc_part", "ff_part", "wrench_cmd",
                     "forces", "currents", "r_d", "pair_inputs", "pair_targets"):
            arr = getattr(self, name)
            if arr is not None:
                setattr(self, name, arr[:n])


def _is_fast_lti(params: PlatformParams) -> bool:
    return (not params.rate_products_enabled and not params.gravity_enabled
            and params.residual is None)


def run_closed_loop(params: PlatformParams, controller, inverter,
                    config: LoopConfig,
                    base_pos: np.ndarray | None = None,
                    base_accel: np.ndarray | None = None,
                    cable_wrench: np.ndarray | None = None,
                    r_d: np.ndarray | None = None,
                    initial_state: np.ndarray | None = None) -> LoopResult:
    """Run the full loop; arrays are sampled at the substep rate.

    ``controller`` implements step(stator_accel, floater_accel, rel_pose,
    r_d) -> 6 acceleration commands and may expose last_imc / last_ff for
    logging.  ``inverter`` maps (accel_cmd, rel_pose) -> wrench.
    ``base_pos``/``base_accel`` are (n_sub, 6); ``cable_wrench`` is
    (n_sub, 6); ``r_d`` is (n_ticks, 6).  Missing inputs default to zero.
    """
    n = config.n_ticks
    k = config.substeps
    n_sub = n * k
    dt_sub = config.dt_sub

    zeros6 = np.zeros((1, 6))
    if base_pos is None:
        base_pos = zeros6
    if base_accel is None:
        base_accel = zeros6
    if cable_wrench is None:
        cable_wrench = zeros6

    def sub_row(arr, i):
        return arr[i] if arr.shape[0] > 1 else arr[0]

    if r_d is None:
        r_d = np.zeros((n, 6))

    rng = np.random.default_rng(config.seed)
    noisy = config.accel_noise > 0 or config.pose_noise > 0

    geom = _CoilGeometry(params)
    C = actuation_map(params)
    kcoef = params.stiffness_coeffs
    jac = None
    fast = _is_fast_lti(params)
    if fast:
        from .inversion import acceleration_jacobian
        jac = acceleration_jacobian(params)

    state = np.zeros(12) if initial_state is None else initial_state.astype(float).copy()
    last_accel = np.zeros(6)

    out = LoopResult(
        time=np.arange(n) * config.dt,
        rel_pose=np.zeros((n, 6)),
        floater_accel=np.zeros((n, 6)),
        stator_accel=np.zeros((n, 6)),
        accel_cmd=np.zeros((n, 6)),
        imc_part=np.zeros((n, 6)),
        ff_part=np.zeros((n, 6)),
        wrench_cmd=np.zeros((n, 6)),
        forces=np.zeros((n, 8)),
        currents=np.zeros((n, 8)),
        r_d=r_d.copy(),
        pair_inputs=np.zeros((n, 12)) if config.collect_pairs else None,
        pair_targets=np.zeros((n, 6)) if config.collect_pairs else None,
    )

    for tick in range(n):
        i0 = tick * k
        bp = sub_row(base_pos, i0)
        rel = state[:6] - bp
        if geom.max_excursion(rel) > geom.stroke:
            out.status = "collision"
            out.fail_time = tick * config.dt
            out.truncate(tick)
            return out

        meas_pose = rel
        meas_accel = last_accel
        if noisy:
            if config.pose_noise > 0:
                meas_pose = rel + rng.normal(0.0, config.pose_noise, 6)
            if config.accel_noise > 0:
                meas_accel = last_accel + rng.normal(0.0, config.accel_noise, 6)

        stator_acc = sub_row(base_accel, i0)
        cmd = controller.step(stator_acc, meas_accel, meas_pose, r_d[tick])
        wrench = inverter(cmd, meas_pose)

        coils = geom.coils(rel)
        q = allocation_weights(coils, params)
        forces = allocate(AllocationProblem(wrench=wrench, weight_diag=q, map=C))
        currents = forces / q

        out.rel_pose[tick] = meas_pose
        out.floater_accel[tick] = meas_accel
        out.stator_accel[tick] = stator_acc
        out.accel_cmd[tick] = cmd
        out.imc_part[tick] = getattr(controller, "last_imc", np.zeros(6))
        out.ff_part[tick] = getattr(controller, "last_ff", np.zeros(6))
        out.wrench_cmd[tick] = wrench
        out.forces[tick] = forces
        out.currents[tick] = currents

        pair_accel = None
        for s in range(k):
            idx = i0 + s
            rel_now = state[:6] - sub_row(base_pos, idx)
            coils = geom.coils(rel_now)
            f = (kcoef[:, 0] * coils[:, 0] ** 2
                 + kcoef[:, 1] * coils[:, 1] ** 2 + kcoef[:, 2]) * currents
            w_now = C @ f + sub_row(cable_wrench, idx)
            if fast:
                acc = jac @ w_now
                state[:6] += state[6:] * dt_sub + 0.5 * acc * dt_sub ** 2
                state[6:] += acc * dt_sub
            else:
                acc = accelerations(state, w_now, params)
                state = _rk4(state, w_now, params, dt_sub)
            if s == 0:
                pair_accel = acc
        last_accel = acc

        if not np.all(np.isfinite(state)):
            out.status = "divergence"
            out.fail_time = tick * config.dt
            out.truncate(tick)
            return out

        if config.collect_pairs:
            meas_pair = pair_accel
            if config.accel_noise > 0:
                meas_pair = pair_accel + rng.normal(0.0, config.accel_noise, 6)
            out.pair_inputs[tick, :6] = meas_pose
            out.pair_inputs[tick, 6:] = meas_pair
            out.pair_targets[tick] = wrench

    return out


def _rk4(state, wrench, params, dt):
    def deriv(x):
        return np.concatenate([x[6:], accelerations(x, wrench, params)])

    k1 = deriv(state)
    k2 = deriv(state + 0.5 * dt * k1)
    k3 = deriv(state + 0.5 * dt * k2)
    k4 = deriv(state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------------------
# Controller adapters and inverters
# ---------------------------------------------------------------------------

class PidLoopController:
    """PID on the reference error, emitting acceleration commands."""

    def __init__(self, pid):
        self.pid = pid
        self.last_imc = np.zeros(6)
        self.last_ff = np.zeros(6)
        self._dt = None

    def bind(self, dt):
        self._dt = dt
        return self

    def step(self, stator_accel, floater_accel, rel_pose, r_d):
        cmd = self.pid.step(np.asarray(r_d) - np.asarray(rel_pose), self._dt)
        self.last_imc = cmd
        return cmd


class HybridLoopController:
    """Adapter exposing the hybrid controller to the loop with logging taps."""

    def __init__(self, hafimc):
        self.hafimc = hafimc
        self.last_imc = np.zeros(6)
        self.last_ff = np.zeros(6)

    def step(self, stator_accel, floater_accel, rel_pose, r_d):
        ctrl = self.hafimc
        imc_part = np.zeros(6)
        ff_part = np.zeros(6)
        for i in range(6):
            if ctrl.imc_enabled:
                imc_part[i] = ctrl.imc[i].step(r_d[i], rel_pose[i])
            if ctrl.feedforward_enabled:
                ff_part[i] = ctrl.fxlms[i].step(stator_accel[i], floater_accel[i])
        cmd = imc_part - ff_part
        if not np.all(np.isfinite(cmd)) or any(ch.fault for ch in ctrl.fxlms):
            ctrl.fault = True
            cmd = np.zeros(6)
        self.last_imc = imc_part
        self.last_ff = ff_part
        return cmd


def make_inverter(mode: str, params: PlatformParams,
                  nominal: PlatformParams | None = None, network=None):
    """Map per-channel acceleration commands to a virtual wrench.

    ``analytic``: exact inverse on the true parameters (oracle decoupler).
    ``learned``: a trained inversion network.
    ``none``: fixed nominal diagonal model (mass/inertia of the bare
    platform, no CoM shift) - the undecoupled baseline.
    """
    if mode == "analytic":
        from .inversion import analytic_inverse

        def inverter(cmd, pose):
            return analytic_inverse(cmd, params)

    elif mode == "learned":
        if network is None:
            raise ValueError("learned inversion requires a network")

        def inverter(cmd, pose):
            return network.forward(np.concatenate([pose, cmd]))

    elif mode == "none":
        ref = nominal if nominal is not None else params
        diag = np.concatenate([[ref.mass] * 3, ref.inertia])

        def inverter(cmd, pose):
            return diag * cmd

    else:
        raise ValueError(f"unknown inversion mode '{mode}'")
    return inverter
