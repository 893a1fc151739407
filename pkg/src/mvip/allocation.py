"""Optimal distribution of a 6-DoF wrench over the eight redundant actuators.

The actuation map C is 6x8, so a demanded wrench admits infinitely many
force combinations.  The allocator picks the one of minimum weighted energy

    min  1/2 f' Winv' Winv f      s.t.  C f = wrench

with Winv = diag(1/Q_i) built from the per-actuator current stiffness, by
solving the KKT system in one shot:

    [Winv'Winv  -C'] [f     ]   [0     ]
    [C           0 ] [lambda] = [wrench]

The same closed form works for any full-row-rank n-input / m-output map
with n > m, so the solver takes the map as an argument rather than
assuming the 6x8 shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllocationError, ConfigurationError, StrokeLimitError
from .plant import CoilPosition, PlatformParams, current_stiffness

# Above this KKT condition number the solution is numerically meaningless.
COND_LIMIT = 1e12

# Current stiffness magnitudes below this make an actuator ineffective.
MIN_STIFFNESS = 1e-6


@dataclass
class AllocationProblem:
    """One wrench-distribution instance."""

    wrench: np.ndarray       # (m,) demanded wrench
    weight_diag: np.ndarray  # (n,) positive Q_i values
    map: np.ndarray          # (m, n) actuation map, full row rank

    def __post_init__(self):
        self.wrench = np.asarray(self.wrench, dtype=float)
        self.weight_diag = np.asarray(self.weight_diag, dtype=float)
        self.map = np.asarray(self.map, dtype=float)
        m, n = self.map.shape
        if n <= m:
            raise ConfigurationError("map must have more inputs than outputs")
        if self.wrench.shape != (m,):
            raise ConfigurationError("wrench length must match map rows")
        if self.weight_diag.shape != (n,) or not np.all(self.weight_diag > 0):
            raise ConfigurationError("weights must be positive, one per actuator")


def allocate(problem: AllocationProblem) -> np.ndarray:
    """Minimum-weighted-energy forces satisfying C f = wrench exactly."""
    C = problem.map
    m, n = C.shape
    winv = 1.0 / problem.weight_diag
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = np.diag(winv * winv)
    kkt[:n, n:] = -C.T
    kkt[n:, :n] = C
    rhs = np.concatenate([np.zeros(n), problem.wrench])
    if np.linalg.cond(kkt) > COND_LIMIT:
        raise AllocationError("KKT block ill-conditioned: map is rank deficient")
    sol = np.linalg.solve(kkt, rhs)
    return sol[:n]


def allocation_weights(coils: np.ndarray, params: PlatformParams) -> np.ndarray:
    """Q_i evaluated at the current coil positions, shape (8,)."""
    q = np.array([current_stiffness(c[0], c[1], k)
                  for c, k in zip(coils, params.stiffness_coeffs)])
    if np.any(np.abs(q) < MIN_STIFFNESS):
        raise StrokeLimitError("current stiffness vanished at a coil position")
    return q


def forces_to_currents(forces: np.ndarray, coil_states,
                       params: PlatformParams) -> np.ndarray:
    """Winding currents reproducing the demanded forces, I_i = f_i / Q_i.

    ``coil_states`` is either an (8, 2) array of (yc, zc) or a sequence of
    CoilPosition.  Raises when any stiffness is too close to zero (the
    actuator cannot realize force at that position).
    """
    forces = np.asarray(forces, dtype=float)
    out = np.empty(8)
    for i in range(8):
        c = coil_states[i]
        yc, zc = (c.y_c, c.z_c) if isinstance(c, CoilPosition) else (c[0], c[1])
        q = current_stiffness(yc, zc, params.stiffness_coeffs[i])
        if abs(q) < MIN_STIFFNESS:
            raise StrokeLimitError(f"actuator {i + 1} ineffective: |Q| = {abs(q):.2e}")
        out[i] = forces[i] / q
    return out
