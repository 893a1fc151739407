"""Analytic invertibility analysis and exact inverse of the reduced plant.

With the virtual wrench U as input and the pose as output, every channel
has relative order two and the input-output map at the acceleration level
is linear:

    A(U) = J(params) U + delta

J collects the mass, inertia and CoM-shift couplings; its determinant has
the closed form 1 / (Jx Jy Jz m^3) regardless of the CoM shift, so the map
never degenerates for physical parameters.  Inverting it per-tick gives a
ground-truth decoupler: commanded accelerations become the wrench that
realizes them exactly, and the cascade plant-after-inverse behaves as six
independent double integrators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .plant import PlatformParams

RELATIVE_ORDER = (2, 2, 2, 2, 2, 2)


@dataclass
class InversionReport:
    """Invertibility summary of one parameter set."""

    jacobian: np.ndarray      # (6, 6) acceleration/wrench sensitivity
    determinant: float        # numeric det of the matrix above
    closed_form: float        # 1 / (Jx Jy Jz m^3)
    relative_order: tuple = RELATIVE_ORDER
    invertible: bool = True


def acceleration_jacobian(params: PlatformParams) -> np.ndarray:
    """The 6x6 sensitivity of output accelerations to the wrench."""
    m = params.mass
    Jx, Jy, Jz = params.inertia
    rx, ry, rz = params.com_shift
    return np.array([
        [1 / m - rz ** 2 / Jy - ry ** 2 / Jz, rx * ry / Jz, rx * rz / Jy,
         0.0, -rz / Jy, ry / Jz],
        [rx * ry / Jz, 1 / m - rz ** 2 / Jx - rx ** 2 / Jz, ry * rz / Jx,
         rz / Jx, 0.0, -rx / Jz],
        [rx * rz / Jy, ry * rz / Jx, 1 / m - ry ** 2 / Jx - rx ** 2 / Jy,
         -ry / Jx, rx / Jy, 0.0],
        [0.0, -rz / Jx, ry / Jx, 1 / Jx, 0.0, 0.0],
        [rz / Jy, 0.0, -rx / Jy, 0.0, 1 / Jy, 0.0],
        [-ry / Jz, rx / Jz, 0.0, 0.0, 0.0, 1 / Jz],
    ])


def output_accelerations(wrench: np.ndarray, params: PlatformParams,
                         pose: np.ndarray | None = None) -> np.ndarray:
    """Pose accelerations produced by a wrench (reduced model).

    The optional pose only matters when the platform carries a configured
    residual; the nominal map itself is state-free.
    """
    wrench = np.asarray(wrench, dtype=float)
    acc = acceleration_jacobian(params) @ wrench
    if params.residual is not None and pose is not None:
        acc = acc + params.residual.accel(pose)
    return acc


def jacobian(params: PlatformParams) -> InversionReport:
    """Build the sensitivity matrix and check it against the closed form."""
    J = acceleration_jacobian(params)
    det = float(np.linalg.det(J))
    closed = 1.0 / (params.inertia.prod() * params.mass ** 3)
    return InversionReport(jacobian=J, determinant=det, closed_form=closed,
                           invertible=np.isfinite(det) and det > 0)


def analytic_inverse(desired_accel: np.ndarray,
                     params: PlatformParams) -> np.ndarray:
    """Wrench realizing the commanded accelerations on the nominal plant.

    Solves J U = a fresh on every call so parameter changes (payload
    redeployment) take effect immediately.  A configured residual is
    deliberately ignored: the inverse is the nominal decoupler and the
    residual stays a disturbance for the controller.
    """
    a = np.asarray(desired_accel, dtype=float)
    if a.shape != (6,):
        raise ConfigurationError("desired accelerations must have 6 entries")
    J = acceleration_jacobian(params)
    try:
        return np.linalg.solve(J, a)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError(f"singular inversion: {exc}") from exc
