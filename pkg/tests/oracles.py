"""Independent reference implementations used to check the main code paths.

Everything here is deliberately written the slow, obvious way (iterative
solvers, per-entry formulas, finite differences) and stays decoupled from
the implementations it judges.
"""

import numpy as np


def qp_allocate(C, weights, wrench, iterations=4000, tol=1e-14):
    """Projected-gradient solution of the weighted allocation problem.

    minimize 1/2 f' D f with D = diag(1/weights^2), subject to C f = wrench,
    by gradient steps projected back onto the constraint manifold.
    """
    D = 1.0 / np.asarray(weights, dtype=float) ** 2
    pinv = np.linalg.pinv(C)

    def project(f):
        return f - pinv @ (C @ f - wrench)

    f = project(np.zeros(C.shape[1]))
    step = 0.9 / D.max()
    cost = 0.5 * f @ (D * f)
    for _ in range(iterations):
        f_new = project(f - step * (D * f))
        new_cost = 0.5 * f_new @ (D * f_new)
        if abs(cost - new_cost) <= tol * (1.0 + abs(cost)):
            f = f_new
            break
        f, cost = f_new, new_cost
    return f


def qp_cost(f, weights):
    D = 1.0 / np.asarray(weights, dtype=float) ** 2
    return 0.5 * f @ (D * f)


def actuation_column(index, positions):
    """Column of the force-to-wrench map for one actuator, from geometry."""
    x, y = positions[index]
    col = np.zeros(6)
    if index == 0:
        col[0] = 1.0
        col[5] = -y
    elif index == 4:
        col[0] = -1.0
        col[5] = y
    elif index == 2:
        col[1] = 1.0
        col[5] = x
    elif index == 6:
        col[1] = -1.0
        col[5] = -x
    else:
        col[2] = 1.0
        col[3] = y
        col[4] = -x
    return col


def stiffness_surface(y_c, z_c, k1, k2, k3, current):
    """Second, independent coding of the quadratic force surface."""
    acc = 0.0
    for coef, val in ((k1, y_c * y_c), (k2, z_c * z_c), (k3, 1.0)):
        acc += coef * val
    return acc * current


def finite_difference_jacobian(func, x0, eps=1e-6):
    """Central-difference Jacobian of a vector function."""
    x0 = np.asarray(x0, dtype=float)
    f0 = np.asarray(func(x0))
    J = np.zeros((f0.size, x0.size))
    for i in range(x0.size):
        hi = np.zeros_like(x0)
        hi[i] = eps
        J[:, i] = (np.asarray(func(x0 + hi)) - np.asarray(func(x0 - hi))) / (2 * eps)
    return J


def rmse_reference(outputs, targets):
    """Spreadsheet-style evaluation of the dataset error definition."""
    total = 0.0
    q = len(targets)
    m = len(targets[0])
    for out_row, tgt_row in zip(outputs, targets):
        acc = 0.0
        for o, t in zip(out_row, tgt_row):
            acc += (t - o) ** 2
        total += (acc / m) ** 0.5
    return total / q


def welch_tone_ratio_db(y, x, fs, frequency):
    """Attenuation at a tone from full-spectrum PSD estimates."""
    from scipy import signal

    nper = min(len(x), int(fs * 2.0))
    freqs, pxx = signal.welch(x, fs=fs, nperseg=nper)
    _, pyy = signal.welch(y, fs=fs, nperseg=nper)
    k = int(np.argmin(np.abs(freqs - frequency)))
    return 10.0 * np.log10(pyy[k] / pxx[k])
