"""Self-constructing trainer for the inversion network.

Starts from an empty network and grows it one neuron at a time: each
insertion places a unit on the sample with the worst multi-output squared
error (centre = that input, radius = 1 in normalized coordinates, weights =
the residual there), then refines every centre, radius and weight with
damped Gauss-Newton steps

    delta_k+1 = delta_k - (H_k + mu_k I)^-1 g_k,   H = J'J,  g = J'r

where J is the Jacobian of the stacked output residuals.  The damping
follows the usual multiply/divide-by-ten schedule on step rejection or
acceptance.  Growth stops when the dataset error reaches the requested
level or the neuron budget is exhausted; the best network seen anywhere
along the run is returned.

Everything is deterministic: worst-sample ties break toward the lowest
index and no randomness enters the updates, so a fixed dataset always
reproduces the same network bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DatasetError
from .rbf import Normalization, RbfNetwork, kernel_matrix, rmse

MIN_RADIUS = 1e-3  # refinement steps shrinking a kernel below this are rejected


@dataclass
class TrainingConfig:
    """Knobs of the self-construct run."""

    desired_rmse: float = 1e-5    # stop once the dataset error is this low
    max_neurons: int = 25         # hard budget on hidden units
    max_inner_iterations: int = 30  # refinement attempts per insertion
    initial_damping: float = 1e-2
    damping_factor: float = 10.0
    max_damping: float = 1e10
    min_damping: float = 1e-12
    stall_factor: float = 0.999   # two insertions without this much gain warn

    def validate(self):
        if self.desired_rmse <= 0:
            raise ConfigurationError("desired_rmse must be positive")
        if self.max_neurons < 1 or self.max_inner_iterations < 1:
            raise ConfigurationError("neuron and iteration caps must be >= 1")


@dataclass
class TrainingReport:
    """What happened during one training run."""

    neurons: int = 0
    train_rmse: float = np.inf
    inner_iterations: int = 0
    rmse_per_insertion: list = field(default_factory=list)
    stalled: bool = False
    reached_target: bool = False


def _forward(centers, radii, weights, x):
    return kernel_matrix(x, centers, radii) @ weights


def _pack(centers, radii, weights):
    return np.concatenate([centers.ravel(), radii, weights.ravel()])


def _unpack(theta, p, n, m):
    c = theta[: p * n].reshape(p, n)
    s = theta[p * n: p * n + p]
    w = theta[p * n + p:].reshape(p, m)
    return c, s, w


def residual_jacobian(centers, radii, weights, x, t):
    """Residuals r = (y - t) stacked over samples/outputs and dr/dtheta.

    Returns (r, J) with r of shape (Q*m,) and J of shape (Q*m, p*(n+1+m)).
    Parameter order matches _pack: centres, radii, weights.
    """
    p, n = centers.shape
    m = weights.shape[1]
    q = x.shape[0]
    diff = x[:, None, :] - centers[None, :, :]          # (Q, p, n)
    d2 = np.einsum("qpn,qpn->qp", diff, diff)
    phi = np.exp(-d2 / (2.0 * radii ** 2))              # (Q, p)
    y = phi @ weights
    r = (y - t).reshape(-1)

    # d y_qj / d c_ik = w_ij phi_qi diff_qik / sigma_i^2
    jc = np.einsum("ij,qi,qik->qjik", weights, phi / radii ** 2, diff)
    # d y_qj / d sigma_i = w_ij phi_qi d2_qi / sigma_i^3
    js = np.einsum("ij,qi->qji", weights, phi * d2 / radii ** 3)
    # d y_qj / d w_ij' = phi_qi delta_jj'
    jw = np.zeros((q, m, p, m))
    for j in range(m):
        jw[:, j, :, j] = phi

    J = np.concatenate(
        [jc.reshape(q * m, p * n), js.reshape(q * m, p), jw.reshape(q * m, p * m)],
        axis=1,
    )
    return r, J


def sse_gradient(centers, radii, weights, x, t):
    """Gradient of 1/2 sum of squared output errors w.r.t. all parameters."""
    r, J = residual_jacobian(centers, radii, weights, x, t)
    return J.T @ r


def _dataset_rmse(centers, radii, weights, x, t):
    return rmse(_forward(centers, radii, weights, x), t)


def errcor_fit(x: np.ndarray, t: np.ndarray, config: TrainingConfig):
    """Grow and refine a network on normalized data.

    Returns (centers, radii, weights, report) of the best network seen.
    """
    config.validate()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.atleast_2d(np.asarray(t, dtype=float))
    if x.shape[0] != t.shape[0] or x.shape[0] == 0:
        raise DatasetError("inputs/targets must be non-empty and aligned")
    n, m = x.shape[1], t.shape[1]

    centers = np.zeros((0, n))
    radii = np.zeros(0)
    weights = np.zeros((0, m))
    y = np.zeros_like(t)

    best = None  # (rmse, centers, radii, weights)
    report = TrainingReport()
    prev_best_at_insertion = np.inf
    stall_count = 0

    for _ in range(config.max_neurons):
        # place a neuron on the worst sample (ties -> lowest index)
        errors_sq = np.sum((t - y) ** 2, axis=1)
        beta = int(np.argmax(errors_sq))
        centers = np.vstack([centers, x[beta]])
        radii = np.append(radii, 1.0)
        weights = np.vstack([weights, (t - y)[beta]])
        p = centers.shape[0]

        mu = config.initial_damping
        theta = _pack(centers, radii, weights)
        r, J = residual_jacobian(centers, radii, weights, x, t)
        sse = r @ r
        H = J.T @ J
        g = J.T @ r
        inner = 0
        while inner < config.max_inner_iterations:
            inner += 1
            report.inner_iterations += 1
            try:
                step = np.linalg.solve(H + mu * np.eye(H.shape[0]), g)
            except np.linalg.LinAlgError:
                step = None
            accepted = False
            if step is not None and np.all(np.isfinite(step)):
                trial = theta - step
                tc, ts, tw = _unpack(trial, p, n, m)
                if np.all(ts > MIN_RADIUS):
                    tr = (_forward(tc, ts, tw, x) - t).reshape(-1)
                    tsse = tr @ tr
                    if np.isfinite(tsse) and tsse < sse:
                        theta, sse = trial, tsse
                        r, J = residual_jacobian(tc, ts, tw, x, t)
                        H = J.T @ J
                        g = J.T @ r
                        mu = max(mu / config.damping_factor, config.min_damping)
                        accepted = True
            if not accepted:
                mu *= config.damping_factor
                if mu > config.max_damping:
                    break
                continue
            centers, radii, weights = _unpack(theta, p, n, m)
            current = _dataset_rmse(centers, radii, weights, x, t)
            if best is None or current < best[0]:
                best = (current, centers.copy(), radii.copy(), weights.copy())
            if current <= config.desired_rmse:
                break

        centers, radii, weights = _unpack(theta, p, n, m)
        y = _forward(centers, radii, weights, x)
        current = _dataset_rmse(centers, radii, weights, x, t)
        if best is None or current < best[0]:
            best = (current, centers.copy(), radii.copy(), weights.copy())
        report.rmse_per_insertion.append((p, best[0]))

        if best[0] > prev_best_at_insertion * config.stall_factor:
            stall_count += 1
            if stall_count >= 2:
                report.stalled = True
        else:
            stall_count = 0
        prev_best_at_insertion = best[0]

        if best[0] <= config.desired_rmse:
            report.reached_target = True
            break

    report.neurons = best[1].shape[0]
    report.train_rmse = best[0]
    return best[1], best[2], best[3], report


def train_network(inputs: np.ndarray, targets: np.ndarray,
                  config: TrainingConfig):
    """Normalize a physical-units dataset, fit, and wrap the result.

    Returns (RbfNetwork, TrainingReport).  The dataset error in the report
    is in normalized units, matching ``desired_rmse``.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    norm = Normalization.from_data(inputs, targets)
    xn = norm.normalize_inputs(inputs)
    tn = norm.normalize_outputs(targets)
    centers, radii, weights, report = errcor_fit(xn, tn, config)
    net = RbfNetwork(centers=centers, radii=radii, weights=weights,
                     normalization=norm)
    return net, report
