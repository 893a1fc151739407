"""Gaussian radial basis function network for learned system inversion.

The network maps the 12-entry vector [pose, commanded accelerations] to the
6-entry virtual wrench.  Hidden units are Gaussian kernels

    phi_i(x) = exp(-|x - c_i|^2 / (2 sigma_i^2))

and each output is a weighted sum sum_i w_ij phi_i(x).  All fitting happens
in per-dimension normalized coordinates on [-1, 1]; the affine maps are
stored with the network so inference accepts and returns physical units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DatasetError

NETWORK_FORMAT = "mvip-rbf-network"
NETWORK_VERSION = 1


@dataclass
class Normalization:
    """Per-dimension affine maps onto [-1, 1] for inputs and outputs."""

    input_min: np.ndarray
    input_max: np.ndarray
    output_min: np.ndarray
    output_max: np.ndarray

    @classmethod
    def from_data(cls, inputs: np.ndarray, targets: np.ndarray) -> "Normalization":
        for name, arr in (("input", inputs), ("target", targets)):
            span = arr.max(axis=0) - arr.min(axis=0)
            flat = np.flatnonzero(span <= 0)
            if flat.size:
                raise DatasetError(
                    f"{name} dimension {flat[0]} is constant; cannot normalize"
                )
        return cls(inputs.min(axis=0), inputs.max(axis=0),
                   targets.min(axis=0), targets.max(axis=0))

    @staticmethod
    def _fwd(x, lo, hi):
        return (2.0 * x - hi - lo) / (hi - lo)

    @staticmethod
    def _inv(xn, lo, hi):
        return (xn * (hi - lo) + hi + lo) / 2.0

    def normalize_inputs(self, x):
        return self._fwd(np.asarray(x, dtype=float), self.input_min, self.input_max)

    def denormalize_inputs(self, xn):
        return self._inv(np.asarray(xn, dtype=float), self.input_min, self.input_max)

    def normalize_outputs(self, y):
        return self._fwd(np.asarray(y, dtype=float), self.output_min, self.output_max)

    def denormalize_outputs(self, yn):
        return self._inv(np.asarray(yn, dtype=float), self.output_min, self.output_max)


def kernel_matrix(x: np.ndarray, centers: np.ndarray,
                  radii: np.ndarray) -> np.ndarray:
    """(Q, p) Gaussian kernel activations for normalized inputs."""
    diff = x[:, None, :] - centers[None, :, :]
    d2 = np.einsum("qpn,qpn->qp", diff, diff)
    return np.exp(-d2 / (2.0 * radii ** 2))


@dataclass
class RbfNetwork:
    """A trained (or hand-built) RBF network with its normalization."""

    centers: np.ndarray        # (p, input_dim), normalized coordinates
    radii: np.ndarray          # (p,), positive
    weights: np.ndarray        # (p, output_dim)
    normalization: Normalization

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.radii = np.atleast_1d(np.asarray(self.radii, dtype=float))
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        p = self.centers.shape[0]
        if self.radii.shape != (p,) or self.weights.shape[0] != p:
            raise ConfigurationError("centers/radii/weights sizes disagree")
        if not np.all(self.radii > 0):
            raise ConfigurationError("all radii must be positive")

    @property
    def neuron_count(self) -> int:
        return self.centers.shape[0]

    @property
    def input_dim(self) -> int:
        return self.centers.shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights.shape[1]

    def forward_normalized(self, xn: np.ndarray) -> np.ndarray:
        xn = np.atleast_2d(np.asarray(xn, dtype=float))
        return kernel_matrix(xn, self.centers, self.radii) @ self.weights

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Evaluate in physical units; accepts (input_dim,) or (Q, input_dim)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xn = self.normalization.normalize_inputs(np.atleast_2d(x))
        yn = self.forward_normalized(xn)
        y = self.normalization.denormalize_outputs(yn)
        return y[0] if single else y


def rbf_forward(net: RbfNetwork, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


def rmse(outputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean over samples of the per-sample root-mean-square output error.

    Note the order: the root is taken per sample across output dimensions
    first, then averaged over the dataset (not the other way round).
    """
    outputs = np.atleast_2d(outputs)
    targets = np.atleast_2d(targets)
    if outputs.shape != targets.shape or outputs.shape[0] == 0:
        raise DatasetError("outputs/targets must be equal-shaped and non-empty")
    per_sample = np.sqrt(np.mean((targets - outputs) ** 2, axis=1))
    return float(np.mean(per_sample))


def network_rmse(net: RbfNetwork, inputs: np.ndarray, targets: np.ndarray,
                 normalized: bool = True) -> float:
    """Dataset error of a network, by default in normalized target units."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if normalized:
        xn = net.normalization.normalize_inputs(inputs)
        tn = net.normalization.normalize_outputs(targets)
        return rmse(net.forward_normalized(xn), tn)
    return rmse(net.forward(inputs), targets)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def network_to_dict(net: RbfNetwork) -> dict:
    return {
        "format": NETWORK_FORMAT,
        "version": NETWORK_VERSION,
        "centers": net.centers.tolist(),
        "radii": net.radii.tolist(),
        "weights": net.weights.tolist(),
        "normalization": {
            "input_min": net.normalization.input_min.tolist(),
            "input_max": net.normalization.input_max.tolist(),
            "output_min": net.normalization.output_min.tolist(),
            "output_max": net.normalization.output_max.tolist(),
        },
    }


def network_from_dict(doc: dict) -> RbfNetwork:
    if doc.get("format") != NETWORK_FORMAT:
        raise ConfigurationError("not a network document")
    if doc.get("version") != NETWORK_VERSION:
        raise ConfigurationError(f"unsupported network version {doc.get('version')}")
    norm = Normalization(
        input_min=np.asarray(doc["normalization"]["input_min"], dtype=float),
        input_max=np.asarray(doc["normalization"]["input_max"], dtype=float),
        output_min=np.asarray(doc["normalization"]["output_min"], dtype=float),
        output_max=np.asarray(doc["normalization"]["output_max"], dtype=float),
    )
    return RbfNetwork(
        centers=np.asarray(doc["centers"], dtype=float),
        radii=np.asarray(doc["radii"], dtype=float),
        weights=np.asarray(doc["weights"], dtype=float),
        normalization=norm,
    )


def save_network(net: RbfNetwork, path: str | Path):
    with open(path, "w") as fh:
        json.dump(network_to_dict(net), fh)
        fh.write("\n")


def load_network(path: str | Path) -> RbfNetwork:
    with open(path) as fh:
        return network_from_dict(json.load(fh))
