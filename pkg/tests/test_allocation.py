import numpy as np
import pytest

from mvip.allocation import (AllocationProblem, allocate, allocation_weights,
                             forces_to_currents)
from mvip.errors import AllocationError, ConfigurationError, StrokeLimitError
from mvip.plant import CoilPosition, actuation_map, actuator_force
from oracles import qp_allocate, qp_cost


def problem(params, wrench, weights=None):
    return AllocationProblem(
        wrench=np.asarray(wrench, dtype=float),
        weight_diag=np.ones(8) if weights is None else weights,
        map=actuation_map(params),
    )


class TestAllocate:
    def test_zero_wrench_zero_forces(self, params):
        assert np.allclose(allocate(problem(params, np.zeros(6))), 0.0)

    def test_symmetric_pure_vertical_force(self, params):
        f = allocate(problem(params, [0, 0, 4.0, 0, 0, 0]))
        expected = np.array([0, 1.0, 0, 1.0, 0, 1.0, 0, 1.0])
        assert np.allclose(f, expected, atol=1e-9)

    def test_matches_projected_gradient_oracle(self, rng, params):
        C = actuation_map(params)
        for _ in range(30):
            wrench = rng.normal(0, 10, 6)
            weights = rng.uniform(0.5, 3.0, 8)
            ours = allocate(problem(params, wrench, weights))
            ref = qp_allocate(C, weights, wrench)
            assert qp_cost(ours, weights) == pytest.approx(
                qp_cost(ref, weights), rel=1e-6, abs=1e-9)
            assert np.linalg.norm(C @ ours - wrench) <= 1e-9 * (
                1 + np.linalg.norm(wrench))

    def test_exactness_invariant(self, rng, params):
        C = actuation_map(params)
        for _ in range(100):
            wrench = rng.normal(0, 50, 6)
            f = allocate(problem(params, wrench))
            assert np.linalg.norm(C @ f - wrench) <= 1e-9 * (
                1 + np.linalg.norm(wrench))

    def test_null_space_perturbations_cost_more(self, rng, params):
        C = actuation_map(params)
        weights = rng.uniform(0.5, 2.0, 8)
        wrench = rng.normal(0, 5, 6)
        f = allocate(problem(params, wrench, weights))
        base = qp_cost(f, weights)
        # null-space basis of the 6x8 map
        _, _, vt = np.linalg.svd(C)
        null = vt[6:]
        for _ in range(50):
            n = null.T @ rng.normal(size=2)
            assert qp_cost(f + n, weights) >= base - 1e-12

    def test_scaling_covariance(self, rng, params):
        wrench = rng.normal(0, 3, 6)
        weights = rng.uniform(0.5, 2.0, 8)
        f1 = allocate(problem(params, wrench, weights))
        f2 = allocate(problem(params, 2.0 * wrench, weights))
        assert np.allclose(f2, 2.0 * f1, rtol=1e-9, atol=1e-12)

    def test_generalizes_to_other_shapes(self, rng):
        C = rng.normal(size=(3, 7))
        weights = rng.uniform(0.5, 2.0, 7)
        wrench = rng.normal(size=3)
        f = allocate(AllocationProblem(wrench=wrench, weight_diag=weights, map=C))
        assert np.allclose(C @ f, wrench, atol=1e-9)
        ref = qp_allocate(C, weights, wrench)
        assert qp_cost(f, weights) == pytest.approx(qp_cost(ref, weights),
                                                    rel=1e-6, abs=1e-12)

    def test_rank_deficient_map_rejected(self):
        C = np.zeros((6, 8))
        C[0, :] = 1.0
        C[1, :] = 2.0  # dependent rows
        C[2:, :] = np.arange(48).reshape(6, 8)[2:]
        C[5] = C[4]
        with pytest.raises(AllocationError):
            allocate(AllocationProblem(wrench=np.ones(6),
                                       weight_diag=np.ones(8), map=C))

    def test_invariants_validated(self, params):
        with pytest.raises(ConfigurationError):
            AllocationProblem(wrench=np.zeros(6),
                              weight_diag=np.zeros(8),
                              map=actuation_map(params))
        with pytest.raises(ConfigurationError):
            AllocationProblem(wrench=np.zeros(5),
                              weight_diag=np.ones(8),
                              map=actuation_map(params))


class TestForcesToCurrents:
    def test_unit_current_inverse(self, params):
        k3 = params.stiffness_coeffs[0, 2]
        coils = np.zeros((8, 2))
        currents = forces_to_currents(np.full(8, k3), coils, params)
        assert np.allclose(currents, 1.0)

    def test_zero_forces_zero_currents(self, params):
        assert np.allclose(
            forces_to_currents(np.zeros(8), np.zeros((8, 2)), params), 0.0)

    def test_roundtrip_identity(self, rng, params):
        for _ in range(20):
            coils = rng.uniform(-0.15, 0.15, (8, 2))
            forces = rng.normal(0, 30, 8)
            currents = forces_to_currents(forces, coils, params)
            back = np.array([
                actuator_force(CoilPosition(c[0], c[1], i), k)
                for c, i, k in zip(coils, currents, params.stiffness_coeffs)])
            assert np.allclose(back, forces, rtol=1e-10, atol=1e-10)

    def test_accepts_coil_position_objects(self, params):
        coils = [CoilPosition(0.0, 0.0, 0.0) for _ in range(8)]
        currents = forces_to_currents(np.full(8, 20.0), coils, params)
        assert np.allclose(currents, 1.0)

    def test_vanishing_stiffness_rejected(self, params):
        bad = params_with_zero_crossing(params)
        coils = np.zeros((8, 2))
        coils[0] = [0.0, np.sqrt(20.0 / 25.0)]  # K1 y^2 + K2 z^2 + K3 = 0
        with pytest.raises(StrokeLimitError):
            forces_to_currents(np.ones(8), coils, bad)
        with pytest.raises(StrokeLimitError):
            allocation_weights(coils, bad)


def params_with_zero_crossing(params):
    from dataclasses import replace
    coeffs = params.stiffness_coeffs.copy()
    coeffs[0] = [25.0, -25.0, 20.0]
    return replace(params, stiffness_coeffs=coeffs)
