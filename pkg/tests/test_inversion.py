import numpy as np
import pytest

from mvip.inversion import (acceleration_jacobian, analytic_inverse, jacobian,
                            output_accelerations)
from mvip.plant import PlatformParams, step_dynamics, zero_state
from conftest import random_params
from oracles import finite_difference_jacobian


class TestOutputAccelerations:
    def test_block_diagonal_without_com_shift(self, params):
        u = np.array([2.0, -1.0, 3.0, 0.4, -0.2, 0.6])
        acc = output_accelerations(u, params)
        expected = np.concatenate([u[:3] / params.mass, u[3:] / params.inertia])
        assert np.allclose(acc, expected)

    def test_torque_couples_into_translation(self):
        p = PlatformParams(com_shift=np.array([0.0, 0.02, 0.0]))
        u = np.zeros(6)
        u[5] = 1.0
        acc = output_accelerations(u, p)
        assert acc[0] == pytest.approx(0.02 / p.inertia[2])

    def test_matches_plant_accelerations_finite_difference(self, rng):
        # accelerations realized by the integrator over a vanishing step
        for _ in range(10):
            p = random_params(rng)
            u = rng.normal(0, 5, 6)
            dt = 1e-5
            out = step_dynamics(zero_state(), u, p, dt)
            rates_fd = out[6:] / dt
            assert np.allclose(rates_fd, output_accelerations(u, p),
                               rtol=1e-6, atol=1e-8)


class TestJacobian:
    def test_unit_parameters_identity(self):
        p = PlatformParams(mass=1.0, inertia=np.ones(3))
        rep = jacobian(p)
        assert np.allclose(rep.jacobian, np.eye(6))
        assert rep.determinant == pytest.approx(1.0)
        assert rep.invertible

    def test_closed_form_value(self):
        p = PlatformParams(mass=2.0, inertia=np.array([1.0, 2.0, 4.0]),
                           com_shift=np.array([0.03, -0.01, 0.02]))
        rep = jacobian(p)
        assert rep.closed_form == pytest.approx(1.0 / 64.0)
        assert rep.determinant == pytest.approx(1.0 / 64.0, rel=1e-10)

    def test_matches_finite_difference_of_accelerations(self, rng):
        for _ in range(10):
            p = random_params(rng)
            J = acceleration_jacobian(p)
            J_fd = finite_difference_jacobian(
                lambda u: output_accelerations(u, p), np.zeros(6))
            assert np.allclose(J, J_fd, rtol=1e-6, atol=1e-8)

    def test_relative_order(self, loaded):
        rep = jacobian(loaded)
        assert rep.relative_order == (2, 2, 2, 2, 2, 2)
        assert sum(rep.relative_order) <= 12

    def test_determinant_positive_for_physical_parameters(self, rng):
        for _ in range(50):
            assert jacobian(random_params(rng)).determinant > 0

    def test_cross_term_symmetry(self, rng):
        for _ in range(10):
            J = acceleration_jacobian(random_params(rng))
            assert np.allclose(J[:3, :3], J[:3, :3].T)
            # force->rotation block mirrors torque->translation with a sign
            assert np.allclose(J[:3, 3:], -J[3:, :3].T)
            assert J[0, 3] == 0.0 and J[1, 4] == 0.0 and J[2, 5] == 0.0


class TestAnalyticInverse:
    def test_zero_maps_to_zero(self, loaded):
        assert np.allclose(analytic_inverse(np.zeros(6), loaded), 0.0)

    def test_block_diagonal_inverse(self, params):
        a = np.array([1.0, 0, 0, 0, 0, 0])
        assert np.allclose(analytic_inverse(a, params),
                           [params.mass, 0, 0, 0, 0, 0])

    def test_roundtrip_identity(self, rng):
        for _ in range(30):
            p = random_params(rng)
            a = rng.normal(0, 4, 6)
            u = analytic_inverse(a, p)
            back = output_accelerations(u, p)
            assert np.linalg.norm(back - a) <= 1e-9 * (1 + np.linalg.norm(a))

    def test_cascade_behaves_as_pure_double_integrators(self, loaded):
        # track the commanded accelerations against an ideal kinematic
        # double integrator fed the same sampled commands
        dt = 5e-4
        n = int(2.0 / dt)
        t = np.arange(n) * dt
        cmd = np.column_stack([
            0.4 * np.sin(2 * np.pi * 1.3 * t),
            0.3 * np.sin(2 * np.pi * 0.7 * t + 0.4),
            0.2 * np.cos(2 * np.pi * 1.9 * t),
            0.5 * np.sin(2 * np.pi * 1.1 * t),
            0.3 * np.cos(2 * np.pi * 0.9 * t),
            0.4 * np.sin(2 * np.pi * 1.6 * t + 1.0),
        ])
        state = zero_state()
        ref_pos = np.zeros(6)
        ref_vel = np.zeros(6)
        worst = 0.0
        scale = 0.0
        for k in range(n):
            u = analytic_inverse(cmd[k], loaded)
            state = step_dynamics(state, u, loaded, dt)
            ref_pos = ref_pos + ref_vel * dt + 0.5 * cmd[k] * dt ** 2
            ref_vel = ref_vel + cmd[k] * dt
            worst = max(worst, np.max(np.abs(state[:6] - ref_pos)))
            scale = max(scale, np.max(np.abs(ref_pos)))
        assert worst <= 1e-4 * scale
