import json

import numpy as np
import pytest

from mvip.errors import CollisionError, ConfigurationError
from mvip.plant import (PlatformParams, ResidualModel, actuation_map,
                        actuator_force, check_stroke, coil_positions,
                        coupling_acceleration_x, CoilPosition, default_params,
                        load_platform, make_state, params_from_dict,
                        params_to_dict, save_platform, step_dynamics,
                        with_payload, accelerations, zero_state)
from conftest import random_params
from oracles import actuation_column, stiffness_surface


class TestActuationMap:
    def test_first_column_unit_force(self, params):
        C = actuation_map(params)
        y1 = params.actuator_positions[0, 1]
        f = np.zeros(8)
        f[0] = 1.0
        assert np.allclose(C @ f, [1, 0, 0, 0, 0, -y1])

    def test_zero_forces_zero_wrench(self, params):
        assert np.allclose(actuation_map(params) @ np.zeros(8), np.zeros(6))

    def test_against_per_column_geometry(self, rng, params):
        C = actuation_map(params)
        for i in range(8):
            assert np.allclose(C[:, i],
                               actuation_column(i, params.actuator_positions))
        f = rng.normal(size=8)
        expected = sum(f[i] * actuation_column(i, params.actuator_positions)
                       for i in range(8))
        assert np.allclose(C @ f, expected)

    def test_degenerate_layout_rejected(self, params):
        # all torque arms about z vanish -> tau_z unreachable
        bad = params_to_dict(params)
        positions = np.array(params.actuator_positions)
        positions[0] = [0.1, 0.0]
        positions[2] = [0.0, 0.1]
        positions[4] = [-0.1, 0.0]
        positions[6] = [0.0, -0.1]
        bad["actuators"] = [{"x": float(x), "y": float(y)} for x, y in positions]
        with pytest.raises(ConfigurationError):
            actuation_map(params_from_dict(bad))


class TestActuatorForce:
    def test_centre_position_gives_k3(self):
        assert actuator_force(CoilPosition(0.0, 0.0, 1.0), (25.0, -25.0, 20.0)) \
            == pytest.approx(20.0)

    def test_pure_linear_when_quadratics_vanish(self, rng):
        for _ in range(20):
            coil = CoilPosition(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                                rng.uniform(-2, 2))
            assert actuator_force(coil, (0.0, 0.0, 17.5)) \
                == pytest.approx(17.5 * coil.current)

    def test_grid_against_independent_polynomial(self):
        k1, k2, k3 = 25.0, -25.0, 20.0
        for y in np.linspace(-0.2, 0.2, 9):
            for z in np.linspace(-0.2, 0.2, 9):
                ours = actuator_force(CoilPosition(y, z, 1.3), (k1, k2, k3))
                ref = stiffness_surface(y, z, k1, k2, k3, 1.3)
                assert abs(ours - ref) <= 1e-12 * max(1.0, abs(ref))


class TestCouplingAcceleration:
    def test_all_coupling_terms_vanish(self, params):
        state = zero_state()
        out = coupling_acceleration_x(state, params, 2.0, 0.5, 0.0)
        assert out == pytest.approx(1.5 / params.mass)

    def test_centripetal_term(self):
        p = PlatformParams(com_shift=np.array([0.01, 0.0, 0.0]))
        state = make_state(np.zeros(6), [0, 0, 0, 0, 1.0, 1.0])
        out = coupling_acceleration_x(state, p, 0.0, 0.0, 0.0)
        assert out == pytest.approx(0.02)

    def test_matches_assembled_x_row(self, rng):
        for _ in range(20):
            p = random_params(rng)
            full = PlatformParams(mass=p.mass, inertia=p.inertia,
                                  com_shift=p.com_shift,
                                  rate_products_enabled=True)
            state = make_state(rng.normal(0, 0.01, 6), rng.normal(0, 0.5, 6))
            f1, f5, d = rng.normal(0, 5, 3)
            forces = np.zeros(8)
            forces[0], forces[4] = f1, f5
            wrench = actuation_map(full) @ forces
            wrench[0] += d
            acc = accelerations(state, wrench, full)
            out = coupling_acceleration_x(state, full, f1, f5, d)
            assert out == pytest.approx(acc[0], rel=1e-12, abs=1e-12)


class TestStepDynamics:
    def test_equilibrium(self, loaded):
        state = zero_state()
        out = step_dynamics(state, np.zeros(6), loaded, 5e-4)
        assert np.array_equal(out, state)

    def test_double_integrator(self, params):
        a = 0.8
        wrench = np.zeros(6)
        wrench[0] = params.mass * a
        state = zero_state()
        dt, T = 5e-4, 1.0
        for _ in range(int(T / dt)):
            state = step_dynamics(state, wrench, params, dt)
        assert state[0] == pytest.approx(0.5 * a * T ** 2, rel=1e-6)

    def test_com_shift_induces_rotation_with_predicted_sign(self, params):
        p = PlatformParams(inertia=params.inertia,
                           com_shift=np.array([0.0, 0.02, 0.0]))
        wrench = np.zeros(6)
        wrench[0] = 5.0
        state = zero_state()
        for _ in range(200):
            state = step_dynamics(state, wrench, p, 5e-4)
        expected_sign = np.sign(-p.com_shift[1] * wrench[0] / p.inertia[2])
        assert np.sign(state[11]) == expected_sign
        assert abs(state[11]) > 0

    def test_dt_validation(self, params):
        with pytest.raises(ConfigurationError):
            step_dynamics(zero_state(), np.zeros(6), params, 2e-3)

    def test_channels_decoupled_without_com_shift(self, params):
        for ch in range(6):
            wrench = np.zeros(6)
            wrench[ch] = 3.0
            state = zero_state()
            for _ in range(100):
                state = step_dynamics(state, wrench, params, 5e-4)
            moved = np.abs(state[:6]) > 1e-12
            assert moved[ch]
            assert not np.any(np.delete(moved, ch))

    def test_integrator_order_at_least_two(self):
        # rate products make the dynamics state-dependent, so the step is
        # no longer exact and the order is measurable on a fast tumble
        p = PlatformParams(inertia=np.array([0.4, 0.5, 0.6]),
                           com_shift=np.array([0.05, -0.04, 0.03]),
                           rate_products_enabled=True)
        wrench = np.array([1.0, -2.0, 3.0, 0.2, -0.1, 0.15])
        start = make_state(np.zeros(6), [0.1, -0.2, 0.05, 30.0, -25.0, 20.0])

        def integrate(dt, T=0.24):
            state = start.copy()
            for _ in range(int(round(T / dt))):
                state = step_dynamics(state, wrench, p, dt)
            return state

        ref = integrate(2.5e-5)
        e1 = np.linalg.norm(integrate(1e-3) - ref)
        e2 = np.linalg.norm(integrate(5e-4) - ref)
        order = np.log2(e1 / e2)
        assert order >= 2.0


class TestPayloadAndGeometry:
    def test_payload_shifts_com_and_mass(self, params):
        out = with_payload(params, 5.0, [0.2, 0.16, 0.1])
        assert out.mass == pytest.approx(25.0)
        assert np.allclose(out.com_shift, np.array([0.2, 0.16, 0.1]) * 5 / 25)
        assert np.all(out.inertia > params.inertia)

    def test_zero_payload_is_identity(self, params):
        out = with_payload(params, 0.0, [0.1, 0.1, 0.1])
        assert out.mass == params.mass
        assert np.allclose(out.inertia, params.inertia)

    def test_coil_positions_at_origin(self, params):
        assert np.allclose(coil_positions(np.zeros(6), params), 0.0)

    def test_coil_positions_pure_translation(self, params):
        pose = np.array([0.01, 0.02, 0.03, 0.0, 0.0, 0.0])
        coils = coil_positions(pose, params)
        # actuator 1 pushes along x: transverse plane is (y, z)
        assert np.allclose(coils[0], [0.02, 0.03])
        # actuator 2 pushes along z: transverse plane is (x, y)
        assert np.allclose(coils[1], [0.01, 0.02])

    def test_stroke_violation_raises(self, params):
        pose = np.zeros(6)
        pose[0] = params.stroke * 1.01
        with pytest.raises(CollisionError):
            check_stroke(pose, params)

    def test_residual_bounded_and_seeded(self):
        res = ResidualModel(amplitude=0.1, seed=3)
        again = ResidualModel(amplitude=0.1, seed=3)
        pose = np.full(6, 0.02)
        assert np.allclose(res.accel(pose), again.accel(pose))
        assert np.all(np.abs(res.accel(pose)) <= res.bound())
        assert np.allclose(ResidualModel(amplitude=0.0).accel(pose), 0.0)


class TestParamsIO:
    def test_roundtrip(self, tmp_path, loaded):
        path = tmp_path / "platform.json"
        save_platform(loaded, path)
        back = load_platform(path)
        assert back.mass == loaded.mass
        assert np.allclose(back.inertia, loaded.inertia)
        assert np.allclose(back.com_shift, loaded.com_shift)
        assert np.allclose(back.actuator_positions, loaded.actuator_positions)
        assert np.allclose(back.stiffness_coeffs, loaded.stiffness_coeffs)

    def test_schema_fields(self, loaded):
        doc = params_to_dict(loaded)
        assert set(doc) >= {"mass", "inertia", "com_shift", "actuators",
                            "stiffness", "stroke"}
        assert len(doc["actuators"]) == 8
        assert all(set(a) == {"x", "y"} for a in doc["actuators"])
        assert all(set(s) == {"k1", "k2", "k3"} for s in doc["stiffness"])

    def test_bad_document_rejected(self):
        with pytest.raises(ConfigurationError):
            params_from_dict({"mass": 1.0})

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ConfigurationError):
            PlatformParams(mass=-1.0)
        with pytest.raises(ConfigurationError):
            PlatformParams(inertia=np.array([1.0, 0.0, 1.0]))
