import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tiltcage.actuation import ActuatorCommand
from tiltcage.dynamics import (LiftOff, SingularAttitude, SlipDetected, VehicleState, aerial_derivative,
                               drag_force, drag_torque, ground_thrust_direction, inclined_derivative,
                               inclined_forces, inclined_net_torque, planar_derivative,
                               planar_friction, planar_net_torque, rotation_matrix, wrap_angle)
from tiltcage.params import DragParams

DEG = math.pi / 180
OFF = DragParams.off()


def test_drag_zero_velocity(d):
    assert np.array_equal(drag_force([0, 0, 0], d), np.zeros(3))


def test_drag_magnitude(d):
    f = drag_force([2.0, 0.0, 0.0], d)
    assert np.linalg.norm(f) == pytest.approx(0.5 * 1.0 * 1.225 * 4 * math.pi * 0.12**2)
    assert np.linalg.norm(f) == pytest.approx(0.1108, abs=1e-4)
    assert f[0] < 0


def test_drag_quadratic_law(d):
    v = np.array([0.3, -0.4, 1.2])
    assert np.linalg.norm(drag_force(2 * v, d)) == pytest.approx(4 * np.linalg.norm(drag_force(v, d)))


def test_drag_torque_calibration(d):
    assert np.array_equal(drag_torque([0, 0, 0], d), np.zeros(3))
    assert abs(drag_torque([0, 0, 10.0], d)[2]) == pytest.approx(0.02)


vec3 = st.lists(st.floats(-50, 50), min_size=3, max_size=3)


@settings(max_examples=200)
@given(v=vec3)
def test_drag_opposes_motion(d, v):
    assert float(np.dot(drag_force(v, d), v)) <= 0.0
    tq = drag_torque(v, d)
    assert all(t * w <= 0 for t, w in zip(tq, v))


def test_rotation_matrix_is_orthonormal():
    R = rotation_matrix(0.3, -0.2, 1.1)
    assert np.allclose(R @ R.T, np.eye(3))
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_rotation_matrix_against_elementary_rotations():
    phi, th, psi = 0.3, -0.2, 1.1
    Rx = np.array([[1, 0, 0], [0, math.cos(phi), -math.sin(phi)], [0, math.sin(phi), math.cos(phi)]])
    Ry = np.array([[math.cos(th), 0, math.sin(th)], [0, 1, 0], [-math.sin(th), 0, math.cos(th)]])
    Rz = np.array([[math.cos(psi), -math.sin(psi), 0], [math.sin(psi), math.cos(psi), 0], [0, 0, 1]])
    assert np.allclose(rotation_matrix(phi, th, psi), Rz @ Ry @ Rx)


def test_wrap_angle():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


def test_hover_equilibrium(p):
    s = VehicleState(z=1.0)
    dd = aerial_derivative(s, ActuatorCommand(thrust=p.total_mass * p.gravity), p, OFF)
    assert p.total_mass * p.gravity == pytest.approx(2.156)
    assert np.all(dd == 0.0)


@settings(max_examples=100)
@given(att=st.lists(st.floats(-1.4, 1.4), min_size=3, max_size=3), F=st.floats(0, 7.84))
def test_untilted_equal_speed_rotors_give_no_angular_acceleration(p, att, F):
    s = VehicleState(phi=att[0], theta=att[1], psi=att[2])
    dd = aerial_derivative(s, ActuatorCommand(thrust=F), p, OFF)
    assert np.all(dd[9:] == 0.0)


def test_pitched_motor_hand_evaluation(p):
    F, b, tau = 2.156, 10 * DEG, 1e-3
    dd = aerial_derivative(VehicleState(), ActuatorCommand(beta=b, thrust=F, rotor_torque=tau), p, OFF)
    assert dd[3] == pytest.approx(F * math.sin(b) / p.total_mass) == pytest.approx(1.7017, abs=1e-4)
    assert dd[5] == pytest.approx(F * math.cos(b) / p.total_mass - p.gravity)
    assert dd[5] == pytest.approx(-0.1489, abs=1e-4)
    assert p.J_xx * dd[9] == pytest.approx(tau * math.sin(b) + F * p.centroid_offset * math.sin(b))


def test_singular_guard(p):
    with pytest.raises(SingularAttitude):
        aerial_derivative(VehicleState(theta=86 * DEG), ActuatorCommand(), p, OFF)


@settings(max_examples=100)
@given(state=st.lists(st.floats(-2, 2), min_size=12, max_size=12),
       cmd=st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 7.84), st.floats(-0.01, 0.01)),
       delta=st.floats(-math.pi, math.pi))
def test_yaw_equivariance(p, d, state, cmd, delta):
    s = np.array(state)
    s[7] = np.clip(s[7], -1.4, 1.4)
    c = ActuatorCommand(*cmd)
    Rz = rotation_matrix(0.0, 0.0, delta)
    s2 = s.copy()
    s2[0:3] = Rz @ s[0:3]
    s2[3:6] = Rz @ s[3:6]
    s2[8] += delta
    a, b = aerial_derivative(s, c, p, d), aerial_derivative(s2, c, p, d)
    assert np.allclose(b[0:3], Rz @ a[0:3], atol=1e-12)
    assert np.allclose(b[3:6], Rz @ a[3:6], atol=1e-12)
    assert np.allclose(b[6:], a[6:], atol=1e-12)


def test_planar_net_torque_examples(p):
    assert planar_net_torque(0, 0, 0, p) == 0.0
    assert planar_net_torque(0, 0, 15 * DEG, p) == pytest.approx(0.11 * 9.8 * 0.07 * math.sin(15 * DEG))
    assert planar_net_torque(0, 0, 15 * DEG, p) == pytest.approx(0.019533, rel=2e-4)  # quoted value is rounded
    assert planar_net_torque(2, 60 * DEG, 0, p) == pytest.approx(0.20785, abs=1e-5)


def test_planar_friction_examples(p):
    gf = planar_friction(0, 0, 0, 0.0, p)
    assert (gf.friction, gf.normal_force) == (0.0, pytest.approx(2.156))
    assert gf.max_friction == pytest.approx(0.7546)
    tau = planar_net_torque(0, 0, 15 * DEG, p)
    gf = planar_friction(0, 0, 15 * DEG, tau, p)
    assert gf.friction == pytest.approx(0.22 * 0.12 / 1.0 * tau)
    assert gf.friction == pytest.approx(5.157e-4, rel=1e-3)
    assert gf.no_slip


def test_liftoff(p):
    with pytest.raises(LiftOff):
        planar_friction(8.0, 0.1, 0.1, 0.0, p)


def test_planar_equilibrium(p):
    assert np.all(planar_derivative(VehicleState(), ActuatorCommand(), p) == 0.0)


def test_planar_thrust_drive(p):
    c = ActuatorCommand(beta=60 * DEG, thrust=2.0)
    dd = planar_derivative(VehicleState(), c, p, on_slip="ignore")
    assert dd[3] == pytest.approx(0.12 * 2 * 0.12 * math.sin(60 * DEG))
    assert dd[3] == pytest.approx(0.024942, abs=1e-6)
    assert dd[4] == 0.0


def test_planar_thrust_drive_slips_on_table_friction(p):
    with pytest.raises(SlipDetected) as err:
        planar_derivative(VehicleState(), ActuatorCommand(beta=60 * DEG, thrust=2.0), p)
    assert err.value.forces.slip_ratio > 1


def test_planar_tilt_drive_sideways(p):
    s = VehicleState(theta=15 * DEG, psi=90 * DEG)
    dd = planar_derivative(s, ActuatorCommand(tilt_cmd=15 * DEG), p)
    assert dd[3] == pytest.approx(0.0, abs=1e-15)
    tau = 0.11 * 9.8 * 0.07 * math.sin(15 * DEG)
    assert dd[4] == pytest.approx(0.12 * tau, rel=1e-12)
    assert dd[4] == pytest.approx(0.0023439, rel=2e-4)


def test_slip_clamp_limits_acceleration(p):
    c = ActuatorCommand(beta=60 * DEG, thrust=2.0)
    dd = planar_derivative(VehicleState(), c, p, on_slip="clamp")
    gf = planar_friction(2.0, 60 * DEG, 0.0, planar_net_torque(2.0, 60 * DEG, 0.0, p), p)
    assert dd[3] == pytest.approx((-gf.max_friction + 2.0 * math.sin(60 * DEG)) / p.total_mass)


ground_states = st.lists(st.floats(-1, 1), min_size=12, max_size=12)


@settings(max_examples=300)
@given(s=ground_states, th=st.floats(-0.26, 0.26), cmd=st.tuples(
    st.floats(-1.05, 1.05), st.floats(0, 0.5), st.floats(-0.01, 0.01), st.floats(-0.26, 0.26)))
def test_planar_preserves_height(p, d, s, th, cmd):
    s = np.array(s)
    s[7] = th
    c = ActuatorCommand(0.0, *cmd)
    dd = planar_derivative(s, c, p, d, on_slip="ignore")
    assert dd[2] == 0.0 and dd[5] == 0.0


@settings(max_examples=200)
@given(th=st.floats(-0.26, 0.26).filter(lambda v: abs(v) > 1e-6), psi=st.floats(-math.pi, math.pi))
def test_tilt_sign_drives_direction(p, th, psi):
    dd = planar_derivative(VehicleState(theta=th, psi=psi), ActuatorCommand(tilt_cmd=th), p)
    assert np.sign(dd[3] * math.cos(psi) + dd[4] * math.sin(psi)) == np.sign(th)


@settings(max_examples=1000)
@given(s=ground_states, th=st.floats(-0.26, 0.26), cmd=st.tuples(
    st.floats(-1.05, 1.05), st.floats(0, 0.5), st.floats(-0.01, 0.01), st.floats(-0.26, 0.26)))
def test_inclined_reduces_to_planar(p, d, s, th, cmd):
    s = np.array(s)
    s[7] = th
    c = ActuatorCommand(0.0, *cmd)
    a = planar_derivative(s, c, p, d, on_slip="ignore")
    b = inclined_derivative(s, c, 0.0, p, d, on_slip="ignore")
    assert np.max(np.abs(a - b)) <= 1e-12


def test_unpowered_cage_rolls_downhill(p):
    g = 12.5 * DEG
    dd = inclined_derivative(VehicleState(), ActuatorCommand(), g, p)
    expected = p.cage_radius / p.J_yy * (-p.tilt_mechanism_mass * p.gravity * p.centroid_offset * math.sin(g)
                                          - p.total_mass * p.gravity * p.cage_radius * math.sin(g))
    assert dd[3] < 0 and dd[5] < 0
    assert dd[3] == pytest.approx(expected * math.cos(g))
    assert dd[5] == pytest.approx(expected * math.sin(g))


def test_slope_hold(p):
    g, b = 12.5 * DEG, p.beta_max
    # root of the corrected net torque with theta = 0
    F = (p.total_mass * p.gravity * p.cage_radius + p.tilt_mechanism_mass * p.gravity * p.centroid_offset) \
        * math.sin(g) / (p.cage_radius * math.sin(b))
    assert inclined_net_torque(F, b, 0.0, g, p) == pytest.approx(0.0, abs=1e-15)
    dd = inclined_derivative(VehicleState(), ActuatorCommand(beta=b, thrust=F), g, p)
    assert np.allclose(dd, 0.0, atol=1e-15)
    assert inclined_forces(F, b, 0.0, g, p).no_slip


def test_steep_descent_hold(p):
    g, b = -25 * DEG, p.beta_min
    F = (p.total_mass * p.gravity * p.cage_radius + p.tilt_mechanism_mass * p.gravity * p.centroid_offset) \
        * math.sin(g) / (p.cage_radius * math.sin(b))
    assert F > 0
    gf = inclined_forces(F, b, 0.0, g, p)
    assert gf.slip_ratio < 1


def test_ground_thrust_direction_level_rotor():
    for th in np.linspace(-0.26, 0.26, 7):
        assert np.allclose(ground_thrust_direction(th, th, 0.4), [0, 0, 1], atol=1e-15)


def test_state_roundtrip():
    s = VehicleState(*range(12))
    assert VehicleState.from_array(s.as_array()) == s
