"""Continuous-time dynamics for the aerial, planar and inclined modes.

All derivative functions take a 12-element state (a :class:`VehicleState` or
any array in the same order) and return the 12-element time derivative::

    [x, y, z, vx, vy, vz, phi, theta, psi, phi_dot, theta_dot, psi_dot]

Positions and velocities live in the ENU world frame.  ``theta`` is pitch,
``phi`` roll and ``psi`` yaw (ZYX order).  Euler-angle rates are used in
place of body rates.

On the ground ``theta`` is the tilt of the center-of-gravity mechanism,
positive when the mass swings forward, measured from the slope normal.  The
rotor axis then leans ``beta - theta`` from the slope normal.

See ``docs/derivation.md`` for where each term comes from and the corrections
applied to the inclined model.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from tiltcage.actuation import ActuatorCommand, thrust_vector_body
from tiltcage.params import DragParams, VehicleParams

SINGULAR_PITCH = math.radians(85.0)
STATE_FIELDS = ("x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi",
                "phi_dot", "theta_dot", "psi_dot")
IX, IY, IZ, IVX, IVY, IVZ, IPHI, ITHETA, IPSI, IP, IQ, IR = range(12)


class SingularAttitude(ArithmeticError):
    pass


class LiftOff(RuntimeError):
    def __init__(self, normal_force: float):
        super().__init__(f"ground normal force {normal_force:.6g} N <= 0")
        self.normal_force = normal_force


class SlipDetected(RuntimeError):
    def __init__(self, forces: "GroundForces"):
        super().__init__(f"required friction {forces.friction:.6g} N exceeds "
                         f"limit {forces.max_friction:.6g} N")
        self.forces = forces


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0
    phi_dot: float = 0.0
    theta_dot: float = 0.0
    psi_dot: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, a) -> "VehicleState":
        return cls(*(float(v) for v in a))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.vz])


@dataclass(frozen=True)
class GroundForces:
    net_torque: float
    friction: float
    normal_force: float
    max_friction: float

    @property
    def no_slip(self) -> bool:
        return abs(self.friction) <= self.max_friction

    @property
    def slip_ratio(self) -> float:
        if self.max_friction <= 0.0:
            return math.inf if self.friction != 0.0 else 0.0
        return abs(self.friction) / self.max_friction


def _vec(s) -> list[float]:
    if isinstance(s, VehicleState):
        return list(astuple(s))
    return [float(v) for v in s]


def rotation_matrix(phi: float, theta: float, psi: float) -> np.ndarray:
    """Body-to-world rotation, R = Rz(psi) @ Ry(theta) @ Rx(phi)."""
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array([
        [cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf],
        [sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf],
        [-st, ct * sf, ct * cf],
    ])


def drag_force(v, d: DragParams) -> np.ndarray:
    """Quadratic aerodynamic drag, 0.5*C_d*rho*|v|^2*A, opposing ``v``."""
    v = np.asarray(v, dtype=float)
    speed = math.sqrt(float(v @ v))
    if speed == 0.0:
        return np.zeros(3)
    k = 0.5 * d.drag_coefficient * d.air_density * d.frontal_area
    return -k * speed * v


def drag_torque(w, d: DragParams) -> np.ndarray:
    """Per-axis quadratic aerodynamic torque, -k_i * w_i * |w_i|."""
    w = np.asarray(w, dtype=float)
    return -np.array(d.k_tau) * w * np.abs(w)


def aerial_derivative(s, c: ActuatorCommand, p: VehicleParams, d: DragParams) -> np.ndarray:
    x, y, z, vx, vy, vz, phi, theta, psi, pr, qr, rr = _vec(s)
    if abs(theta) >= SINGULAR_PITCH:
        raise SingularAttitude(f"|theta|={abs(theta):.4f} rad at or beyond the 85 deg guard")
    F, al, be, tau = c.thrust, c.alpha, c.beta, c.rotor_torque
    M = p.total_mass

    f_world = rotation_matrix(phi, theta, psi) @ thrust_vector_body(F, al, be)
    f_world += drag_force((vx, vy, vz), d)
    ax = f_world[0] / M
    ay = f_world[1] / M
    az = f_world[2] / M - p.gravity

    tq_x, tq_y, tq_z = drag_torque((pr, qr, rr), d)
    ca, sa = math.cos(al), math.sin(al)
    cb, sb = math.cos(be), math.sin(be)
    Jxx, Jyy, Jzz = p.J_xx, p.J_yy, p.J_zz
    arm = F * p.centroid_offset
    phi_dd = (tq_x + tau * ca * sb + (Jyy - Jzz) * qr * rr + arm * ca * sb) / Jxx
    theta_dd = (tq_y - tau * sa - (Jxx - Jzz) * pr * rr - arm * sa) / Jyy
    psi_dd = (tq_z + tau * ca * cb - (Jyy - Jxx) * pr * qr) / Jzz
    return np.array([vx, vy, vz, ax, ay, az, pr, qr, rr, phi_dd, theta_dd, psi_dd])


def planar_net_torque(F: float, beta: float, theta: float, p: VehicleParams) -> float:
    """Net torque about the ground contact point on flat ground."""
    return (F * p.cage_radius * math.sin(beta - theta)
            + p.tilt_mechanism_mass * p.gravity * p.centroid_offset * math.sin(theta))


def planar_friction(F: float, beta: float, theta: float, tau_all: float,
                    p: VehicleParams) -> GroundForces:
    """Required friction, normal force and friction limit on flat ground."""
    M = p.total_mass
    normal = M * p.gravity - F * math.cos(beta - theta)
    if normal <= 0.0:
        raise LiftOff(normal)
    f = M * p.cage_radius / p.J_yy * tau_all - F * math.sin(beta - theta)
    return GroundForces(tau_all, f, normal, p.static_friction_coeff * normal)


def inclined_net_torque(F: float, beta: float, theta: float, gamma: float,
                        p: VehicleParams) -> float:
    """Net torque about the contact point on a slope of inclination ``gamma``."""
    return (F * p.cage_radius * math.sin(beta - theta)
            + p.tilt_mechanism_mass * p.gravity * p.centroid_offset * math.sin(theta - gamma)
            - p.total_mass * p.gravity * p.cage_radius * math.sin(gamma))


def inclined_forces(F: float, beta: float, theta: float, gamma: float,
                    p: VehicleParams) -> GroundForces:
    M, g = p.total_mass, p.gravity
    tau_all = inclined_net_torque(F, beta, theta, gamma, p)
    normal = M * g * math.cos(gamma) - F * math.cos(beta - theta)
    if normal <= 0.0:
        raise LiftOff(normal)
    f = (M * p.cage_radius / p.J_yy * tau_all + M * g * math.sin(gamma)
         - F * math.sin(beta - theta))
    return GroundForces(tau_all, f, normal, p.static_friction_coeff * normal)


def _yaw_resistance(psi_dot: float, d: DragParams | None) -> float:
    if d is None:
        return 0.0
    tq = d.k_tau_z * psi_dot * abs(psi_dot)
    if psi_dot != 0.0:
        tq += math.copysign(d.ground_yaw_friction, psi_dot)
    return tq


def _servo_torque(theta: float, theta_dot: float, tilt_cmd: float, gamma: float,
                  p: VehicleParams) -> float:
    """Torque of the center-of-gravity tilt servo.

    A position loop of the configured bandwidth plus the holding torque that
    carries the tilt mass; zero bandwidth leaves the mechanism passive.
    """
    w = p.servo_bandwidth
    if w <= 0.0:
        return 0.0
    hold = p.tilt_mechanism_mass * p.gravity * p.centroid_offset * math.sin(theta - gamma)
    return p.J_yy * (w * w * (tilt_cmd - theta) - 2.0 * p.servo_damping * w * theta_dot) - hold


def _slip_accel(gf: GroundForces, F: float, beta: float, theta: float, gamma: float,
                p: VehicleParams) -> float:
    f = math.copysign(gf.max_friction, gf.friction)
    M = p.total_mass
    return (f + F * math.sin(beta - theta) - M * p.gravity * math.sin(gamma)) / M


def planar_derivative(s, c: ActuatorCommand, p: VehicleParams, d: DragParams | None = None,
                      on_slip: str = "raise") -> np.ndarray:
    """Flat-ground rolling dynamics.

    ``on_slip`` chooses what happens when the required friction exceeds the
    static limit: "raise" (``SlipDetected``), "clamp" (friction saturates and
    the translation follows the saturated force) or "ignore".
    """
    x, y, z, vx, vy, vz, phi, theta, psi, pr, qr, rr = _vec(s)
    F, beta, tau = c.thrust, c.beta, c.rotor_torque
    r, Jyy = p.cage_radius, p.J_yy

    tau_all = planar_net_torque(F, beta, theta, p)
    gf = planar_friction(F, beta, theta, tau_all, p)
    accel = r / Jyy * tau_all
    if not gf.no_slip:
        if on_slip == "raise":
            raise SlipDetected(gf)
        if on_slip == "clamp":
            accel = _slip_accel(gf, F, beta, theta, 0.0, p)

    cp, sp = math.cos(psi), math.sin(psi)
    speed = vx * cp + vy * sp
    # rolling constraint: velocity turns with the heading
    ax = accel * cp - speed * rr * sp
    ay = accel * sp + speed * rr * cp

    theta_dd = (-(p.J_xx - p.J_zz) * pr * rr
                + p.tilt_mechanism_mass * p.gravity * p.centroid_offset * math.sin(theta)
                + _servo_torque(theta, qr, c.tilt_cmd, 0.0, p)) / Jyy
    psi_dd = (-_yaw_resistance(rr, d) * math.cos(theta) + tau * math.cos(beta - theta)
              + (p.J_xx - p.J_yy) * pr * qr) / p.J_zz
    return np.array([vx, vy, 0.0, ax, ay, 0.0, 0.0, qr, rr, 0.0, theta_dd, psi_dd])


def inclined_derivative(s, c: ActuatorCommand, gamma: float, p: VehicleParams,
                        d: DragParams | None = None, on_slip: str = "raise") -> np.ndarray:
    """Rolling dynamics on a slope of inclination ``gamma`` along the heading.

    Positive ``gamma`` climbs in the direction of travel.  With ``gamma == 0``
    this reproduces :func:`planar_derivative` exactly.
    """
    x, y, z, vx, vy, vz, phi, theta, psi, pr, qr, rr = _vec(s)
    F, beta, tau = c.thrust, c.beta, c.rotor_torque
    r, Jyy = p.cage_radius, p.J_yy

    gf = inclined_forces(F, beta, theta, gamma, p)
    accel = r / Jyy * gf.net_torque
    if not gf.no_slip:
        if on_slip == "raise":
            raise SlipDetected(gf)
        if on_slip == "clamp":
            accel = _slip_accel(gf, F, beta, theta, gamma, p)

    cg, sg = math.cos(gamma), math.sin(gamma)
    cp, sp = math.cos(psi), math.sin(psi)
    speed = (vx * cp + vy * sp) * cg + vz * sg
    ax = accel * cg * cp - speed * rr * cg * sp
    ay = accel * cg * sp + speed * rr * cg * cp
    az = accel * sg
    dz = vz if gamma != 0.0 else 0.0

    theta_dd = (-(p.J_xx - p.J_zz) * pr * rr
                + p.tilt_mechanism_mass * p.gravity * p.centroid_offset * math.sin(theta - gamma)
                + _servo_torque(theta, qr, c.tilt_cmd, gamma, p)) / Jyy
    psi_dd = (-_yaw_resistance(rr, d) * math.cos(theta) + tau * math.cos(beta - theta)
              + (p.J_xx - p.J_yy) * pr * qr) / p.J_zz
    return np.array([vx, vy, dz, ax, ay, az, 0.0, qr, rr, 0.0, theta_dd, psi_dd])


def ground_thrust_direction(beta: float, theta: float, psi: float, gamma: float = 0.0) -> np.ndarray:
    """Unit thrust direction in the world frame for a grounded vehicle.

    The mass swinging forward by ``theta`` pitches the rotor mount back by
    the same angle, and an uphill slope leans the surface normal back by
    ``gamma``, so the body attitude pitch is ``-gamma - theta``.
    """
    R = rotation_matrix(0.0, -gamma - theta, psi)
    return R @ thrust_vector_body(1.0, 0.0, beta)
