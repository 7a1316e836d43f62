"""Rotor speed <-> thrust/torque maps, thrust vectoring and command saturation.

Rotor speeds are magnitudes in rev/s.  Positive rotor torque is produced by
the upper rotor (``n1``) spinning faster than the lower one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from tiltcage.params import RotorParams, VehicleParams


class OutOfRange(ValueError):
    pass


class Infeasible(ValueError):
    """A requested actuation lies outside what the rotors can produce.

    ``bound`` names the violated limit and ``clipped`` holds the nearest
    feasible value (rotor speeds for allocation requests).
    """

    def __init__(self, msg: str, bound: str, clipped=None):
        super().__init__(msg)
        self.bound = bound
        self.clipped = clipped


@dataclass(frozen=True)
class ActuatorCommand:
    alpha: float = 0.0         # motor roll relative to body (rad)
    beta: float = 0.0          # motor pitch relative to body (rad)
    thrust: float = 0.0        # collective thrust F (N)
    rotor_torque: float = 0.0  # differential rotor torque tau_p (N*m)
    tilt_cmd: float = 0.0      # center-of-gravity tilt servo setpoint (rad)


@dataclass(frozen=True)
class RotorSpeeds:
    n1: float
    n2: float


def _check_speed(n: float, name: str, rp: RotorParams):
    if not (0.0 <= n <= rp.max_rotor_speed):
        raise OutOfRange(f"{name}={n} outside [0, {rp.max_rotor_speed}] rev/s")


def rotor_forces(s: RotorSpeeds, rp: RotorParams, rho: float) -> tuple[float, float]:
    """Collective thrust and differential torque of the coaxial pair."""
    _check_speed(s.n1, "n1", rp)
    _check_speed(s.n2, "n2", rp)
    a, b = s.n1 * s.n1, s.n2 * s.n2
    thrust = rp.thrust_coeff * rho * (a + b)
    torque = rp.torque_coeff * rho * (a - b) * rp.disc_diameter**5
    return thrust, torque


def _torque_gain(rp: RotorParams, rho: float) -> float:
    return rp.torque_coeff * rho * rp.disc_diameter**5


def allocate_speeds(F_des: float, tau_des: float, rp: RotorParams, rho: float) -> RotorSpeeds:
    """Invert the rotor model exactly for a (thrust, torque) pair.

    The two maps are linear in the squared speeds, so the 2x2 system is
    solved in closed form.  Raises ``Infeasible`` when either squared speed
    falls outside ``[0, n_max^2]``; ``clipped`` then carries the saturated speeds.
    """
    s_sum = F_des / (rp.thrust_coeff * rho)
    s_diff = tau_des / _torque_gain(rp, rho)
    sq1 = 0.5 * (s_sum + s_diff)
    sq2 = 0.5 * (s_sum - s_diff)
    nmax2 = rp.max_rotor_speed**2
    scale = 1e-12 * max(abs(s_sum), abs(s_diff), 1.0)
    problems = []
    for name, sq in (("n1", sq1), ("n2", sq2)):
        if sq < -scale:
            problems.append(f"{name}^2 >= 0")
        elif sq > nmax2 * (1 + 1e-12):
            problems.append(f"{name} <= n_max")
    c1 = math.sqrt(min(max(sq1, 0.0), nmax2))
    c2 = math.sqrt(min(max(sq2, 0.0), nmax2))
    if problems:
        raise Infeasible(
            f"(F={F_des}, tau_p={tau_des}) not realizable: " + ", ".join(problems),
            bound=problems[0],
            clipped=RotorSpeeds(c1, c2),
        )
    return RotorSpeeds(c1, c2)


def min_thrust_torque_allocation(tau_des: float, rp: RotorParams, rho: float) -> RotorSpeeds:
    """Produce ``tau_des`` with a single spinning rotor (least collective thrust)."""
    k = _torque_gain(rp, rho)
    tau_max = k * rp.max_rotor_speed**2
    if abs(tau_des) > tau_max * (1 + 1e-12):
        n = rp.max_rotor_speed
        clipped = RotorSpeeds(n, 0.0) if tau_des > 0 else RotorSpeeds(0.0, n)
        raise Infeasible(f"|tau_p|={abs(tau_des)} exceeds single-rotor limit {tau_max}",
                         bound="|tau_p| <= tau_p_max", clipped=clipped)
    n = min(math.sqrt(abs(tau_des) / k), rp.max_rotor_speed)
    if tau_des > 0:
        return RotorSpeeds(n, 0.0)
    if tau_des < 0:
        return RotorSpeeds(0.0, n)
    return RotorSpeeds(0.0, 0.0)


def torque_per_thrust(rp: RotorParams) -> float:
    """Largest |tau_p|/F achievable with one rotor stopped (m)."""
    return rp.torque_coeff * rp.disc_diameter**5 / rp.thrust_coeff


def thrust_vector_body(F: float, alpha: float, beta: float) -> np.ndarray:
    ca = math.cos(alpha)
    return np.array([F * ca * math.sin(beta), -F * math.sin(alpha), F * ca * math.cos(beta)])


def vector_to_thrust(fb) -> tuple[float, float, float]:
    """Inverse of :func:`thrust_vector_body`: body vector -> (F, alpha, beta)."""
    fx, fy, fz = (float(v) for v in fb)
    F = math.sqrt(fx * fx + fy * fy + fz * fz)
    if F == 0.0:
        return 0.0, 0.0, 0.0
    alpha = math.asin(max(-1.0, min(1.0, -fy / F)))
    beta = math.atan2(fx, fz)
    return F, alpha, beta


def _sat(v: float, lo: float, hi: float) -> tuple[float, bool]:
    if v < lo:
        return lo, True
    if v > hi:
        return hi, True
    return v, False


def clamp_command(c: ActuatorCommand, p: VehicleParams, rp: RotorParams | None = None,
                  rho: float = 1.225) -> tuple[ActuatorCommand, dict[str, bool]]:
    """Saturate every field to its limit and report which ones were clipped.

    The rotor torque is only limited when rotor parameters are supplied.
    """
    alpha, fa = _sat(c.alpha, p.alpha_min, p.alpha_max)
    beta, fb = _sat(c.beta, p.beta_min, p.beta_max)
    F, fF = _sat(c.thrust, p.F_min, p.F_max)
    tilt, ft = _sat(c.tilt_cmd, p.theta_min, p.theta_max)
    tau, fq = c.rotor_torque, False
    if rp is not None:
        tmax = rp.max_rotor_torque(rho)
        tau, fq = _sat(tau, -tmax, tmax)
    out = replace(c, alpha=alpha, beta=beta, thrust=F, rotor_torque=tau, tilt_cmd=tilt)
    flags = dict(zip((f.name for f in fields(ActuatorCommand)), (fa, fb, fF, fq, ft)))
    return out, flags
