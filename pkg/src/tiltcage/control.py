"""Controllers: PID primitive, aerial stack, ground transform and ground modes.

Aerial mode
-----------
Thrust vectoring lets the translational force be set directly: the desired
world force is rotated into the body frame and decomposed into (F, alpha,
beta), so position tracking is exact whatever the attitude.  The attitude is
then driven only through the torque that the thrust produces about the
center of mass, and that residual motion is unstable.  It is stabilized by
bending the horizontal acceleration command with attitude feedback, around a
bounded nominal attitude precomputed for the reference
(:func:`plan_attitude`).

Horizontal gains act on the complex pairs ``x + iy`` (position error) and
``phi + i*theta`` (attitude error) and are stored as ``[real, imag]``; the
linearized loop is rotation-invariant, so the optimal gains have this form.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg

from tiltcage.actuation import (ActuatorCommand, Infeasible, allocate_speeds, clamp_command,
                                min_thrust_torque_allocation, torque_per_thrust,
                                vector_to_thrust)
from tiltcage.dynamics import (IPHI, IPSI, ITHETA, IVX, IVY, IVZ, IX, IY, IZ, IP, IQ, IR,
                               SINGULAR_PITCH, SingularAttitude, drag_force, rotation_matrix,
                               wrap_angle)
from tiltcage.energy import max_centroid_acceleration
from tiltcage.params import DragParams, RotorParams, VehicleParams


class UnreachableSetpoint(Warning):
    """Reported (not raised) when a command had to be saturated."""


# --------------------------------------------------------------------- PID

@dataclass(frozen=True)
class PidGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    integrator_limit: float = math.inf
    output_limit: float = math.inf

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0:
            raise ValueError("PID gains must be >= 0")
        if self.integrator_limit <= 0 or self.output_limit <= 0:
            raise ValueError("PID limits must be > 0")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_measurement: float | None = None


def _clip(v: float, lim: float) -> float:
    return max(-lim, min(lim, v))


def pid_step(gains: PidGains, state: PidState, setpoint: float, measurement: float,
             setpoint_rate: float | None = None, measurement_rate: float | None = None,
             dt: float = 1e-3) -> tuple[float, PidState]:
    """One PID update with clamped, conditionally integrated integral.

    The derivative uses the rate error when both rates are given, the
    measured rate alone when only that is given, and otherwise a backward
    difference of the measurement (zero on the first call).
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    e = setpoint - measurement
    if measurement_rate is not None:
        de = (setpoint_rate or 0.0) - measurement_rate
    elif state.prev_measurement is not None:
        de = -(measurement - state.prev_measurement) / dt
    else:
        de = 0.0

    integral = state.integral
    if gains.ki != 0.0:
        trial = _clip(integral + e * dt, gains.integrator_limit)
        raw = gains.kp * e + gains.ki * trial + gains.kd * de
        # conditional integration: hold while saturated in the error's direction
        if abs(raw) <= gains.output_limit or raw * e < 0:
            integral = trial
    out = _clip(gains.kp * e + gains.ki * integral + gains.kd * de, gains.output_limit)
    return out, PidState(integral, measurement)


def _pid_from(d: dict) -> PidGains:
    return PidGains(**{k: float(v) for k, v in d.items()})


# ------------------------------------------------------------------ aerial

@dataclass(frozen=True)
class AerialGains:
    altitude: PidGains
    yaw: PidGains
    position: tuple[float, float]
    velocity: tuple[float, float]
    attitude: tuple[float, float]
    attitude_rate: tuple[float, float]
    max_horizontal_accel: float = 5.0


@dataclass(frozen=True)
class AerialReference:
    position: tuple[float, float, float]
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw: float = 0.0
    acceleration: tuple[float, float, float] = (0.0, 0.0, 0.0)
    attitude: tuple[float, float] = (0.0, 0.0)        # nominal (phi, theta)
    attitude_rate: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class AerialLoopState:
    altitude: PidState = PidState()
    yaw: PidState = PidState()


@dataclass(frozen=True)
class ControlResult:
    command: ActuatorCommand
    loop_state: object
    info: dict = field(default_factory=dict)


def _cmul(k, re: float, im: float) -> tuple[float, float]:
    a, b = k
    return a * re - b * im, b * re + a * im


def aerial_control(state, ref: AerialReference, gains: AerialGains, p: VehicleParams,
                   d: DragParams, loop: AerialLoopState = AerialLoopState(),
                   dt: float = 4e-3, rp: RotorParams | None = None) -> ControlResult:
    """Hover/trajectory controller for the flying cage.

    At ``state == reference`` with zero rates this returns exactly
    ``F = M*g`` with zero tilt angles and zero rotor torque.
    """
    s = np.asarray(state, dtype=float)
    phi, theta, psi = s[IPHI], s[ITHETA], s[IPSI]
    if abs(theta) >= SINGULAR_PITCH:
        raise SingularAttitude(f"|theta|={abs(theta):.4f} rad at or beyond the 85 deg guard")
    M, g = p.total_mass, p.gravity

    ex, ey = s[IX] - ref.position[0], s[IY] - ref.position[1]
    evx, evy = s[IVX] - ref.velocity[0], s[IVY] - ref.velocity[1]
    ea, eb = phi - ref.attitude[0], theta - ref.attitude[1]
    ra, rb = s[IP] - ref.attitude_rate[0], s[IQ] - ref.attitude_rate[1]
    ux, uy = 0.0, 0.0
    for k, (re, im) in ((gains.position, (ex, ey)), (gains.velocity, (evx, evy)),
                        (gains.attitude, (ea, eb)), (gains.attitude_rate, (ra, rb))):
        cx, cy = _cmul(k, re, im)
        ux -= cx
        uy -= cy
    norm = math.hypot(ux, uy)
    if norm > gains.max_horizontal_accel:
        ux, uy = ux * gains.max_horizontal_accel / norm, uy * gains.max_horizontal_accel / norm

    uz, alt = pid_step(gains.altitude, loop.altitude, ref.position[2], s[IZ],
                       ref.velocity[2], s[IVZ], dt)
    acc = np.array([ref.acceleration[0] + ux, ref.acceleration[1] + uy,
                    ref.acceleration[2] + uz + g])
    f_world = M * acc - drag_force(s[IVX:IVZ + 1], d)
    F, alpha, beta = vector_to_thrust(rotation_matrix(phi, theta, psi).T @ f_world)

    yaw_err = wrap_angle(ref.yaw - psi)
    tau, yaw = pid_step(gains.yaw, loop.yaw, 0.0, -yaw_err, 0.0, s[IR], dt)

    cmd, flags = clamp_command(ActuatorCommand(alpha, beta, F, tau, 0.0), p, rp, d.air_density)
    info = {"unreachable": any(flags.values()), "saturated": [k for k, v in flags.items() if v]}
    return ControlResult(cmd, AerialLoopState(alt, yaw), info)


def hover_command(p: VehicleParams) -> ActuatorCommand:
    return ActuatorCommand(0.0, 0.0, p.total_mass * p.gravity, 0.0, 0.0)


def _horizontal_model(p: VehicleParams):
    """Linearized hover model with exact force inversion.

    State ``[ex, evx, ey, evy, phi, phi_dot, theta, theta_dot]``, input the
    horizontal acceleration command ``(ax, ay)``.
    """
    g = p.gravity
    kx = p.total_mass * g * p.centroid_offset / p.J_xx
    ky = p.total_mass * g * p.centroid_offset / p.J_yy
    A = np.zeros((8, 8))
    A[0, 1] = A[2, 3] = A[4, 5] = A[6, 7] = 1.0
    A[5, 6] = -kx
    A[7, 4] = ky
    B = np.zeros((8, 2))
    B[1, 0] = B[3, 1] = 1.0
    B[5, 0] = kx / g
    B[7, 1] = ky / g
    return A, B


def horizontal_gain_matrix(gains: AerialGains) -> np.ndarray:
    """Real 2x8 feedback matrix equivalent to the complex gains."""
    K = np.zeros((2, 8))
    for j, (a, b) in enumerate((gains.position, gains.velocity)):
        K[:, j] = (a, b)
        K[:, 2 + j] = (-b, a)
    for j, (a, b) in enumerate((gains.attitude, gains.attitude_rate)):
        K[:, 4 + j] = (a, b)
        K[:, 6 + j] = (-b, a)
    return K


def closed_loop_poles(gains: AerialGains, p: VehicleParams) -> np.ndarray:
    A, B = _horizontal_model(p)
    return np.linalg.eigvals(A - B @ horizontal_gain_matrix(gains))


def design_horizontal_gains(p: VehicleParams, q_pos: float = 100.0, q_vel: float = 1.0,
                            q_att: float = 1.0, q_rate: float = 1.0) -> dict:
    """Offline tuning aid: LQR gains for the linearized horizontal loop.

    Only meaningful when ``J_xx == J_yy`` (the complex form assumes it).
    """
    A, B = _horizontal_model(p)
    Q = np.diag([q_pos, q_vel, q_pos, q_vel, q_att, q_rate, q_att, q_rate])
    P = scipy.linalg.solve_continuous_are(A, B, Q, np.eye(2))
    K = B.T @ P
    return {"position": [K[0, 0], K[1, 0]], "velocity": [K[0, 1], K[1, 1]],
            "attitude": [K[0, 4], K[1, 4]], "attitude_rate": [K[0, 5], K[1, 5]]}


@dataclass(frozen=True)
class AttitudePlan:
    """Nominal (phi, theta) and rates sampled every ``dt`` from t = 0."""

    dt: float
    phi: np.ndarray
    theta: np.ndarray
    phi_rate: np.ndarray
    theta_rate: np.ndarray

    def at(self, t: float) -> tuple[tuple[float, float], tuple[float, float]]:
        u = min(max(t / self.dt, 0.0), len(self.phi) - 1.0)
        i = min(int(u), len(self.phi) - 2)
        w = u - i

        def lerp(a):
            return float(a[i] * (1 - w) + a[i + 1] * w)

        return (lerp(self.phi), lerp(self.theta)), (lerp(self.phi_rate), lerp(self.theta_rate))


def plan_attitude(accel: np.ndarray, dt: float, p: VehicleParams, periodic: bool = False) -> AttitudePlan:
    """Bounded attitude trajectory compatible with the given world accelerations.

    ``accel`` is the (N, 2) horizontal specific force (reference acceleration
    minus drag acceleration) the force inversion will request.  The attitude
    obeys a linear system driven by it whose unstable modes are integrated
    backward from the future, so the result stays bounded (stable
    inversion).  Aperiodic plans assume hover before and after the window.
    """
    A, B = _horizontal_model(p)
    Aa, Ba = A[4:, 4:], B[4:, :]
    lam, V = np.linalg.eig(Aa)
    Vinv = np.linalg.inv(V)
    f = np.asarray(accel, dtype=float)
    n = len(f)
    reps = 3 if periodic else 1
    u = np.tile(f, (reps, 1)) if periodic else f
    drive = (Vinv @ Ba @ u.T)  # modal forcing, shape (4, N*reps)
    z = np.zeros_like(drive, dtype=complex)
    for j, lj in enumerate(lam):
        e = np.exp(lj * dt)
        b = drive[j]
        zj = z[j]
        if lj.real < 0:
            for i in range(1, zj.size):
                zj[i] = e * zj[i - 1] + 0.5 * dt * (b[i] + e * b[i - 1])
        else:
            einv = 1.0 / e
            for i in range(zj.size - 2, -1, -1):
                zj[i] = einv * zj[i + 1] - 0.5 * dt * (b[i] + einv * b[i + 1])
    x = (V @ z).real
    if periodic:
        x = x[:, n:2 * n]
    return AttitudePlan(dt, x[0].copy(), x[2].copy(), x[1].copy(), x[3].copy())


# ------------------------------------------------------------------ ground

class GroundMode(enum.Enum):
    ENERGY_SAVING = "EnergySaving"
    HIGH_MOBILITY = "HighMobility"


@dataclass(frozen=True)
class GroundSetpoint:
    speed: float           # desired speed along the heading (v_e)
    yaw: float             # desired heading
    yaw_rate: float = 0.0  # feedforward heading rate


def ground_transform(state, target, nominal_speed: float) -> GroundSetpoint:
    """Pursuit decomposition: bearing to the look-ahead point and cosine-scaled speed."""
    s = np.asarray(state, dtype=float)
    bearing = math.atan2(target[1] - s[IY], target[0] - s[IX])
    err = wrap_angle(bearing - s[IPSI])
    return GroundSetpoint(nominal_speed * max(math.cos(err), 0.0), bearing)


def select_ground_mode(a_des: float, gamma: float, p: VehicleParams,
                       previous: GroundMode | None = None, band: float = 0.1) -> GroundMode:
    """Energy-saving while the demand fits the center-of-gravity drive.

    On a slope the answer is always high-mobility.  ``previous`` enables the
    hysteresis: leaving high-mobility needs ``|a_des|`` below ``(1-band)*a_I``.
    """
    if gamma != 0.0:
        return GroundMode.HIGH_MOBILITY
    a_i = max_centroid_acceleration(p)
    limit = a_i * (1.0 - band) if previous is GroundMode.HIGH_MOBILITY else a_i
    return GroundMode.ENERGY_SAVING if abs(a_des) <= limit else GroundMode.HIGH_MOBILITY


@dataclass(frozen=True)
class GroundGains:
    speed: PidGains            # energy-saving: speed error -> tilt setpoint (rad)
    pitch: PidGains            # energy-saving: tilt error -> tilt correction (rad)
    thrust_speed: PidGains     # high-mobility: speed error -> acceleration (m/s^2)
    yaw: PidGains              # heading error -> rotor torque (N*m)
    lookahead: float = 0.5
    accel_time_constant: float = 5.0   # a_des = speed error / this
    friction_margin: float = 0.9       # fraction of mu*F_N the thrust may use
    max_lift_fraction: float = 0.5     # cap on single-rotor yaw thrust, fraction of M*g


@dataclass(frozen=True)
class GroundLoopState:
    speed: PidState = PidState()
    pitch: PidState = PidState()
    thrust_speed: PidState = PidState()
    yaw: PidState = PidState()


def forward_speed(state, gamma: float = 0.0) -> float:
    s = np.asarray(state, dtype=float)
    cp, sp = math.cos(s[IPSI]), math.sin(s[IPSI])
    return (s[IVX] * cp + s[IVY] * sp) * math.cos(gamma) + s[IVZ] * math.sin(gamma)


def energy_saving_control(state, gsp: GroundSetpoint, gains: GroundGains, p: VehicleParams,
                          rp: RotorParams, rho: float = 1.225,
                          loop: GroundLoopState = GroundLoopState(), dt: float = 4e-3) -> ControlResult:
    """Drive with the center-of-gravity tilt only, rotor plane kept level.

    Speed PI gives the tilt setpoint, a tilt PI corrects the servo command,
    and heading is held with one rotor spinning.  Because the rotor axis is
    kept world-vertical (``beta == theta``), that rotor's thrust adds no
    driving torque.
    """
    s = np.asarray(state, dtype=float)
    theta = s[ITHETA]
    v = forward_speed(s)
    theta_e, sp_state = pid_step(gains.speed, loop.speed, gsp.speed, v, dt=dt)
    theta_e = min(max(theta_e, p.theta_min), p.theta_max)
    corr, pitch_state = pid_step(gains.pitch, loop.pitch, theta_e, theta, dt=dt)
    tilt_cmd = min(max(theta_e + corr, p.theta_min), p.theta_max)

    yaw_err = wrap_angle(gsp.yaw - s[IPSI])
    tau, yaw_state = pid_step(gains.yaw, loop.yaw, 0.0, -yaw_err, gsp.yaw_rate, s[IR], dt)
    tpt = torque_per_thrust(rp)
    tau_cap = min(gains.max_lift_fraction * p.total_mass * p.gravity * tpt,
                  rp.max_rotor_torque(rho))
    tau = _clip(tau, tau_cap)
    speeds = min_thrust_torque_allocation(tau, rp, rho)
    thrust = rp.thrust_coeff * rho * (speeds.n1**2 + speeds.n2**2)

    cmd = ActuatorCommand(0.0, level_rotor_beta(theta), thrust, tau, tilt_cmd)
    loop2 = replace(loop, speed=sp_state, pitch=pitch_state, yaw=yaw_state)
    return ControlResult(cmd, loop2, {"theta_e": theta_e, "speeds": speeds})


def level_rotor_beta(theta: float) -> float:
    """Motor pitch that keeps the rotor axis world-vertical on flat ground."""
    return theta


def _friction_band(beta: float, theta: float, gamma: float, p: VehicleParams,
                   margin: float) -> tuple[float, float]:
    """Thrust interval keeping |f| <= margin*mu*F_N and F_N > 0."""
    M, g, r, J = p.total_mass, p.gravity, p.cage_radius, p.J_yy
    sd, cd = math.sin(beta - theta), math.cos(beta - theta)
    tau0 = p.tilt_mechanism_mass * g * p.centroid_offset * math.sin(theta - gamma) - M * g * r * math.sin(gamma)
    f0 = M * r / J * tau0 + M * g * math.sin(gamma)
    f1 = M * r / J * r * sd - sd
    n0, n1 = M * g * math.cos(gamma), cd
    km = margin * p.static_friction_coeff
    lo, hi = 0.0, math.inf
    # linear constraints c*F <= d
    for c, dd in ((f1 + km * n1, km * n0 - f0), (-f1 + km * n1, km * n0 + f0), (n1, n0 * (1 - 1e-6))):
        if abs(c) < 1e-15:
            if dd < 0:
                return 0.0, -1.0
            continue
        if c > 0:
            hi = min(hi, dd / c)
        else:
            lo = max(lo, dd / c)
    return lo, hi


def high_mobility_control(state, gsp: GroundSetpoint, gains: GroundGains, p: VehicleParams,
                          rp: RotorParams, rho: float = 1.225, gamma: float = 0.0,
                          loop: GroundLoopState = GroundLoopState(), dt: float = 4e-3,
                          accel_ff: float = 0.0) -> ControlResult:
    """Thrust-assisted rolling with the motor pitched fully forward or back.

    The speed loop outputs an acceleration; the thrust that realizes it is
    found by inverting the rolling-torque balance with the tilt mechanism held
    normal to the surface, then limited to the no-slip band.
    """
    s = np.asarray(state, dtype=float)
    theta = s[ITHETA]
    M, g, r, J = p.total_mass, p.gravity, p.cage_radius, p.J_yy
    v = forward_speed(s, gamma)
    a_cmd, ts_state = pid_step(gains.thrust_speed, loop.thrust_speed, gsp.speed, v, dt=dt)
    a_cmd += accel_ff

    tau_req = (a_cmd * J / r - p.tilt_mechanism_mass * g * p.centroid_offset * math.sin(theta - gamma)
               + M * g * r * math.sin(gamma))
    beta = p.beta_max if tau_req >= 0 else p.beta_min
    sd = math.sin(beta - theta)
    F_want = tau_req / (r * sd) if abs(sd) > 1e-9 else 0.0
    F_want = max(F_want, 0.0)
    lo, hi = _friction_band(beta, theta, gamma, p, gains.friction_margin)
    flags = []
    F = F_want
    if lo > hi:
        F = 0.0
        flags.append("no_slip_band_empty")
    else:
        if F < lo:
            F = lo
            flags.append("friction_floor")
        if F > hi:
            F = hi
            flags.append("friction_ceiling")
    if F > p.F_max:
        F = p.F_max
        flags.append("thrust")

    yaw_err = wrap_angle(gsp.yaw - s[IPSI])
    tau, yaw_state = pid_step(gains.yaw, loop.yaw, 0.0, -yaw_err, gsp.yaw_rate, s[IR], dt)
    tau_lim = min(F * torque_per_thrust(rp), rp.max_rotor_torque(rho))
    tau = _clip(tau, tau_lim)
    try:
        speeds = allocate_speeds(F, tau, rp, rho)
    except Infeasible as exc:
        speeds = exc.clipped
        flags.append("rotor_speed")

    cmd = ActuatorCommand(0.0, beta, F, tau, 0.0)
    cmd, _ = clamp_command(cmd, p)
    loop2 = replace(loop, thrust_speed=ts_state, yaw=yaw_state)
    return ControlResult(cmd, loop2, {"a_cmd": a_cmd, "F_request": F_want, "speeds": speeds,
                                      "unreachable": bool(flags), "saturated": flags})


# ------------------------------------------------------- stateful wrappers

class AerialController:
    """Runs :func:`aerial_control` against a scenario's aerial reference."""

    kind = "aerial"

    def __init__(self, gains: AerialGains, p: VehicleParams, d: DragParams,
                 rp: RotorParams | None = None):
        self.gains, self.p, self.d, self.rp = gains, p, d, rp
        self.reset()

    def reset(self):
        self.loop = AerialLoopState()

    def update(self, t: float, state, scenario, dt: float):
        res = aerial_control(state, scenario.aerial_reference(t), self.gains, self.p, self.d,
                             self.loop, dt, self.rp)
        self.loop = res.loop_state
        return res.command, "Aerial", res.info

    def track(self, state, cmd: ActuatorCommand) -> ActuatorCommand:
        return cmd


class FixedController:
    """Open-loop constant command (feedforward-only runs)."""

    def __init__(self, command: ActuatorCommand, kind: str = "aerial", label: str = "Fixed"):
        self.command, self.kind, self.label = command, kind, label

    def reset(self):
        pass

    def update(self, t, state, scenario, dt):
        return self.command, self.label, {}

    def track(self, state, cmd):
        return cmd


class GroundController:
    """Pursuit guidance plus the two ground modes with hysteretic switching.

    Slopes are read from the course map; ``slope_preview`` metres ahead of an
    incline the controller already commits to high-mobility mode.  Passing
    ``lock`` pins one mode for the whole run.
    """

    kind = "ground"

    def __init__(self, gains: GroundGains, p: VehicleParams, rp: RotorParams,
                 rho: float = 1.225, slope_preview: float = 0.2, lock: GroundMode | None = None):
        self.gains, self.p, self.rp, self.rho = gains, p, rp, rho
        self.slope_preview = slope_preview
        self.lock = lock
        self.reset()

    def reset(self):
        self.loop = GroundLoopState()
        self.mode: GroundMode | None = None
        self.s = 0.0

    def update(self, t: float, state, scenario, dt: float):
        g = self.gains
        path, slope = scenario.course.path, scenario.course.slope
        self.s = path.project((state[IX], state[IY]), hint=self.s, window=0.5)
        target = path.lookahead(state, g.lookahead, self.s)
        v_nom = path.speed_at(self.s)
        gsp = ground_transform(state, target, v_nom)
        gsp = replace(gsp, yaw_rate=gsp.speed * path.curvature_at(self.s))

        gamma = scenario.effective_gamma(state, self.s)
        near_slope = gamma != 0.0 or slope.gamma(self.s + self.slope_preview) != 0.0
        a_des = (gsp.speed - forward_speed(state, gamma)) / g.accel_time_constant
        mode = self.lock or select_ground_mode(a_des, 1.0 if near_slope else 0.0, self.p, self.mode)
        if mode is not self.mode:
            self.loop = GroundLoopState(yaw=self.loop.yaw)
            self.mode = mode
        if mode is GroundMode.ENERGY_SAVING:
            res = energy_saving_control(state, gsp, g, self.p, self.rp, self.rho, self.loop, dt)
        else:
            res = high_mobility_control(state, gsp, g, self.p, self.rp, self.rho, gamma,
                                        self.loop, dt)
        self.loop = res.loop_state
        return res.command, mode.value, res.info

    def track(self, state, cmd: ActuatorCommand) -> ActuatorCommand:
        if self.mode is GroundMode.ENERGY_SAVING:
            return replace(cmd, beta=level_rotor_beta(state[ITHETA]))
        return cmd


# ------------------------------------------------------------------- gains

def _gain_pair(v) -> tuple[float, float]:
    a, b = v
    return float(a), float(b)


def default_gains_path() -> Path:
    return Path(__file__).parent / "data" / "gains.json"


def load_gains(text: str | None = None) -> tuple[AerialGains, GroundGains]:
    """Parse a gain file (JSON); ``None`` loads the shipped defaults."""
    if text is None:
        text = default_gains_path().read_text()
    doc = json.loads(text)
    a = doc["aerial"]
    aerial = AerialGains(
        altitude=_pid_from(a["altitude"]), yaw=_pid_from(a["yaw"]),
        position=_gain_pair(a["position"]), velocity=_gain_pair(a["velocity"]),
        attitude=_gain_pair(a["attitude"]), attitude_rate=_gain_pair(a["attitude_rate"]),
        max_horizontal_accel=float(a.get("max_horizontal_accel", 5.0)))
    gd = doc["ground"]
    ground = GroundGains(
        speed=_pid_from(gd["speed"]), pitch=_pid_from(gd["pitch"]),
        thrust_speed=_pid_from(gd["thrust_speed"]), yaw=_pid_from(gd["yaw"]),
        **{k: float(gd[k]) for k in ("lookahead", "accel_time_constant", "friction_margin",
                                     "max_lift_fraction") if k in gd})
    return aerial, ground
