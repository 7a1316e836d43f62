"""Fixed-step integration, scenario runtimes, supervision and telemetry.

The noise stream is NumPy's PCG64 generator seeded with the run seed; every
measurement draws three position normals, one yaw normal and one uniform
(dropout), in that order, whatever the configured magnitudes.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from tiltcage.actuation import ActuatorCommand, Infeasible, allocate_speeds
from tiltcage.control import AerialReference, forward_speed, plan_attitude
from tiltcage.dynamics import (IPSI, ITHETA, IVX, IVY, IVZ, IX, IY, IZ, STATE_FIELDS, GroundForces,
                               LiftOff, SingularAttitude, SlipDetected, aerial_derivative,
                               drag_force, inclined_derivative, inclined_forces, wrap_angle)
from tiltcage.params import DragParams, RotorParams, VehicleParams
from tiltcage.scenarios import GroundCourse, Path, error_report, reference_at

ANGLES = (6, 7, 8)
SLIP_POLICIES = {"halt": "raise", "clamp": "clamp", "warn": "ignore"}


class IncompatibleMode(ValueError):
    pass


class NumericalDivergence(ArithmeticError):
    def __init__(self, step: int, telemetry=None):
        super().__init__(f"non-finite state at step {step}")
        self.step = step
        self.telemetry = telemetry


@dataclass(frozen=True)
class MeasurementNoise:
    position_sigma: float = 0.0
    yaw_sigma: float = 0.0
    dropout_prob: float = 0.0
    rate: float = 250.0

    def __post_init__(self):
        if self.position_sigma < 0 or self.yaw_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError("dropout_prob must lie in [0, 1]")
        if self.rate <= 0:
            raise ValueError("measurement rate must be > 0")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    duration: float = 10.0
    controller_rate: float = 250.0
    slip_policy: str = "clamp"
    noise: MeasurementNoise = MeasurementNoise()
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.duration < self.dt:
            raise ValueError("duration must be >= dt")
        if self.controller_rate <= 0:
            raise ValueError("controller_rate must be > 0")
        if self.slip_policy not in SLIP_POLICIES:
            raise ValueError(f"slip_policy must be one of {sorted(SLIP_POLICIES)}")


class _Dropout:
    def __repr__(self):
        return "Dropout"


Dropout = _Dropout()


@dataclass(frozen=True)
class Measurement:
    position: np.ndarray
    yaw: float


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def measure(state, noise: MeasurementNoise, rng: np.random.Generator):
    """Noisy position and yaw, or ``Dropout``."""
    s = np.asarray(state, dtype=float)
    dp = rng.standard_normal(3)
    dy = rng.standard_normal()
    drop = rng.random()
    if drop < noise.dropout_prob:
        return Dropout
    return Measurement(s[IX:IZ + 1] + noise.position_sigma * dp,
                       wrap_angle(s[IPSI] + noise.yaw_sigma * dy))


def rk4_step(f, y, dt: float, angles=()):
    """Classical Runge-Kutta step; indices in ``angles`` are wrapped after it."""
    y = np.asarray(y, dtype=float)
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    for i in angles:
        out[i] = wrap_angle(out[i])
    return out


# ---------------------------------------------------------------- scenarios

class AerialScenario:
    """Flight along a path (or hover at a point) starting on the nominal trajectory."""

    kind = "aerial"

    def __init__(self, p: VehicleParams, d: DragParams, path: Path | None = None,
                 hover_point=(0.0, 0.0, 1.0), plan_dt: float = 1e-3):
        self.p, self.d, self.path = p, d, path
        self.hover_point = np.asarray(hover_point, dtype=float)
        self.plan = None
        s0 = np.zeros(12)
        if path is None:
            s0[IX:IZ + 1] = self.hover_point
        else:
            n = int(math.floor(path.duration / plan_dt)) + 1
            acc = np.empty((n, 2))
            for i in range(n):
                r = reference_at(path, min(i * plan_dt, path.duration))
                a = r.acceleration - drag_force(r.tangent * r.speed, d) / p.total_mass
                acc[i] = a[:2]
            self.plan = plan_attitude(acc, plan_dt, p, periodic=path.closed)
            ref = self.aerial_reference(0.0)
            s0[IX:IZ + 1] = ref.position
            s0[IVX:IVZ + 1] = ref.velocity
            s0[6], s0[7] = ref.attitude
            s0[9], s0[10] = ref.attitude_rate
        self.initial_state = s0

    @property
    def duration(self) -> float | None:
        return None if self.path is None else self.path.duration

    def aerial_reference(self, t: float) -> AerialReference:
        if self.path is None:
            return AerialReference(tuple(self.hover_point))
        r = reference_at(self.path, min(max(t, 0.0), self.path.duration))
        att, rate = self.plan.at(t)
        return AerialReference(tuple(r.position), tuple(r.tangent * r.speed), 0.0,
                               tuple(r.acceleration), att, rate)

    def reference_point(self, t: float, state) -> np.ndarray:
        if self.path is None:
            return self.hover_point
        return reference_at(self.path, min(t, self.path.duration)).position

    def pre_step(self, state):
        return state

    def derivative(self, state, cmd: ActuatorCommand, on_slip: str):
        return aerial_derivative(state, cmd, self.p, self.d)

    def ground_forces(self, state, cmd):
        return None

    def gamma(self) -> float:
        return 0.0

    def body_speed(self, state) -> float:
        return 0.0

    def finished(self, state) -> bool:
        return False

    def summary(self, telemetry) -> dict:
        return {}


class GroundScenario:
    """Rolling along a ground course; the slope under the vehicle is sampled per step."""

    kind = "ground"

    def __init__(self, p: VehicleParams, d: DragParams, course: GroundCourse,
                 max_duration: float = 250.0, end_tolerance: float = 0.05):
        self.p, self.d, self.course = p, d, course
        path = course.path
        s0 = np.zeros(12)
        s0[IX:IZ + 1] = path.start
        s0[IPSI] = path.heading_at(0.0)
        self.initial_state = s0
        self.duration = max_duration
        self.end_tolerance = end_tolerance
        self.s = 0.0
        self._gamma = 0.0

    def locate(self, state) -> float:
        q = (state[IX], state[IY])
        self.s = self.course.path.project(q, hint=self.s, window=0.5)
        return self.s

    def effective_gamma(self, state, s: float) -> float:
        """Inclination along the current heading."""
        g = self.course.slope.gamma(s)
        if g == 0.0:
            return 0.0
        c = math.cos(state[IPSI] - self.course.path.heading_at(s))
        return math.atan(math.tan(g) * c)

    def pre_step(self, state):
        s = self.locate(state)
        g_new = self.effective_gamma(state, s)
        if g_new != self._gamma:
            state = state.copy()
            v = forward_speed(state, self._gamma)
            # the mechanism keeps its world orientation across the break
            state[ITHETA] += self._gamma - g_new
            cg, sg = math.cos(g_new), math.sin(g_new)
            cp, sp = math.cos(state[IPSI]), math.sin(state[IPSI])
            state[IVX:IVZ + 1] = (v * cg * cp, v * cg * sp, v * sg)
            state[IZ] = self.course.slope.height(s)
            self._gamma = g_new
        return state

    def gamma(self) -> float:
        return self._gamma

    def derivative(self, state, cmd: ActuatorCommand, on_slip: str):
        return inclined_derivative(state, cmd, self._gamma, self.p, self.d, on_slip)

    def ground_forces(self, state, cmd: ActuatorCommand):
        try:
            return inclined_forces(cmd.thrust, cmd.beta, state[ITHETA], self._gamma, self.p)
        except LiftOff as exc:
            return GroundForces(math.nan, math.nan, exc.normal_force, 0.0)

    def body_speed(self, state) -> float:
        return forward_speed(state, self._gamma)

    def reference_point(self, t: float, state) -> np.ndarray:
        pt = self.course.path.point_at(self.s)
        pt[2] = self.course.slope.height(self.s)
        return pt

    def finished(self, state) -> bool:
        return self.s >= self.course.path.length - self.end_tolerance

    def summary(self, telemetry) -> dict:
        col = telemetry.column
        gam = col("gamma")
        desc = gam < 0
        speed = np.hypot(np.hypot(col("vx"), col("vy")), col("vz"))
        return {
            "slope_traversal_completed": bool(self.s >= self.course.slope_end),
            "course_completed": bool(self.finished(None)),
            "final_arc_length": self.s,
            "max_descent_speed": float(speed[desc].max()) if desc.any() else 0.0,
            "max_cross_track_error": float(np.max(np.hypot(col("e_x"), col("e_y")))),
        }


# ---------------------------------------------------------------- telemetry

COLUMNS = (("t",) + STATE_FIELDS
           + ("alpha", "beta", "thrust", "rotor_torque", "tilt_cmd", "n1", "n2",
              "net_torque", "friction", "normal_force", "max_friction", "slip_ratio", "gamma",
              "P_motor", "P_servo", "P_total", "ref_x", "ref_y", "ref_z", "e_x", "e_y", "e_z"))


@dataclass
class Telemetry:
    columns: tuple
    data: np.ndarray
    modes: list
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def __len__(self) -> int:
        return len(self.data)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns + ("mode",)) + "\n")
        for row, mode in zip(self.data.tolist(), self.modes):
            buf.write(",".join(map(repr, row)))
            buf.write("," + mode + "\n")
        return buf.getvalue()


def _rotor_speeds(cmd: ActuatorCommand, info: dict, rp: RotorParams | None, rho: float):
    sp = info.get("speeds")
    if sp is None and rp is not None:
        try:
            sp = allocate_speeds(cmd.thrust, cmd.rotor_torque, rp, rho)
        except Infeasible as exc:
            sp = exc.clipped
    return (sp.n1, sp.n2) if sp is not None else (math.nan, math.nan)


def simulate(scenario, controller, p: VehicleParams, cfg: SimConfig,
             rp: RotorParams | None = None) -> Telemetry:
    """Run a closed loop and record one telemetry row per integration step.

    Ground-contact violations follow ``cfg.slip_policy``; lift-off, a halting
    slip or a singular attitude stop the run after a diagnostic row and are
    reported in ``summary["halt_reason"]``.
    """
    if controller.kind != scenario.kind:
        raise IncompatibleMode(f"{controller.kind} controller with {scenario.kind} scenario")
    duration = cfg.duration if scenario.duration is None else min(cfg.duration, scenario.duration)
    n_steps = max(int(round(duration / cfg.dt)), 1)
    every = max(int(round(1.0 / (cfg.controller_rate * cfg.dt))), 1)
    meas_every = max(int(round(1.0 / (cfg.noise.rate * cfg.dt))), 1)
    on_slip = SLIP_POLICIES[cfg.slip_policy]
    rng = make_rng(cfg.seed)
    rho = scenario.d.air_density if hasattr(scenario, "d") else 1.225
    C_k, mgl_r = p.motor_power_coeff, p.tilt_mechanism_mass * p.gravity * p.centroid_offset / p.cage_radius

    state = np.array(scenario.initial_state, dtype=float)
    controller.reset()
    last_meas = Measurement(state[IX:IZ + 1].copy(), state[IPSI])
    cmd, label, info = ActuatorCommand(), "init", {}
    rows, modes = [], []
    halt, slip_events, unreachable = None, 0, 0

    def record(k, st, cm, gf, lab):
        t = k * cfg.dt
        n1, n2 = _rotor_speeds(cm, info, rp, rho)
        if gf is None:
            gf_vals = (math.nan,) * 5
        else:
            ratio = abs(gf.friction) / gf.max_friction if gf.max_friction > 0 else math.inf
            gf_vals = (gf.net_torque, gf.friction, gf.normal_force, gf.max_friction, ratio)
        pm = C_k * cm.thrust * cm.thrust
        ps = mgl_r * scenario.body_speed(st) * math.sin(st[ITHETA]) if scenario.kind == "ground" else 0.0
        ref = scenario.reference_point(t, st)
        rows.append((t, *st.tolist(), cm.alpha, cm.beta, cm.thrust, cm.rotor_torque, cm.tilt_cmd,
                     n1, n2, *gf_vals, scenario.gamma(), pm, ps, pm + ps,
                     ref[0], ref[1], ref[2], st[IX] - ref[0], st[IY] - ref[1], st[IZ] - ref[2]))
        modes.append(lab)

    k = 0
    for k in range(n_steps):
        state = scenario.pre_step(state)
        if k % every == 0:
            if k % meas_every == 0:
                m = measure(state, cfg.noise, rng)
                if m is not Dropout:
                    last_meas = m
            seen = state.copy()
            seen[IX:IZ + 1] = last_meas.position
            seen[IPSI] = last_meas.yaw
            cmd, label, info = controller.update(k * cfg.dt, seen, scenario, every * cfg.dt)
            if info.get("unreachable"):
                unreachable += 1
        cmd = controller.track(state, cmd)
        gf = scenario.ground_forces(state, cmd)

        def f(y):
            return scenario.derivative(y, cmd, on_slip)

        try:
            new = rk4_step(f, state, cfg.dt, ANGLES)
        except (LiftOff, SlipDetected, SingularAttitude) as exc:
            halt = type(exc).__name__
            record(k, state, cmd, gf, "HALT:" + halt)
            break
        if gf is not None and not gf.no_slip:
            slip_events += 1
        record(k, state, cmd, gf, label)
        if not np.all(np.isfinite(new)):
            tel = Telemetry(COLUMNS, np.array(rows), modes, {"halt_reason": "NumericalDivergence"})
            raise NumericalDivergence(k + 1, tel)
        state = new
        if scenario.finished(state):
            break

    tel = Telemetry(COLUMNS, np.array(rows, dtype=float), modes)
    ratio = tel.column("slip_ratio")
    finite = ratio[np.isfinite(ratio)]
    P = tel.column("P_total")
    summary = {
        "steps": len(tel),
        "t_final": float(tel.column("t")[-1]),
        "halt_reason": halt,
        "slip_events": slip_events,
        "unreachable_ticks": unreachable,
        "max_slip_ratio": float(finite.max()) if finite.size else None,
        "energy_J": float(P.sum() * cfg.dt),
        "motor_energy_J": float(tel.column("P_motor").sum() * cfg.dt),
        "final_state": dict(zip(STATE_FIELDS, state.tolist())),
    }
    if scenario.kind == "aerial" and getattr(scenario, "path", None) is not None:
        pos = np.column_stack([tel.column("x"), tel.column("y"), tel.column("z")])
        summary["errors"] = error_report(tel.column("t"), pos, scenario.path).summary()
    else:
        e = np.column_stack([tel.column("e_x"), tel.column("e_y"), tel.column("e_z")])
        summary["errors"] = {"max_abs": np.abs(e).max(axis=0).tolist(),
                             "rms": np.sqrt((e**2).mean(axis=0)).tolist()}
    summary.update(scenario.summary(tel))
    mode_counts = {}
    for m in modes:
        mode_counts[m] = mode_counts.get(m, 0) + 1
    summary["mode_fractions"] = {m: c / len(modes) for m, c in sorted(mode_counts.items())}
    tel.summary = summary
    return tel
