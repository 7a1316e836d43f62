"""Power model and energy-optimal actuation on flat ground.

The allocation problem picks the center-of-gravity tilt ``theta``, motor
pitch ``beta`` and thrust ``F`` that reach a desired acceleration at least
power.  The acceleration equality is linear in ``F``, so ``F`` is eliminated
in closed form and the search runs over ``(theta, beta)`` only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from tiltcage.actuation import Infeasible
from tiltcage.params import VehicleParams

SLIP_TOL = 1e-9
STAGES = ("I", "II", "III")


@dataclass(frozen=True)
class PowerBreakdown:
    motor: float
    servo: float

    @property
    def total(self) -> float:
        return self.motor + self.servo


def power(F: float, theta: float, v_b: float, p: VehicleParams) -> PowerBreakdown:
    """Motor power ``C_k F^2`` and servo power ``(1/r) m g l v_b sin(theta)``."""
    servo = p.tilt_mechanism_mass * p.gravity * p.centroid_offset * v_b * math.sin(theta) / p.cage_radius
    return PowerBreakdown(p.motor_power_coeff * F * F, servo)


def body_speed(a: float, p: VehicleParams) -> float:
    """Speed used in the allocation objective, ``sqrt(a r)``."""
    return math.sqrt(a * p.cage_radius)


def max_centroid_acceleration(p: VehicleParams) -> float:
    """Largest acceleration reachable with zero thrust (tilt at its limit)."""
    return (p.cage_radius / p.J_yy * p.tilt_mechanism_mass * p.gravity * p.centroid_offset
            * math.sin(p.theta_max))


@dataclass(frozen=True)
class AllocationResult:
    acceleration: float
    theta: float
    beta: float
    thrust: float
    power: PowerBreakdown
    active_constraints: tuple[str, ...]
    stage: str
    residuals: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        return {"a_des": self.acceleration, "theta": self.theta, "beta": self.beta,
                "theta_deg": math.degrees(self.theta), "beta_deg": math.degrees(self.beta),
                "F": self.thrust, "P_total": self.power.total, "P_motor": self.power.motor,
                "P_servo": self.power.servo, "stage": self.stage,
                "active_constraints": list(self.active_constraints), "residuals": self.residuals}


def _thrust(a: float, theta, beta, p: VehicleParams):
    """Thrust meeting the acceleration equality (vectorized)."""
    num = a * p.J_yy / p.cage_radius - p.tilt_mechanism_mass * p.gravity * p.centroid_offset * np.sin(theta)
    return num / (p.cage_radius * np.sin(beta - theta))


def _objective(a: float, theta, F, p: VehicleParams):
    c = p.tilt_mechanism_mass * p.gravity * p.centroid_offset / p.cage_radius * math.sqrt(a * p.cage_radius)
    return p.motor_power_coeff * F * F + c * np.sin(theta)


def constraint_residuals(a: float, theta: float, beta: float, F: float, p: VehicleParams) -> dict:
    """Signed constraint values; equality near 0, inequalities feasible when <= 0."""
    M, g, r, J = p.total_mass, p.gravity, p.cage_radius, p.J_yy
    sd, cd = math.sin(beta - theta), math.cos(beta - theta)
    tau_all = F * r * sd + p.tilt_mechanism_mass * g * p.centroid_offset * math.sin(theta)
    normal = M * g - F * cd
    return {
        "acceleration": M * r / J * tau_all - M * a,
        "normal_force": -normal,
        "no_slip": M * r / J * tau_all - F * sd - p.static_friction_coeff * normal,
        "theta_min": p.theta_min - theta, "theta_max": theta - p.theta_max,
        "beta_min": p.beta_min - beta, "beta_max": beta - p.beta_max,
        "F_min": p.F_min - F, "F_max": F - p.F_max,
    }


def is_feasible(a: float, theta: float, beta: float, F: float, p: VehicleParams,
                eq_tol: float | None = None, ineq_tol: float = 1e-9) -> bool:
    res = constraint_residuals(a, theta, beta, F, p)
    eq_tol = 1e-6 * p.total_mass * max(a, 1e-12) if eq_tol is None else eq_tol
    if abs(res.pop("acceleration")) > eq_tol:
        return False
    if res.pop("normal_force") >= 0.0:
        return False
    return all(v <= ineq_tol for v in res.values())


def _feasible_mask(a: float, theta: np.ndarray, beta: float, F: np.ndarray,
                   p: VehicleParams) -> np.ndarray:
    """Vectorized inequality check for thrusts that already meet the equality."""
    M, g, r, J = p.total_mass, p.gravity, p.cage_radius, p.J_yy
    sd, cd = np.sin(beta - theta), np.cos(beta - theta)
    tau_all = F * r * sd + p.tilt_mechanism_mass * g * p.centroid_offset * np.sin(theta)
    normal = M * g - F * cd
    slip = M * r / J * tau_all - F * sd - p.static_friction_coeff * normal
    return ((F >= p.F_min - 1e-9) & (F <= p.F_max + 1e-9) & (normal > 0) & (slip <= SLIP_TOL)
            & np.isfinite(F))


def classify_stage(a: float, theta: float, beta: float, F: float, p: VehicleParams) -> str:
    """Stage label from the allocation's shape.

    III: tilt at or past upright.  I: tilt still below its limit and thrust
    supplying under half the rolling torque.  II: everything between.
    """
    if theta <= 1e-9:
        return "III"
    tau_all = a * p.J_yy / p.cage_radius
    share = F * p.cage_radius * math.sin(beta - theta) / tau_all if tau_all > 0 else 0.0
    if theta < p.theta_max - 1e-7 and share < 0.5:
        return "I"
    return "II"


def _active(a, theta, beta, F, p, tol=1e-7) -> tuple[str, ...]:
    res = constraint_residuals(a, theta, beta, F, p)
    names = [k for k in ("theta_min", "theta_max", "beta_min", "beta_max", "F_min", "F_max")
             if res[k] > -tol]
    if res["no_slip"] > -1e-9 * p.total_mass * p.gravity:
        names.append("no_slip")
    return tuple(names)


def _result(a: float, theta: float, beta: float, F: float, p: VehicleParams) -> AllocationResult:
    if F <= 0.0:
        beta = 0.0 if abs(a * p.J_yy / p.cage_radius
                          - p.tilt_mechanism_mass * p.gravity * p.centroid_offset * math.sin(theta)) <= 1e-15 else beta
        F = 0.0
    pw = power(F, theta, body_speed(a, p), p)
    res = constraint_residuals(a, theta, beta, F, p)
    return AllocationResult(a, theta, beta, F, pw, _active(a, theta, beta, F, p),
                            classify_stage(a, theta, beta, F, p), res)


def _key(P: float, F: float, theta: float, beta: float):
    # ties: smaller F, then smaller |theta|, then smaller |beta|
    return (round(P, 15), round(F, 12), round(abs(theta), 12), abs(beta))


def _zero_demand(p: VehicleParams) -> AllocationResult:
    pw = PowerBreakdown(0.0, 0.0)
    return AllocationResult(0.0, 0.0, 0.0, 0.0, pw, ("F_min",), "I",
                            constraint_residuals(0.0, 0.0, 0.0, 0.0, p))


def optimal_allocation(a_des: float, p: VehicleParams, scan_points: int = 2001) -> AllocationResult:
    """Least-power (theta, beta, F) producing ``a_des`` without slip or lift-off.

    Candidates: the zero-thrust tilt, a bounded 1-D search over tilt with the
    motor pitch on each of its bounds (for fixed tilt the power falls as
    ``|sin(beta - theta)|`` grows, so interior pitches never win), the box
    corners, and a quasi-Newton polish of the best point in both variables.
    """
    if not math.isfinite(a_des) or a_des < 0:
        raise ValueError(f"a_des must be >= 0, got {a_des}")
    if a_des == 0.0:
        return _zero_demand(p)
    mgl = p.tilt_mechanism_mass * p.gravity * p.centroid_offset
    cands: list[tuple[float, float, float]] = []

    def consider(theta, beta):
        theta = min(max(theta, p.theta_min), p.theta_max)
        beta = min(max(beta, p.beta_min), p.beta_max)
        sd = math.sin(beta - theta)
        if abs(sd) < 1e-12:
            return
        F = float(_thrust(a_des, theta, beta, p))
        if is_feasible(a_des, theta, beta, F, p):
            cands.append((theta, beta, F))

    s = a_des * p.J_yy / (p.cage_radius * mgl)
    if s <= 1.0:
        th0 = math.asin(s)
        if p.theta_min <= th0 <= p.theta_max:
            cands.append((th0, 0.0, 0.0))

    grid = np.linspace(p.theta_min, p.theta_max, scan_points)
    for beta in (p.beta_min, p.beta_max):
        F = _thrust(a_des, grid, beta, p)
        P = _objective(a_des, grid, F, p)
        ok = _feasible_mask(a_des, grid, beta, F, p)
        for t in (p.theta_min, p.theta_max):
            consider(t, beta)
        if not ok.any():
            continue
        i = int(np.argmin(np.where(ok, P, np.inf)))
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, len(grid) - 1)]

        def pen(t, beta=beta):
            f = float(_thrust(a_des, t, beta, p))
            if not is_feasible(a_des, t, beta, f, p):
                return 1e6
            return float(_objective(a_des, t, f, p))

        r = minimize_scalar(pen, bounds=(lo, hi), method="bounded",
                            options={"xatol": 1e-12, "maxiter": 500})
        cands.append((grid[i], beta, float(F[i])))
        consider(float(r.x), beta)

    if not cands:
        raise Infeasible(f"a_des={a_des} m/s^2 is outside the feasible envelope",
                         bound=_binding_bound(a_des, p))

    def P_of(c):
        return float(_objective(a_des, c[0], c[2], p))

    best = min(cands, key=lambda c: _key(P_of(c), c[2], c[0], c[1]))
    if best[2] > 0.0:
        def obj(x):
            f = float(_thrust(a_des, x[0], x[1], p))
            if not is_feasible(a_des, x[0], x[1], f, p):
                return 1e6
            return float(_objective(a_des, x[0], f, p))

        r = minimize(obj, np.array(best[:2]), method="L-BFGS-B",
                     bounds=[(p.theta_min, p.theta_max), (p.beta_min, p.beta_max)])
        consider(float(r.x[0]), float(r.x[1]))
        best = min(cands, key=lambda c: _key(P_of(c), c[2], c[0], c[1]))
    return _result(a_des, *best, p)


def _binding_bound(a: float, p: VehicleParams) -> str:
    """Name the constraint that caps acceleration at the most favourable pitch."""
    beta = p.beta_max
    theta = np.linspace(p.theta_min, p.theta_max, 301)
    F = _thrust(a, theta, beta, p)
    if np.all(F > p.F_max):
        return "F_max"
    return "no_slip"


def brute_force_allocation(a_des: float, p: VehicleParams, theta_step: float = math.radians(0.1),
                           beta_step: float = math.radians(0.5)) -> AllocationResult:
    """Exhaustive (theta, beta) grid with the thrust solved in closed form."""
    if theta_step <= 0 or beta_step <= 0:
        raise ValueError("grid steps must be > 0")
    if a_des == 0.0:
        return _zero_demand(p)
    nt = int(round((p.theta_max - p.theta_min) / theta_step)) + 1
    nb = int(round((p.beta_max - p.beta_min) / beta_step)) + 1
    th, be = np.meshgrid(np.linspace(p.theta_min, p.theta_max, nt),
                         np.linspace(p.beta_min, p.beta_max, nb), indexing="ij")
    M, g, r, J, mu = p.total_mass, p.gravity, p.cage_radius, p.J_yy, p.static_friction_coeff
    mgl = p.tilt_mechanism_mass * g * p.centroid_offset
    sd, cd = np.sin(be - th), np.cos(be - th)
    num = a_des * J / r - mgl * np.sin(th)
    singular = np.abs(sd) < 1e-12
    # sin(beta - theta) = 0: feasible only when tilt alone meets the demand
    zero_ok = np.abs(M * r / J * num) <= 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        F = np.where(singular, np.where(zero_ok, 0.0, np.nan), num / (r * np.where(singular, 1.0, sd)))
    tau_all = F * r * sd + mgl * np.sin(th)
    normal = M * g - F * cd
    ok = (np.isfinite(F) & (F >= p.F_min - 1e-12) & (F <= p.F_max + 1e-12) & (normal > 0)
          & (M * r / J * tau_all - F * sd - mu * normal <= SLIP_TOL))
    if not ok.any():
        raise Infeasible(f"no grid candidate reaches a_des={a_des} m/s^2", bound="envelope")
    c = mgl / r * math.sqrt(a_des * r)
    P = np.where(ok, p.motor_power_coeff * F * F + c * np.sin(th), np.inf)
    idx = np.flatnonzero(ok.ravel())
    order = np.lexsort((np.abs(be.ravel()[idx]), np.abs(th.ravel()[idx]), F.ravel()[idx],
                        P.ravel()[idx]))
    k = idx[order[0]]
    i, j = np.unravel_index(k, th.shape)
    return _result(a_des, float(th[i, j]), float(be[i, j]), float(F[i, j]), p)


@dataclass(frozen=True)
class SweepPoint:
    acceleration: float
    result: AllocationResult | None
    error: str | None = None

    @property
    def feasible(self) -> bool:
        return self.result is not None


@dataclass(frozen=True)
class Sweep:
    points: tuple[SweepPoint, ...]
    boundaries: tuple[tuple[str, str, float], ...]  # (from stage, to stage, acceleration)

    CSV_COLUMNS = ("a_des", "theta_deg", "beta_deg", "F_N", "P_total", "P_motor", "P_servo",
                   "stage", "feasible")

    def rows(self) -> list[tuple]:
        out = []
        for pt in self.points:
            r = pt.result
            if r is None:
                out.append((pt.acceleration, "", "", "", "", "", "", "", False))
            else:
                out.append((pt.acceleration, math.degrees(r.theta), math.degrees(r.beta), r.thrust,
                            r.power.total, r.power.motor, r.power.servo, r.stage, True))
        return out

    def to_csv(self) -> str:
        lines = [",".join(self.CSV_COLUMNS)]
        for row in self.rows():
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
        return "\n".join(lines) + "\n"


def _stage_at(a: float, p: VehicleParams) -> str | None:
    try:
        return optimal_allocation(a, p).stage
    except Infeasible:
        return None


def sweep_acceleration(a_min: float, a_max: float, n_samples: int, p: VehicleParams,
                       refine_tol: float = 1e-9) -> Sweep:
    """Linearly spaced optimal allocations and the accelerations where the stage changes.

    Each change between neighbouring samples is located by bisection on the
    stage label down to ``refine_tol``.
    """
    if not (0 < a_min < a_max) or n_samples < 2:
        raise ValueError("need 0 < a_min < a_max and n_samples >= 2")
    pts = []
    for a in np.linspace(a_min, a_max, n_samples):
        a = float(a)
        try:
            pts.append(SweepPoint(a, optimal_allocation(a, p)))
        except Infeasible as exc:
            pts.append(SweepPoint(a, None, str(exc)))
    bounds = []
    for u, v in zip(pts, pts[1:]):
        if u.result is None or v.result is None or u.result.stage == v.result.stage:
            continue
        lo, hi, s_lo = u.acceleration, v.acceleration, u.result.stage
        while hi - lo > refine_tol:
            mid = 0.5 * (lo + hi)
            if _stage_at(mid, p) == s_lo:
                lo = mid
            else:
                hi = mid
        bounds.append((s_lo, v.result.stage, 0.5 * (lo + hi)))
    return Sweep(tuple(pts), tuple(bounds))
