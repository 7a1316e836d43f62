import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tiltcage.actuation import Infeasible
from tiltcage.energy import (Sweep, brute_force_allocation, max_centroid_acceleration,
                             optimal_allocation, power, sweep_acceleration)

DEG = math.pi / 180
A_I = 0.11 * 9.8 * 0.07 * math.sin(15 * DEG) * 0.12  # (r/J) m g l sin(theta_max), J = 1


def eq24_violations(a, theta, beta, F, p):
    """Independent restatement of the allocation constraints."""
    M, m, g, r, l, J, mu = (p.total_mass, p.tilt_mechanism_mass, p.gravity, p.cage_radius,
                            p.centroid_offset, p.J_yy, p.static_friction_coeff)
    tau = F * r * math.sin(beta - theta) + m * g * l * math.sin(theta)
    FN = M * g - F * math.cos(beta - theta)
    out = []
    if abs(M * r / J * tau - M * a) > 1e-6 * M * a:
        out.append("equality")
    if not FN > 0:
        out.append("normal")
    if M * r / J * tau - F * math.sin(beta - theta) > mu * FN + 1e-9:
        out.append("no_slip")
    if not p.theta_min - 1e-12 <= theta <= p.theta_max + 1e-12:
        out.append("theta")
    if not p.beta_min - 1e-12 <= beta <= p.beta_max + 1e-12:
        out.append("beta")
    if not p.F_min <= F <= p.F_max:
        out.append("F")
    return out


def test_power_examples(p):
    assert power(0, 0, 0.3, p).total == 0.0
    assert power(1.0, 0, 0, p).motor == 10.0
    ps = power(0, 15 * DEG, 0.1, p).servo
    assert ps == pytest.approx(0.11 * 9.8 * 0.07 * 0.1 * math.sin(15 * DEG) / 0.12)
    assert ps == pytest.approx(0.016278, rel=2e-4)  # quoted value is rounded
    pb = power(0.7, 0.1, 0.2, p)
    assert pb.total == pb.motor + pb.servo


def test_max_centroid_acceleration(p):
    assert max_centroid_acceleration(p) == pytest.approx(A_I, rel=1e-14)
    assert max_centroid_acceleration(p) == pytest.approx(0.0023439, rel=2e-4)
    assert max_centroid_acceleration(p.replace(theta_max=0.0)) == 0.0
    assert max_centroid_acceleration(p.replace(centroid_offset=0.14)) == pytest.approx(2 * A_I)


def test_low_demand_uses_tilt(p):
    r = optimal_allocation(0.001, p)
    assert r.stage == "I"
    tilt_only = math.asin(0.001 / A_I * math.sin(15 * DEG))
    assert math.degrees(tilt_only) == pytest.approx(6.34, abs=0.01)
    assert abs(r.theta - tilt_only) <= 0.1 * DEG
    assert eq24_violations(0.001, r.theta, r.beta, r.thrust, p) == []


def test_stage_one_thrust_is_a_trickle(p):
    # With F > 0 the servo term falls at rate sqrt(a r) sin(beta - theta) per newton while
    # the motor term grows as 2 C_k F, so the optimum carries F* <= sqrt(a r) / (2 C_k).
    for a in np.linspace(0.0002, 0.9 * A_I, 8):
        r = optimal_allocation(float(a), p)
        assert r.stage == "I"
        assert 0 <= r.thrust <= math.sqrt(a * p.cage_radius) / (2 * p.motor_power_coeff) * (1 + 1e-6)


def test_stage_one_boundary(p):
    r = optimal_allocation(A_I, p)
    assert abs(r.theta - p.theta_max) <= 0.1 * DEG
    assert r.thrust < 1e-3


def test_high_demand(p):
    r = optimal_allocation(0.02, p)
    assert r.stage == "III"
    assert r.beta == pytest.approx(p.beta_max) and r.theta < p.theta_max and r.thrust > 0
    assert "beta_max" in r.active_constraints
    assert eq24_violations(0.02, r.theta, r.beta, r.thrust, p) == []


def test_oracle_matches_at_low_demand(p):
    s, o = optimal_allocation(0.001, p), brute_force_allocation(0.001, p)
    assert abs(s.theta - o.theta) <= 0.1 * DEG
    assert s.power.total <= o.power.total * (1 + 1e-12)


def test_zero_demand(p):
    for fn in (optimal_allocation, brute_force_allocation):
        r = fn(0.0, p)
        assert (r.thrust, r.theta, r.power.total) == (0.0, 0.0, 0.0)


def test_infeasible_demand(p):
    with pytest.raises(Infeasible) as err:
        optimal_allocation(10.0, p)
    assert err.value.bound in ("F_max", "no_slip")
    with pytest.raises(Infeasible):
        brute_force_allocation(10.0, p)


def test_negative_demand_rejected(p):
    with pytest.raises(ValueError):
        optimal_allocation(-1.0, p)


def test_oracle_grid_validation(p):
    with pytest.raises(ValueError):
        brute_force_allocation(0.01, p, theta_step=0.0)


@pytest.mark.parametrize("a", np.geomspace(0.001, 0.02, 20))
def test_solver_never_loses_to_the_grid(p, a):
    s, o = optimal_allocation(float(a), p), brute_force_allocation(float(a), p)
    assert s.power.total <= o.power.total * (1 + 1e-9)


@pytest.mark.parametrize("a", np.geomspace(0.001, 0.02, 20))
def test_fine_oracle_agreement(p, a):
    s = optimal_allocation(float(a), p)
    o = brute_force_allocation(float(a), p, theta_step=0.01 * DEG)
    assert abs(s.power.total - o.power.total) / max(o.power.total, 1e-9) <= 1e-3


@settings(max_examples=60, deadline=None)
@given(a=st.floats(1e-4, 0.05))
def test_solutions_are_feasible(p, a):
    r = optimal_allocation(a, p)
    assert eq24_violations(a, r.theta, r.beta, r.thrust, p) == []
    assert r.power.total == pytest.approx(p.motor_power_coeff * r.thrust**2 + p.tilt_mechanism_mass
                                          * p.gravity * p.centroid_offset / p.cage_radius
                                          * math.sin(r.theta) * math.sqrt(a * p.cage_radius))


@settings(max_examples=30, deadline=None)
@given(a=st.floats(1e-4, 0.05))
def test_thrust_only_at_full_pitch(p, a):
    r = optimal_allocation(a, p)
    if r.thrust > 0:
        assert r.beta == pytest.approx(p.beta_max)


@pytest.fixture(scope="module")
def sweep(p):
    return sweep_acceleration(0.001, 0.02, 50, p)


def test_sweep_stage_order(sweep):
    stages = [pt.result.stage for pt in sweep.points]
    assert len(stages) == 50 and all(pt.feasible for pt in sweep.points)
    collapsed = [s for i, s in enumerate(stages) if i == 0 or s != stages[i - 1]]
    assert collapsed == ["I", "II", "III"]
    assert [b[:2] for b in sweep.boundaries] == [("I", "II"), ("II", "III")]


def test_sweep_first_boundary(sweep):
    assert sweep.boundaries[0][2] == pytest.approx(A_I, rel=0.02)


def test_sweep_power_nondecreasing(sweep):
    P = [pt.result.power.total for pt in sweep.points]
    assert all(b >= a - 1e-6 for a, b in zip(P, P[1:]))


def test_sweep_stage_one_tilt_nondecreasing(sweep):
    th = [pt.result.theta for pt in sweep.points if pt.result.stage == "I"]
    assert all(b >= a for a, b in zip(th, th[1:]))


def test_sweep_below_boundary_single_stage(p):
    sw = sweep_acceleration(0.0001, 0.002, 20, p)
    assert {pt.result.stage for pt in sw.points} == {"I"} and sw.boundaries == ()


def test_sweep_csv(sweep):
    lines = sweep.to_csv().strip().split("\n")
    assert lines[0] == ",".join(Sweep.CSV_COLUMNS)
    assert len(lines) == 51


def test_sweep_range_validation(p):
    with pytest.raises(ValueError):
        sweep_acceleration(0.01, 0.001, 10, p)
    with pytest.raises(ValueError):
        sweep_acceleration(0.001, 0.02, 1, p)


def test_sweep_marks_infeasible_samples(p):
    sw = sweep_acceleration(0.01, 10.0, 4, p)
    assert not sw.points[-1].feasible and sw.points[-1].error


def test_motor_cost_scaling_keeps_stage_one_region(p):
    """Heavier motor cost only pulls the first boundary toward the zero-thrust limit."""
    bounds = []
    for k in (1.0, 10.0, 100.0):
        sw = sweep_acceleration(0.001, 0.02, 50, p.replace(motor_power_coeff=10.0 * k))
        bounds.append(sw.boundaries[0][2])
        stages = [pt.result.stage for pt in sw.points]
        assert stages[:4] == ["I"] * 4 and stages[4] == "II"
    assert all(abs(b / A_I - 1) < 0.02 for b in bounds)
    assert bounds[0] >= bounds[1] >= bounds[2] >= A_I * (1 - 1e-9)
