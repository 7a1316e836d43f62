"""Physical parameters, limits and their JSON configuration format.

A config file has three top-level objects, ``vehicle``, ``drag`` and ``rotor``,
plus an optional ``angle_unit`` ("deg" or "rad", default "rad") that applies to
every angle-valued key.  Angles are always stored in radians.

Parameters that the reference vehicle table does not provide (drag, rotor and
servo coefficients, roll limits, ``J_xx``/``J_zz``) have documented defaults
that can be overridden in the file.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

ANGLE_KEYS = ("theta_min", "theta_max", "beta_min", "beta_max", "alpha_min", "alpha_max")

# Default angular drag coefficient: 0.02 N*m of resisting torque at 10 rad/s.
DEFAULT_ANGULAR_DRAG = 0.02 / 10.0**2


class ConfigError(Exception):
    """Base class for configuration problems."""


class MissingKey(ConfigError):
    def __init__(self, key: str):
        super().__init__(f"missing required key: {key!r}")
        self.key = key


class ParseError(ConfigError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"{msg} (line {line}, column {column})")
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    def __init__(self, violations: list[str]):
        super().__init__("invalid parameters: " + "; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class VehicleParams:
    total_mass: float
    tilt_mechanism_mass: float
    gravity: float
    cage_radius: float
    centroid_offset: float
    motor_power_coeff: float
    static_friction_coeff: float
    J_yy: float
    theta_min: float
    theta_max: float
    beta_min: float
    beta_max: float
    F_min: float
    F_max: float
    J_xx: float | None = None
    J_zz: float | None = None
    alpha_min: float = -math.pi / 3
    alpha_max: float = math.pi / 3
    # Center-of-gravity tilt servo, modeled as a second-order position loop.
    servo_bandwidth: float = 20.0
    servo_damping: float = 0.9

    def __post_init__(self):
        if self.J_xx is None:
            object.__setattr__(self, "J_xx", self.J_yy)
        if self.J_zz is None:
            object.__setattr__(self, "J_zz", self.J_yy)

    # Short aliases used throughout the model code.
    @property
    def M(self) -> float:
        return self.total_mass

    @property
    def m(self) -> float:
        return self.tilt_mechanism_mass

    @property
    def g(self) -> float:
        return self.gravity

    @property
    def r(self) -> float:
        return self.cage_radius

    @property
    def l(self) -> float:  # noqa: E743
        return self.centroid_offset

    @property
    def C_k(self) -> float:
        return self.motor_power_coeff

    @property
    def mu(self) -> float:
        return self.static_friction_coeff

    @property
    def hover_thrust(self) -> float:
        return self.total_mass * self.gravity

    def replace(self, **changes) -> "VehicleParams":
        data = asdict(self)
        data.update(changes)
        return VehicleParams(**data)


@dataclass(frozen=True)
class DragParams:
    drag_coefficient: float = 1.0
    air_density: float = 1.225
    frontal_area: float = math.pi * 0.12**2
    k_tau_x: float = DEFAULT_ANGULAR_DRAG
    k_tau_y: float = DEFAULT_ANGULAR_DRAG
    k_tau_z: float = DEFAULT_ANGULAR_DRAG
    # Constant yaw rolling-friction torque on the ground (N*m).
    ground_yaw_friction: float = 0.0

    @classmethod
    def off(cls, air_density: float = 1.225) -> "DragParams":
        """All drag terms zero; air density kept for the rotor model."""
        return cls(0.0, air_density, 0.0, 0.0, 0.0, 0.0, 0.0)

    @property
    def k_tau(self) -> tuple[float, float, float]:
        return (self.k_tau_x, self.k_tau_y, self.k_tau_z)


@dataclass(frozen=True)
class RotorParams:
    thrust_coeff: float
    torque_coeff: float = 0.0056
    disc_diameter: float = 0.1778
    max_rotor_speed: float = 250.0

    @classmethod
    def calibrated(cls, F_max: float, air_density: float, **kw) -> "RotorParams":
        """Pick the lumped thrust coefficient so both rotors at full speed give ``F_max``."""
        n_max = kw.get("max_rotor_speed", cls.max_rotor_speed)
        return cls(thrust_coeff=F_max / (2.0 * air_density * n_max**2), **kw)

    def max_rotor_torque(self, air_density: float) -> float:
        return self.torque_coeff * air_density * self.disc_diameter**5 * self.max_rotor_speed**2


# Every model symbol and the single field that carries it.
SYMBOLS: dict[str, tuple[str, str]] = {
    "M": ("VehicleParams", "total_mass"),
    "m": ("VehicleParams", "tilt_mechanism_mass"),
    "g": ("VehicleParams", "gravity"),
    "r": ("VehicleParams", "cage_radius"),
    "l": ("VehicleParams", "centroid_offset"),
    "C_k": ("VehicleParams", "motor_power_coeff"),
    "mu": ("VehicleParams", "static_friction_coeff"),
    "J_xx": ("VehicleParams", "J_xx"),
    "J_yy": ("VehicleParams", "J_yy"),
    "J_zz": ("VehicleParams", "J_zz"),
    "theta_min": ("VehicleParams", "theta_min"),
    "theta_max": ("VehicleParams", "theta_max"),
    "beta_min": ("VehicleParams", "beta_min"),
    "beta_max": ("VehicleParams", "beta_max"),
    "alpha_min": ("VehicleParams", "alpha_min"),
    "alpha_max": ("VehicleParams", "alpha_max"),
    "F_min": ("VehicleParams", "F_min"),
    "F_max": ("VehicleParams", "F_max"),
    "C_d": ("DragParams", "drag_coefficient"),
    "rho": ("DragParams", "air_density"),
    "A": ("DragParams", "frontal_area"),
    "k_tau_x": ("DragParams", "k_tau_x"),
    "k_tau_y": ("DragParams", "k_tau_y"),
    "k_tau_z": ("DragParams", "k_tau_z"),
    "C_T": ("RotorParams", "thrust_coeff"),
    "C_p": ("RotorParams", "torque_coeff"),
    "D": ("RotorParams", "disc_diameter"),
    "n_max": ("RotorParams", "max_rotor_speed"),
    "n1": ("RotorSpeeds", "n1"),
    "n2": ("RotorSpeeds", "n2"),
    "x": ("VehicleState", "x"),
    "y": ("VehicleState", "y"),
    "z": ("VehicleState", "z"),
    "phi": ("VehicleState", "phi"),
    "theta": ("VehicleState", "theta"),
    "psi": ("VehicleState", "psi"),
    "alpha": ("ActuatorCommand", "alpha"),
    "beta": ("ActuatorCommand", "beta"),
    "F": ("ActuatorCommand", "thrust"),
    "tau_p": ("ActuatorCommand", "rotor_torque"),
    "gamma": ("SlopeProfile", "gamma"),
    "tau_all": ("GroundForces", "net_torque"),
    "f": ("GroundForces", "friction"),
    "F_N": ("GroundForces", "normal_force"),
    "f_max": ("GroundForces", "max_friction"),
    "v_b": ("VehicleState", "velocity"),  # speed along the heading
    "P": ("PowerBreakdown", "total"),
    "P_p": ("PowerBreakdown", "motor"),
    "P_s": ("PowerBreakdown", "servo"),
}

_VEHICLE_REQUIRED = (
    "total_mass", "tilt_mechanism_mass", "gravity", "cage_radius", "centroid_offset",
    "motor_power_coeff", "static_friction_coeff", "J_yy",
    "theta_min", "theta_max", "beta_min", "beta_max", "F_min", "F_max",
)


def _section(doc: dict, name: str, required: bool) -> dict:
    if name not in doc:
        if required:
            raise MissingKey(name)
        return {}
    sec = doc[name]
    if not isinstance(sec, dict):
        raise ValidationError([f"{name!r} must be an object"])
    return sec


def _check_keys(sec: dict, cls, section: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(sec) - known)
    if unknown:
        raise ValidationError([f"unknown key {section}.{k}" for k in unknown])
    for k, v in sec.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError([f"{section}.{k} must be a number"])


def load_params(config_text: str) -> tuple[VehicleParams, DragParams, RotorParams]:
    """Parse and validate a JSON parameter document.

    Raises ``ParseError`` for malformed JSON, ``MissingKey`` for an absent
    required field and ``ValidationError`` listing every violated invariant.
    """
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", 1, 1)

    unit = doc.get("angle_unit", "rad")
    if unit not in ("deg", "rad"):
        raise ValidationError([f"angle_unit must be 'deg' or 'rad', got {unit!r}"])

    veh = dict(_section(doc, "vehicle", True))
    _check_keys(veh, VehicleParams, "vehicle")
    for key in _VEHICLE_REQUIRED:
        if key not in veh:
            raise MissingKey(key)
    if unit == "deg":
        for key in ANGLE_KEYS:
            if key in veh:
                veh[key] = math.radians(veh[key])
    vp = VehicleParams(**{k: float(v) for k, v in veh.items()})

    drag = dict(_section(doc, "drag", False))
    _check_keys(drag, DragParams, "drag")
    drag.setdefault("frontal_area", math.pi * vp.cage_radius**2)
    dp = DragParams(**{k: float(v) for k, v in drag.items()})

    rot = dict(_section(doc, "rotor", False))
    _check_keys(rot, RotorParams, "rotor")
    rot = {k: float(v) for k, v in rot.items()}
    if "thrust_coeff" in rot:
        rp = RotorParams(**rot)
    else:
        rp = RotorParams.calibrated(vp.F_max, dp.air_density, **rot)

    violations = validate_params(vp, dp, rp)
    if violations:
        raise ValidationError(violations)
    return vp, dp, rp


def load_params_file(path: str | Path) -> tuple[VehicleParams, DragParams, RotorParams]:
    return load_params(Path(path).read_text(encoding="utf-8"))


def validate_params(p: VehicleParams, d: DragParams, r: RotorParams) -> list[str]:
    """Return every violated invariant; an empty list means the set is valid."""
    checks = [
        ("M > m", p.total_mass > p.tilt_mechanism_mass),
        ("m > 0", p.tilt_mechanism_mass > 0),
        ("r > 0", p.cage_radius > 0),
        ("l > 0", p.centroid_offset > 0),
        ("g > 0", p.gravity > 0),
        ("J_xx > 0", p.J_xx > 0),
        ("J_yy > 0", p.J_yy > 0),
        ("J_zz > 0", p.J_zz > 0),
        ("theta_min < theta_max", p.theta_min < p.theta_max),
        ("beta_min < beta_max", p.beta_min < p.beta_max),
        ("alpha_min < alpha_max", p.alpha_min < p.alpha_max),
        ("F_min >= 0", p.F_min >= 0),
        ("F_min < F_max", p.F_min < p.F_max),
        ("mu >= 0", p.static_friction_coeff >= 0),
        ("C_k >= 0", p.motor_power_coeff >= 0),
        ("servo_bandwidth >= 0", p.servo_bandwidth >= 0),
        ("servo_damping >= 0", p.servo_damping >= 0),
        ("C_d >= 0", d.drag_coefficient >= 0),
        ("rho >= 0", d.air_density >= 0),
        ("A >= 0", d.frontal_area >= 0),
        ("k_tau_x >= 0", d.k_tau_x >= 0),
        ("k_tau_y >= 0", d.k_tau_y >= 0),
        ("k_tau_z >= 0", d.k_tau_z >= 0),
        ("ground_yaw_friction >= 0", d.ground_yaw_friction >= 0),
        ("C_T > 0", r.thrust_coeff > 0),
        ("C_p > 0", r.torque_coeff > 0),
        ("D > 0", r.disc_diameter > 0),
        ("n_max > 0", r.max_rotor_speed > 0),
    ]
    out = [name for name, ok in checks if not ok]
    full = r.thrust_coeff * d.air_density * 2.0 * r.max_rotor_speed**2
    if full < p.F_max * (1.0 - 1e-12):
        out.append("C_T*rho*2*n_max^2 >= F_max")
    for name, val in _all_values(p, d, r):
        if not math.isfinite(val):
            out.append(f"{name} finite")
    return out


def _all_values(p, d, r):
    for obj in (p, d, r):
        for f in fields(obj):
            yield f.name, getattr(obj, f.name)


def dump_params(p: VehicleParams, d: DragParams, r: RotorParams) -> str:
    """Serialize to JSON (radians); ``load_params`` reproduces the values exactly."""
    doc = {"angle_unit": "rad", "vehicle": asdict(p), "drag": asdict(d), "rotor": asdict(r)}
    return json.dumps(doc, indent=2)


def reference_config_path() -> Path:
    return Path(__file__).parent / "data" / "reference_vehicle.json"


def reference_params() -> tuple[VehicleParams, DragParams, RotorParams]:
    """The shipped reference vehicle."""
    return load_params_file(reference_config_path())
