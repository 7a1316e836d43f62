"""Command-line entry point: simulate, optimize, sweep, validate.

Every command writes ``<out>/<command>-<timestamp>-<seed>/`` containing a
manifest (written first, finalized last), copies of the resolved config files
and the command's results.  ``--replay MANIFEST`` reruns a recorded command
with its recorded arguments and configs.

Exit codes: 0 success, 1 configuration or argument error, 2 constraint halt,
infeasible request or failed validation, 3 numerical divergence.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from tiltcage import __version__
from tiltcage.actuation import ActuatorCommand, Infeasible
from tiltcage.control import (AerialController, GroundController, GroundLoopState, GroundSetpoint,
                              default_gains_path, energy_saving_control, load_gains)
from tiltcage.dynamics import (aerial_derivative, ground_thrust_direction, inclined_derivative,
                               inclined_forces, planar_derivative)
from tiltcage.energy import (Sweep, SweepPoint, brute_force_allocation, optimal_allocation,
                             sweep_acceleration)
from tiltcage.params import ConfigError, load_params, reference_config_path
from tiltcage.scenarios import GeometryError, Path as RefPath, build_flight_square, build_ground_course
from tiltcage.simulation import (AerialScenario, GroundScenario, MeasurementNoise,
                                 NumericalDivergence, SimConfig, rk4_step, simulate)

CONFIG_ENV = "TILTCAGE_CONFIG"
GAINS_ENV = "TILTCAGE_GAINS"
SCENARIOS = ("flight-square", "ground-course", "hover", "custom:<path-file>")

EXIT_OK, EXIT_CONFIG, EXIT_CONSTRAINT, EXIT_DIVERGENCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _scenario_defaults_path() -> Path:
    return Path(__file__).parent / "data" / "scenarios.json"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Output directory plus manifest bookkeeping for one command."""

    def __init__(self, command: str, args: dict, out: str, seed: int):
        stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        base = Path(out) / f"{command}-{stamp}-{seed}"
        path, k = base, 1
        while path.exists():
            path = base.with_name(f"{base.name}.{k}")
            k += 1
        path.mkdir(parents=True)
        self.dir = path
        self.manifest = {"command": command, "version": __version__, "seed": seed,
                         "output_dir": str(path),
                         "arguments": {k: v for k, v in args.items() if k != "func"}, "configs": {},
                         "artifacts": {}, "status": "running"}
        self._write()

    def _write(self):
        (self.dir / "manifest.json").write_text(json.dumps(self.manifest, indent=2) + "\n")

    def add_config(self, name: str, text: str, source: str):
        p = self.dir / "config" / name
        p.parent.mkdir(exist_ok=True)
        p.write_text(text)
        self.manifest["configs"][name] = {"source": source, "copy": str(p.relative_to(self.dir)),
                                          "sha256": _sha256(p)}

    def write(self, name: str, text: str) -> Path:
        p = self.dir / name
        p.write_text(text, encoding="utf-8")
        return p

    def finish(self, status: str, exit_code: int):
        for p in sorted(self.dir.iterdir()):
            if p.is_file() and p.name != "manifest.json":
                self.manifest["artifacts"][p.name] = _sha256(p)
        self.manifest["status"] = status
        self.manifest["exit_code"] = exit_code
        self._write()


def _read_config(arg: str | None, env: str, default: Path) -> tuple[str, str]:
    src = arg or os.environ.get(env) or str(default)
    try:
        return Path(src).read_text(encoding="utf-8"), src
    except OSError as exc:
        raise ConfigError(f"cannot read config {src!r}: {exc.strerror}") from None


def _load_all(args):
    ptext, psrc = _read_config(args.config, CONFIG_ENV, reference_config_path())
    p, d, rp = load_params(ptext)
    if getattr(args, "mu", None) is not None:
        if args.mu < 0:
            raise ConfigError("--mu must be >= 0")
        p = p.replace(static_friction_coeff=args.mu)
    return (ptext, psrc), (p, d, rp)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and not math.isfinite(o):
        return None
    return str(o)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default, allow_nan=False) + "\n"


def _clean(obj):
    """Replace non-finite floats by None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# ---------------------------------------------------------------- simulate

def _scenario_config(name: str, args) -> dict:
    table = json.loads(_scenario_defaults_path().read_text())
    key = "custom" if name.startswith("custom:") else name
    if key not in table:
        raise UsageError(f"unknown scenario {name!r}; valid: {', '.join(SCENARIOS)}")
    cfg = table[key]
    for flag, field in (("dt", "dt"), ("duration", "duration"), ("controller_rate", "controller_rate"),
                        ("slip_policy", "slip_policy")):
        v = getattr(args, flag, None)
        if v is not None:
            cfg[field] = v
    for flag, field in (("noise_pos", "position_sigma"), ("noise_yaw", "yaw_sigma"),
                        ("dropout", "dropout_prob")):
        v = getattr(args, flag, None)
        if v is not None:
            cfg["noise"][field] = v
    return cfg


def _build(name: str, cfg: dict, p, d, rp, gains):
    aerial_gains, ground_gains = gains
    geo = cfg.get("geometry", {})
    if name == "flight-square":
        path = build_flight_square(geo.get("arc_radius_large", 1.0), geo.get("arc_radius_small", 0.3),
                                   geo.get("side_speed", 0.5), altitude=geo.get("altitude", 1.0))
        return AerialScenario(p, d, path), AerialController(aerial_gains, p, d, rp), path.to_dict()
    if name == "hover":
        sc = AerialScenario(p, d, None, hover_point=geo.get("point", (0.0, 0.0, 1.0)))
        return sc, AerialController(aerial_gains, p, d, rp), None
    if name == "ground-course":
        course = build_ground_course(speed=geo.get("speed", 0.1))
        sc = GroundScenario(p, d, course, max_duration=cfg["duration"])
        ctl = GroundController(ground_gains, p, rp, d.air_density)
        return sc, ctl, {"path": course.path.to_dict(), "slope": course.slope.to_dict()}
    if name.startswith("custom:"):
        fname = name.split(":", 1)[1]
        try:
            path = RefPath.from_json(Path(fname).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read path file {fname!r}: {exc.strerror}") from None
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad path file {fname!r}: {exc}") from None
        return AerialScenario(p, d, path), AerialController(aerial_gains, p, d, rp), path.to_dict()
    raise UsageError(f"unknown scenario {name!r}; valid: {', '.join(SCENARIOS)}")


def cmd_simulate(args) -> int:
    (ptext, psrc), (p, d, rp) = _load_all(args)
    gtext, gsrc = _read_config(args.gains, GAINS_ENV, default_gains_path())
    try:
        gains = load_gains(gtext)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad gains file {gsrc!r}: {exc}") from None
    cfg = _scenario_config(args.scenario, args)
    try:
        sim_cfg = SimConfig(dt=cfg["dt"], duration=cfg["duration"], controller_rate=cfg["controller_rate"],
                            slip_policy=cfg["slip_policy"], noise=MeasurementNoise(**cfg["noise"]),
                            seed=args.seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    scenario, controller, geometry = _build(args.scenario, cfg, p, d, rp, gains)

    run = Run("simulate", vars(args), args.out, args.seed)
    run.add_config("params.json", ptext, psrc)
    run.add_config("gains.json", gtext, gsrc)
    run.add_config("scenario.json", _dumps({"name": args.scenario, **cfg}), "resolved")
    if geometry is not None:
        run.write("path.json", _dumps(geometry))

    code, status = EXIT_OK, "ok"
    t0 = time.perf_counter()
    try:
        tel = simulate(scenario, controller, p, sim_cfg, rp)
    except NumericalDivergence as exc:
        tel = exc.telemetry
        code, status = EXIT_DIVERGENCE, f"NumericalDivergence at step {exc.step}"
        tel.summary["divergence_step"] = exc.step
    if tel.summary.get("halt_reason"):
        code, status = EXIT_CONSTRAINT, f"halted: {tel.summary['halt_reason']}"
    tel.summary["wall_time_s"] = round(time.perf_counter() - t0, 3)
    run.write("telemetry.csv", tel.to_csv())
    summary = _clean({"scenario": args.scenario, "status": status, **tel.summary})
    summary.pop("wall_time_s", None)  # keep summaries reproducible byte for byte
    run.write("summary.json", _dumps(summary))
    if args.plot:
        from tiltcage.plotting import plot_tracking
        plot_tracking(tel, run.dir)
    run.finish(status, code)
    _report(run, summary, ("status", "steps", "halt_reason", "max_slip_ratio", "errors"))
    return code


def _report(run: Run, summary: dict, keys):
    print(f"output: {run.dir}")
    for k in keys:
        if k in summary:
            print(f"  {k}: {json.dumps(summary[k], default=_json_default)}")


# ---------------------------------------------------------------- optimize

def cmd_optimize(args) -> int:
    if not (math.isfinite(args.accel) and args.accel > 0):
        raise UsageError(f"--accel must be a positive acceleration, got {args.accel}")
    (ptext, psrc), (p, d, rp) = _load_all(args)
    run = Run("optimize", vars(args), args.out, args.seed)
    run.add_config("params.json", ptext, psrc)
    try:
        res = optimal_allocation(args.accel, p)
    except Infeasible as exc:
        run.write("summary.json", _dumps({"a_des": args.accel, "infeasible": str(exc),
                                          "binding_constraint": exc.bound}))
        run.write("telemetry.csv", "")
        run.finish("infeasible", EXIT_CONSTRAINT)
        print(f"infeasible: {exc} (binding: {exc.bound})", file=sys.stderr)
        return EXIT_CONSTRAINT
    out = res.as_dict()
    if args.oracle:
        orc = brute_force_allocation(args.accel, p)
        gap = abs(res.power.total - orc.power.total) / max(orc.power.total, 1e-9)
        out["oracle"] = {**orc.as_dict(), "relative_gap": gap}
    run.write("summary.json", _dumps(_clean(out)))
    run.write("telemetry.csv", Sweep((SweepPoint(args.accel, res),), ()).to_csv())
    run.finish("ok", EXIT_OK)
    print(f"output: {run.dir}")
    print(f"  stage {res.stage}: theta={math.degrees(res.theta):.4f} deg, "
          f"beta={math.degrees(res.beta):.2f} deg, F={res.thrust:.6g} N, P={res.power.total:.6g} W")
    print(f"  active constraints: {', '.join(res.active_constraints) or 'none'}")
    if args.oracle:
        print(f"  oracle P={out['oracle']['P_total']:.6g} W, relative gap {out['oracle']['relative_gap']:.3e}")
    return EXIT_OK


# ------------------------------------------------------------------- sweep

def cmd_sweep(args) -> int:
    if args.n < 2 or not (0 < args.a_from < args.a_to):
        raise UsageError("need 0 < --from < --to and --n >= 2")
    (ptext, psrc), (p, d, rp) = _load_all(args)
    run = Run("sweep", vars(args), args.out, args.seed)
    run.add_config("params.json", ptext, psrc)
    sw = sweep_acceleration(args.a_from, args.a_to, args.n, p)
    run.write("telemetry.csv", sw.to_csv())
    summary = {"n_samples": args.n, "feasible": sum(pt.feasible for pt in sw.points),
               "stages": [pt.result.stage if pt.result else None for pt in sw.points],
               "boundaries": [{"from": a, "to": b, "a_des": x} for a, b, x in sw.boundaries]}
    run.write("summary.json", _dumps(summary))
    if args.plot:
        from tiltcage.plotting import plot_sweep
        plot_sweep(sw, run.dir)
    run.finish("ok", EXIT_OK)
    print(f"output: {run.dir}")
    for a, b, x in sw.boundaries:
        print(f"  stage {a} -> {b} at a = {x:.7g} m/s^2")
    return EXIT_OK


# ---------------------------------------------------------------- validate

def _check_reduction(p, d) -> tuple[bool, str]:
    rng = np.random.Generator(np.random.PCG64(1))
    worst = 0.0
    for _ in range(200):
        s = rng.uniform(-1, 1, 12)
        s[7] = rng.uniform(p.theta_min, p.theta_max)
        c = ActuatorCommand(0.0, rng.uniform(p.beta_min, p.beta_max), rng.uniform(0, 0.5),
                            rng.uniform(-0.01, 0.01), rng.uniform(p.theta_min, p.theta_max))
        a = planar_derivative(s, c, p, d, on_slip="ignore")
        b = inclined_derivative(s, c, 0.0, p, d, on_slip="ignore")
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst <= 1e-12, f"max |diff| = {worst:.1e}"


def _check_rk4() -> tuple[bool, str]:
    def f(y):
        return np.array([y[1], -math.sin(y[0])])

    def run(dt):
        y = np.array([1.0, 0.0])
        for _ in range(int(round(2.0 / dt))):
            y = rk4_step(f, y, dt)
        return y

    ref = run(1e-4)
    e1 = np.linalg.norm(run(0.1) - ref)
    e2 = np.linalg.norm(run(0.05) - ref)
    order = math.log2(e1 / e2)
    return abs(order - 4.0) <= 0.2, f"order {order:.3f}"


def _check_oracle(p) -> tuple[bool, str]:
    worst = 0.0
    for a in np.geomspace(0.001, 0.02, 20):
        s = optimal_allocation(float(a), p)
        o = brute_force_allocation(float(a), p, theta_step=math.radians(0.01))
        worst = max(worst, abs(s.power.total - o.power.total) / max(o.power.total, 1e-9))
    return worst <= 1e-3, f"max relative gap {worst:.2e} (0.01 deg tilt grid)"


def _check_rotor_plane(p, rp, d) -> tuple[bool, str]:
    gains = load_gains()[1]
    worst = 0.0
    for th in np.linspace(p.theta_min, p.theta_max, 31):
        s = np.zeros(12)
        s[7] = th
        res = energy_saving_control(s, GroundSetpoint(0.05, 0.3), gains, p, rp,
                                    d.air_density, GroundLoopState())
        n = ground_thrust_direction(res.command.beta, th, 0.0)
        worst = max(worst, float(np.linalg.norm(n - np.array([0.0, 0.0, 1.0]))))
    return worst <= 1e-9, f"max deviation {worst:.1e}"


def _check_hover(p, d) -> tuple[bool, str]:
    s = np.zeros(12)
    s[2] = 1.0
    dd = aerial_derivative(s, ActuatorCommand(0.0, 0.0, p.total_mass * p.gravity, 0.0), p, d)
    worst = float(np.max(np.abs(dd)))
    return worst <= 1e-12, f"max |derivative| = {worst:.1e}"


def _check_no_slip(p) -> tuple[bool, str]:
    """Informational: can the slopes of the ground course be held without slipping?"""
    worst = 0.0
    for gamma, beta in ((math.radians(12.5), p.beta_max), (math.radians(-25.0), p.beta_min)):
        M, g, r = p.total_mass, p.gravity, p.cage_radius
        F = (M * g * r * math.sin(gamma) + p.tilt_mechanism_mass * g * p.centroid_offset * math.sin(gamma)) \
            / (r * math.sin(beta))
        gf = inclined_forces(F, beta, 0.0, gamma, p)
        worst = max(worst, gf.slip_ratio)
    return worst < 1.0, f"max |f|/f_max holding on slopes = {worst:.3f}"


def cmd_validate(args) -> int:
    (ptext, psrc), (p, d, rp) = _load_all(args)
    checks = [
        ("gamma -> 0 reduction", lambda: _check_reduction(p, d), True),
        ("RK4 convergence order", _check_rk4, True),
        ("oracle agreement", lambda: _check_oracle(p), True),
        ("rotor-plane invariant", lambda: _check_rotor_plane(p, rp, d), True),
        ("hover fixed point", lambda: _check_hover(p, d), True),
        ("no-slip on course slopes", lambda: _check_no_slip(p), False),
    ]
    failed = False
    width = max(len(c[0]) for c in checks)
    for name, fn, required in checks:
        ok, detail = fn()
        tag = "PASS" if ok else ("FAIL" if required else "FLAG")
        failed |= required and not ok
        print(f"{name:<{width}}  {tag}  {detail}")
    return EXIT_CONSTRAINT if failed else EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tiltcage", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, outputs=True):
        sp.add_argument("--config", help=f"vehicle parameter JSON (default: ${CONFIG_ENV} or shipped)")
        sp.add_argument("--mu", type=float, help="override the static friction coefficient")
        if outputs:
            sp.add_argument("--out", default="runs", help="output root directory")
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("--replay", metavar="MANIFEST", help="rerun with a recorded manifest")

    s = sub.add_parser("simulate", help="closed-loop simulation of a scenario")
    common(s)
    s.add_argument("--scenario", default="flight-square", help=f"one of {', '.join(SCENARIOS)}")
    s.add_argument("--gains", help=f"controller gain JSON (default: ${GAINS_ENV} or shipped)")
    s.add_argument("--dt", type=float)
    s.add_argument("--duration", type=float)
    s.add_argument("--controller-rate", dest="controller_rate", type=float)
    s.add_argument("--slip-policy", dest="slip_policy", choices=("halt", "clamp", "warn"))
    s.add_argument("--noise-pos", dest="noise_pos", type=float)
    s.add_argument("--noise-yaw", dest="noise_yaw", type=float)
    s.add_argument("--dropout", type=float)
    s.add_argument("--plot", action="store_true", help="also render PNG figures")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("optimize", help="energy-optimal allocation for one acceleration")
    common(o)
    o.add_argument("--accel", type=float, required=True)
    o.add_argument("--oracle", action="store_true", help="compare with the brute-force grid")
    o.set_defaults(func=cmd_optimize)

    w = sub.add_parser("sweep", help="optimal allocation across an acceleration range")
    common(w)
    w.add_argument("--from", dest="a_from", type=float, default=0.001)
    w.add_argument("--to", dest="a_to", type=float, default=0.02)
    w.add_argument("--n", type=int, default=50)
    w.add_argument("--plot", action="store_true", help="also render PNG figures")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="run the invariant checks")
    common(v, outputs=False)
    v.set_defaults(func=cmd_validate)
    return ap


def _apply_replay(args, parser):
    man = json.loads(Path(args.replay).read_text(encoding="utf-8"))
    if man.get("command") != args.command:
        raise UsageError(f"manifest records {man.get('command')!r}, not {args.command!r}")
    base = Path(args.replay).parent
    recorded = dict(man["arguments"])
    for key in ("func", "replay", "out"):
        recorded.pop(key, None)
    for k, v in recorded.items():
        setattr(args, k, v)
    cfgs = man.get("configs", {})
    if "params.json" in cfgs:
        args.config = str(base / cfgs["params.json"]["copy"])
    if "gains.json" in cfgs:
        args.gains = str(base / cfgs["gains.json"]["copy"])
    args.replay = None
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "replay", None):
            args = _apply_replay(args, parser)
        return args.func(args)
    except (ConfigError, UsageError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
