"""Reference paths, the slope course profile and tracking-error metrics.

Paths are piecewise lines and circular arcs in the horizontal plane, flown or
driven at a per-segment nominal speed.  Arc length ``s`` is always measured
horizontally.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    pass


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class Line:
    start: tuple[float, float]
    end: tuple[float, float]
    speed: float

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    def heading(self, s: float = 0.0) -> float:
        return math.atan2(self.end[1] - self.start[1], self.end[0] - self.start[0])

    def point(self, s: float) -> tuple[float, float]:
        L = self.length
        u = s / L if L > 0 else 0.0
        return (self.start[0] + u * (self.end[0] - self.start[0]),
                self.start[1] + u * (self.end[1] - self.start[1]))

    def curvature(self) -> float:
        return 0.0

    def project(self, q) -> tuple[float, float]:
        """Closest local arc length and distance from ``q``."""
        ux, uy = math.cos(self.heading()), math.sin(self.heading())
        s = (q[0] - self.start[0]) * ux + (q[1] - self.start[1]) * uy
        s = min(max(s, 0.0), self.length)
        px, py = self.point(s)
        return s, math.hypot(q[0] - px, q[1] - py)

    def to_dict(self) -> dict:
        return {"type": "line", "start": list(self.start), "end": list(self.end),
                "speed": self.speed}


@dataclass(frozen=True)
class Arc:
    center: tuple[float, float]
    radius: float
    start_angle: float  # polar angle of the start point about the center
    sweep: float        # signed; positive is counter-clockwise
    speed: float

    @property
    def length(self) -> float:
        return abs(self.sweep) * self.radius

    def _angle(self, s: float) -> float:
        return self.start_angle + math.copysign(s / self.radius, self.sweep)

    def point(self, s: float) -> tuple[float, float]:
        a = self._angle(s)
        return (self.center[0] + self.radius * math.cos(a),
                self.center[1] + self.radius * math.sin(a))

    def heading(self, s: float = 0.0) -> float:
        return self._angle(s) + math.copysign(math.pi / 2, self.sweep)

    def curvature(self) -> float:
        return math.copysign(1.0 / self.radius, self.sweep)

    @property
    def start(self) -> tuple[float, float]:
        return self.point(0.0)

    @property
    def end(self) -> tuple[float, float]:
        return self.point(self.length)

    def project(self, q) -> tuple[float, float]:
        dx, dy = q[0] - self.center[0], q[1] - self.center[1]
        rel = math.atan2(dy, dx) - self.start_angle
        if self.sweep < 0:
            rel = -rel
        rel %= 2.0 * math.pi
        span = abs(self.sweep)
        if rel > span:
            # beyond the end: pick the nearer endpoint
            rel = span if rel - span < 2.0 * math.pi - rel else 0.0
        s = rel * self.radius
        px, py = self.point(s)
        return s, math.hypot(q[0] - px, q[1] - py)

    def to_dict(self) -> dict:
        return {"type": "arc", "center": list(self.center), "radius": self.radius,
                "start_angle": self.start_angle, "sweep": self.sweep, "speed": self.speed}


def _circle_hits(seg, q, radius: float) -> list[float]:
    """Local arc lengths where ``seg`` crosses the circle of ``radius`` about ``q``."""
    out = []
    if isinstance(seg, Line):
        L = seg.length
        h = seg.heading()
        ux, uy = math.cos(h), math.sin(h)
        wx, wy = seg.start[0] - q[0], seg.start[1] - q[1]
        b = wx * ux + wy * uy
        c = wx * wx + wy * wy - radius * radius
        disc = b * b - c
        if disc >= 0:
            for u in (-b - math.sqrt(disc), -b + math.sqrt(disc)):
                if 0.0 <= u <= L:
                    out.append(u)
        return out
    dx, dy = q[0] - seg.center[0], q[1] - seg.center[1]
    dq = math.hypot(dx, dy)
    R = seg.radius
    if dq == 0.0 or dq > R + radius or dq < abs(R - radius):
        return out
    # polar angle offsets of the two circle-circle intersections
    cosw = (R * R + dq * dq - radius * radius) / (2 * R * dq)
    w = math.acos(max(-1.0, min(1.0, cosw)))
    base = math.atan2(dy, dx)
    for ang in (base - w, base + w):
        rel = ang - seg.start_angle
        if seg.sweep < 0:
            rel = -rel
        rel %= 2.0 * math.pi
        if rel <= abs(seg.sweep) + 1e-12:
            out.append(rel * R)
    return out


def _segment_from_dict(d: dict):
    kind = d["type"]
    if kind == "line":
        return Line(tuple(d["start"]), tuple(d["end"]), float(d["speed"]))
    if kind == "arc":
        return Arc(tuple(d["center"]), float(d["radius"]), float(d["start_angle"]),
                   float(d["sweep"]), float(d["speed"]))
    raise GeometryError(f"unknown segment type {kind!r}")


@dataclass(frozen=True)
class Reference:
    position: np.ndarray
    tangent: np.ndarray
    speed: float
    acceleration: np.ndarray
    s: float


@dataclass
class Path:
    segments: list
    altitude: float = 0.0
    closed: bool = False
    _s0: list = field(init=False, repr=False)
    _t0: list = field(init=False, repr=False)

    def __post_init__(self):
        if not self.segments:
            raise GeometryError("path needs at least one segment")
        for a, b in zip(self.segments, self.segments[1:]):
            if math.dist(a.point(a.length), b.point(0.0)) > 1e-6:
                raise GeometryError("segments are not position-continuous")
        for seg in self.segments:
            if seg.speed <= 0:
                raise GeometryError("segment speed must be positive")
        self._s0 = [0.0]
        self._t0 = [0.0]
        for seg in self.segments:
            self._s0.append(self._s0[-1] + seg.length)
            self._t0.append(self._t0[-1] + seg.length / seg.speed)

    @property
    def length(self) -> float:
        return self._s0[-1]

    @property
    def duration(self) -> float:
        return self._t0[-1]

    @property
    def start(self) -> np.ndarray:
        x, y = self.segments[0].point(0.0)
        return np.array([x, y, self.altitude])

    def _at_s(self, s: float):
        i = min(max(bisect.bisect_right(self._s0, s) - 1, 0), len(self.segments) - 1)
        return i, s - self._s0[i]

    def point_at(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.length)
        i, ls = self._at_s(s)
        x, y = self.segments[i].point(ls)
        return np.array([x, y, self.altitude])

    def heading_at(self, s: float) -> float:
        s = min(max(s, 0.0), self.length)
        i, ls = self._at_s(s)
        return self.segments[i].heading(ls)

    def curvature_at(self, s: float) -> float:
        return self.segments[self._at_s(min(max(s, 0.0), self.length))[0]].curvature()

    def speed_at(self, s: float) -> float:
        return self.segments[self._at_s(min(max(s, 0.0), self.length))[0]].speed

    def project(self, q, hint: float | None = None, window: float | None = None) -> float:
        """Arc length of the closest path point to ``q`` (horizontal).

        ``hint``/``window`` restrict the search to segments overlapping
        ``[hint - window, hint + window]`` so a crossing path is not confused.
        """
        best = (math.inf, 0.0)
        for i, seg in enumerate(self.segments):
            if hint is not None and window is not None:
                if self._s0[i + 1] < hint - window or self._s0[i] > hint + window:
                    continue
            ls, dist = seg.project(q)
            if dist < best[0] - 1e-12:
                best = (dist, self._s0[i] + ls)
        return best[1]

    def lookahead(self, q, distance: float, s_from: float) -> np.ndarray:
        """First path point beyond ``s_from`` that is ``distance`` away from ``q``.

        Falls back to the path end when the circle around ``q`` does not
        reach the remaining path.
        """
        q = (float(q[0]), float(q[1]))
        for i, seg in enumerate(self.segments):
            if self._s0[i + 1] < s_from:
                continue
            lo = max(s_from - self._s0[i], 0.0)
            hits = [h for h in _circle_hits(seg, q, distance) if h >= lo - 1e-12]
            if hits:
                return self.point_at(self._s0[i] + min(hits))
        return self.point_at(self.length)

    def to_dict(self) -> dict:
        return {"altitude": self.altitude, "closed": self.closed,
                "segments": [s.to_dict() for s in self.segments]}

    @classmethod
    def from_dict(cls, d: dict) -> "Path":
        return cls([_segment_from_dict(s) for s in d["segments"]],
                   altitude=float(d.get("altitude", 0.0)), closed=bool(d.get("closed", False)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Path":
        return cls.from_dict(json.loads(text))


def reference_at(path: Path, t: float) -> Reference:
    """Point, unit tangent, speed and centripetal acceleration at time ``t``."""
    if t < 0.0 or t > path.duration * (1 + 1e-12) + 1e-12:
        raise OutOfRange(f"t={t} outside [0, {path.duration}]")
    i = min(max(bisect.bisect_right(path._t0, t) - 1, 0), len(path.segments) - 1)
    seg = path.segments[i]
    ls = min((t - path._t0[i]) * seg.speed, seg.length)
    x, y = seg.point(ls)
    h = seg.heading(ls)
    tangent = np.array([math.cos(h), math.sin(h), 0.0])
    k = seg.curvature()
    normal = np.array([-math.sin(h), math.cos(h), 0.0])
    return Reference(np.array([x, y, path.altitude]), tangent, seg.speed,
                     seg.speed**2 * k * normal, path._s0[i] + ls)


def _fillet(corner, d_in, d_out, radius, speed):
    """Arc tangent to the incoming and outgoing directions of a corner."""
    cross = d_in[0] * d_out[1] - d_in[1] * d_out[0]
    dot = d_in[0] * d_out[0] + d_in[1] * d_out[1]
    turn = math.atan2(cross, dot)
    half = abs(turn) / 2.0
    cut = radius * math.tan(half)
    p_in = (corner[0] - cut * d_in[0], corner[1] - cut * d_in[1])
    side = math.copysign(1.0, turn)
    nx, ny = -side * d_in[1], side * d_in[0]
    center = (p_in[0] + radius * nx, p_in[1] + radius * ny)
    start_angle = math.atan2(p_in[1] - center[1], p_in[0] - center[0])
    return cut, Arc(center, radius, start_angle, turn, speed)


def build_flight_square(arc_radius_large: float = 1.0, arc_radius_small: float = 0.3,
                        side_speed: float = 0.5, area=(5.0, 4.0), margin: float = 0.5,
                        altitude: float = 1.0) -> Path:
    """Closed clockwise A-B-C-D-A circuit with filleted corners at B, C and D."""
    if arc_radius_large <= 0 or arc_radius_small <= 0:
        raise GeometryError("fillet radii must be positive")
    W, H = area
    A = (margin, margin)
    B = (margin, H - margin)
    C = (W - margin, H - margin)
    D = (W - margin, margin)
    corners = [A, B, C, D, A]
    radii = {1: arc_radius_large, 2: arc_radius_large, 3: arc_radius_small}

    dirs = []
    for p0, p1 in zip(corners, corners[1:]):
        L = math.dist(p0, p1)
        if L <= 0:
            raise GeometryError("degenerate side")
        dirs.append(((p1[0] - p0[0]) / L, (p1[1] - p0[1]) / L))

    cuts, arcs = {}, {}
    for k in (1, 2, 3):
        cuts[k], arcs[k] = _fillet(corners[k], dirs[k - 1], dirs[k], radii[k], side_speed)

    segs = []
    cursor = A
    for side in range(4):
        p1 = corners[side + 1]
        end_cut = cuts.get(side + 1, 0.0)
        start_cut = cuts.get(side, 0.0)
        if start_cut + end_cut > math.dist(corners[side], p1) + 1e-12:
            raise GeometryError("adjacent fillets overlap")
        d = dirs[side]
        end = (p1[0] - end_cut * d[0], p1[1] - end_cut * d[1])
        if math.dist(cursor, end) > 1e-12:
            segs.append(Line(cursor, end, side_speed))
        if side + 1 in arcs:
            arc = arcs[side + 1]
            segs.append(arc)
            cursor = arc.end
    return Path(segs, altitude=altitude, closed=True)


@dataclass(frozen=True)
class SlopeProfile:
    """Piecewise-constant inclination along horizontal arc length.

    ``breaks`` are the arc lengths where the inclination changes;
    ``gammas[i]`` applies on ``[breaks[i-1], breaks[i])`` with
    ``gammas[0]`` before the first break.
    """

    breaks: tuple[float, ...]
    gammas: tuple[float, ...]

    def __post_init__(self):
        if len(self.gammas) != len(self.breaks) + 1:
            raise GeometryError("need one more inclination than breakpoints")
        if any(abs(g) >= math.pi / 2 for g in self.gammas):
            raise GeometryError("|gamma| must be below 90 deg")
        if list(self.breaks) != sorted(self.breaks):
            raise GeometryError("breakpoints must be increasing")

    def gamma(self, s: float) -> float:
        return self.gammas[bisect.bisect_right(self.breaks, s)]

    def height(self, s: float) -> float:
        """Surface height relative to the first breakpoint."""
        edges = tuple(self.breaks) + (math.inf,)
        h = 0.0
        for g, lo, hi in zip(self.gammas[1:], edges, edges[1:]):
            if s <= lo:
                break
            h += math.tan(g) * (min(s, hi) - lo)
        return h

    def to_dict(self) -> dict:
        return {"breaks": list(self.breaks), "gammas": list(self.gammas)}


@dataclass(frozen=True)
class GroundCourse:
    path: Path
    slope: SlopeProfile
    slope_start: float
    slope_end: float


def build_ground_course(straight: float = 2.5, turn_radius: float = 1.0, speed: float = 0.1,
                        gentle=(math.radians(12.5), 0.706), top: float = 0.9,
                        steep=(math.radians(25.0), 0.344), run_in: float = 0.5,
                        run_out: float = 0.5, start=(1.0, 0.5)) -> GroundCourse:
    """Straight, semicircular left turn, then the up-flat-down ramp.

    Ramp sides are given as (inclination, surface length).  Heights follow from
    the lengths and angles, so the exit sits a few millimetres off the entry
    level (the rounded ramp height is not enforced).
    """
    x0, y0 = start
    l1 = Line((x0, y0), (x0 + straight, y0), speed)
    arc = Arc((x0 + straight, y0 + turn_radius), turn_radius, -math.pi / 2, math.pi, speed)
    up_run = gentle[1] * math.cos(gentle[0])
    down_run = steep[1] * math.cos(steep[0])
    back = run_in + up_run + top + down_run + run_out
    ax, ay = arc.end
    l2 = Line((ax, ay), (ax - back, ay), speed)
    path = Path([l1, arc, l2])

    s_up = l1.length + arc.length + run_in
    breaks = (s_up, s_up + up_run, s_up + up_run + top, s_up + up_run + top + down_run)
    slope = SlopeProfile(breaks, (0.0, gentle[0], 0.0, -steep[0], 0.0))
    return GroundCourse(path, slope, breaks[0], breaks[-1])


@dataclass
class ErrorReport:
    t: np.ndarray
    e_x: np.ndarray
    e_y: np.ndarray
    e_z: np.ndarray
    rms: tuple[float, float, float]
    max_abs: tuple[float, float, float]
    max_deviation: float
    bounds: tuple[float, float] = (0.05, 0.10)

    @property
    def within_bounds(self) -> bool:
        axis_bound, overall = self.bounds
        return max(self.max_abs) <= axis_bound and self.max_deviation <= overall

    def summary(self) -> dict:
        return {"rms": list(self.rms), "max_abs": list(self.max_abs),
                "max_deviation": self.max_deviation, "axis_bound": self.bounds[0],
                "overall_bound": self.bounds[1], "within_bounds": self.within_bounds}


def error_report(t, positions, path: Path, bounds=(0.05, 0.10)) -> ErrorReport:
    """Per-axis position error against the time-parameterized reference.

    ``positions`` is an (N, 3) array sampled at times ``t``; samples past the
    end of the path are compared with the final point.
    """
    t = np.asarray(t, dtype=float)
    pos = np.asarray(positions, dtype=float)
    if len(t) == 0:
        raise ValueError("telemetry is empty")
    ref = np.array([reference_at(path, min(tk, path.duration)).position for tk in t])
    err = pos - ref
    rms = tuple(float(v) for v in np.sqrt(np.mean(err**2, axis=0)))
    mx = tuple(float(v) for v in np.max(np.abs(err), axis=0))
    dev = float(np.max(np.linalg.norm(err, axis=1)))
    return ErrorReport(t, err[:, 0], err[:, 1], err[:, 2], rms, mx, dev, tuple(bounds))
