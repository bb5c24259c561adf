"""Special-relativistic event geometry and finite-speed hidden-influence models.

Units are SI (meters, seconds) unless an event is built with
``natural=True``, in which case c = 1. Mixing the two raises.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .correlations import BellLabError

C_SI = 299_792_458.0
V_CAP = 1e9
SIDEREAL_OMEGA = 7.2921159e-5
EARTH_RADIUS = 6_371_000.0
LIGHTLIKE_REL_TOL = 1e-9


class ConfigurationError(BellLabError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpacetimeEvent:
    party: str
    kind: str  # "input_chosen" | "outcome_registered"
    position: np.ndarray
    time: float
    natural: bool = False

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64).reshape(-1)
        if pos.size == 1:
            pos = np.array([pos[0], 0.0, 0.0])
        elif pos.size == 2:
            pos = np.array([pos[0], pos[1], 0.0])
        if pos.shape != (3,):
            raise ValueError("position must have at most 3 components")
        if not np.all(np.isfinite(pos)) or not math.isfinite(self.time):
            raise ValueError("event coordinates must be finite")
        if self.kind not in ("input_chosen", "outcome_registered"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "time", float(self.time))

    @property
    def c(self) -> float:
        return 1.0 if self.natural else C_SI

    def shifted(self, dt: float) -> "SpacetimeEvent":
        return SpacetimeEvent(self.party, self.kind, self.position, self.time + dt, self.natural)

    def to_dict(self) -> dict:
        return {"party": self.party, "kind": self.kind, "position": self.position.tolist(), "time": self.time}


def _c_of(*events: SpacetimeEvent) -> float:
    if len({e.natural for e in events}) > 1:
        raise ValueError("cannot mix SI and natural-unit events")
    return events[0].c


@dataclass(frozen=True)
class Interval:
    kind: str  # "timelike" | "lightlike" | "spacelike"
    value: float  # c^2 dt^2 - |dx|^2


def interval(e1: SpacetimeEvent, e2: SpacetimeEvent) -> Interval:
    c = _c_of(e1, e2)
    ct = c * (e2.time - e1.time)
    dx = e2.position - e1.position
    space = float(dx @ dx)
    value = ct * ct - space
    scale = ct * ct + space
    if abs(value) <= LIGHTLIKE_REL_TOL * scale:
        return Interval("lightlike", value)
    return Interval("timelike" if value > 0 else "spacelike", value)


def is_spacelike(e1: SpacetimeEvent, e2: SpacetimeEvent) -> bool:
    return interval(e1, e2).kind == "spacelike"


@dataclass(frozen=True, eq=False)
class Frame:
    """Inertial frame moving with velocity ``beta`` (units of c) relative to the lab."""

    beta: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        if beta.size == 1:
            beta = np.array([beta[0], 0.0, 0.0])
        if beta.shape != (3,) or not np.all(np.isfinite(beta)):
            raise ValueError("beta must be a finite 3-vector")
        if not float(beta @ beta) < 1.0:
            raise ValueError(f"|beta| = {math.sqrt(float(beta @ beta))} must be < 1")
        object.__setattr__(self, "beta", beta)

    @property
    def speed(self) -> float:
        return math.sqrt(float(self.beta @ self.beta))

    @property
    def gamma(self) -> float:
        return 1.0 / math.sqrt(1.0 - float(self.beta @ self.beta))


LAB = Frame()


def boost(e: SpacetimeEvent, f: Frame) -> SpacetimeEvent:
    """Coordinates of ``e`` in frame ``f``."""
    b2 = float(f.beta @ f.beta)
    if b2 == 0.0:
        return e
    c = e.c
    g = f.gamma
    bx = float(f.beta @ e.position)
    t = g * (e.time - bx / c)
    pos = e.position + ((g - 1.0) * bx / b2 - g * c * e.time) * f.beta
    return SpacetimeEvent(e.party, e.kind, pos, t, e.natural)


@dataclass(frozen=True, eq=False)
class VCausalModel:
    """Hidden influences at speed ``v`` (units of c) in a privileged frame."""

    privileged: Frame = LAB
    v: float = 1e4

    def __post_init__(self):
        if not math.isfinite(self.v):
            raise ValueError(f"infinite influence speed is not a model; use at most v = {V_CAP:g}")
        if not 1.0 <= self.v <= V_CAP:
            raise ValueError(f"v must lie in [1, {V_CAP:g}] (units of c), got {self.v}")


def influence_reaches(source: SpacetimeEvent, target: SpacetimeEvent, m: VCausalModel) -> bool:
    """Whether an influence leaving ``source`` at speed v arrives by ``target``."""
    s = boost(source, m.privileged)
    t = boost(target, m.privileged)
    dist = float(np.linalg.norm(t.position - s.position))
    return t.time >= s.time + dist / (m.v * source.c)


def before_before(eA: SpacetimeEvent, eB: SpacetimeEvent, frameA: Frame, frameB: Frame) -> bool:
    """True iff eA precedes eB in frameA and eB precedes eA in frameB."""
    if not is_spacelike(eA, eB):
        raise ConfigurationError("time order of non-spacelike events is the same in every frame")
    a_in_a, b_in_a = boost(eA, frameA), boost(eB, frameA)
    a_in_b, b_in_b = boost(eA, frameB), boost(eB, frameB)
    return a_in_a.time < b_in_a.time and b_in_b.time < a_in_b.time


# --- rotating-baseline speed scan -------------------------------------------


@dataclass(frozen=True)
class ScanGeometry:
    """Baseline between two sites rotating rigidly about the z axis.

    At session time t the baseline is (rho cos(phase + omega t),
    rho sin(phase + omega t), z). Candidate privileged frames move with speed
    beta along the direction given by azimuth (in the rotation plane) and
    elevation (toward the rotation axis).
    """

    rho: float
    z: float = 0.0
    phase: float = 0.0
    omega: float = SIDEREAL_OMEGA
    duration: float = 12 * 3600.0
    azimuths_deg: tuple[float, ...] = tuple(float(a) for a in range(360))
    elevations_deg: tuple[float, ...] = (0.0,)
    betas: tuple[float, ...] = (1e-3,)
    sync_ns: float | None = None

    @property
    def distance(self) -> float:
        return math.hypot(self.rho, self.z)

    def reversed(self) -> "ScanGeometry":
        """The same geometry with the two sites swapped."""
        return ScanGeometry(
            self.rho, -self.z, self.phase + math.pi, self.omega, self.duration,
            self.azimuths_deg, self.elevations_deg, self.betas, self.sync_ns,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "ScanGeometry":
        try:
            sites = d["sites"]
            a, b = sites["a"], sites["b"]
        except (KeyError, TypeError) as exc:
            raise ConfigurationError("geometry needs sites.a and sites.b") from exc
        pa, pb = _site_position(a), _site_position(b)
        delta = pb - pa
        step = float(d.get("azimuth_step_deg", 1.0))
        if step <= 0:
            raise ConfigurationError("azimuth_step_deg must be positive")
        kwargs = dict(
            rho=float(math.hypot(delta[0], delta[1])),
            z=float(delta[2]),
            phase=float(math.atan2(delta[1], delta[0])),
            omega=float(d.get("omega_rad_s", SIDEREAL_OMEGA)),
            duration=float(d.get("session_hours", 12.0)) * 3600.0,
            azimuths_deg=tuple(float(v) for v in np.arange(0.0, 360.0, step)),
            elevations_deg=tuple(float(v) for v in d.get("elevations_deg", [0.0])),
            betas=tuple(float(v) for v in d.get("betas", [1e-3])),
            sync_ns=float(d["sync_ns"]) if "sync_ns" in d else None,
        )
        if kwargs["duration"] <= 0:
            raise ConfigurationError("session_hours must be positive")
        if any(not 0.0 <= bt < 1.0 for bt in kwargs["betas"]):
            raise ConfigurationError("every beta must lie in [0, 1)")
        return cls(**kwargs)


def _site_position(site: dict) -> np.ndarray:
    if "lat" in site and "lon" in site:
        lat, lon = math.radians(float(site["lat"])), math.radians(float(site["lon"]))
        r = EARTH_RADIUS + float(site.get("alt", 0.0))
        return np.array([r * math.cos(lat) * math.cos(lon), r * math.cos(lat) * math.sin(lon), r * math.sin(lat)])
    if "x" in site:
        return np.array([float(site["x"]), float(site.get("y", 0.0)), float(site.get("z", 0.0))])
    raise ConfigurationError(f"site needs lat/lon or x/y coordinates: {site!r}")


def load_preset(name: str) -> dict:
    """Bundled geometry preset by name (file stem under ``presets/``)."""
    path = resources.files("bell_lab").joinpath("presets", f"{name}.json")
    if not path.is_file():
        raise ConfigurationError(f"unknown preset {name!r}")
    return json.loads(path.read_text())


def preset_names() -> list[str]:
    root = resources.files("bell_lab").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


@dataclass(frozen=True)
class FrameBound:
    azimuth_deg: float
    elevation_deg: float
    beta: float
    best_time: float
    v_min_over_c: float


@dataclass(frozen=True)
class ScanResult:
    frames: tuple[FrameBound, ...]
    sync: float

    @property
    def overall(self) -> float:
        return min(f.v_min_over_c for f in self.frames)

    @property
    def worst_frame(self) -> FrameBound:
        return min(self.frames, key=lambda f: f.v_min_over_c)

    @property
    def exceeds_cap(self) -> bool:
        return self.overall > V_CAP

    def to_csv(self) -> str:
        with_elev = any(f.elevation_deg != 0.0 for f in self.frames)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["frame_azimuth_deg", "frame_beta", "v_min_over_c"]
        if with_elev:
            head.insert(1, "frame_elevation_deg")
        w.writerow(head)
        for f in self.frames:
            row = [repr(f.azimuth_deg), repr(f.beta), repr(f.v_min_over_c)]
            if with_elev:
                row.insert(1, repr(f.elevation_deg))
            w.writerow(row)
        return buf.getvalue()


def _min_abs_projection(amp: float, offset: float, theta0: float, theta1: float, omega: float) -> tuple[float, float]:
    """Minimize |amp cos(theta) + offset| for theta in [theta0, theta1].

    Returns (min value, session time of the minimum).
    """
    cands = [(abs(amp * math.cos(th) + offset), th) for th in (theta0, theta1)]
    if amp != 0.0:
        for k in range(math.ceil(theta0 / math.pi), math.floor(theta1 / math.pi) + 1):
            th = k * math.pi
            cands.append((abs(amp * math.cos(th) + offset), th))
        ratio = -offset / amp
        if abs(ratio) <= 1.0:
            base = math.acos(ratio)
            for root in (base, -base):
                k0 = math.ceil((theta0 - root) / (2 * math.pi))
                k1 = math.floor((theta1 - root) / (2 * math.pi))
                # roots are exact zeros; cos() would leave ~1e-13 * amp
                cands += [(0.0, root + 2 * math.pi * k) for k in range(k0, k1 + 1)]
    best_val, best_theta = min(cands)
    return best_val, (best_theta - theta0) / omega if omega else 0.0


def scan_speed_bound(geometry: ScanGeometry, sync_uncertainty: float, c: float = C_SI) -> ScanResult:
    """Lower bound on the hidden-influence speed for every candidate frame.

    For each frame the session time at which the two lab-simultaneous
    measurements are closest to simultaneous in that frame is chosen; there
    v_min = D_eff / (c dt_eff + c dt_sync), with dt_eff the frame-time
    separation and D_eff the frame distance. The overall bound is the
    minimum over frames.
    """
    if not sync_uncertainty > 0:
        raise ValueError("sync uncertainty must be > 0")
    g = geometry
    d2 = g.rho**2 + g.z**2
    frames = []
    theta_span = g.omega * g.duration
    for elev in g.elevations_deg:
        ce, se = math.cos(math.radians(elev)), math.sin(math.radians(elev))
        for az in g.azimuths_deg:
            theta0 = g.phase - math.radians(az)
            s_abs, t_best = _min_abs_projection(g.rho * ce, g.z * se, theta0, theta0 + theta_span, g.omega)
            for beta in g.betas:
                gamma = 1.0 / math.sqrt(1.0 - beta * beta)
                d_eff = math.sqrt(d2 + (gamma * gamma - 1.0) * s_abs * s_abs)
                c_dt_eff = gamma * beta * s_abs
                v = d_eff / (c_dt_eff + c * sync_uncertainty)
                frames.append(FrameBound(float(az), float(elev), float(beta), t_best, v))
    return ScanResult(tuple(frames), float(sync_uncertainty))


# --- delayed outcomes --------------------------------------------------------


@dataclass(frozen=True)
class DelayedOutcome:
    viable: bool
    required_speed: float
    pairs: dict


def delayed_outcome_viable(events: Sequence[SpacetimeEvent], delay: float) -> DelayedOutcome:
    """Can light-speed influences explain the correlations if outcomes finalize ``delay`` late?

    For each party's outcome (moved ``delay`` later) and every other party's
    input, the speed needed to cover the distance in the available time is
    computed; the explanation survives iff every such speed is at most c.
    """
    if delay < 0:
        raise ValueError("delay must be >= 0")
    c = _c_of(*events)
    inputs = {e.party: e for e in events if e.kind == "input_chosen"}
    outcomes = {e.party: e for e in events if e.kind == "outcome_registered"}
    if set(inputs) != set(outcomes) or len(inputs) < 2:
        raise ValueError("need an input and an outcome event for each of at least two parties")
    pairs = {}
    for p, out in outcomes.items():
        final = out.shifted(delay)
        for q, inp in inputs.items():
            if q == p:
                continue
            dist = float(np.linalg.norm(final.position - inp.position))
            dt = final.time - inp.time
            if dist == 0.0:
                speed = 0.0 if dt >= 0 else math.inf
            else:
                speed = dist / dt if dt > 0 else math.inf
            pairs[f"{q}->{p}"] = speed
    required = max(pairs.values())
    return DelayedOutcome(required <= c, required, pairs)


def lab_events(distance: float, t_a: float = 0.0, t_b: float = 0.0, duration: float = 0.0, natural: bool = False):
    """Alice at the origin, Bob ``distance`` along x; inputs at t, outcomes at t + duration."""
    a_pos, b_pos = np.zeros(3), np.array([distance, 0.0, 0.0])
    return [
        SpacetimeEvent("A", "input_chosen", a_pos, t_a, natural),
        SpacetimeEvent("A", "outcome_registered", a_pos, t_a + duration, natural),
        SpacetimeEvent("B", "input_chosen", b_pos, t_b, natural),
        SpacetimeEvent("B", "outcome_registered", b_pos, t_b + duration, natural),
    ]
