"""World model: room, reflecting surfaces, transmitters, receivers.

Coordinates are meters in a right-handed frame with the floor at ``z = 0``
and the ceiling at ``z = H``. Angles are degrees. Azimuth is measured from
+x toward +y; elevation is signed, positive above the horizontal plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, NamedTuple, Sequence

import numpy as np

WAVELENGTH_PLAN_NM = (850.0, 880.0, 900.0, 950.0)
SPEED_OF_LIGHT = 299_792_458.0

DEFAULT_SEMI_ANGLE_DEG = 0.5
DEFAULT_POWER_W = 4e-3
DEFAULT_DETECTOR_AREA_M2 = 20e-6
DEFAULT_RESPONSIVITY = 0.6
DEFAULT_ADR_FOV_DEG = 5.0
DEFAULT_ELEMENT_EDGES = (0.05, 0.20)
DEFAULT_REFLECTIVITY = {"ceiling": 0.8, "floor": 0.3, "wall": 0.8}

WFOV = "wfov"
ADR = "adr"
RECEIVER_KINDS = (WFOV, ADR)


class SceneError(ValueError):
    """Base class for scene construction and loading failures."""


class SceneValidationError(SceneError):
    pass


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise SceneValidationError(f"non-finite coordinate {name}={value}")
            object.__setattr__(self, name, value)

    def __iter__(self) -> Iterator[float]:
        yield self.x
        yield self.y
        yield self.z

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class Direction:
    """Pointing direction. The unit vector is derived from the stored angles."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        az, el = float(self.azimuth), float(self.elevation)
        if not (math.isfinite(az) and math.isfinite(el)):
            raise SceneValidationError("direction angles must be finite")
        if not -90.0 <= el <= 90.0:
            raise SceneValidationError(f"elevation {el} deg outside [-90, 90]")
        az = az % 360.0
        if az >= 360.0:
            az -= 360.0
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)

    @property
    def vector(self) -> tuple[float, float, float]:
        az = math.radians(self.azimuth)
        el = math.radians(self.elevation)
        c = math.cos(el)
        return (c * math.cos(az), c * math.sin(az), math.sin(el))

    @classmethod
    def from_vector(cls, v) -> "Direction":
        x, y, z = (float(a) for a in v)
        h = math.hypot(x, y)
        if h == 0.0 and z == 0.0:
            raise SceneValidationError("zero-length direction vector")
        el = math.degrees(math.atan2(z, h))
        az = math.degrees(math.atan2(y, x)) if h > 0.0 else 0.0
        return cls(az, el)


UP = Direction(0.0, 90.0)
DOWN = Direction(0.0, -90.0)


@dataclass(frozen=True)
class AdtBranch:
    orientation: Direction
    semi_angle: float = DEFAULT_SEMI_ANGLE_DEG
    wavelength_nm: float = WAVELENGTH_PLAN_NM[0]
    power_w: float = DEFAULT_POWER_W

    def __post_init__(self):
        if not 0.0 < self.semi_angle < 90.0:
            raise SceneValidationError(
                f"branch semi-angle {self.semi_angle} deg outside (0, 90)"
            )
        if not self.power_w > 0.0:
            raise SceneValidationError(f"branch power must be positive, got {self.power_w} W")
        if not self.wavelength_nm > 0.0:
            raise SceneValidationError(f"wavelength must be positive, got {self.wavelength_nm} nm")


@dataclass(frozen=True)
class Transmitter:
    label: str
    position: Vec3
    branches: tuple[AdtBranch, ...]

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if not self.branches:
            raise SceneValidationError(f"transmitter {self.label} has no branches")


@dataclass(frozen=True)
class DetectorBranch:
    orientation: Direction
    fov: float = DEFAULT_ADR_FOV_DEG
    area: float = DEFAULT_DETECTOR_AREA_M2
    responsivity: float = DEFAULT_RESPONSIVITY

    def __post_init__(self):
        if not 0.0 < self.fov <= 90.0:
            raise SceneValidationError(f"detector FOV {self.fov} deg outside (0, 90]")
        if not self.area > 0.0:
            raise SceneValidationError(f"detector area must be positive, got {self.area}")
        if not self.responsivity > 0.0:
            raise SceneValidationError(
                f"responsivity must be positive, got {self.responsivity}"
            )


@dataclass(frozen=True)
class Receiver:
    label: str
    position: Vec3
    kind: str
    branches: tuple[DetectorBranch, ...]

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if self.kind not in RECEIVER_KINDS:
            raise SceneValidationError(f"unknown receiver kind {self.kind!r}")
        if not self.branches:
            raise SceneValidationError(f"receiver {self.label} has no branches")
        if self.kind == WFOV:
            if len(self.branches) != 1 or self.branches[0].fov != 90.0:
                raise SceneValidationError(
                    f"WFOV receiver {self.label} needs exactly one 90 deg branch"
                )

    @classmethod
    def wfov(cls, label, position, area=DEFAULT_DETECTOR_AREA_M2,
             responsivity=DEFAULT_RESPONSIVITY) -> "Receiver":
        return cls(label, position, WFOV, (DetectorBranch(UP, 90.0, area, responsivity),))


@dataclass(frozen=True)
class SimulationParams:
    max_order: int = 2
    bin_width: float = 1e-11
    bit_rate: float = 5e9
    bandwidth: float = 5e9
    nsd: float = 4.47e-12
    background_current: float = 0.0
    c: float = SPEED_OF_LIGHT
    eye_safety_cap: float = 10e-3
    combining: str = "select"
    signal_shot_noise: bool = True

    def __post_init__(self):
        if self.max_order not in (0, 1, 2):
            raise SceneValidationError(f"max reflection order {self.max_order} not in {{0, 1, 2}}")
        for name in ("bin_width", "bit_rate", "bandwidth", "c", "eye_safety_cap"):
            if not getattr(self, name) > 0.0:
                raise SceneValidationError(f"{name} must be positive")
        for name in ("nsd", "background_current"):
            if not getattr(self, name) >= 0.0:
                raise SceneValidationError(f"{name} must be non-negative")
        if self.combining not in ("select", "mrc"):
            raise SceneValidationError(f"unknown combining mode {self.combining!r}")


class ElementSet(NamedTuple):
    """Struct-of-arrays view of reflecting elements."""

    centers: np.ndarray   # (N, 3)
    normals: np.ndarray   # (N, 3) inward
    areas: np.ndarray     # (N,)
    rho: np.ndarray       # (N,)
    surface: np.ndarray   # (N,) surface index

    def __len__(self):
        return len(self.areas)

    def elements(self) -> list["ReflectingElement"]:
        return [
            ReflectingElement(Vec3(*c), tuple(n), float(a), float(r))
            for c, n, a, r in zip(self.centers, self.normals, self.areas, self.rho)
        ]

    def subset(self, index) -> "ElementSet":
        return ElementSet(*(a[index] for a in self))

    @classmethod
    def concatenate(cls, sets: Sequence["ElementSet"]) -> "ElementSet":
        return cls(*(np.concatenate(parts) for parts in zip(*sets)))


@dataclass(frozen=True)
class ReflectingElement:
    center: Vec3
    normal: tuple[float, float, float]
    area: float
    rho: float


@dataclass(frozen=True)
class Surface:
    """Axis-aligned rectangle of the room boundary.

    ``origin`` is one corner; ``u_axis``/``v_axis`` index the in-plane
    coordinate axes (0=x, 1=y, 2=z) spanning ``u_extent``/``v_extent``.
    """

    name: str
    index: int
    origin: tuple[float, float, float]
    u_axis: int
    v_axis: int
    u_extent: float
    v_extent: float
    normal: tuple[float, float, float]
    rho: float
    element_edges: tuple[float, float] = DEFAULT_ELEMENT_EDGES

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise SceneValidationError(
                f"reflection coefficient rho={self.rho} of {self.name} outside [0, 1]"
            )
        if min(self.element_edges) <= 0.0:
            raise SceneValidationError("element edge must be positive")

    @property
    def area(self) -> float:
        return self.u_extent * self.v_extent


def _cell_edges(extent: float, edge: float) -> np.ndarray:
    ratio = extent / edge
    count = round(ratio)
    if abs(ratio - count) > 1e-9 * max(1.0, ratio) or count == 0:
        count = math.ceil(ratio)
    bounds = np.arange(count + 1) * edge
    bounds[-1] = extent
    return bounds


def discretize(surface: Surface, bounce_order: int) -> ElementSet:
    """Tile ``surface`` with square elements; the last row/column is clipped."""
    if bounce_order not in (1, 2):
        raise ValueError(f"bounce order must be 1 or 2, got {bounce_order}")
    edge = surface.element_edges[bounce_order - 1]
    ub = _cell_edges(surface.u_extent, edge)
    vb = _cell_edges(surface.v_extent, edge)
    uc = 0.5 * (ub[:-1] + ub[1:])
    vc = 0.5 * (vb[:-1] + vb[1:])
    du = np.diff(ub)
    dv = np.diff(vb)
    uu, vv = np.meshgrid(uc, vc, indexing="ij")
    area = np.outer(du, dv).ravel()
    n = area.size
    centers = np.tile(np.asarray(surface.origin, dtype=float), (n, 1))
    centers[:, surface.u_axis] += uu.ravel()
    centers[:, surface.v_axis] += vv.ravel()
    return ElementSet(
        centers=centers,
        normals=np.tile(np.asarray(surface.normal, dtype=float), (n, 1)),
        areas=area,
        rho=np.full(n, surface.rho),
        surface=np.full(n, surface.index),
    )


SURFACE_NAMES = ("floor", "ceiling", "west", "east", "south", "north")


def box_surfaces(room, reflectivity=None, element_edges=DEFAULT_ELEMENT_EDGES):
    """The six inward-facing boundary rectangles of an L x W x H room.

    ``reflectivity`` maps surface names (or ``"wall"`` for all four walls)
    to rho; later specific keys override ``"wall"``.
    """
    L, W, H = room
    rho = dict(DEFAULT_REFLECTIVITY)
    rho.update(reflectivity or {})
    wall = rho.pop("wall")
    per = {name: rho.get(name, wall) for name in SURFACE_NAMES}
    layout = {
        # name: origin, u_axis, v_axis, u_extent, v_extent, normal
        "floor": ((0, 0, 0), 0, 1, L, W, (0.0, 0.0, 1.0)),
        "ceiling": ((0, 0, H), 0, 1, L, W, (0.0, 0.0, -1.0)),
        "west": ((0, 0, 0), 1, 2, W, H, (1.0, 0.0, 0.0)),
        "east": ((L, 0, 0), 1, 2, W, H, (-1.0, 0.0, 0.0)),
        "south": ((0, 0, 0), 0, 2, L, H, (0.0, 1.0, 0.0)),
        "north": ((0, W, 0), 0, 2, L, H, (0.0, -1.0, 0.0)),
    }
    out = []
    for i, name in enumerate(SURFACE_NAMES):
        origin, ua, va, ue, ve, normal = layout[name]
        out.append(Surface(name, i, tuple(float(o) for o in origin), ua, va,
                           float(ue), float(ve), normal, float(per[name]),
                           tuple(float(e) for e in element_edges)))
    return tuple(out)


class Emitter(NamedTuple):
    position: np.ndarray
    axis: np.ndarray
    mode: float


class Detector(NamedTuple):
    position: np.ndarray
    normal: np.ndarray
    area: float
    fov: float


@dataclass(frozen=True)
class Scene:
    room: tuple[float, float, float]
    surfaces: tuple[Surface, ...]
    transmitters: tuple[Transmitter, ...]
    receivers: tuple[Receiver, ...]
    params: SimulationParams = field(default_factory=SimulationParams)

    def __post_init__(self):
        object.__setattr__(self, "room", tuple(float(r) for r in self.room))
        for name in ("surfaces", "transmitters", "receivers"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    @classmethod
    def box(cls, room, transmitters, receivers, params=None, reflectivity=None,
            element_edges=DEFAULT_ELEMENT_EDGES) -> "Scene":
        return cls(room, box_surfaces(room, reflectivity, element_edges),
                   transmitters, receivers, params or SimulationParams())

    def validate(self):
        L, W, H = self.room
        if min(self.room) <= 0.0:
            raise SceneValidationError("room dimensions must be positive")
        if len(self.surfaces) != 6:
            raise SceneValidationError("a box room has exactly six surfaces")
        if not self.transmitters:
            raise SceneValidationError("scene has no transmitters")
        if not self.receivers:
            raise SceneValidationError("scene has no receivers")

        def inside(p: Vec3) -> bool:
            return 0.0 <= p.x <= L and 0.0 <= p.y <= W and 0.0 <= p.z <= H

        labels = [t.label for t in self.transmitters]
        if len(set(labels)) != len(labels):
            raise SceneValidationError(f"duplicate transmitter labels in {labels}")
        for tx in self.transmitters:
            if not inside(tx.position):
                raise SceneValidationError(f"transmitter {tx.label} at {tuple(tx.position)} outside room")
            if tx.position.z != H:
                raise SceneValidationError(f"transmitter {tx.label} is not on the ceiling (z={tx.position.z}, H={H})")
            per_lambda: dict[float, float] = {}
            for b in tx.branches:
                per_lambda[b.wavelength_nm] = per_lambda.get(b.wavelength_nm, 0.0) + b.power_w
            for lam, p in per_lambda.items():
                if p > self.params.eye_safety_cap * (1 + 1e-12):
                    raise SceneValidationError(
                        f"transmitter {tx.label} emits {p * 1e3:g} mW at {lam:g} nm, "
                        f"above the eye-safety cap of {self.params.eye_safety_cap * 1e3:g} mW"
                    )
        keys = [(r.label, r.kind) for r in self.receivers]
        if len(set(keys)) != len(keys):
            raise SceneValidationError("duplicate (label, kind) receiver entries")
        for rx in self.receivers:
            if not inside(rx.position):
                raise SceneValidationError(f"receiver {rx.label} at {tuple(rx.position)} outside room")

    # lookup helpers

    def transmitter(self, label: str) -> Transmitter:
        for tx in self.transmitters:
            if tx.label == label:
                return tx
        raise KeyError(f"no transmitter labelled {label!r}")

    def receiver(self, label: str, kind: str | None = None) -> Receiver:
        found = [r for r in self.receivers if r.label == label and (kind is None or r.kind == kind)]
        if not found:
            raise KeyError(f"no receiver labelled {label!r}" + (f" of kind {kind}" if kind else ""))
        if len(found) > 1:
            raise KeyError(f"receiver {label!r} exists in several kinds; pass kind")
        return found[0]

    @property
    def receiver_labels(self) -> list[str]:
        seen: list[str] = []
        for r in self.receivers:
            if r.label not in seen:
                seen.append(r.label)
        return seen

    def emitter(self, tx: Transmitter | str, branch: int) -> Emitter:
        from .channel import lambertian_mode

        if isinstance(tx, str):
            tx = self.transmitter(tx)
        b = tx.branches[branch]
        return Emitter(tx.position.array, np.array(b.orientation.vector), lambertian_mode(b.semi_angle))

    def detector(self, rx: Receiver, branch: int) -> Detector:
        d = rx.branches[branch]
        return Detector(rx.position.array, np.array(d.orientation.vector), d.area, d.fov)

    @cached_property
    def _element_sets(self) -> dict:
        return {}

    def elements(self, bounce_order: int) -> ElementSet:
        cache = self._element_sets
        if bounce_order not in cache:
            cache[bounce_order] = ElementSet.concatenate(
                [discretize(s, bounce_order) for s in self.surfaces]
            )
        return cache[bounce_order]

    def surface(self, name: str) -> Surface:
        for s in self.surfaces:
            if s.name == name:
                return s
        raise KeyError(name)

    def replace(self, **changes) -> "Scene":
        """Copy with fields replaced; surfaces are regenerated when needed."""
        import dataclasses

        return dataclasses.replace(self, **changes)


def bearing(source, target) -> Direction:
    """Direction of the ray from ``source`` to ``target``."""
    s, t = Vec3(*source), Vec3(*target)
    d = (t.x - s.x, t.y - s.y, t.z - s.z)
    if d == (0.0, 0.0, 0.0):
        raise SceneValidationError("coincident positions have no bearing")
    return Direction.from_vector(d)


# Builtin replica of the four-rack downlink configuration.

PAPER_ROOM = (8.0, 8.0, 3.0)
PAPER_TX_POSITIONS = ((4.0, 1.0, 3.0), (4.0, 3.0, 3.0), (4.0, 5.0, 3.0), (4.0, 7.0, 3.0))
PAPER_RX_POSITIONS = ((1.3, 1.6, 2.0), (4.0, 4.0, 2.0), (4.0, 6.3, 2.0), (1.3, 5.0, 2.0))

# Printed transmitter bearings: row k lists (azimuth, depression) from ADT1..ADT4 toward Rk.
PRINTED_TX_AZIMUTH = ((167, 207, 231, 243), (90, 90, 270, 270), (90, 90, 90, 90), (124, 143, 180, 216))
PRINTED_TX_DEPRESSION = ((19, 18, 13, 9.5), (18.5, 45, 45, 18.5), (10, 15, 31, 74), (11, 16, 20, 16))
# Printed ADR branch orientations: row Rk, column Bj faces ADTj.
PRINTED_ADR_AZIMUTH = ((348, 27, 51, 63), (270, 270, 90, 90), (270, 270, 270, 90), (304, 323, 0, 36))
PRINTED_ADR_ELEVATION = ((20, 18, 13, 9), (18, 45, 45, 18), (10, 15, 30, 73), (11, 16, 20, 17))


def paper_scene(aiming: str = "geometric", semi_angle: float = DEFAULT_SEMI_ANGLE_DEG,
                receiver_aiming: str | None = None) -> Scene:
    """Four ADTs on the ceiling of an 8 x 8 x 3 m room serving four rack tops.

    Branch k of every ADT serves receiver Rk on wavelength k of the plan;
    ADR branch j faces ADTj. ``aiming="geometric"`` points every branch at
    its counterpart exactly; ``aiming="printed"`` uses the rounded angle
    tables verbatim (the R3 entries of which miss their target).
    ``receiver_aiming`` overrides the mode for the ADR branches.
    """
    receiver_aiming = receiver_aiming or aiming
    for mode in (aiming, receiver_aiming):
        if mode not in ("geometric", "printed"):
            raise ValueError(f"unknown aiming {mode!r}")
    txs = []
    for j, tpos in enumerate(PAPER_TX_POSITIONS):
        branches = []
        for k, rpos in enumerate(PAPER_RX_POSITIONS):
            if aiming == "geometric":
                d = bearing(tpos, rpos)
            else:
                d = Direction(PRINTED_TX_AZIMUTH[k][j], -PRINTED_TX_DEPRESSION[k][j])
            branches.append(AdtBranch(d, semi_angle, WAVELENGTH_PLAN_NM[k], DEFAULT_POWER_W))
        txs.append(Transmitter(f"ADT{j + 1}", Vec3(*tpos), tuple(branches)))

    rxs = []
    for k, rpos in enumerate(PAPER_RX_POSITIONS):
        label = f"R{k + 1}"
        rxs.append(Receiver.wfov(label, Vec3(*rpos)))
    for k, rpos in enumerate(PAPER_RX_POSITIONS):
        label = f"R{k + 1}"
        branches = []
        for j, tpos in enumerate(PAPER_TX_POSITIONS):
            if receiver_aiming == "geometric":
                d = bearing(rpos, tpos)
            else:
                d = Direction(PRINTED_ADR_AZIMUTH[k][j], PRINTED_ADR_ELEVATION[k][j])
            branches.append(DetectorBranch(d, DEFAULT_ADR_FOV_DEG))
        rxs.append(Receiver(label, Vec3(*rpos), ADR, tuple(branches)))

    return Scene.box(PAPER_ROOM, txs, rxs, SimulationParams())
