"""Line-oriented scene configuration format.

Grammar (``#`` starts a comment; a declaration ends at the end of its line
unless a ``{ ... }`` block is open)::

    room L W H
    reflectivity (wall|ceiling|floor|west|east|south|north) RHO ...
    element first EDGE second EDGE
    adt [LABEL] at X Y Z { branch BRANCH-FIELDS ... }
    receiver LABEL at X Y Z kind wfov [fov A] [area S] [resp R]
    receiver LABEL at X Y Z kind adr [fov A] [area S] [resp R] { branch DET-FIELDS ... }
    params KEY VALUE ...

ADT branch fields: ``az A`` and ``el A`` (depression below the horizontal,
toward the floor) or ``aim RECEIVER``; ``semi A``, ``lambda WL``,
``power P``. ADR branch fields: ``az A`` and ``el A`` (above the horizontal)
or ``aim TRANSMITTER``; ``fov A``, ``area S``, ``resp R`` (defaults taken
from the receiver line).

Params keys: ``bandwidth`` (Hz), ``nsd`` (A per root Hz), ``bitrate``
(bps), ``maxorder`` (0-2), ``bin`` (s), ``ibg`` (A), ``c`` (m/s),
``eyecap`` (W), ``combining`` (select|mrc), ``shotnoise`` (on|off).

Units are attached to numbers without a space (``5cm``, ``4mW``). Lengths
may be bare (meters); angles, powers, wavelengths, areas, frequencies,
currents, rates and times need a suffix. Unknown keys are errors.
"""

from __future__ import annotations

import hashlib
import re
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .scene import (ADR, DEFAULT_ADR_FOV_DEG, DEFAULT_DETECTOR_AREA_M2,
                    DEFAULT_ELEMENT_EDGES, DEFAULT_POWER_W, DEFAULT_REFLECTIVITY,
                    DEFAULT_RESPONSIVITY, DEFAULT_SEMI_ANGLE_DEG, SURFACE_NAMES, UP,
                    WAVELENGTH_PLAN_NM, WFOV, AdtBranch, DetectorBranch, Direction,
                    Receiver, Scene, SceneError, SimulationParams, Transmitter, Vec3,
                    bearing, box_surfaces)


class SceneParseError(SceneError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnitError(SceneParseError):
    pass


# unit tables: scale to the stored base unit, and whether a bare number is allowed
UNITS = {
    "length": ({"m": "1", "cm": "1e-2", "mm": "1e-3"}, True),
    "angle": ({"deg": "1"}, False),
    "power": ({"W": "1", "mW": "1e-3", "uW": "1e-6"}, False),
    "wavelength": ({"nm": "1", "um": "1e3"}, False),
    "area": ({"m2": "1", "cm2": "1e-4", "mm2": "1e-6"}, False),
    "frequency": ({"Hz": "1", "kHz": "1e3", "MHz": "1e6", "GHz": "1e9"}, False),
    "nsd": ({"A": "1", "uA": "1e-6", "nA": "1e-9", "pA": "1e-12"}, False),
    "current": ({"A": "1", "mA": "1e-3", "uA": "1e-6", "nA": "1e-9", "pA": "1e-12"}, False),
    "rate": ({"bps": "1", "kbps": "1e3", "Mbps": "1e6", "Gbps": "1e9"}, False),
    "time": ({"s": "1", "ms": "1e-3", "us": "1e-6", "ns": "1e-9", "ps": "1e-12"}, False),
    "speed": ({"m/s": "1"}, True),
    "responsivity": ({"A/W": "1"}, True),
    "number": ({}, True),
}

_NUMBER = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)(.*)$")


def quantity(token: str, kind: str, line=None) -> float:
    """Parse ``token`` as a number with a unit of family ``kind``."""
    m = _NUMBER.match(token)
    if not m:
        raise SceneParseError(f"expected a number, got {token!r}", line)
    num, unit = m.groups()
    table, bare_ok = UNITS[kind]
    if not unit:
        if not bare_ok:
            raise UnitError(f"missing {kind} unit on {token!r} (one of {', '.join(table)})", line)
        return float(num)
    if unit not in table:
        raise UnitError(f"unknown {kind} unit {unit!r} in {token!r}", line)
    try:
        return float(Decimal(num) * Decimal(table[unit]))
    except InvalidOperation as exc:
        raise SceneParseError(f"bad number {token!r}", line) from exc


class _Tokens:
    def __init__(self, text: str):
        self.items: list[tuple[str, int]] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            body = raw.split("#", 1)[0]
            for tok in body.replace("{", " { ").replace("}", " } ").split():
                self.items.append((tok, lineno))
            self.items.append(("\n", lineno))
        self.pos = 0

    def peek(self):
        return self.items[self.pos] if self.pos < len(self.items) else (None, None)

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, what: str):
        tok, line = self.next()
        if tok != what:
            raise SceneParseError(f"expected {what!r}, got {tok!r}", line)
        return line

    def word(self, what: str):
        tok, line = self.next()
        if tok in (None, "\n", "{", "}"):
            raise SceneParseError(f"expected {what}", line)
        return tok, line

    def skip_newlines(self):
        while self.peek()[0] == "\n":
            self.pos += 1

    def end_of_decl(self):
        tok, line = self.next()
        if tok not in ("\n", None):
            raise SceneParseError(f"unexpected {tok!r} at end of declaration", line)


def _position(toks: _Tokens):
    coords = []
    for axis in "xyz":
        tok, line = toks.word(f"{axis} coordinate")
        coords.append(quantity(tok, "length", line))
    return coords


def _fields(toks: _Tokens, allowed: dict, line0):
    """Read ``key value`` pairs up to newline, '{', '}' or 'branch'."""
    out = {}
    while True:
        tok, line = toks.peek()
        if tok in (None, "\n", "{", "}", "branch"):
            return out
        toks.next()
        if tok not in allowed:
            raise SceneParseError(f"unknown key {tok!r} (expected one of {', '.join(allowed)})", line)
        if tok in out:
            raise SceneParseError(f"duplicate key {tok!r}", line)
        val, vline = toks.word(f"value for {tok}")
        kind = allowed[tok]
        out[tok] = (val, vline) if kind is None else quantity(val, kind, vline)


def _block(toks: _Tokens, allowed: dict):
    """``{ branch ... branch ... }`` spanning any number of lines."""
    toks.expect("{")
    branches = []
    while True:
        toks.skip_newlines()
        tok, line = toks.next()
        if tok == "}":
            return branches
        if tok != "branch":
            raise SceneParseError(f"expected 'branch' or '}}', got {tok!r}", line)
        branches.append((_fields(toks, allowed, line), line))


_ADT_BRANCH = {"az": "angle", "el": "angle", "aim": None, "semi": "angle",
               "lambda": "wavelength", "power": "power"}
_DET_BRANCH = {"az": "angle", "el": "angle", "aim": None, "fov": "angle",
               "area": "area", "resp": "responsivity"}
_RX_FIELDS = {"kind": None, "fov": "angle", "area": "area", "resp": "responsivity"}
_PARAMS = {"bandwidth": "frequency", "nsd": "nsd", "bitrate": "rate", "maxorder": "number",
           "bin": "time", "ibg": "current", "c": "speed", "eyecap": "power",
           "combining": None, "shotnoise": None}
_PARAM_NAMES = {"bandwidth": "bandwidth", "nsd": "nsd", "bitrate": "bit_rate",
                "maxorder": "max_order", "bin": "bin_width", "ibg": "background_current",
                "c": "c", "eyecap": "eye_safety_cap", "combining": "combining",
                "shotnoise": "signal_shot_noise"}


def _orientation(f, line, depression: bool):
    """az/el pair, or a deferred 'aim' resolved once all positions are known."""
    if "aim" in f:
        if "az" in f or "el" in f:
            raise SceneParseError("give either 'aim' or 'az'/'el', not both", line)
        return ("aim",) + f["aim"]
    if "az" not in f or "el" not in f:
        raise SceneParseError("branch needs 'az' and 'el' (or 'aim')", line)
    el = -f["el"] if depression else f["el"]
    try:
        return Direction(f["az"], el)
    except SceneError as exc:
        raise SceneParseError(str(exc), line) from exc


def parse_scene(text: str) -> Scene:
    """Parse and validate a scene document."""
    toks = _Tokens(text)
    room = None
    reflect = dict(DEFAULT_REFLECTIVITY)
    edges = list(DEFAULT_ELEMENT_EDGES)
    params = {}
    adts, rxs = [], []
    seen = set()
    while True:
        toks.skip_newlines()
        tok, line = toks.next()
        if tok is None:
            break
        if tok in ("room", "reflectivity", "element", "params") and tok in seen:
            raise SceneParseError(f"duplicate {tok!r} declaration", line)
        if tok == "room":
            seen.add(tok)
            room = _position(toks)
            toks.end_of_decl()
        elif tok == "reflectivity":
            seen.add(tok)
            while toks.peek()[0] not in ("\n", None):
                name, nline = toks.word("surface name")
                if name not in SURFACE_NAMES + ("wall",):
                    raise SceneParseError(f"unknown surface {name!r}", nline)
                val, vline = toks.word(f"reflectivity of {name}")
                reflect[name] = quantity(val, "number", vline)
            toks.end_of_decl()
        elif tok == "element":
            seen.add(tok)
            f = _fields(toks, {"first": "length", "second": "length"}, line)
            edges = [f.get("first", edges[0]), f.get("second", edges[1])]
            toks.end_of_decl()
        elif tok == "params":
            seen.add(tok)
            f = _fields(toks, _PARAMS, line)
            for key, val in f.items():
                if key == "maxorder":
                    if val != int(val):
                        raise SceneParseError("maxorder must be an integer", line)
                    val = int(val)
                elif key == "combining":
                    val = val[0]
                elif key == "shotnoise":
                    if val[0] not in ("on", "off"):
                        raise SceneParseError("shotnoise must be 'on' or 'off'", val[1])
                    val = val[0] == "on"
                params[_PARAM_NAMES[key]] = val
            toks.end_of_decl()
        elif tok == "adt":
            label = None
            nxt, nline = toks.next()
            if nxt != "at":
                label = nxt
                toks.expect("at")
            pos = _position(toks)
            toks.skip_newlines()
            branches = _block(toks, _ADT_BRANCH)
            toks.end_of_decl()
            adts.append((label, pos, branches, line))
        elif tok == "receiver":
            label, _ = toks.word("receiver label")
            toks.expect("at")
            pos = _position(toks)
            f = _fields(toks, _RX_FIELDS, line)
            if "kind" not in f:
                raise SceneParseError(f"receiver {label} needs 'kind wfov' or 'kind adr'", line)
            kind = f["kind"][0]
            if kind not in (WFOV, ADR):
                raise SceneParseError(f"unknown receiver kind {kind!r}", f["kind"][1])
            branches = []
            if kind == ADR:
                toks.skip_newlines()
                branches = _block(toks, _DET_BRANCH)
            toks.end_of_decl()
            rxs.append((label, pos, kind, f, branches, line))
        else:
            raise SceneParseError(f"unknown declaration {tok!r}", line)

    if room is None:
        raise SceneParseError("missing 'room' declaration")

    tx_labels = []
    for i, (label, *_rest) in enumerate(adts):
        tx_labels.append(label or f"ADT{i + 1}")
    rx_pos = {}
    for label, pos, *_ in rxs:
        rx_pos.setdefault(label, pos)
    tx_pos = dict(zip(tx_labels, (a[1] for a in adts)))

    def resolve(d, here, targets, line):
        if isinstance(d, Direction):
            return d
        _, name, aline = d
        if name not in targets:
            raise SceneParseError(f"aim target {name!r} not declared", aline)
        try:
            return bearing(here, targets[name])
        except SceneError as exc:
            raise SceneParseError(str(exc), aline) from exc

    params_obj = SimulationParams(**params)
    transmitters = []
    for (label, pos, branches, line), name in zip(adts, tx_labels):
        out = []
        for k, (f, bline) in enumerate(branches):
            d = resolve(_orientation(f, bline, True), pos, rx_pos, bline)
            out.append(AdtBranch(
                d, f.get("semi", DEFAULT_SEMI_ANGLE_DEG),
                f.get("lambda", WAVELENGTH_PLAN_NM[k % len(WAVELENGTH_PLAN_NM)]),
                f.get("power", DEFAULT_POWER_W)))
        transmitters.append(Transmitter(name, Vec3(*pos), tuple(out)))
    receivers = []
    for label, pos, kind, f, branches, line in rxs:
        area = f.get("area", DEFAULT_DETECTOR_AREA_M2)
        resp = f.get("resp", DEFAULT_RESPONSIVITY)
        if kind == WFOV:
            fov = f.get("fov", 90.0)
            receivers.append(Receiver(label, Vec3(*pos), WFOV,
                                      (DetectorBranch(UP, fov, area, resp),)))
        else:
            fov = f.get("fov", DEFAULT_ADR_FOV_DEG)
            dets = []
            for bf, bline in branches:
                d = resolve(_orientation(bf, bline, False), pos, tx_pos, bline)
                dets.append(DetectorBranch(d, bf.get("fov", fov), bf.get("area", area),
                                           bf.get("resp", resp)))
            receivers.append(Receiver(label, Vec3(*pos), ADR, tuple(dets)))
    return Scene(tuple(room), box_surfaces(room, reflect, edges), transmitters,
                 receivers, params_obj)


def load_scene(path) -> Scene:
    return parse_scene(Path(path).read_text())


def _f(x: float) -> str:
    return repr(float(x))


def dump_scene(scene: Scene) -> str:
    """Canonical text for ``scene``; parses back to an equal Scene."""
    L, W, H = scene.room
    lines = [f"room {_f(L)} {_f(W)} {_f(H)}"]
    lines.append("reflectivity " + " ".join(f"{s.name} {_f(s.rho)}" for s in scene.surfaces))
    e1, e2 = scene.surfaces[0].element_edges
    lines.append(f"element first {_f(e1)}m second {_f(e2)}m")
    p = scene.params
    lines.append(
        f"params bandwidth {_f(p.bandwidth)}Hz nsd {_f(p.nsd)}A bitrate {_f(p.bit_rate)}bps "
        f"maxorder {p.max_order} bin {_f(p.bin_width)}s ibg {_f(p.background_current)}A "
        f"c {_f(p.c)} eyecap {_f(p.eye_safety_cap)}W combining {p.combining} "
        f"shotnoise {'on' if p.signal_shot_noise else 'off'}"
    )
    for tx in scene.transmitters:
        x, y, z = tx.position
        lines.append(f"adt {tx.label} at {_f(x)} {_f(y)} {_f(z)} {{")
        for b in tx.branches:
            o = b.orientation
            lines.append(
                f"  branch az {_f(o.azimuth)}deg el {_f(-o.elevation)}deg semi {_f(b.semi_angle)}deg "
                f"lambda {_f(b.wavelength_nm)}nm power {_f(b.power_w)}W"
            )
        lines.append("}")
    for rx in scene.receivers:
        x, y, z = rx.position
        head = f"receiver {rx.label} at {_f(x)} {_f(y)} {_f(z)} kind {rx.kind}"
        if rx.kind == WFOV:
            d = rx.branches[0]
            lines.append(f"{head} fov {_f(d.fov)}deg area {_f(d.area)}m2 resp {_f(d.responsivity)}")
        else:
            lines.append(head + " {")
            for d in rx.branches:
                o = d.orientation
                lines.append(
                    f"  branch az {_f(o.azimuth)}deg el {_f(o.elevation)}deg fov {_f(d.fov)}deg "
                    f"area {_f(d.area)}m2 resp {_f(d.responsivity)}"
                )
            lines.append("}")
    return "\n".join(lines) + "\n"


def scene_digest(scene: Scene) -> str:
    """SHA-256 of the canonical form: insensitive to whitespace and comments."""
    return hashlib.sha256(dump_scene(scene).encode()).hexdigest()


PAPER_SCENE_PATH = Path(__file__).with_name("data") / "paper.scene"


def builtin_scene(name: str) -> Scene:
    if name == "paper":
        return load_scene(PAPER_SCENE_PATH)
    raise KeyError(f"unknown builtin scene {name!r}")
