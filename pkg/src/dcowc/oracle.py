"""Brute-force path enumeration, used to cross-check the vectorized kernel.

Every (element) and (element, element) path is visited in plain Python
with scalar math. Only the element geometry is shared with the kernel;
gains, visibility and binning are re-derived here.
"""

from __future__ import annotations

import math

import numpy as np

from .channel import ImpulseResponse, impulse_responses
from .scene import Detector, Emitter, Scene

MAX_ORACLE_ELEMENTS = 600


class OracleTooLarge(ValueError):
    pass


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _link(src, axis, mode, dst, normal, area, fov):
    d = _sub(dst, src)
    length = math.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
    if length == 0.0:
        return 0.0, length
    cphi = _dot(d, axis) / length
    cpsi = -_dot(d, normal) / length
    if cphi <= 0.0 or cpsi <= 0.0:
        return 0.0, length
    if math.degrees(math.acos(min(cpsi, 1.0))) > fov and fov < 90.0:
        return 0.0, length
    g = (mode + 1.0) / (2.0 * math.pi * length ** 2) * math.pow(cphi, mode) * area * cpsi
    return g, length


def enumerate_paths(scene: Scene, emitter: Emitter, detector: Detector, max_order=None):
    """Yield ``(gain, path_length, order)`` for every path with nonzero gain."""
    order = scene.params.max_order if max_order is None else max_order
    src = tuple(float(v) for v in emitter.position)
    axis = tuple(float(v) for v in emitter.axis)
    det = tuple(float(v) for v in detector.position)
    dn = tuple(float(v) for v in detector.normal)

    g, length = _link(src, axis, emitter.mode, det, dn, detector.area, detector.fov)
    if g > 0.0:
        yield g, length, 0
    if order < 1:
        return

    def rows(es):
        return [(tuple(c), tuple(n), float(a), float(r), int(s))
                for c, n, a, r, s in zip(es.centers.tolist(), es.normals.tolist(),
                                         es.areas, es.rho, es.surface)]

    first = rows(scene.elements(1))
    second = rows(scene.elements(2)) if order >= 2 else []
    for c1, n1, a1, r1, s1 in first:
        g1, l1 = _link(src, axis, emitter.mode, c1, n1, a1, 90.0)
        p1 = r1 * g1
        if p1 == 0.0:
            continue
        g, l = _link(c1, n1, 1.0, det, dn, detector.area, detector.fov)
        if g > 0.0:
            yield p1 * g, l1 + l, 1
        for c2, n2, a2, r2, s2 in second:
            if s2 == s1:
                continue
            g12, l12 = _link(c1, n1, 1.0, c2, n2, a2, 90.0)
            if g12 == 0.0 or r2 == 0.0:
                continue
            g, l = _link(c2, n2, 1.0, det, dn, detector.area, detector.fov)
            if g > 0.0:
                yield p1 * g12 * r2 * g, (l1 + l12) + l, 2


def oracle_response(scene: Scene, emitter: Emitter, detector: Detector, max_order=None):
    n_first = len(scene.elements(1))
    if n_first > MAX_ORACLE_ELEMENTS:
        raise OracleTooLarge(
            f"{n_first} first-bounce elements exceeds the oracle cap of {MAX_ORACLE_ELEMENTS}"
        )
    c, w = scene.params.c, scene.params.bin_width
    acc: dict[int, list[float]] = {}
    for g, length, _ in enumerate_paths(scene, emitter, detector, max_order):
        acc.setdefault(math.floor((length / c) / w), []).append(g)
    if not acc:
        return ImpulseResponse(w, 0, np.zeros(0))
    lo, hi = min(acc), max(acc)
    bins = np.zeros(hi - lo + 1)
    for k, gains in acc.items():
        bins[k - lo] = math.fsum(gains)
    return ImpulseResponse(w, lo, bins)


def relative_deviation(a: ImpulseResponse, b: ImpulseResponse) -> float:
    """Max per-bin ``|a - b| / max(|a|, |b|)`` (0 where both bins are zero)."""
    n = max(a.start + a.bins.size, b.start + b.bins.size)
    x, y = a.dense(n), b.dense(n)
    scale = np.maximum(np.abs(x), np.abs(y))
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0.0, np.abs(x - y) / scale, 0.0)
    return float(rel.max()) if rel.size else 0.0


def compare_scene(scene: Scene, max_order=None):
    """Kernel vs oracle over every (transmitter branch, detector branch) pair.

    Returns a list of ``(tx, branch, rx, kind, detector_branch, deviation)``.
    """
    out = []
    for tx in scene.transmitters:
        for bi in range(len(tx.branches)):
            em = scene.emitter(tx, bi)
            dets = [(rx, di) for rx in scene.receivers for di in range(len(rx.branches))]
            fast = impulse_responses(scene, em, [scene.detector(rx, di) for rx, di in dets],
                                     max_order)
            for (rx, di), ir in zip(dets, fast):
                ref = oracle_response(scene, em, scene.detector(rx, di), max_order)
                out.append((tx.label, bi, rx.label, rx.kind, di, relative_deviation(ir, ref)))
    return out
