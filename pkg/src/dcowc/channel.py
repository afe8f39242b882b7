"""Optical channel: Lambertian emission, LoS gain and diffuse bounces.

The impulse response between one emitter and one detector is the sum of
the direct path and every one- and two-bounce path through the room's
reflecting elements, binned by total propagation delay. Reflecting
elements re-emit as ideal (n = 1) Lambertian sources.

All path lengths are accumulated in the fixed order
``(d_source_first + d_first_second) + d_second_detector`` and converted
to a bin index as ``floor((L / c) / bin_width)``; the brute-force
enumerator in :mod:`dcowc.oracle` follows the same convention so that bin
assignments agree exactly.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scene import Detector, ElementSet, Emitter, Scene

# Pairs evaluated per chunk of the second-order sum. Fixed so the reduction
# order (and therefore every bit of the result) is independent of the number
# of worker threads.
CHUNK_PAIRS = 1 << 20


@dataclass(frozen=True)
class ImpulseResponse:
    """Time-binned channel gain.

    ``bins[i]`` holds the gain arriving in absolute bin ``start + i``, i.e. in
    ``[(start + i) * bin_width, (start + i + 1) * bin_width)``; ``bins[0]`` is
    the first nonzero bin (first arrival).
    """

    bin_width: float
    start: int
    bins: np.ndarray

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=float)
        if bins.ndim != 1:
            raise ValueError("bins must be one-dimensional")
        if np.any(bins < 0.0):
            raise ValueError("impulse response bins must be non-negative")
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)

    @classmethod
    def from_histogram(cls, hist: np.ndarray, bin_width: float) -> "ImpulseResponse":
        nz = np.flatnonzero(hist)
        if nz.size == 0:
            return cls(bin_width, 0, np.zeros(0))
        return cls(bin_width, int(nz[0]), np.array(hist[nz[0]:nz[-1] + 1]))

    @property
    def origin(self) -> float:
        return self.start * self.bin_width

    @property
    def times(self) -> np.ndarray:
        """Absolute bin start times in seconds."""
        return (self.start + np.arange(self.bins.size)) * self.bin_width

    @property
    def total(self) -> float:
        return float(self.bins.sum())

    def dense(self, nbins: int | None = None) -> np.ndarray:
        n = self.start + self.bins.size if nbins is None else nbins
        out = np.zeros(n)
        out[self.start:self.start + self.bins.size] = self.bins
        return out

    def __eq__(self, other):
        if not isinstance(other, ImpulseResponse):
            return NotImplemented
        return (self.bin_width == other.bin_width and self.start == other.start
                and np.array_equal(self.bins, other.bins))

    __hash__ = None

    def to_csv(self, path):
        """Two-column export: absolute bin start time and gain per bin."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "gain_per_bin"])
            for t, g in zip(self.times, self.bins):
                w.writerow([f"{t:.17g}", f"{g:.17g}"])

    @classmethod
    def from_csv(cls, path, bin_width: float) -> "ImpulseResponse":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            return cls(bin_width, 0, np.zeros(0))
        start = int(round(float(rows[0]["time_s"]) / bin_width))
        return cls(bin_width, start, np.array([float(r["gain_per_bin"]) for r in rows]))


def lambertian_mode(semi_angle: float) -> float:
    """Lambertian order n with half the on-axis intensity at ``semi_angle`` degrees."""
    if not 0.0 < semi_angle < 90.0:
        raise ValueError(f"semi-angle {semi_angle} deg outside (0, 90)")
    return -math.log(2.0) / math.log(math.cos(math.radians(semi_angle)))


def _cos_fov(fov: float) -> float:
    return 0.0 if fov >= 90.0 else math.cos(math.radians(fov))


def _gain(sx, sy, sz, ax, ay, az, mode, dx_, dy_, dz_, nx, ny, nz, area, cos_fov):
    """Broadcasting generalized-Lambertian gain and path length.

    ``s*`` source position, ``a*`` source axis, ``d*_`` destination position,
    ``n*`` destination normal. Returns ``(gain, length)``; gain is zero where
    the destination lies outside the source's forward hemisphere or the
    source lies outside the destination's field of view.
    """
    dx = dx_ - sx
    dy = dy_ - sy
    dz = dz_ - sz
    length = np.sqrt(dx * dx + dy * dy + dz * dz)
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        cos_out = (dx * ax + dy * ay + dz * az) / length
        cos_in = -(dx * nx + dy * ny + dz * nz) / length
        ok = (cos_out > 0.0) & (cos_in > 0.0) & (cos_in >= cos_fov) & (length > 0.0)
        g = np.where(
            ok,
            (mode + 1.0) / (2.0 * np.pi * length * length)
            * np.power(np.where(ok, cos_out, 1.0), mode) * area * cos_in,
            0.0,
        )
    return g, length


def los_gain(src, axis, mode, dst, normal, area, fov=90.0) -> float:
    """Direct-path gain from a Lambertian emitter to a detector element."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if np.array_equal(src, dst):
        raise ValueError("emitter and detector coincide")
    g, _ = _gain(*src, *np.asarray(axis, float), mode, *dst, *np.asarray(normal, float),
                 area, _cos_fov(fov))
    return float(g)


def _n_bins(scene: Scene) -> int:
    L, W, H = scene.room
    diag = math.sqrt(L * L + W * W + H * H)
    return int(math.floor(3.0 * diag / scene.params.c / scene.params.bin_width)) + 2


def _bin_index(length, c, bin_width):
    return np.floor((length / c) / bin_width).astype(np.int64)


def _emit_to_elements(em: Emitter, el: ElementSet):
    return _gain(em.position[0], em.position[1], em.position[2],
                 em.axis[0], em.axis[1], em.axis[2], em.mode,
                 el.centers[:, 0], el.centers[:, 1], el.centers[:, 2],
                 el.normals[:, 0], el.normals[:, 1], el.normals[:, 2],
                 el.areas, 0.0)


def _elements_to_detector(el: ElementSet, det: Detector):
    p, n = det.position, det.normal
    return _gain(el.centers[:, 0], el.centers[:, 1], el.centers[:, 2],
                 el.normals[:, 0], el.normals[:, 1], el.normals[:, 2], 1.0,
                 p[0], p[1], p[2], n[0], n[1], n[2], det.area, _cos_fov(det.fov))


class _SecondOrder:
    """Chunked first-bounce x second-bounce sum for a set of detectors."""

    def __init__(self, e1, w1, len1, e2, w2, len2, cols, nbins, c, bin_width):
        self.e1, self.w1, self.len1 = e1, w1, len1
        self.e2, self.w2, self.len2, self.cols = e2, w2, len2, cols
        self.nbins, self.c, self.bin_width = nbins, c, bin_width

    def __call__(self, rows: slice) -> np.ndarray:
        e1, e2 = self.e1, self.e2
        c1 = e1.centers[rows]
        m1 = e1.normals[rows]
        k, d12 = _gain(c1[:, 0:1], c1[:, 1:2], c1[:, 2:3],
                       m1[:, 0:1], m1[:, 1:2], m1[:, 2:3], 1.0,
                       e2.centers[None, :, 0], e2.centers[None, :, 1], e2.centers[None, :, 2],
                       e2.normals[None, :, 0], e2.normals[None, :, 1], e2.normals[None, :, 2],
                       e2.areas[None, :], 0.0)
        # coplanar pairs carry no power; masked explicitly for coincident centers
        k[e1.surface[rows, None] == e2.surface[None, :]] = 0.0
        w1 = self.w1[rows, None]
        l1 = self.len1[rows, None]
        out = np.zeros((len(self.cols), self.nbins))
        for j, cols in enumerate(self.cols):
            if cols.size == 0:
                continue
            wts = (w1 * k[:, cols]) * self.w2[j][None, cols]
            keep = wts > 0.0
            if not keep.any():
                continue
            length = (l1 + d12[:, cols]) + self.len2[j][None, cols]
            idx = _bin_index(length[keep], self.c, self.bin_width)
            out[j] = np.bincount(idx, weights=wts[keep], minlength=self.nbins)
        return out


def impulse_responses(scene: Scene, emitter: Emitter, detectors: Sequence[Detector],
                      max_order: int | None = None, threads: int = 1) -> list[ImpulseResponse]:
    """Impulse responses from one emitter to several detectors.

    Order 0 is the direct path, order 1 sums over first-bounce elements and
    order 2 over (first-bounce, second-bounce) element pairs. Elements that
    receive exactly zero power are skipped. ``threads`` only changes
    scheduling, never the result.
    """
    p = scene.params
    order = p.max_order if max_order is None else int(max_order)
    if order not in (0, 1, 2) or order > p.max_order:
        raise ValueError(f"max_order {order} not allowed (scene limit {p.max_order})")
    nbins = _n_bins(scene)
    c, bw = p.c, p.bin_width
    hist = np.zeros((len(detectors), nbins))

    for j, det in enumerate(detectors):
        g, length = _gain(*emitter.position, *emitter.axis, emitter.mode,
                          *det.position, *det.normal, det.area, _cos_fov(det.fov))
        g = float(g)
        if g > 0.0:
            hist[j, int(_bin_index(np.float64(length), c, bw))] += g

    if order >= 1:
        e1 = scene.elements(1)
        g1, len1 = _emit_to_elements(emitter, e1)
        w1 = e1.rho * g1
        keep = np.flatnonzero(w1 > 0.0)
        e1, w1, len1 = e1.subset(keep), w1[keep], len1[keep]
        for j, det in enumerate(detectors):
            g, length = _elements_to_detector(e1, det)
            wts = w1 * g
            m = wts > 0.0
            if m.any():
                idx = _bin_index(len1[m] + length[m], c, bw)
                hist[j] += np.bincount(idx, weights=wts[m], minlength=nbins)

        if order >= 2 and len(e1):
            e2 = scene.elements(2)
            w2_all, len2_all = [], []
            for det in detectors:
                g, length = _elements_to_detector(e2, det)
                w2_all.append(e2.rho * g)
                len2_all.append(length)
            need = np.flatnonzero(np.any(np.array(w2_all) > 0.0, axis=0))
            if need.size:
                e2s = e2.subset(need)
                w2 = [w[need] for w in w2_all]
                len2 = [ln[need] for ln in len2_all]
                cols = [np.flatnonzero(w > 0.0) for w in w2]
                work = _SecondOrder(e1, w1, len1, e2s, w2, len2, cols, nbins, c, bw)
                step = max(1, CHUNK_PAIRS // need.size)
                chunks = [slice(i, min(i + step, len(e1))) for i in range(0, len(e1), step)]
                if threads > 1 and len(chunks) > 1:
                    with ThreadPoolExecutor(max_workers=threads) as pool:
                        parts = pool.map(work, chunks)
                        for part in parts:
                            hist += part
                else:
                    for ch in chunks:
                        hist += work(ch)

    return [ImpulseResponse.from_histogram(h, bw) for h in hist]


def impulse_response(scene: Scene, emitter: Emitter, detector: Detector,
                     max_order: int | None = None, threads: int = 1) -> ImpulseResponse:
    return impulse_responses(scene, emitter, [detector], max_order, threads)[0]


def received_power(ir: ImpulseResponse, power_w: float) -> float:
    return power_w * ir.total


def delay_spread(ir: ImpulseResponse) -> float:
    """RMS delay spread of the power-weighted arrival times, in seconds."""
    p = ir.bins
    total = p.sum()
    if not total > 0.0:
        raise ValueError("delay spread undefined for an all-zero impulse response")
    if np.count_nonzero(p) == 1:
        return 0.0
    t = np.arange(p.size) * ir.bin_width
    mu = (t * p).sum() / total
    return float(math.sqrt(max(((t - mu) ** 2 * p).sum() / total, 0.0)))
