"""Link metrics: eye powers, noise, SNR, OOK BER and Shannon capacity."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.constants import e as ELECTRON_CHARGE
from scipy.special import erfc

from .channel import (ImpulseResponse, delay_spread, impulse_responses,
                      received_power)
from .scene import ADR, Scene, Transmitter


@dataclass(frozen=True)
class EyePowers:
    ps1: float
    ps0: float

    @property
    def opening(self) -> float:
        return max(self.ps1 - self.ps0, 0.0)


@dataclass(frozen=True)
class NoiseBudget:
    preamp: float
    background: float
    signal: float

    @property
    def total(self) -> float:
        return self.preamp + self.background + self.signal


@dataclass(frozen=True)
class LinkMetrics:
    tx: str
    rx: str
    rx_kind: str
    tx_branch: int
    rx_branch: int
    wavelength_nm: float
    eye: EyePowers
    noise: NoiseBudget
    snr: float
    ber: float
    capacity: float
    delay_spread: float

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr) if self.snr > 0.0 else -math.inf

    @property
    def received_power(self) -> float:
        return self.eye.ps1 + self.eye.ps0


def eye_powers(ir: ImpulseResponse, power_w: float, bit_rate: float) -> EyePowers:
    """Worst-case eye: power inside the first bit slot versus ISI spill.

    Time zero is the first arrival; bins starting before ``1 / bit_rate``
    count toward a '1', the rest leak into the following slot.
    """
    if not bit_rate > 0.0:
        raise ValueError("bit rate must be positive")
    if not ir.total > 0.0:
        raise ValueError("no signal: all-zero impulse response")
    # bins whose start lies before one bit period; counted in integers so a
    # bin starting exactly at 1/bit_rate is never misfiled by rounding
    n_on = math.ceil((1.0 / bit_rate) / ir.bin_width * (1.0 - 1e-12))
    ps1 = power_w * float(ir.bins[:n_on].sum())
    ps0 = power_w * float(ir.bins[n_on:].sum())
    return EyePowers(ps1, ps0)


def noise_budget(p_on: float, responsivity: float, bandwidth: float, nsd: float,
                 background_current: float = 0.0, signal_shot: bool = True) -> NoiseBudget:
    if not bandwidth > 0.0:
        raise ValueError("bandwidth must be positive")
    if min(p_on, responsivity, nsd, background_current) < 0.0:
        raise ValueError("noise inputs must be non-negative")
    q = ELECTRON_CHARGE
    sig = 2.0 * q * responsivity * p_on * bandwidth if signal_shot else 0.0
    return NoiseBudget(nsd * nsd * bandwidth, 2.0 * q * background_current * bandwidth, sig)


def snr(eye: EyePowers, responsivity: float, noise: NoiseBudget) -> float:
    total = noise.total
    if not total > 0.0:
        raise ValueError("total noise variance must be positive")
    return (responsivity * eye.opening) ** 2 / total


def ber(snr_value) -> float:
    """OOK bit error rate Q(sqrt(SNR))."""
    s = np.asarray(snr_value, dtype=float)
    if np.any(s < 0.0):
        raise ValueError("SNR must be non-negative")
    out = 0.5 * erfc(np.sqrt(s) / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def capacity(snr_value: float, bandwidth: float) -> float:
    """Shannon capacity in bit/s."""
    if snr_value < 0.0 or not bandwidth > 0.0:
        raise ValueError("capacity needs SNR >= 0 and bandwidth > 0")
    return bandwidth * math.log2(1.0 + snr_value)


def combine_adr(per_branch: Sequence[LinkMetrics], mode: str = "select",
                bandwidth: float | None = None) -> LinkMetrics:
    """Select-best (default) or maximal-ratio combining of ADR branches.

    Select-best returns the first branch with maximal SNR. MRC reports the
    summed SNR on top of the best branch's powers; BER and capacity are
    recomputed, for which ``bandwidth`` is required.
    """
    if not per_branch:
        raise ValueError("no ADR branches to combine")
    best = per_branch[0]
    for m in per_branch[1:]:
        if m.snr > best.snr:
            best = m
    if mode == "select":
        return best
    if mode != "mrc":
        raise ValueError(f"unknown combining mode {mode!r}")
    if bandwidth is None:
        raise ValueError("MRC combining needs the bandwidth")
    total = math.fsum(m.snr for m in per_branch)
    return replace(best, snr=total, ber=ber(total), capacity=capacity(total, bandwidth))


def metrics_from_ir(scene: Scene, ir: ImpulseResponse, tx: Transmitter, tx_branch: int,
                    rx, rx_branch: int) -> LinkMetrics:
    p = scene.params
    b = tx.branches[tx_branch]
    det = rx.branches[rx_branch]
    if ir.total > 0.0:
        eye = eye_powers(ir, b.power_w, p.bit_rate)
        spread = delay_spread(ir)
    else:
        eye, spread = EyePowers(0.0, 0.0), 0.0
    noise = noise_budget(eye.ps1, det.responsivity, p.bandwidth, p.nsd,
                         p.background_current, p.signal_shot_noise)
    s = snr(eye, det.responsivity, noise)
    return LinkMetrics(tx.label, rx.label, rx.kind, tx_branch, rx_branch, b.wavelength_nm,
                       eye, noise, s, ber(s), capacity(s, p.bandwidth), spread)


def branch_irradiance(scene: Scene, tx: Transmitter, branch: int, position) -> float:
    """Emitted intensity toward ``position`` over distance squared (per watt)."""
    em = scene.emitter(tx, branch)
    d = np.asarray(tuple(position), float) - em.position
    dist = float(np.sqrt(d @ d))
    if dist == 0.0:
        raise ValueError("receiver coincides with transmitter")
    cphi = float(d @ em.axis) / dist
    if cphi <= 0.0:
        return 0.0
    return (em.mode + 1.0) / (2.0 * math.pi * dist * dist) * cphi ** em.mode


def serving_branch(scene: Scene, tx: Transmitter | str, rx_label: str) -> int:
    """Branch of ``tx`` delivering the most power toward receiver ``rx_label``."""
    if isinstance(tx, str):
        tx = scene.transmitter(tx)
    pos = next(r.position for r in scene.receivers if r.label == rx_label)
    vals = [branch_irradiance(scene, tx, i, pos) for i in range(len(tx.branches))]
    return int(np.argmax(vals))


def _combine(scene, rx, metrics, mode):
    if rx.kind != ADR:
        return metrics[0]
    return combine_adr(metrics, mode, scene.params.bandwidth)


def evaluate_branch(scene: Scene, tx: Transmitter | str, tx_branch: int, receivers,
                    max_order=None, threads: int = 1, combining: str | None = None):
    """Metrics of one transmitter branch at several receivers (one trace)."""
    if isinstance(tx, str):
        tx = scene.transmitter(tx)
    mode = combining or scene.params.combining
    em = scene.emitter(tx, tx_branch)
    dets, owners = [], []
    for rx in receivers:
        for di in range(len(rx.branches)):
            dets.append(scene.detector(rx, di))
            owners.append((rx, di))
    irs = impulse_responses(scene, em, dets, max_order, threads)
    out = []
    pos = 0
    for rx in receivers:
        n = len(rx.branches)
        per = [metrics_from_ir(scene, irs[pos + i], tx, tx_branch, rx, i) for i in range(n)]
        pos += n
        out.append(_combine(scene, rx, per, mode))
    return out


def evaluate_link(scene: Scene, tx_label: str, branch: int, rx_label: str,
                  kind: str | None = None, max_order=None, threads: int = 1,
                  combining: str | None = None) -> LinkMetrics:
    rx = scene.receiver(rx_label, kind)
    return evaluate_branch(scene, tx_label, branch, [rx], max_order, threads, combining)[0]


def evaluate_scene(scene: Scene, kinds: Iterable[str] | None = None, max_order=None,
                   threads: int = 1, combining: str | None = None) -> list[LinkMetrics]:
    """Every (transmitter, receiver, kind) link, served by its best-aimed branch.

    Rows are ordered by transmitter, then receiver label, then kind as listed
    in the scene.
    """
    kinds = None if kinds is None else set(kinds)
    receivers = [r for r in scene.receivers if kinds is None or r.kind in kinds]
    rows = []
    for tx in scene.transmitters:
        groups: dict[int, list] = {}
        for rx in receivers:
            groups.setdefault(serving_branch(scene, tx, rx.label), []).append(rx)
        results = {}
        for bi in sorted(groups):
            for rx, m in zip(groups[bi], evaluate_branch(scene, tx, bi, groups[bi], max_order,
                                                         threads, combining)):
                results[(rx.label, rx.kind)] = m
        for label in scene.receiver_labels:
            for rx in receivers:
                if rx.label == label:
                    rows.append(results[(rx.label, rx.kind)])
    return rows


CSV_COLUMNS = ("tx", "rx", "rx_kind", "branch", "lambda_nm", "ps1_w", "ps0_w",
               "sigma_t2_a2", "snr_db", "ber", "capacity_gbps", "delay_spread_ns")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def metrics_row(m: LinkMetrics) -> dict:
    return {
        "tx": m.tx, "rx": m.rx, "rx_kind": m.rx_kind, "branch": str(m.tx_branch),
        "lambda_nm": _fmt(m.wavelength_nm), "ps1_w": _fmt(m.eye.ps1), "ps0_w": _fmt(m.eye.ps0),
        "sigma_t2_a2": _fmt(m.noise.total), "snr_db": _fmt(m.snr_db), "ber": _fmt(m.ber),
        "capacity_gbps": _fmt(m.capacity / 1e9), "delay_spread_ns": _fmt(m.delay_spread * 1e9),
    }


def write_links_csv(path, rows: Iterable[LinkMetrics]):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for m in rows:
            w.writerow(metrics_row(m))


def read_links_csv(path) -> list[dict]:
    """Rows of a links CSV with numeric columns converted to float/int."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in CSV_COLUMNS[4:]:
            r[k] = float(r[k])
        r["branch"] = int(r["branch"])
    return rows
