"""Coordinate-descent search over ADT branch orientations.

Each optimized branch has a target receiver. The objective is
lexicographic: every branch must see only its own target, then the
minimum target-link SNR is maximized, then the largest delay spread is
minimized, and finally the remaining SNRs are compared in ascending order
(leximin). The search is a fixed-order sweep over (branch, azimuth,
elevation, semi-angle) on grids anchored at the starting point; ties go to
the smaller coordinate value so runs are reproducible.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import impulse_responses, lambertian_mode
from .link import combine_adr, metrics_from_ir
from .scene import ADR, AdtBranch, Direction, Emitter, Scene, bearing

SEES_ONE_THRESHOLD = 0.01


class InfeasibleAiming(ValueError):
    pass


def aim_branch(scene: Scene, tx_label: str, branch: int, rx_label: str) -> Direction:
    """Exact bearing from the transmitter to the receiver position."""
    tx = scene.transmitter(tx_label)
    if not 0 <= branch < len(tx.branches):
        raise IndexError(f"{tx_label} has no branch {branch}")
    rx = next((r for r in scene.receivers if r.label == rx_label), None)
    if rx is None:
        raise KeyError(f"no receiver labelled {rx_label!r}")
    return bearing(tuple(tx.position), tuple(rx.position))


def _irradiance(pos, b: AdtBranch, target) -> float:
    d = np.asarray(target, float) - pos
    dist = float(np.sqrt(d @ d))
    axis = np.array(b.orientation.vector)
    cphi = float(d @ axis) / dist
    if cphi <= 0.0:
        return 0.0
    n = lambertian_mode(b.semi_angle)
    return (n + 1.0) / (2.0 * math.pi * dist * dist) * cphi ** n


def visible_receivers(scene: Scene, tx_label: str, branch: AdtBranch | int,
                      threshold: float = SEES_ONE_THRESHOLD) -> list[str]:
    """Receivers whose LoS irradiance exceeds ``threshold`` x the branch maximum."""
    tx = scene.transmitter(tx_label)
    b = tx.branches[branch] if isinstance(branch, int) else branch
    pos = tx.position.array
    vals = {}
    for r in scene.receivers:
        vals.setdefault(r.label, _irradiance(pos, b, tuple(r.position)))
    top = max(vals.values())
    if top <= 0.0:
        return []
    return [k for k, v in vals.items() if v > threshold * top]


def strongest_receiver(scene: Scene, tx_label: str, branch: AdtBranch | int) -> str | None:
    tx = scene.transmitter(tx_label)
    b = tx.branches[branch] if isinstance(branch, int) else branch
    best, best_v = None, 0.0
    for r in scene.receivers:
        v = _irradiance(tx.position.array, b, tuple(r.position))
        if v > best_v:
            best, best_v = r.label, v
    return best


@dataclass(frozen=True)
class AimingProblem:
    """Search definition. ``targets`` lists ``(tx, branch, receiver)``; by
    default branch i of every transmitter targets the i-th receiver label."""

    scene: Scene
    targets: tuple[tuple[str, int, str], ...] = ()
    kind: str = ADR
    az_window: float = 10.0
    el_window: float = 10.0
    semi_range: tuple[float, float] = (0.5, 15.0)
    az_step: float = 1.0
    el_step: float = 1.0
    semi_step: float = 0.5
    optimize_semi: bool = True
    max_order: int = 0
    init: str = "geometric"
    max_sweeps: int = 10
    threads: int = 1

    def __post_init__(self):
        if not self.targets:
            tg = []
            labels = self.scene.receiver_labels
            for tx in self.scene.transmitters:
                for i in range(min(len(tx.branches), len(labels))):
                    tg.append((tx.label, i, labels[i]))
            object.__setattr__(self, "targets", tuple(tg))
        object.__setattr__(self, "targets", tuple(tuple(t) for t in self.targets))
        for name in ("az_step", "el_step", "semi_step"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if min(self.az_window, self.el_window) < 0.0:
            raise ValueError("search windows must be non-negative")
        lo, hi = self.semi_range
        if not 0.0 < lo <= hi < 90.0:
            raise ValueError(f"semi-angle range {self.semi_range} outside (0, 90)")
        if self.init not in ("geometric", "scene"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.max_order > self.scene.params.max_order:
            raise ValueError("problem max_order exceeds the scene's")


@dataclass
class AimingSolution:
    scene: Scene
    branches: dict            # (tx, branch) -> (azimuth, elevation, semi_angle)
    snr: dict                 # (tx, branch) -> linear SNR at the target
    delay_spread: dict
    min_snr: float
    initial_min_snr: float
    evaluations: int
    initial_snr: dict = field(default_factory=dict)
    history: list = field(default_factory=list)   # objective tuple after each sweep
    feasible: bool = True
    violations: list = field(default_factory=list)

    @property
    def min_snr_db(self) -> float:
        return 10.0 * math.log10(self.min_snr) if self.min_snr > 0.0 else -math.inf


def check_targets(problem: AimingProblem):
    """Reject target lists that force two branches of one ADT onto one receiver."""
    by_receiver, by_branch = {}, set()
    for tx, b, rx in problem.targets:
        problem.scene.transmitter(tx).branches[b]
        if (tx, b) in by_branch:
            raise InfeasibleAiming(f"branch {b} of {tx} has several targets")
        if (tx, rx) in by_receiver:
            raise InfeasibleAiming(
                f"branches {by_receiver[(tx, rx)]} and {b} of {tx} are both forced onto {rx}"
            )
        by_branch.add((tx, b))
        by_receiver[(tx, rx)] = b


def _target_receiver(scene: Scene, label: str, kind: str):
    for r in scene.receivers:
        if r.label == label and r.kind == kind:
            return r
    return scene.receiver(label)


class _Evaluator:
    def __init__(self, problem: AimingProblem):
        self.p = problem
        self.cache = {}

    def __call__(self, tx_label, bi, rx_label, state):
        key = (tx_label, bi, rx_label, state)
        if key in self.cache:
            return self.cache[key]
        scene = self.p.scene
        tx = scene.transmitter(tx_label)
        az, el, semi = state
        b = dataclasses.replace(tx.branches[bi], orientation=Direction(az, el), semi_angle=semi)
        vis = visible_receivers(scene, tx_label, b)
        feasible = vis == [rx_label]
        rx = _target_receiver(scene, rx_label, self.p.kind)
        em = Emitter(tx.position.array, np.array(b.orientation.vector), lambertian_mode(semi))
        dets = [scene.detector(rx, i) for i in range(len(rx.branches))]
        irs = impulse_responses(scene, em, dets, self.p.max_order, self.p.threads)
        cand = dataclasses.replace(tx, branches=tx.branches[:bi] + (b,) + tx.branches[bi + 1:])
        per = [metrics_from_ir(scene, ir, cand, bi, rx, i) for i, ir in enumerate(irs)]
        m = per[0] if rx.kind != ADR else combine_adr(per, scene.params.combining,
                                                      scene.params.bandwidth)
        out = (feasible, m.snr, m.delay_spread)
        self.cache[key] = out
        return out


def _objective(results: dict):
    """(all feasible, min SNR, -max delay spread, ascending SNR vector)."""
    vals = list(results.values())
    snrs = tuple(sorted(v[1] for v in vals))
    return (all(v[0] for v in vals), snrs[0], -max(v[2] for v in vals), snrs)


def _grid(center, window, step, lo, hi):
    k = int(math.floor(window / step + 1e-9))
    vals = [center + i * step for i in range(-k, k + 1)]
    return [v for v in vals if lo <= v <= hi]


def optimize_aiming(problem: AimingProblem) -> AimingSolution:
    check_targets(problem)
    scene = problem.scene
    ev = _Evaluator(problem)

    state, centers = {}, {}
    for tx, bi, rx in problem.targets:
        br = scene.transmitter(tx).branches[bi]
        d = aim_branch(scene, tx, bi, rx) if problem.init == "geometric" else br.orientation
        state[(tx, bi)] = (d.azimuth, d.elevation, br.semi_angle)
        centers[(tx, bi)] = state[(tx, bi)]
    target_of = {(tx, bi): rx for tx, bi, rx in problem.targets}

    results = {k: ev(k[0], k[1], target_of[k], s) for k, s in state.items()}
    initial_snr = {k: r[1] for k, r in results.items()}
    initial = _objective(results)
    history = [initial]
    lo_s, hi_s = problem.semi_range
    n_semi = int(math.floor((hi_s - lo_s) / problem.semi_step + 1e-9))
    semi_grid = [lo_s + i * problem.semi_step for i in range(n_semi + 1)]

    for _ in range(problem.max_sweeps):
        changed = False
        for key in state:
            az0, el0, _s0 = centers[key]
            grids = (
                _grid(az0, problem.az_window, problem.az_step, -math.inf, math.inf),
                _grid(el0, problem.el_window, problem.el_step, -90.0, 90.0),
                sorted(set(semi_grid) | {state[key][2]}) if problem.optimize_semi else [state[key][2]],
            )
            for coord, grid in enumerate(grids):
                best_v, best_res, best_obj = None, None, None
                for v in grid:
                    cand = list(state[key])
                    cand[coord] = v
                    cand = tuple(cand)
                    res = ev(key[0], key[1], target_of[key], cand)
                    trial = dict(results)
                    trial[key] = res
                    obj = _objective(trial)
                    if best_obj is None or obj > best_obj:
                        best_v, best_res, best_obj = v, res, obj
                if best_v != state[key][coord]:
                    s = list(state[key])
                    s[coord] = best_v
                    state[key] = tuple(s)
                    results[key] = best_res
                    changed = True
        history.append(_objective(results))
        if not changed:
            break

    final = _objective(results)
    txs = []
    for tx in scene.transmitters:
        branches = list(tx.branches)
        for (label, bi), (az, el, semi) in state.items():
            if label == tx.label:
                branches[bi] = dataclasses.replace(branches[bi], orientation=Direction(az, el),
                                                   semi_angle=semi)
        txs.append(dataclasses.replace(tx, branches=tuple(branches)))
    solved = dataclasses.replace(scene, transmitters=tuple(txs))
    violations = [
        (k[0], k[1], target_of[k], visible_receivers(solved, k[0], k[1]))
        for k, r in results.items() if not r[0]
    ]
    return AimingSolution(
        scene=solved,
        branches=dict(state),
        snr={k: r[1] for k, r in results.items()},
        delay_spread={k: r[2] for k, r in results.items()},
        min_snr=final[1],
        initial_min_snr=initial[1],
        evaluations=len(ev.cache),
        initial_snr=initial_snr,
        history=history,
        feasible=final[0],
        violations=violations,
    )
