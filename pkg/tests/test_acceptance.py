"""Acceptance gate: one pass/fail line per headline criterion.

Run ``python3 -m pytest tests/test_acceptance.py -v`` and read the
"acceptance criteria" section at the end of the report.
"""

import itertools
import json
import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from dcowc.channel import impulse_responses, los_gain
from dcowc.link import ber, capacity
from dcowc.optimize import AimingProblem, optimize_aiming
from dcowc.oracle import compare_scene
from dcowc.scene import box_surfaces, discretize, paper_scene
from dcowc.toys import TOYS

from conftest import record_criterion, worst_relative_change
from test_optimize import _direct_branch_value, two_branch_toy

THRESHOLD_DB = 15.6
WAIVER_DB = 12.6


def _db(x):
    return 10.0 * math.log10(x) if x > 0.0 else -math.inf


def _q(s):
    mpmath.mp.dps = 50
    return float(mpmath.erfc(mpmath.sqrt(mpmath.mpf(s)) / mpmath.sqrt(2)) / 2)


def test_ber_snr_anchor():
    at_anchor, at_30 = ber(36.3), ber(30.0)
    worst = max(abs(ber(s) - _q(s)) / _q(s) for s in np.linspace(0.0, 100.0, 401))
    ok = at_anchor <= 1e-9 < at_30 and worst <= 1e-12
    record_criterion("BER/SNR anchor", ok,
                     f"ber(36.3)={at_anchor:.4e} <= 1e-9 < ber(30)={at_30:.4e}; "
                     f"max rel dev vs 50-digit erfc {worst:.1e}")
    assert ok


def test_capacity_anchor():
    c = capacity(7.0, 5e9)
    ok = c == 15e9
    record_criterion("Capacity anchor", ok, f"capacity(7, 5 GHz) = {c:.17g} bit/s")
    assert ok


def test_paper_scene_snr(paper_run):
    out, rows = paper_run
    seconds = json.loads((out / "summary.json").read_text())["duration_s"]
    adr = [r for r in rows if r["rx_kind"] == "adr"]
    worst = min(adr, key=lambda r: r["snr_db"])
    ok = len(adr) == 16 and worst["snr_db"] > THRESHOLD_DB and seconds < 600
    detail = (f"min ADR-combined SNR {worst['snr_db']:.2f} dB ({worst['tx']}->{worst['rx']}) "
              f"over 16 links, > {THRESHOLD_DB} dB; {seconds:.0f} s for order-2 tracing")
    if not ok and worst["snr_db"] >= WAIVER_DB:
        detail += " (within the -3 dB waiver band)"
    record_criterion("Reference-hall SNR reproduction", ok, detail)
    assert ok


def test_qualitative_orderings(paper_run):
    _, rows = paper_run
    by = {(r["tx"], r["rx"], r["rx_kind"]): r for r in rows}
    pairs = sorted({(r["tx"], r["rx"]) for r in rows})
    snr_ok = all(by[(t, r, "adr")]["snr_db"] >= by[(t, r, "wfov")]["snr_db"] for t, r in pairs)
    spread_ok = all(by[(t, r, "adr")]["delay_spread_ns"] <= by[(t, r, "wfov")]["delay_spread_ns"]
                    for t, r in pairs)
    receivers = sorted({r for _, r in pairs})
    worst_link = {rx: min(by[(t, rx, "adr")]["snr_db"] for t, r in pairs if r == rx)
                  for rx in receivers}
    mean_link = {rx: np.mean([by[(t, rx, "adr")]["snr_db"] for t, r in pairs if r == rx])
                 for rx in receivers}
    r1_ok = min(worst_link, key=worst_link.get) == "R1"
    panels = {t: min(receivers, key=lambda rx: by[(t, rx, "adr")]["snr_db"])
              for t in sorted({t for t, _ in pairs})}
    ok = snr_ok and spread_ok and r1_ok
    record_criterion(
        "Qualitative orderings", ok,
        f"(a) ADR>=WFOV SNR on {len(pairs)} pairs: {snr_ok}; (b) ADR<=WFOV delay spread: "
        f"{spread_ok}; (c) R1 lowest worst-link SNR: {r1_ok} "
        f"({', '.join(f'{k} {v:.2f}' for k, v in worst_link.items())} dB; "
        f"R1 lowest mean: {min(mean_link, key=mean_link.get) == 'R1'}; "
        f"per-panel minima {panels})")
    assert ok


def test_oracle_equivalence():
    worst, names = 0.0, []
    for name, make in sorted(TOYS.items()):
        scene = make()
        per_surface = max(np.bincount(scene.elements(o).surface).max() for o in (1, 2))
        assert per_surface <= 10
        worst = max(worst, max(r[-1] for r in compare_scene(scene)))
        names.append(name)
    ok = len(names) >= 3 and worst <= 1e-9
    record_criterion("Oracle equivalence", ok,
                     f"{len(names)} toy scenes ({', '.join(names)}), max bin deviation {worst:.1e}")
    assert ok


def test_physics_property_suite(paper_convergence):
    checks = {}
    norm = []
    for n in (1.0, 2.0, 4.82, 20.0):
        v, _ = integrate.quad(lambda th: (n + 1) * math.cos(th) ** n * math.sin(th),
                              0.0, math.pi / 2, epsabs=1e-13)
        norm.append(abs(v - 1.0))
    checks["hemisphere"] = max(norm) <= 1e-6

    down, up = np.array([0.0, 0.0, -1.0]), np.array([0.0, 0.0, 1.0])
    g1 = los_gain((0, 0, 2), down, 4.82, (0.3, 0.2, 0), up, 1e-4)
    g2 = los_gain((0, 0, 4), down, 4.82, (0.6, 0.4, 0), up, 1e-4)
    checks["inverse-square"] = math.isclose(g2, g1 / 4, rel_tol=1e-12)

    def tilted(psi, fov):
        nrm = (math.sin(math.radians(psi)), 0.0, math.cos(math.radians(psi)))
        return los_gain((0, 0, 2), down, 1.0, (0, 0, 0), nrm, 1e-4, fov)
    checks["FOV cutoff"] = tilted(4.999, 5.0) > 0.0 == tilted(5.001, 5.0)

    sums = []
    for edge in (0.5, 0.25, 0.125):
        s = 0.0
        for surf in box_surfaces((2.0, 2.0, 2.0), element_edges=(edge, edge)):
            el = discretize(surf, 1)
            for c, nrm, a in zip(el.centers, el.normals, el.areas):
                s += los_gain((1.0, 1.0, 1.0), down, 1.0, c, nrm, a)
        sums.append(s)
    errs = [abs(s - 1.0) for s in sums]
    checks["energy conservation"] = max(sums) <= 1.05 and errs[0] > errs[1] > errs[2]

    first = worst_relative_change(paper_convergence[0], paper_convergence[1])
    second = worst_relative_change(paper_convergence[1], paper_convergence[2])
    checks["convergence"] = first < 0.05 and second < 0.02

    sc = paper_scene(semi_angle=30.0)
    dets = [sc.detector(r, i) for r in sc.receivers[:5] for i in range(len(r.branches))]
    em = sc.emitter(sc.transmitters[0], 0)
    one = impulse_responses(sc, em, dets, 2, threads=1)
    many = impulse_responses(sc, em, dets, 2, threads=3)
    checks["threads bit-identical"] = all(a == b for a, b in zip(one, many))

    ok = all(checks.values())
    record_criterion("Physics property suite", ok,
                     "; ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items())
                     + f" (normalization err {max(norm):.1e}, room sums "
                       f"{', '.join(f'{s:.4f}' for s in sums)}, halving changes "
                       f"{first:.1e} then {second:.1e})")
    assert ok


def test_optimizer_sanity():
    scene = two_branch_toy()
    problem = AimingProblem(scene, (("T", 0, "A"), ("T", 1, "B")), kind="wfov",
                            az_window=6.0, el_window=6.0, az_step=2.0, el_step=2.0,
                            optimize_semi=False, init="scene")
    sol = optimize_aiming(problem)
    grids = []
    for tx_label, bi, rx_label in problem.targets:
        b = scene.transmitter(tx_label).branches[bi]
        pts = [(b.orientation.azimuth + da, b.orientation.elevation + de, b.semi_angle)
               for da in np.arange(-6.0, 6.1, 2.0) for de in np.arange(-6.0, 6.1, 2.0)]
        grids.append([_direct_branch_value(scene, tx_label, bi, rx_label, p) for p in pts])

    def objective(vals):
        snrs = tuple(sorted(v[1] for v in vals))
        return (all(v[0] for v in vals), snrs[0], -max(v[2] for v in vals), snrs)

    best = max(objective(c) for c in itertools.product(*grids))
    argmax_ok = math.isclose(sol.min_snr, best[1], rel_tol=1e-12) and sol.feasible
    monotone = all(b >= a for a, b in zip(sol.history, sol.history[1:]))

    geo = optimize_aiming(AimingProblem(paper_scene("printed", receiver_aiming="geometric"),
                                        optimize_semi=False))
    beats_init = geo.min_snr >= geo.initial_min_snr and sol.min_snr >= sol.initial_min_snr
    ok = argmax_ok and monotone and beats_init
    record_criterion(
        "Optimizer sanity", ok,
        f"coordinate descent = exhaustive argmax on 2-branch toy: {argmax_ok}; "
        f"objective non-decreasing: {monotone}; min-SNR >= geometric init: {beats_init} "
        f"(printed-angle scene, geometric start {_db(geo.initial_min_snr):.2f} -> "
        f"{geo.min_snr_db:.2f} dB, single-receiver constraint met: {geo.feasible})")
    assert ok
