"""Batch drivers behind the command line: simulate, sweep, oracle, optimize."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from .link import (CSV_COLUMNS, LinkMetrics, evaluate_scene, metrics_row,
                   write_links_csv)
from .optimize import AimingProblem, AimingSolution, optimize_aiming
from .oracle import MAX_ORACLE_ELEMENTS, OracleTooLarge, compare_scene
from .scene import ADR, WFOV, Scene, SceneError, paper_scene
from .scenefile import (SceneParseError, builtin_scene as _file_builtin,
                        dump_scene, load_scene, quantity, scene_digest)
from .toys import TOYS

CAPACITY_NOTE = (
    "capacity is the raw B*log2(1+SNR) value; at SNR 15.6 dB and B = 5 GHz this is "
    "about 26 Gbit/s, above the quoted 15 Gbit/s headline"
)

ORACLE_TOLERANCE = 1e-9


def builtin_scene(name: str) -> Scene:
    if name == "paper":
        return _file_builtin("paper")
    if name == "paper-printed":
        return paper_scene("printed")
    if name == "paper-printed-tx":
        return paper_scene("printed", receiver_aiming="geometric")
    if name in TOYS:
        return TOYS[name]()
    raise KeyError(f"unknown builtin scene {name!r}")


BUILTINS = ("paper", "paper-printed", "paper-printed-tx") + tuple(TOYS)


def with_params(scene: Scene, **changes) -> Scene:
    changes = {k: v for k, v in changes.items() if v is not None}
    if not changes:
        return scene
    return dataclasses.replace(scene, params=dataclasses.replace(scene.params, **changes))


@dataclass
class RunReport:
    digest: str
    rows: list[LinkMetrics]
    summary: dict
    duration: float
    params: dict = field(default_factory=dict)


def _summary(scene: Scene, rows: list[LinkMetrics], duration: float) -> dict:
    snr_db = [m.snr_db for m in rows]
    ranking = {}
    for kind in (ADR, WFOV):
        worst = {}
        for m in rows:
            if m.rx_kind == kind:
                worst[m.rx] = min(worst.get(m.rx, math.inf), m.snr_db)
        if worst:
            ranking[kind] = [
                {"receiver": r, "min_snr_db": v}
                for r, v in sorted(worst.items(), key=lambda kv: (kv[1], kv[0]))
            ]
    return {
        "scene_digest": scene_digest(scene),
        "rows": len(rows),
        "min_snr_db": min(snr_db),
        "max_snr_db": max(snr_db),
        "max_capacity_gbps": max(m.capacity for m in rows) / 1e9,
        "ranking_by_worst_link": ranking,
        "duration_s": duration,
        "params": dataclasses.asdict(scene.params),
        "notes": [CAPACITY_NOTE],
    }


def _write_figures(out: Path, scene: Scene, rows: list[LinkMetrics]):
    table = {(m.tx, m.rx, m.rx_kind): m for m in rows}

    def cell(m, attr):
        if m is None:
            return ""
        return f"{(m.snr_db if attr == 'snr' else m.capacity / 1e9):.17g}"

    for tx in scene.transmitters:
        for fig, attr in (("fig4", "snr"), ("fig5", "capacity")):
            with open(out / f"{fig}_{tx.label}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["receiver", "adr_value", "wfov_value"])
                for label in scene.receiver_labels:
                    w.writerow([label, cell(table.get((tx.label, label, ADR)), attr),
                                cell(table.get((tx.label, label, WFOV)), attr)])


def simulate(scene: Scene, out_dir=None, kinds=None, threads: int = 1,
             combining: str | None = None) -> RunReport:
    t0 = time.perf_counter()
    rows = evaluate_scene(scene, kinds, threads=threads, combining=combining)
    duration = time.perf_counter() - t0
    summary = _summary(scene, rows, duration)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_links_csv(out / "links.csv", rows)
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        _write_figures(out, scene, rows)
    return RunReport(summary["scene_digest"], rows, summary, duration, summary["params"])


# sweeps

def _scale_element(scene: Scene, first: float) -> Scene:
    e1, e2 = scene.surfaces[0].element_edges
    edges = (first, e2 * first / e1)
    return dataclasses.replace(
        scene, surfaces=tuple(dataclasses.replace(s, element_edges=edges) for s in scene.surfaces))


def _map_tx(scene, fn):
    txs = tuple(dataclasses.replace(t, branches=tuple(fn(b) for b in t.branches))
                for t in scene.transmitters)
    return dataclasses.replace(scene, transmitters=txs)


def _map_adr(scene, fn):
    rxs = tuple(dataclasses.replace(r, branches=tuple(fn(b) for b in r.branches))
                if r.kind == ADR else r for r in scene.receivers)
    return dataclasses.replace(scene, receivers=rxs)


SWEEPS = {
    # name: (unit family, scene transform)
    "power": ("power", lambda s, v: _map_tx(s, lambda b: dataclasses.replace(b, power_w=v))),
    "semi": ("angle", lambda s, v: _map_tx(s, lambda b: dataclasses.replace(b, semi_angle=v))),
    "fov": ("angle", lambda s, v: _map_adr(s, lambda b: dataclasses.replace(b, fov=v))),
    "element": ("length", _scale_element),
    "bitrate": ("rate", lambda s, v: with_params(s, bit_rate=v)),
    "maxorder": ("number", lambda s, v: with_params(s, max_order=int(v))),
}


def parse_range(text: str, family: str) -> list[float]:
    """Sweep values from ``a,b,c`` or ``START..STOP [step S]``.

    ``S`` is an additive step with units, or ``*F`` / ``/F`` for a
    geometric one. Without a step the range doubles (or halves) from START
    toward STOP and always ends on STOP.
    """
    text = " ".join(text.split())
    if ".." not in text:
        return [quantity(t.strip(), family) for t in text.split(",") if t.strip()]
    span, _, step_txt = text.partition(" step ")
    lo_txt, _, hi_txt = span.partition("..")
    start, stop = quantity(lo_txt.strip(), family), quantity(hi_txt.strip(), family)
    step_txt = step_txt.strip()
    if not step_txt or step_txt[0] in "*/":
        if start <= 0.0 or stop <= 0.0:
            raise SceneParseError("geometric ranges need positive endpoints")
        if step_txt:
            factor = float(step_txt[1:])
            factor = 1.0 / factor if step_txt[0] == "/" else factor
        else:
            factor = 2.0 if stop >= start else 0.5
        if factor <= 0.0 or factor == 1.0 or (stop - start) * (factor - 1.0) < 0.0:
            raise SceneParseError(f"step {step_txt!r} does not move from {lo_txt} toward {hi_txt}")
        vals, v = [], start
        while (v <= stop * (1 + 1e-12)) if factor > 1 else (v >= stop * (1 - 1e-12)):
            vals.append(v)
            v *= factor
        if not math.isclose(vals[-1], stop, rel_tol=1e-9):
            vals.append(stop)
        return vals
    step = quantity(step_txt, family)
    if step == 0.0 or (stop - start) / step < 0.0:
        raise SceneParseError(f"step {step_txt!r} does not reach {hi_txt.strip()!r}")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [start + i * step for i in range(n + 1)]


def sweep(scene: Scene, parameter: str, values, out_dir, kinds=None, threads: int = 1,
          combining: str | None = None) -> list[RunReport]:
    if parameter not in SWEEPS:
        raise KeyError(f"unknown sweep parameter {parameter!r} (one of {', '.join(SWEEPS)})")
    _, fn = SWEEPS[parameter]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=("param", "value") + CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for i, v in enumerate(values):
            sc = fn(scene, v)
            rep = simulate(sc, out / f"point_{i:03d}", kinds, threads, combining)
            reports.append(rep)
            for m in rep.rows:
                w.writerow({"param": parameter, "value": f"{v:.17g}", **metrics_row(m)})
    return reports


def oracle_check(scene: Scene):
    n = len(scene.elements(1))
    if n > MAX_ORACLE_ELEMENTS:
        raise OracleTooLarge(
            f"{n} first-bounce elements exceeds the oracle cap of {MAX_ORACLE_ELEMENTS}")
    rows = compare_scene(scene)
    worst = max(r[-1] for r in rows)
    return {
        "pairs": [dict(zip(("tx", "branch", "rx", "kind", "detector_branch", "deviation"), r))
                  for r in rows],
        "max_relative_deviation": worst,
        "tolerance": ORACLE_TOLERANCE,
        "passed": worst <= ORACLE_TOLERANCE,
    }


# optimize problem files

def parse_problem(text: str, base: Path | None = None) -> AimingProblem:
    """Problem document::

        scene PATH | scene builtin NAME
        target TX BRANCH RECEIVER      (repeatable; default branch i -> i-th receiver)
        window az 10deg el 10deg
        step az 1deg el 1deg
        semi 0.5deg 15deg step 0.5deg  | semi fixed
        init geometric|scene
        maxorder 0
        sweeps 10
        kind adr|wfov
    """
    kw: dict = {}
    targets = []
    scene = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        t = raw.split("#", 1)[0].split()
        if not t:
            continue
        key, args = t[0], t[1:]
        try:
            if key == "scene":
                if args[0] == "builtin":
                    scene = builtin_scene(args[1])
                else:
                    p = Path(args[0])
                    scene = load_scene(p if p.is_absolute() or base is None else base / p)
            elif key == "target":
                targets.append((args[0], int(args[1]), args[2]))
            elif key in ("window", "step"):
                pairs = dict(zip(args[::2], args[1::2]))
                if set(pairs) - {"az", "el"} or len(args) % 2:
                    raise SceneParseError(f"{key} takes 'az A el A'", lineno)
                for axis, val in pairs.items():
                    kw[f"{axis}_{key}"] = quantity(val, "angle", lineno)
            elif key == "semi":
                if args == ["fixed"]:
                    kw["optimize_semi"] = False
                else:
                    kw["semi_range"] = (quantity(args[0], "angle", lineno),
                                        quantity(args[1], "angle", lineno))
                    if len(args) == 4 and args[2] == "step":
                        kw["semi_step"] = quantity(args[3], "angle", lineno)
                    elif len(args) != 2:
                        raise SceneParseError("semi takes LO HI [step S] or 'fixed'", lineno)
            elif key == "init":
                kw["init"] = args[0]
            elif key == "maxorder":
                kw["max_order"] = int(args[0])
            elif key == "sweeps":
                kw["max_sweeps"] = int(args[0])
            elif key == "kind":
                kw["kind"] = args[0]
            else:
                raise SceneParseError(f"unknown problem key {key!r}", lineno)
        except (IndexError, ValueError) as exc:
            if isinstance(exc, SceneError):
                raise
            raise SceneParseError(f"bad '{key}' line: {exc}", lineno) from exc
    if scene is None:
        raise SceneParseError("problem needs a 'scene' line")
    try:
        return AimingProblem(scene, tuple(targets), **kw)
    except ValueError as exc:
        if isinstance(exc, SceneError):
            raise
        raise SceneParseError(str(exc)) from exc


def write_solution(sol: AimingSolution, problem: AimingProblem, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "solution.scene").write_text(dump_scene(sol.scene))
    target_of = {(tx, b): rx for tx, b, rx in problem.targets}

    def db(x):
        return 10.0 * math.log10(x) if x > 0.0 else -math.inf

    with open(out / "solution.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tx", "branch", "target", "azimuth_deg", "elevation_deg", "semi_deg",
                    "snr_db_before", "snr_db_after"])
        for key, (az, el, semi) in sol.branches.items():
            w.writerow([key[0], key[1], target_of[key], f"{az:.17g}", f"{el:.17g}",
                        f"{semi:.17g}", f"{db(sol.initial_snr[key]):.17g}",
                        f"{db(sol.snr[key]):.17g}"])
    summary = {
        "feasible": sol.feasible,
        "violations": [list(v) for v in sol.violations],
        "min_snr_db_before": db(sol.initial_min_snr),
        "min_snr_db_after": db(sol.min_snr),
        "evaluations": sol.evaluations,
        "sweeps": len(sol.history) - 1,
        "objective_history_min_snr_db": [db(h[1]) for h in sol.history],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary
