"""Deterministic infrared downlink simulator for data-centre racks.

Typical use::

    from dcowc import builtin_scene, evaluate_scene
    rows = evaluate_scene(builtin_scene("paper"))
"""

from .channel import (ImpulseResponse, delay_spread, impulse_response, impulse_responses,
                      lambertian_mode, los_gain, received_power)
from .link import (LinkMetrics, ber, capacity, combine_adr, eye_powers, evaluate_link,
                   evaluate_scene, noise_budget, read_links_csv, snr, write_links_csv)
from .optimize import (AimingProblem, AimingSolution, InfeasibleAiming, aim_branch,
                       optimize_aiming)
from .oracle import OracleTooLarge, compare_scene, oracle_response
from .run import builtin_scene, simulate, sweep
from .scene import (ADR, WFOV, AdtBranch, DetectorBranch, Direction, Receiver, Scene,
                    SceneError, SceneValidationError, SimulationParams, Transmitter, Vec3,
                    paper_scene)
from .scenefile import (SceneParseError, UnitError, dump_scene, load_scene, parse_scene,
                        scene_digest)

__all__ = [name for name in dir() if not name.startswith("_")]
