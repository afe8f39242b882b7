"""Tiny scenes (at most ten elements per surface) for exhaustive cross-checks."""

from .scene import (ADR, AdtBranch, DetectorBranch, Direction, Receiver, Scene,
                    SimulationParams, Transmitter, UP, Vec3)


def _rx(label, pos, adr_dirs, fov=40.0):
    return [
        Receiver.wfov(label, Vec3(*pos)),
        Receiver(label, Vec3(*pos), ADR, tuple(DetectorBranch(d, fov) for d in adr_dirs)),
    ]


def toy_cube(rho=None) -> Scene:
    """1 m cube, 4 first-bounce and 4 second-bounce elements per surface."""
    tx = Transmitter("T1", Vec3(0.5, 0.5, 1.0), (
        AdtBranch(Direction(0.0, -60.0), 40.0, 850.0),
        AdtBranch(Direction(90.0, -35.0), 25.0, 880.0),
    ))
    rxs = _rx("R1", (0.3, 0.7, 0.25), (Direction(300.0, 60.0), UP, Direction(45.0, 20.0)))
    refl = rho if rho is not None else {"wall": 0.8, "ceiling": 0.8, "floor": 0.3}
    return Scene.box((1.0, 1.0, 1.0), [tx], rxs, SimulationParams(),
                     reflectivity=refl, element_edges=(0.5, 0.5))


def toy_clipped() -> Scene:
    """Room whose extents are not multiples of the element edge."""
    tx = Transmitter("T1", Vec3(0.4, 0.7, 0.9), (AdtBranch(Direction(200.0, -50.0), 30.0),))
    rxs = _rx("R1", (0.8, 0.3, 0.2), (Direction(150.0, 45.0), Direction(10.0, 70.0)), fov=60.0)
    rxs += _rx("R2", (0.2, 1.0, 0.4), (Direction(320.0, 30.0),), fov=25.0)
    return Scene.box((1.0, 1.2, 0.9), [tx], rxs, SimulationParams(),
                     reflectivity={"wall": 0.7, "ceiling": 0.6, "floor": 0.2, "north": 0.9},
                     element_edges=(0.45, 0.6))


def toy_absorbing() -> Scene:
    """Black room: only the direct path survives."""
    return toy_cube(rho={"wall": 0.0, "ceiling": 0.0, "floor": 0.0})


def toy_two_surfaces() -> Scene:
    """Only the floor and the west wall reflect."""
    return toy_cube(rho={"wall": 0.0, "ceiling": 0.0, "floor": 0.5, "west": 0.9})


TOYS = {
    "toy-cube": toy_cube,
    "toy-clipped": toy_clipped,
    "toy-absorbing": toy_absorbing,
    "toy-two-surfaces": toy_two_surfaces,
}
