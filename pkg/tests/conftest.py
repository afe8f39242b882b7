import dataclasses

import pytest

from dcowc import cli, impulse_responses, paper_scene
from dcowc.link import read_links_csv


@pytest.fixture(scope="session")
def paper_run(tmp_path_factory):
    """`dcowc simulate --builtin paper` executed once per session."""
    out = tmp_path_factory.mktemp("paper_builtin")
    status = cli.main(["simulate", "--builtin", "paper", "--out", str(out)])
    assert status == 0
    return out, read_links_csv(out / "links.csv")


@pytest.fixture(scope="session")
def paper_convergence():
    """Serving-link sums for element edges (e, 4e), e = 20, 10, 5 cm, at order 2."""
    base = paper_scene()
    levels = []
    for e1 in (0.2, 0.1, 0.05):
        sc = dataclasses.replace(base, surfaces=tuple(
            dataclasses.replace(s, element_edges=(e1, 4 * e1)) for s in base.surfaces))
        sums = {}
        for j, tx in enumerate(sc.transmitters):
            for k in range(len(tx.branches)):
                label = f"R{k + 1}"
                wfov, adr = sc.receiver(label, "wfov"), sc.receiver(label, "adr")
                irs = impulse_responses(sc, sc.emitter(tx, k),
                                        [sc.detector(wfov, 0), sc.detector(adr, j)], 2)
                sums[(tx.label, label, "wfov")] = irs[0].total
                sums[(tx.label, label, "adr")] = irs[1].total
        levels.append(sums)
    return levels


def worst_relative_change(a: dict, b: dict) -> float:
    return max(abs(b[k] - a[k]) / b[k] for k in b)


ACCEPTANCE_LINES = []


def record_criterion(name: str, passed: bool, detail: str):
    line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
