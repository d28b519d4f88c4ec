import os

os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numpy as np
import pytest

from hostsym.graph import build_lattice


@pytest.fixture(scope="session")
def ring10():
    return build_lattice(1, 10, 1.0, 0, N=2)


@pytest.fixture(scope="session")
def torus8():
    return build_lattice(2, 8, 1.0, 0, N=3)


@pytest.fixture(scope="session")
def perc20():
    return build_lattice(2, 20, 0.7, 4, N=1)


def union_find_labels(openmap: np.ndarray, torus: bool = True) -> dict:
    """Independent oracle: site -> root via union-find over nearest neighbours."""
    parent = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    sites = [tuple(s) for s in np.argwhere(openmap)]
    for s in sites:
        parent[s] = s
    L = openmap.shape[0]
    for s in sites:
        for axis in range(openmap.ndim):
            t = list(s)
            t[axis] += 1
            if t[axis] == L:
                if not torus:
                    continue
                t[axis] = 0
            t = tuple(t)
            if openmap[t]:
                ra, rb = find(s), find(t)
                if ra != rb:
                    parent[ra] = rb
    return {s: find(s) for s in sites}


ACCEPTANCE: dict = {}


@pytest.fixture
def record_criterion():
    """Store (passed, detail) for an acceptance criterion; several parts may share one number."""

    def record(number: int, passed: bool, detail: str, part: str = "") -> bool:
        ACCEPTANCE.setdefault(number, []).append((bool(passed), part, detail))
        status = "PASS" if passed else "FAIL"
        print(f"criterion {number}{' ' + part if part else ''}: {status} {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        status = "PASS" if all(p for p, _, _ in parts) else "FAIL"
        detail = "; ".join(f"{part + ': ' if part else ''}{d}" for _, part, d in parts)
        terminalreporter.write_line(f"CRITERION {number:2d} {status}  {detail}")
