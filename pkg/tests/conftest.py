import numpy as np
import pytest

from hermitian_energy import (
    build_grid,
    flat_kahler_metric,
    gauduchon_torus_metric,
    generic_hermitian_metric,
    kahler_potential_metric,
    normalize_sup,
    random_band_limited_field,
    solve_gauduchon_factor,
)

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid16():
    return build_grid(16)


@pytest.fixture(scope="session")
def grid8():
    return build_grid(8)


@pytest.fixture(scope="session")
def flat(grid16):
    return flat_kahler_metric(grid16)


@pytest.fixture(scope="session")
def kahler(grid16):
    return kahler_potential_metric(grid16)


@pytest.fixture(scope="session")
def gauduchon(grid16):
    return gauduchon_torus_metric(grid16, amplitude=0.3)


@pytest.fixture(scope="session")
def generic(grid16):
    return generic_hermitian_metric(grid16, seed=7, amplitude=0.1)


@pytest.fixture(scope="session")
def generic_corrected(generic):
    return solve_gauduchon_factor(generic).metric


@pytest.fixture(scope="session")
def potentials(grid16):
    """Sup-normalized band-3, amplitude-0.05 potentials, indexed by seed."""
    cache = {}

    def make(seed):
        if seed not in cache:
            cache[seed] = normalize_sup(random_band_limited_field(grid16, 3, 0.05, seed))
        return cache[seed]

    return make


@pytest.fixture(scope="session")
def cos_x2(grid16):
    from hermitian_energy.grid import field_from_function

    return lambda a: field_from_function(
        grid16, lambda x1, y1, x2, y2: a * np.cos(2 * np.pi * x2), real=True
    )
