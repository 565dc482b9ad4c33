import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from liouville_lab.families import FamilySpec, generate_family, random_model  # noqa: E402
from liouville_lab.form import DirichletFormModel, LocalPart, StateSpace  # noqa: E402

settings.register_profile("lab", max_examples=40, deadline=None)
settings.load_profile("lab")


def path_model(n=3):
    kernel = {}
    for k in range(n - 1):
        kernel[(k, k + 1)] = kernel[(k + 1, k)] = 0.5
    return DirichletFormModel.from_kernel(np.ones(n), kernel)


def z_segment(N):
    return generate_family(FamilySpec("z1", (N,)))[0]


def labels_1d(model):
    return np.array(model.space.labels)[:, 0]


def mixed_model(seed, cells=12):
    """Random mesh with a local part and k <-> k+2 jumps."""
    return generate_family(FamilySpec("mesh1d", (cells,), weights="random", seed=seed))[0]


def any_model(seed):
    """Pure-jump random graph or mixed mesh model, chosen by seed parity."""
    rng = np.random.default_rng(seed)
    if seed % 2:
        return mixed_model(seed, int(rng.integers(3, 15)))
    return random_model(int(rng.integers(3, 25)), float(rng.uniform(1.5, 4.0)), seed)


@pytest.fixture
def path3():
    return path_model(3)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
