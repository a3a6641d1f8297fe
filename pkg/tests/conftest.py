import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from oddarm.complexity import ArmConfiguration  # noqa: E402
from oddarm.expfam import (  # noqa: E402
    Bernoulli,
    GaussianKnownVar,
    GaussianZeroMeanUnknownVar,
    Poisson,
    VectorGaussian,
)

ALL_FAMILIES = [Poisson(), Bernoulli(), GaussianKnownVar(), GaussianKnownVar(sigma=2.5),
                GaussianZeroMeanUnknownVar(), VectorGaussian()]
SCALAR_FAMILIES = [Poisson(), Bernoulli(), GaussianKnownVar(), GaussianZeroMeanUnknownVar()]


def random_eta(family, rng, size=None):
    """In-domain natural parameters drawn over a moderate range."""
    shape = () if size is None else (size,)
    if isinstance(family, (Poisson, GaussianKnownVar)):
        return rng.uniform(-3, 3, shape + (1,))
    if isinstance(family, Bernoulli):
        return rng.uniform(-4, 4, shape + (1,))
    if isinstance(family, GaussianZeroMeanUnknownVar):
        return -rng.uniform(0.05, 5, shape + (1,))
    e1 = rng.uniform(-3, 3, shape)
    e2 = -rng.uniform(0.05, 3, shape)
    return np.stack([e1, e2], axis=-1)


def figure_config(n: int, odd_index: int = 0) -> ArmConfiguration:
    if n == 1:
        f = GaussianKnownVar(sigma=1.0)
        return ArmConfiguration(f, odd_index, f.natural_param(0.0), f.natural_param(1.0), 8)
    if n == 2:
        f = GaussianZeroMeanUnknownVar()
        return ArmConfiguration(f, odd_index, f.natural_param(25.0), f.natural_param(1.0), 8)
    if n == 3:
        f = Bernoulli()
        return ArmConfiguration(f, odd_index, f.natural_param(0.1), f.natural_param(0.8), 8)
    f = VectorGaussian()
    return ArmConfiguration(f, odd_index, f.natural_param(0.0, 2.0), f.natural_param(4.0, 5.0), 8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def family_id(f):
    return f.name if not isinstance(f, GaussianKnownVar) else f"{f.name}-s{f.sigma}"


def random_trace(family, K, n_steps, rng):
    """Arms (round-robin first, then uniform) and observations from a random odd-arm model."""
    e1, e2 = random_eta(family, rng), random_eta(family, rng)
    odd = int(rng.integers(K))
    warm = np.tile(np.arange(K), family.min_samples)
    arms = np.concatenate([warm, rng.integers(0, K, n_steps - len(warm))])
    xs = np.array([family.sample(e1 if a == odd else e2, rng) for a in arms])
    return arms, xs


# acceptance criteria append (number, title, passed, detail); printed after the run
ACCEPTANCE_RESULTS: list = []


def record_criterion(number, title, passed, detail=""):
    ACCEPTANCE_RESULTS.append((number, title, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
