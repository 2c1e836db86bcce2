"""Shared helpers for the test suite."""

import math

import numpy as np
import pytest

from pqlab import StructureParams, check_gap


def sample_gap_params(rng: np.random.Generator) -> StructureParams:
    """Draw a random parameter set satisfying the strict gap condition.

    Mixes finite and infinite integrability exponents; q is placed inside
    the admissible window with healthy margin (and sometimes at q = p).
    """
    while True:
        n = int(rng.integers(1, 5))
        p = float(rng.uniform(2.0, 4.5))
        alpha = math.inf if rng.random() < 0.15 else float(10.0 ** rng.uniform(0.2, 4.0))
        beta = math.inf if rng.random() < 0.15 else float(10.0 ** rng.uniform(0.2, 4.0))
        probe = StructureParams(n=n, p=p, q=p, alpha=alpha, beta=beta)
        window = check_gap(probe).rhs - p
        if window < 1e-6:
            continue
        q = p if rng.random() < 0.1 else p + float(rng.uniform(0.0, 0.98)) * window
        return StructureParams(n=n, p=p, q=q, alpha=alpha, beta=beta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
