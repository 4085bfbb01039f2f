import numpy as np
import pytest

from modalloc import harness
from modalloc.allocator import AllocatorConfig
from modalloc.lti import StateSpaceModel


def random_stable(seed, n, m=2, p=2):
    """Random stable system with well separated, non-repeated poles."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    shift = np.max(np.linalg.eigvals(a).real) + 0.5 + rng.uniform(0, 0.5)
    a -= shift * np.eye(n)
    return StateSpaceModel(a, rng.normal(size=(n, m)), rng.normal(size=(p, n)))


@pytest.fixture(scope="session")
def bench_design():
    plant, meta = harness.make_benchmark(0)
    return harness.design_plant(plant), meta


@pytest.fixture(scope="session")
def bench_cfg(bench_design):
    design, _ = bench_design
    return AllocatorConfig(design.effectiveness, w_v=harness.default_modal_weights(design.modal))
