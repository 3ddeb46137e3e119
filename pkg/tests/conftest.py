import sys

import numpy as np
import pytest

from latentspace.geometry import GeometrySpec
from latentspace.mle import OptimizerConfig
from latentspace.network import florentine, from_edges
from latentspace.samplers import SamplerConfig, sample_posterior


@pytest.fixture(scope="session")
def flo():
    return florentine()


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def random_network(n, p, seed):
    r = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    keep = r.random(iu[0].size) < p
    return from_edges(list(zip(iu[0][keep], iu[1][keep])), n=n)


def short_run(net, name, iters=1400, burn_in=400, thin=5, chains=2, algorithm="MH", seed=0):
    cfg = SamplerConfig(algorithm=algorithm, iters=iters, burn_in=burn_in, thin=thin, chains=chains, seed=seed)
    return sample_posterior(net, GeometrySpec.parse(name), cfg=cfg,
                            ml_cfg=OptimizerConfig(restarts=2, max_iters=300, seed=seed))


@pytest.fixture(scope="session")
def s1_samples(flo):
    return short_run(flo, "S1")


@pytest.fixture(scope="session")
def r2_samples(flo):
    return short_run(flo, "R2")


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acc.summary_lines():
        terminalreporter.write_line(line)
