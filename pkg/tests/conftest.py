import math
from pathlib import Path

import numpy as np
import pytest

from hetnetopt.model import Link, NetworkModel, Tier, db_to_linear, dbm_to_watts

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"

LAMBDA_U = 100.0 / (math.pi * 1e6)


def ref_model(link=Link.DOWNLINK, **kw) -> NetworkModel:
    return NetworkModel(alpha=kw.pop("alpha", 4.0), lambda_u=LAMBDA_U, link=link, **kw)


def ref_tiers(b0=1.0, tau=(2.0, 2.0)):
    return (
        Tier(0.01 * LAMBDA_U, dbm_to_watts(46.0), tau[0], b0),
        Tier(0.09 * LAMBDA_U, dbm_to_watts(20.0), tau[1], 1.0),
    )


def random_scenario(rng: np.random.Generator, k: int, link: Link | None = None, equal_tau=False):
    """A random valid (model, tiers) pair with unit biases."""
    alpha = float(rng.uniform(2.5, 5.0))
    if link is None:
        link = Link.UPLINK if rng.random() < 0.5 else Link.DOWNLINK
    lo = max(0.0, 1.0 - 4.0 / alpha) + 0.05
    eps = float(rng.uniform(lo, 1.0))
    model = NetworkModel(alpha=alpha, lambda_u=LAMBDA_U, epsilon=eps, link=link)
    tau0 = db_to_linear(float(rng.uniform(-3.0, 10.0)))
    tiers = tuple(
        Tier(
            lambda_k=LAMBDA_U * float(10 ** rng.uniform(-3, 0)),
            p_k=dbm_to_watts(float(rng.uniform(20.0, 46.0))),
            tau_k=tau0 if equal_tau else db_to_linear(float(rng.uniform(-3.0, 10.0))),
        )
        for _ in range(k)
    )
    return model, tiers


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
