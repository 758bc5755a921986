"""Shared fixtures: cheap integration settings and the worked-example inputs."""

import pytest

from armdesign.mvn import QmcSettings


@pytest.fixture(scope="session")
def fast():
    """Low-cost QMC settings for tests that exercise logic, not precision."""
    return QmcSettings(points_log2=12, randomizations=4)


@pytest.fixture()
def figure1_doc():
    """The worked-example scenario as a wire document (fresh dict per test)."""
    return {
        "version": 1,
        "model": {"kind": "bernoulli", "k": 2, "pi0": 0.3},
        "alpha": 0.15,
        "beta": 0.2,
        "delta1": 0.15,
        "delta0": 0.0,
        "mcc": "dunnett",
        "power_goal": "min_marginal_lfc",
        "allocation": {"kind": "fixed", "ratios": [1.0, 1.0]},
        "integer_n": False,
        "plot": {"enabled": True, "quality": 100},
    }


@pytest.fixture()
def quick_doc(figure1_doc):
    """Same scenario trimmed down for fast CLI/service round trips."""
    doc = dict(figure1_doc)
    doc["plot"] = {"enabled": True, "quality": 12}
    doc["engine"] = {"points_log2": 12, "randomizations": 4, "seed": 0}
    return doc
