from __future__ import annotations

import pytest

from multiflow import CrossLayerFactors, IndependentJoint, SystemConfig, Uniform


@pytest.fixture(scope="session")
def symmetric_uniform_config() -> SystemConfig:
    """Both layers U(20,40) loads and U(25,75) free space, beta = 0.25.

    At p = 0.25 the initial excess is 10 per layer, the effective excess 12.5
    stays below the free-space minimum of 25, and the cascade stops at once
    with a surviving fraction of exactly 0.75.
    """
    return SystemConfig(
        IndependentJoint(Uniform(20, 40), Uniform(25, 75),
                         Uniform(20, 40), Uniform(25, 75)),
        CrossLayerFactors(0.25, 0.25),
    )
