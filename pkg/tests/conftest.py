import numpy as np
import pytest

import archdpg as ad


def cantilever_config(mu=1.0, magnitude=1.0):
    """Tip-loaded cantilever: free at x=0, clamped at x=1."""
    return ad.ArchConfig(
        ad.ArchParameters(1e-4, mu, 6.0),
        ad.BcPair.from_code("fc"),
        ad.LoadSpec(point_loads=(ad.PointLoad(0, "w", magnitude),)),
    )


def clamped_config(epsilon):
    """Fully clamped arch with f_u = cos x, f_w = sin x, lambda=3, mu=0."""
    return ad.ArchConfig(
        ad.ArchParameters(epsilon, 0.0, 3.0),
        ad.BcPair.from_code("cc"),
        ad.LoadSpec(distributed_u=ad.Expr.cosine(1.0, 1.0),
                    distributed_w=ad.Expr.sine(1.0, 1.0)),
    )


@pytest.fixture(scope="session")
def cantilever_oracle():
    return ad.solve_reference(cantilever_config())


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20250809)
