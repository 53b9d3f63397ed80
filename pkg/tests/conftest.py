import numpy as np
import pytest

from qms.models import JaynesCummings, jc_model, random_model


def close(a, b, tol):
    return np.abs(np.asarray(a) - np.asarray(b)).max() < tol


@pytest.fixture
def jc_p1():
    return jc_model(JaynesCummings(tau=1.0, lam=1.0, p=1.0))


@pytest.fixture
def jc_mixed():
    return jc_model(JaynesCummings(tau=1.0, lam=0.3, p=0.6))


def battery():
    """JC plus random models with 2 and 3 levels, trace and non-trace references."""
    models = [jc_model(JaynesCummings(tau=1.0, lam=0.3, p=0.6))]
    models.append(random_model(1, 2, 2, coupling=0.5))
    models.append(random_model(2, 3, 2, coupling=0.7))
    models.append(random_model(3, 2, 3, coupling=0.4, tau=0.8))
    models.append(random_model(4, 2, 2, coupling=0.6, trace_references=False))
    models.append(random_model(5, 3, 3, coupling=0.3, trace_references=False))
    return models
