import json
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ORACLES = json.loads((Path(__file__).parent / "oracles.json").read_text())


def _num(v):
    if isinstance(v, str):
        return float(Fraction(v))
    if isinstance(v, list):
        return [_num(t) for t in v]
    if isinstance(v, dict):
        return {k: _num(t) for k, t in v.items()}
    return v


@pytest.fixture(scope="session")
def oracle():
    return lambda key: _num(_ORACLES[key])
