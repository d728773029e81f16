import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FULL = os.environ.get("CMLPRNG_FULL") == "1"


def pytest_collection_modifyitems(config, items):
    if FULL:
        return
    skip = pytest.mark.skip(reason="long run; set CMLPRNG_FULL=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
