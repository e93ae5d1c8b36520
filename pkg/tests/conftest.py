"""Shared fixtures. Registers the repo root as the socopredict package when it is not installed."""
import sys
import os
import importlib.util

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

try:
    import socopredict  # noqa: F401
except ImportError:
    spec = importlib.util.spec_from_file_location(
        "socopredict",
        os.path.join(ROOT, "__init__.py"),
        submodule_search_locations=[ROOT],
    )
    pkg = importlib.util.module_from_spec(spec)
    sys.modules["socopredict"] = pkg
    spec.loader.exec_module(pkg)

from socopredict.core import build_spec  # noqa: E402
from socopredict.prediction import iid_impulse, make_noise  # noqa: E402


@pytest.fixture
def scalar_spec():
    return build_spec([[1.0]], beta=1.0, horizon=12)


@pytest.fixture
def iid():
    return iid_impulse(1)


@pytest.fixture
def unit_noise():
    return make_noise("gaussian", [[1.0]])


@pytest.fixture
def zero_noise():
    return make_noise("zero", [[0.0]])
