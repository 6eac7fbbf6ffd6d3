import logging
import sys
from pathlib import Path

import pytest

# Modules import each other relative to application/, as when running app.py from there
APPLICATION_DIR = Path(__file__).resolve().parent.parent
if str(APPLICATION_DIR) not in sys.path:
    sys.path.insert(0, str(APPLICATION_DIR))

from utils.numerics import ToleranceConfig  # noqa: E402


@pytest.fixture
def tol():
    return ToleranceConfig()


@pytest.fixture(autouse=True)
def restore_root_logging():
    # the CLI group reconfigures the root logger onto the runner's stderr
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture(autouse=True)
def fresh_cache():
    from utils.config_loading import init_cache
    return init_cache()
