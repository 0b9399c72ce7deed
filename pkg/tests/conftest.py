import sys
from pathlib import Path

import pytest
from loguru import logger

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import gallery  # noqa: E402


@pytest.fixture(scope="session")
def flat():
    return gallery.make_flat_product(3, 2)


@pytest.fixture(scope="session")
def hyperbolic2():
    return gallery.make_hyperbolic_halfspace(2)


@pytest.fixture(scope="session")
def hyperbolic3():
    return gallery.make_hyperbolic_halfspace(3)


@pytest.fixture(scope="session")
def warped_x():
    return gallery.make_warped_line('x')


@pytest.fixture(scope="session")
def warped_const():
    return gallery.make_warped_line('const')


@pytest.fixture(scope="session")
def random_conformal():
    return gallery.make_random_conformal(seed=1, n=3, m=2)


@pytest.fixture(scope="session")
def random_conformal4():
    """Four-dimensional draw whose curvature terms are O(1e-2) rather than O(1e-9)."""
    return gallery.make_random_conformal(seed=4, n=4, m=2)


@pytest.fixture(scope="session")
def warped_sin():
    return gallery.make_warped_line('sin')


@pytest.fixture
def log_messages():
    """Capture loguru output at WARNING and above."""
    messages = []
    handler_id = logger.add(lambda m: messages.append(m.record["message"]), level="WARNING")
    yield messages
    logger.remove(handler_id)
