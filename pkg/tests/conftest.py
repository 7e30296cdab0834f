import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from swarmctl.stability import ControlGains  # noqa: E402

# positive gains whose zero-delay closed loop has a right-half-plane pole pair
UNSTABLE_POSITIVE_GAINS = ControlGains(0.1, 0.1, 1.0, 0.1, 1.0, 0.1, 0.1, 1.0)


@pytest.fixture
def table_gains():
    return ControlGains()
