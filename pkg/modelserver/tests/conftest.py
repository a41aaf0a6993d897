import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from modelserver.encoder import BuiltinEncoder, ModelConfig

# Small dims keep CPU inference fast; the wire contract is dim-agnostic and
# the acceptance tests use the full 768/512 configuration.
FAST_CONFIG = ModelConfig(dim=32, max_tokens=24, layers=1, heads=4, vocab_size=512)


@pytest.fixture(scope="session")
def fast_encoder():
    return BuiltinEncoder(FAST_CONFIG)


@pytest.fixture(scope="session")
def full_encoder():
    return BuiltinEncoder(ModelConfig())
