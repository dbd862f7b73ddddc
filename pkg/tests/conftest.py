import pytest
from loguru import logger

from core.synth import SyntheticSpec, synth_corpus


@pytest.fixture(scope="session")
def small_spec():
    return SyntheticSpec(countries={"SP": 2, "FR": 2, "NO": 2}, session_ms=12_000, seed=3)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory, small_spec):
    root = tmp_path_factory.mktemp("corpus")
    synth_corpus(small_spec, root)
    return root


@pytest.fixture
def warnings_logged():
    messages = []
    handler_id = logger.add(lambda message: messages.append(message.record["message"]), level="WARNING")
    yield messages
    logger.remove(handler_id)
