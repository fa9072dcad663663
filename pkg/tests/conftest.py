import pytest

from sleepnotes.synth import SynthConfig, generate


@pytest.fixture(scope="session")
def default_bundle():
    # Generated once; generate() already cross-checks plants against the
    # rule engine, so fixtures built on top of this start from a known state.
    return generate(SynthConfig())
