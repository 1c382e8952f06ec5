import pytest

from polyglot_asr.audio_io import encode_wav
from polyglot_asr.demo import build_demo, synth_utterance


@pytest.fixture(scope="session")
def small_demo(tmp_path_factory):
    """Demo deployment with 16-unit stub classifiers routing to en/india."""
    d = tmp_path_factory.mktemp("demo-small")
    return build_demo(d, hidden_size=16, transcripts={("en", "india"): "namaste"})


@pytest.fixture(scope="session")
def utterance_wav():
    return encode_wav(synth_utterance(3.0, 16000, seed=11))


@pytest.fixture(scope="session")
def silent_wav():
    from polyglot_asr.audio_io import AudioClip
    import numpy as np

    return encode_wav(AudioClip(np.zeros(16000, dtype=np.int16), 16000))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
