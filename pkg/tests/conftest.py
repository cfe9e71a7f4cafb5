import sys

import numpy as np
import pytest

from components_loss import synth
from components_loss.losses import LossInputs
from components_loss.signal_io import mix_at_snr
from components_loss.stft import analyze


@pytest.fixture(scope="session")
def mixture():
    """Two seconds of synthetic speech in pink noise at 0 dB."""
    s = synth.speech_like(2.0, seed=11)
    n = synth.noise("pink", s.size + 4000, seed=12)
    return mix_at_snr(s, n, 0.0, seed=3)


@pytest.fixture(scope="session")
def spectra(mixture):
    return analyze(mixture.y), analyze(mixture.s), analyze(mixture.d)


@pytest.fixture(scope="session")
def inputs(spectra):
    return LossInputs.from_frames(*spectra, with_weighting=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
