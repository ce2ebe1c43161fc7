import sys

import numpy as np
import pytest

from seqdistill.adaptive_structure import StructureConfig
from seqdistill.rnn_dbn import stack_train
from seqdistill.rnn_rbm import TrainHyper
from seqdistill.sequence_data import synth_markov


def fixed_structure(**overrides):
    """A StructureConfig under which no neuron or layer edits can fire."""
    kw = dict(gen_threshold=1e12, ann_threshold=1e-12, layer_threshold=1e12,
              initial_hidden=8, max_hidden=8, max_layers=1)
    kw.update(overrides)
    return StructureConfig(**kw)


@pytest.fixture(scope="session")
def cycle_data():
    return synth_markov(3, 8, 2, 16, 20, 4)


@pytest.fixture(scope="session")
def cycle_model(cycle_data):
    """Two fixed-size layers trained on the 2-cycle."""
    hyper = TrainHyper(learning_rate=0.1, batch_size=5, epochs=150, seed=3)
    return stack_train(cycle_data, hyper,
                       fixed_structure(max_layers=2, layer_threshold=1e-12))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
