from pathlib import Path

import numpy as np
import pytest

from pdchom.spectra import PhasematchModel, ProcessModel, PumpModel, build_jsa, reference_model

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def ref_model():
    return reference_model()


@pytest.fixture(scope="session")
def ref_jsa(ref_model):
    return build_jsa(ref_model)


@pytest.fixture(scope="session")
def single_model():
    return ProcessModel(PumpModel(1000.0, 6.8607), PhasematchModel(12.0, 0.60, 0.30))


def gaussian(axis, center, width):
    return np.exp(-((axis - center) ** 2) / (2.0 * width**2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)



def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
