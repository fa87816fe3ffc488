import numpy as np
import pytest

from src.ctmc_core  import Schedule, ScheduleKind
from src.model      import TwoHeadModel
from src.oracle     import ExactReverseModel


P_TOY = np.array([0.6, 0.3, 0.1])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def uniform3():
    return Schedule(ScheduleKind.UNIFORM, 3)


@pytest.fixture
def uniform2():
    return Schedule(ScheduleKind.UNIFORM, 2)


@pytest.fixture
def masked4():
    return Schedule(ScheduleKind.MASKED, 4)


@pytest.fixture
def exact3(uniform3):
    return ExactReverseModel.from_distribution(uniform3, P_TOY)


@pytest.fixture
def tabular3(rng):
    model = TwoHeadModel("tabular", 3, time_buckets=8)
    model.params = rng.normal(0.0, 0.5, model.n_params)
    return model


@pytest.fixture
def toy_conf(tmp_path):
    path = tmp_path / "toy.conf"
    path.write_text("seed = 7\n"
                    "schedule.num_states = 3\n"
                    "dataset.probs = [0.7, 0.3, 0.0]\n"
                    "optimizer.steps = 40\n"
                    "optimizer.log_interval = 10\n"
                    "sampler.n_samples = 50\n"
                    "sampler.steps = 16\n"
                    "simulate.n_paths = 20\n")
    return path
