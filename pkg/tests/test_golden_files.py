"""Committed example files parse with the readers the package uses."""

import json
from pathlib import Path as FilePath

import numpy as np

from pytest                 import approx

from src.config_loader  import load_experiment_config
from src.ctmc_core      import Schedule
from src.ctmc_core      import ScheduleKind
from src.model          import TwoHeadModel
from src.oracle         import MarginalTable
from src.oracle         import exact_marginals
from src.path_measure   import Path
from src.samplers       import SampleBatch
from src.samplers       import SamplerScheme
from src.samplers       import read_samples
from src.training       import METRIC_FIELDS
from src.training       import read_metrics
from src.verification   import parse_report


GOLDEN = FilePath(__file__).parent.parent / "golden"


def test_toy_config():
    config = load_experiment_config(GOLDEN / "toy_s3.conf")
    assert config.seed == 7
    assert config.schedule.kind is ScheduleKind.UNIFORM
    assert config.sampler.steps == 64
    np.testing.assert_allclose(config.build_dataset().p_data(), [0.7, 0.3, 0.0])


def test_metrics_lines():
    records = read_metrics(GOLDEN / "metrics.jsonl")
    assert [r["step"] for r in records] == [500, 1000, 1500]
    for r in records:
        assert set(r) == set(METRIC_FIELDS)
        assert r["loss"] == approx(r["poisson"] + r["direction"], rel=1e-15)


def test_marginals_table_matches_exact_computation():
    table = MarginalTable.from_csv((GOLDEN / "marginals.csv").read_text())
    reference = exact_marginals(Schedule(ScheduleKind.UNIFORM, 3), [0.7, 0.3, 0.0], table.t_grid)
    np.testing.assert_allclose(table.q, reference.q, atol=1e-15)
    np.testing.assert_allclose(table.posterior, reference.posterior, atol=1e-15)


def test_checkpoint():
    model = TwoHeadModel.load(GOLDEN / "checkpoint.txt")
    assert model.n_params == 18
    assert model.time_breakpoints() == (0.5,)
    assert TwoHeadModel.from_text(model.to_text()).header() == model.header()
    lam, r = model.forward_batch([[0], [1], [2]], 0.25)
    assert np.all(lam > 0)
    np.testing.assert_allclose(r.sum(axis=-1), 1.0)


def test_path_records_round_trip():
    for line in (GOLDEN / "paths.txt").read_text().splitlines():
        path = Path.from_record(line)
        assert path.to_record() == line
        assert path.horizon == approx(0.999)


def test_samples_and_sidecar():
    samples = read_samples(GOLDEN / "samples.txt")
    meta = json.loads((GOLDEN / "samples.json").read_text())
    batch = SampleBatch(samples, SamplerScheme(meta["scheme"]), meta["steps"], meta["seed"], meta["num_states"])
    assert batch.sidecar() == meta


def test_verify_report():
    text = (GOLDEN / "verify_report.json").read_text()
    report = parse_report(text)
    assert report.passed
    assert report.to_dict() == json.loads(text)
