import json

import numpy as np

from pytest                 import approx
from pytest                 import mark
from pytest                 import raises

from src.ctmc_core      import ExitJump
from src.ctmc_core      import Schedule
from src.ctmc_core      import ScheduleKind
from src.errors         import DomainError
from src.errors         import UnsupportedScheduleError
from src.model          import TwoHeadModel
from src.model          import masked_adapter
from src.numerics       import empirical_distribution
from src.numerics       import total_variation
from src.oracle         import ExactReverseModel
from src.samplers       import SamplerConfig
from src.samplers       import SamplerScheme
from src.samplers       import SelfCorrectConfig
from src.samplers       import parse_scheme
from src.samplers       import read_samples
from src.samplers       import recover_clean
from src.samplers       import sample
from src.samplers       import sample_euler
from src.samplers       import sample_exact
from src.samplers       import sample_tau_leaping
from src.samplers       import self_correct
from src.samplers       import tempered
from src.samplers       import time_grid
from src.verification   import planted_codewords
from src.verification   import planted_corruption_trials


P_TOY = np.array([0.6, 0.3, 0.1])


@mark.parametrize("name scheme".split(),
                  (("tau",         SamplerScheme.TAU_LEAPING),
                   ("tau_leaping", SamplerScheme.TAU_LEAPING),
                   ("euler",       SamplerScheme.EULER),
                   ("exact",       SamplerScheme.EXACT)))
def test_parse_scheme(name, scheme):
    assert parse_scheme(name) is scheme
    assert SamplerConfig(scheme=name).scheme is scheme


def test_config_validation():
    with raises(DomainError):
        parse_scheme("midpoint")
    with raises(DomainError):
        SamplerConfig(steps=0)
    with raises(DomainError):
        SamplerConfig(seed=-1)
    with raises(DomainError):
        SamplerConfig(seed=2**64)
    with raises(DomainError):
        SelfCorrectConfig(temperature=0.0)
    with raises(DomainError):
        SelfCorrectConfig(max_updates=0)


def test_time_grid_runs_backwards_and_is_clamped(uniform3):
    grid = time_grid(uniform3, SamplerConfig(steps=4))
    np.testing.assert_allclose(grid, [1.0 - uniform3.eps, 0.75, 0.5, 0.25])
    clamped = time_grid(uniform3, SamplerConfig(steps=1000, clamp_eps=0.01))
    assert clamped.min() == 0.01 and clamped.max() == 0.99


@mark.parametrize("sampler", (sample_tau_leaping, sample_euler))
def test_reruns_are_identical(uniform3, exact3, sampler):
    config = SamplerConfig(steps=32, seed=11, n_samples=200)
    first = sampler(exact3, uniform3, config)
    np.testing.assert_array_equal(first.samples, sampler(exact3, uniform3, config).samples)
    chunked = sampler(exact3, uniform3, SamplerConfig(steps=32, seed=11, n_samples=200, chunk_size=9))
    np.testing.assert_array_equal(first.samples, chunked.samples)


def test_batch_rows_depend_only_on_their_child_seed(uniform3, exact3):
    big = sample_tau_leaping(exact3, uniform3, SamplerConfig(steps=32, seed=5, n_samples=50))
    small = sample_tau_leaping(exact3, uniform3, SamplerConfig(steps=32, seed=5, n_samples=7))
    np.testing.assert_array_equal(big.samples[:7], small.samples)


def test_passed_generator_matches_root_seed(uniform3, exact3):
    config = SamplerConfig(steps=16, seed=21, n_samples=40)
    from_seed = sample_euler(exact3, uniform3, config)
    from_rng = sample_euler(exact3, uniform3, config, rng=np.random.default_rng(21))
    np.testing.assert_array_equal(from_seed.samples, from_rng.samples)


@mark.parametrize("scheme", ("tau", "euler"))
def test_discrete_samplers_reach_p_data(uniform3, exact3, scheme):
    batch = sample(exact3, uniform3, SamplerConfig(steps=128, scheme=scheme, seed=1, n_samples=10_000))
    assert batch.samples.shape == (10_000, 1)
    assert total_variation(empirical_distribution(batch.samples, 3), P_TOY) < 0.04


def test_exact_sampler_reaches_p_data(uniform3, exact3):
    batch = sample_exact(exact3, uniform3, SamplerConfig(scheme="exact", seed=2, n_samples=4000))
    assert batch.scheme is SamplerScheme.EXACT
    assert total_variation(empirical_distribution(batch.samples, 3), P_TOY) < 0.05


def test_exact_sampler_for_sequences(uniform3):
    support = np.array([[0, 1], [2, 2]])
    model = ExactReverseModel(uniform3, support, [0.5, 0.5])
    batch = sample_exact(model, uniform3, SamplerConfig(scheme="exact", seed=3, n_samples=12))
    assert batch.samples.shape == (12, 2)
    hits = sum(any(np.array_equal(row, s) for s in support) for row in batch.samples)
    assert hits >= 10


def test_euler_counts_overflow(uniform3, exact3):
    batch = sample_euler(exact3, uniform3, SamplerConfig(steps=1, seed=0, n_samples=5))
    assert batch.overflow_count == 5
    assert batch.overflow_steps == 1
    assert batch.sidecar()["overflow_count"] == 5


def test_masked_prior_only_unmasks_to_predicted_token(masked4):
    model = masked_adapter(lambda x, t: [1.0, 0.0, 0.0], masked4, seq_len=4)
    batch = sample_tau_leaping(model, masked4, SamplerConfig(steps=64, seed=4, n_samples=30))
    assert set(np.unique(batch.samples)) <= {0, masked4.mask_token}
    assert np.mean(batch.samples == 0) > 0.5


def test_sampler_rejects_mismatched_model(uniform3):
    with raises(DomainError):
        sample_tau_leaping(TwoHeadModel("tabular", 4, time_buckets=2), uniform3, SamplerConfig(steps=2))


def test_save_writes_samples_and_sidecar(tmp_path, uniform3, exact3):
    batch = sample_tau_leaping(exact3, uniform3, SamplerConfig(steps=8, seed=9, n_samples=6))
    txt, side = batch.save(tmp_path / "out" / "samples.txt")
    np.testing.assert_array_equal(read_samples(txt), batch.samples)
    meta = json.loads(side.read_text())
    assert meta == {"scheme": "tau_leaping", "steps": 8, "seed": 9, "n_samples": 6, "seq_len": 1,
                    "num_states": 3, "overflow_count": 0, "overflow_steps": 0}


def test_recover_clean_known_values(uniform2):
    rec = recover_clean(ExitJump(1.0 / 3.0, np.array([0.0, 1.0]), 0), uniform2, 0.5, 0)
    np.testing.assert_allclose(rec.q_tilde, [0.75, 0.25], atol=1e-12)
    np.testing.assert_allclose(rec.p0_hat, [1.0, 0.0], atol=1e-12)
    with raises(DomainError):
        recover_clean(ExitJump(1.0, np.array([0.0, 1.0]), 0), uniform2, 0.5, 1)


def test_recover_clean_inverts_head_output():
    schedule = Schedule(ScheduleKind.UNIFORM, 4)
    rng = np.random.default_rng(6)
    for _ in range(50):
        i = int(rng.integers(4))
        t = float(rng.uniform(0.05, 0.95))
        out = ExitJump(float(rng.exponential(2.0)), np.insert(rng.dirichlet(np.ones(3)), i, 0.0), i)
        back = recover_clean(out, schedule, t, i).implied_exit_jump(schedule, t)
        assert back.exit_rate == approx(out.exit_rate, rel=1e-10)
        np.testing.assert_allclose(back.jump_dist, out.jump_dist, atol=1e-10)


def test_recover_clean_of_exact_single_token_model(uniform3, exact3):
    # a single token has no context, so the exact heads imply q_t itself and recovery returns p_data
    for t in (0.3, 0.8):
        for i in range(3):
            rec = recover_clean(exact3.forward([i], t).per_position[0], uniform3, t, i)
            np.testing.assert_allclose(rec.p0_hat, P_TOY, atol=1e-10)


def test_recover_clean_needs_uniform_reference(masked4):
    with raises(UnsupportedScheduleError):
        recover_clean(ExitJump(1.0, np.array([0.0, 0.0, 0.0, 1.0]), 0), masked4, 0.5, 0)


def test_tempered():
    np.testing.assert_allclose(tempered(np.array([0.5, 0.25, 0.25]), 0.5), [2 / 3, 1 / 6, 1 / 6])
    np.testing.assert_allclose(tempered(np.array([0.0, 0.4, 0.6]), 0.1)[0], 0.0)
    np.testing.assert_allclose(tempered(np.array([0.2, 0.8]), 1.0), [0.2, 0.8])


def test_self_correct_repairs_planted_corruption():
    repaired, not_worse = planted_corruption_trials(seed=0, trials=60)
    assert repaired >= 0.85
    assert not_worse >= 0.9


def test_self_correct_keeps_clean_codewords():
    schedule = Schedule(ScheduleKind.UNIFORM, 8)
    codes = planted_codewords()
    model = ExactReverseModel(schedule, codes, np.full(len(codes), 0.25))
    out = self_correct(model, schedule, codes[2], SelfCorrectConfig(), np.random.default_rng(1))
    np.testing.assert_array_equal(out, codes[2])


def test_self_correct_rejects_masked_schedule(masked4):
    model = masked_adapter(lambda x, t: [0.3, 0.3, 0.4], masked4, seq_len=2)
    with raises(UnsupportedScheduleError):
        self_correct(model, masked4, [0, 3], SelfCorrectConfig(), np.random.default_rng(0))
