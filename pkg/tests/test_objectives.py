import logging

import numpy as np

from pytest                 import approx
from pytest                 import mark
from pytest                 import raises
from hypothesis             import given
from hypothesis             import settings
from hypothesis.strategies  import floats
from hypothesis.strategies  import integers
from scipy.special          import xlogy

from src.ctmc_core      import ExitJump
from src.ctmc_core      import ReverseTarget
from src.ctmc_core      import Schedule
from src.ctmc_core      import ScheduleKind
from src.ctmc_core      import conditional_reverse
from src.ctmc_core      import sample_forward
from src.errors         import DomainError
from src.errors         import UnsupportedScheduleError
from src.model          import TwoHeadModel
from src.model          import masked_adapter
from src.objectives     import ObjectiveKind
from src.objectives     import batch_objective
from src.objectives     import bregman_density
from src.objectives     import categorical_kl
from src.objectives     import compute_gap
from src.objectives     import conditional_elbo
from src.objectives     import data_elbo
from src.objectives     import decompose_row_kl
from src.objectives     import exact_objective_gradient
from src.objectives     import loss_cond_stable
from src.objectives     import loss_conditional
from src.objectives     import loss_gradient
from src.objectives     import loss_kl
from src.objectives     import marginal_reverse_kl
from src.objectives     import mc_marginal_loss_samples
from src.objectives     import mdlm_loss
from src.objectives     import poisson_kl
from src.objectives     import window_length
from src.oracle         import exact_nll_small_chain
from src.oracle         import finite_difference_gradient


P_DATA = np.array([0.5, 0.3, 0.2])


def random_models(count, seed=0, num_states=3, buckets=8):
    rng = np.random.default_rng(seed)
    models = []
    for _ in range(count):
        model = TwoHeadModel("tabular", num_states, time_buckets=buckets)
        model.params = rng.normal(0.0, 0.5, model.n_params)
        models.append(model)
    return models


@settings(max_examples=200, deadline=None)
@given(integers(min_value=2, max_value=16), integers(min_value=0, max_value=2**32 - 1))
def test_row_kl_splits_into_poisson_and_categorical(S, seed):
    rng = np.random.default_rng(seed)
    i = int(rng.integers(S))
    target = rng.exponential(1.0, S) * (rng.random(S) < 0.7)
    target[(i + 1) % S] += 0.5
    model = rng.exponential(1.0, S)
    split = decompose_row_kl(ReverseTarget.from_per_pair(target, i), ExitJump.from_rates(model, i))
    assert abs(split.total - (split.poisson_term + split.direction_term)) <= 1e-12 * max(1.0, abs(split.total))


@given(floats(min_value=0.0, max_value=1e3), floats(min_value=1e-6, max_value=1e3))
def test_bregman_density_nonnegative(r, c):
    assert bregman_density(r, c) >= -1e-12 * max(r, c)


def test_poisson_kl_vanishes_at_equal_rates():
    assert poisson_kl(2.5, 2.5) == approx(0.0, abs=1e-15)
    assert poisson_kl(0.0, 1.5) == 1.5
    with raises(DomainError):
        poisson_kl(1.0, 0.0)


def test_categorical_kl_missing_mass(caplog):
    with caplog.at_level(logging.WARNING):
        assert categorical_kl([0.5, 0.5], [1.0, 0.0]) == np.inf
    assert "no mass" in caplog.text
    assert categorical_kl([1.0, 0.0], [0.5, 0.5]) == approx(np.log(2.0))


def test_decompose_sentinel_model_rate():
    target = ReverseTarget.from_per_pair([0.0, 1.0, 0.0], 0)
    with raises(DomainError):
        decompose_row_kl(target, ExitJump.from_rates([0.0, 0.0, 0.0], 0))


def test_cond_stable_equals_kl(uniform3):
    rng = np.random.default_rng(1)
    for model in random_models(3, seed=2):
        for _ in range(10):
            x0, x_t = int(rng.integers(3)), int(rng.integers(3))
            t = float(rng.uniform(0.01, 0.99))
            a = loss_cond_stable(uniform3, model, x0, t, x_t).total
            b = loss_kl(uniform3, model, x0, t, x_t).total
            assert a == approx(b, rel=1e-10, abs=1e-10)


def test_kl_minus_conditional_is_theta_free(uniform3):
    models = random_models(5, seed=3)
    rng = np.random.default_rng(4)
    for _ in range(20):
        x0, x_t = int(rng.integers(3)), int(rng.integers(3))
        t = float(rng.uniform(0.01, 0.99))
        diffs = [loss_kl(uniform3, m, x0, t, x_t).total - loss_conditional(uniform3, m, x0, t, x_t).total
                 for m in models]
        assert max(diffs) - min(diffs) < 1e-9


def test_cond_stable_keeps_precision_near_the_horizon(uniform3):
    # x0 = 0 seen as x_t = 1 at t = T - eps: lam_hat is about 668
    t = uniform3.horizon - uniform3.eps
    target = conditional_reverse(uniform3, t, 0, 1)
    model = TwoHeadModel("tabular", 3, time_buckets=8)
    model.set_head(int(model.bucket_of(t)), 1, 1.3 * target.exit_rate, [0.6, 0.0, 0.4])
    head = model.forward([1], t).per_position[0]

    one = np.longdouble(1)
    alpha = one - np.longdouble(t) / np.longdouble(uniform3.horizon)
    c = one / (np.longdouble(uniform3.horizon) * alpha)
    q = np.full(3, (one - alpha) / 3, dtype=np.longdouble)
    q[0] += alpha
    P = c / 3 * q / q[1]
    M = np.asarray(head.rates, dtype=np.longdouble)
    reference = float(sum(P[j] * np.log(P[j] / M[j]) - P[j] + M[j] for j in (0, 2)))

    stable = loss_cond_stable(uniform3, model, 0, t, 1).total
    assert target.exit_rate == approx(float(P[0] + P[2]), rel=1e-12)
    assert abs(stable - reference) <= 1e-9 * abs(reference)

    # the conditional form only matches after adding back sum_j P_j log P_j
    per_pair = target.per_pair
    naive = loss_conditional(uniform3, model, 0, t, 1).total + float(np.sum(xlogy(per_pair, per_pair)))
    cancellation = abs(naive - reference) / abs(reference)
    logging.info(f"cancellation error of the conditional form at t = {t}: {cancellation:.3e}")
    assert cancellation < 1e-6


def test_conditional_breakdown_poisson_part(uniform3, tabular3):
    split = loss_conditional(uniform3, tabular3, 0, 0.4, 2)
    target = conditional_reverse(uniform3, 0.4, 0, 2)
    head = tabular3.forward([2], 0.4).per_position[0]
    assert split.poisson_term == approx(poisson_kl(target.exit_rate, head.exit_rate))
    assert split.constant_term == 0.0
    assert split.total == approx(split.poisson_term + split.direction_term)


def test_loss_matches_row_decomposition(uniform3, tabular3):
    split = loss_kl(uniform3, tabular3, 1, 0.6, 0)
    target = conditional_reverse(uniform3, 0.6, 1, 0)
    head = tabular3.forward([0], 0.6).per_position[0]
    reference = decompose_row_kl(target, head)
    assert split.total == approx(reference.total, rel=1e-12)
    assert split.poisson_term == approx(reference.poisson_term, rel=1e-12)


def test_cond_stable_matches_mdlm(masked4):
    rng = np.random.default_rng(5)
    for _ in range(200):
        x0 = int(rng.integers(3))
        x_t = x0 if rng.random() < 0.5 else masked4.mask_token
        x_theta = rng.dirichlet(np.ones(3))
        t = float(rng.uniform(masked4.eps, 1 - masked4.eps))
        model = masked_adapter(lambda x, tt, p=x_theta: p, masked4)
        split = loss_cond_stable(masked4, model, x0, t, x_t)
        reference = mdlm_loss(masked4, x0, x_t, x_theta, t)
        assert split.total == approx(reference, rel=1e-10, abs=1e-10)
        assert split.constant_term == 0.0


def test_mdlm_loss_edge_cases(masked4, uniform3, caplog):
    assert mdlm_loss(masked4, 1, 1, [0.2, 0.3, 0.5], 0.5) == 0.0
    with caplog.at_level(logging.WARNING):
        assert mdlm_loss(masked4, 0, 3, [0.0, 0.5, 0.5], 0.5) == np.inf
    with raises(UnsupportedScheduleError):
        mdlm_loss(uniform3, 0, 1, [0.5, 0.5], 0.5)
    with raises(DomainError):
        mdlm_loss(masked4, 3, 3, [0.2, 0.3, 0.5], 0.5)
    with raises(DomainError):
        mdlm_loss(masked4, 0, 3, [0.2, 0.3], 0.5)


def test_batch_of_one_is_single_sample(uniform3, tabular3):
    result = batch_objective("kl", uniform3, tabular3, [[2]], [0.3], [[1]])
    single = loss_kl(uniform3, tabular3, 2, 0.3, 1)
    scale = window_length(uniform3)
    assert result.breakdown.total == approx(single.total * scale, rel=1e-12)
    np.testing.assert_allclose(result.grad, loss_gradient("kl", uniform3, tabular3, 2, 0.3, 1) * scale, rtol=1e-12)


@mark.parametrize("kind", list(ObjectiveKind))
@mark.parametrize("variant", ("tabular", "mlp"))
def test_batch_gradient_matches_finite_differences(uniform3, kind, variant):
    rng = np.random.default_rng(6)
    if variant == "tabular":
        model = random_models(1, seed=7, buckets=4)[0]
    else:
        model = TwoHeadModel("mlp", 3, seq_len=2, hidden_width=6, time_features=4, seed=7)
    x0 = rng.integers(3, size=(6, model.seq_len))
    t = rng.uniform(0.05, 0.95, size=6)
    x_t = sample_forward(uniform3, t, x0, rng)
    base = model.params.copy()
    analytic = batch_objective(kind, uniform3, model, x0, t, x_t).grad

    def loss(theta):
        model.params = theta
        return batch_objective(kind, uniform3, model, x0, t, x_t).breakdown.total

    coords = rng.choice(model.n_params, size=min(30, model.n_params), replace=False)
    numeric = finite_difference_gradient(loss, base, coords, 1e-6)
    model.params = base
    np.testing.assert_allclose(analytic[coords], numeric, rtol=1e-4, atol=1e-6)


def test_gap_properties(uniform3):
    models = random_models(4, seed=8)
    gaps = np.array([compute_gap(uniform3, P_DATA, m).c_gap for m in models])
    assert gaps.min() >= -1e-10
    assert gaps.max() - gaps.min() < 1e-8
    report = compute_gap(uniform3, P_DATA, models[0])
    assert report.delta_integral == approx(report.c_gap, rel=1e-8, abs=1e-10)
    assert min(report.per_pair_delta.values()) >= -1e-9


def test_gap_vanishes_for_delta_data(uniform3, tabular3):
    assert abs(compute_gap(uniform3, [0.0, 0.0, 1.0], tabular3).c_gap) < 1e-10


def test_exact_gradients_agree(uniform3):
    for model in random_models(2, seed=9):
        g_kl = exact_objective_gradient(uniform3, P_DATA, model, target="l_kl")
        g_marginal = exact_objective_gradient(uniform3, P_DATA, model, target="marginal")
        assert np.linalg.norm(g_kl - g_marginal) <= 1e-6 * np.linalg.norm(g_marginal)
    with raises(DomainError):
        exact_objective_gradient(uniform3, P_DATA, model, target="elbo")


def test_exact_gradient_is_derivative_of_l_kl(uniform3, tabular3):
    base = tabular3.params.copy()
    analytic = exact_objective_gradient(uniform3, P_DATA, tabular3)

    def value(theta):
        tabular3.params = theta
        return compute_gap(uniform3, P_DATA, tabular3).l_kl_value

    coords = [0, 5, 11, 30, 47]
    numeric = finite_difference_gradient(value, base, coords, 1e-6)
    tabular3.params = base
    np.testing.assert_allclose(analytic[coords], numeric, rtol=1e-5, atol=1e-7)


def test_monte_carlo_marginal_loss_mean(uniform3, tabular3):
    values = mc_marginal_loss_samples(uniform3, P_DATA, tabular3, 40_000, np.random.default_rng(10))
    report = compute_gap(uniform3, P_DATA, tabular3)
    se = values.std(ddof=1) / np.sqrt(values.size)
    assert abs(values.mean() - (report.marginal_kl_value + report.entropy_constant)) < 4 * se


def test_data_elbo_exceeds_path_kl_by_data_entropy(uniform3):
    entropy = -np.sum(P_DATA * np.log(P_DATA))
    for model in random_models(2, seed=11):
        gap = data_elbo(uniform3, P_DATA, model) - marginal_reverse_kl(uniform3, P_DATA, model)
        assert gap == approx(entropy, abs=1e-5)


def test_elbo_dominates_exact_nll(uniform2):
    for k, model in enumerate(random_models(3, seed=12, num_states=2, buckets=4)):
        x0 = k % 2
        assert conditional_elbo(uniform2, model, x0) >= exact_nll_small_chain(uniform2, model, x0) - 1e-6


def test_exact_routines_need_single_tokens(uniform3):
    model = TwoHeadModel("mlp", 3, seq_len=2, hidden_width=4, time_features=2)
    with raises(DomainError):
        compute_gap(uniform3, P_DATA, model)
    with raises(DomainError):
        compute_gap(uniform3, P_DATA, random_models(1)[0], quad_points=4)


def test_masked_schedule_rejects_unreachable_pairs():
    schedule = Schedule(ScheduleKind.MASKED, 4)
    model = TwoHeadModel("tabular", 4, time_buckets=4)
    with raises(DomainError):
        loss_kl(schedule, model, 0, 0.5, 1)
