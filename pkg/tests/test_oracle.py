import numpy as np

from pytest                 import approx
from pytest                 import raises

from src.ctmc_core      import Schedule
from src.ctmc_core      import ScheduleKind
from src.ctmc_core      import forward_kernel
from src.ctmc_core      import marginal
from src.ctmc_core      import marginal_reverse
from src.ctmc_core      import rate_from_schedule
from src.errors         import DomainError
from src.errors         import UnreachableStateError
from src.model          import TwoHeadModel
from src.oracle         import ExactReverseModel
from src.oracle         import MarginalTable
from src.oracle         import exact_marginals
from src.oracle         import exact_nll_small_chain
from src.oracle         import finite_difference_gradient
from src.oracle         import integrate_master_equation


P = np.array([0.6, 0.3, 0.1])


def constant_model(num_states, exit_rate):
    model = TwoHeadModel("tabular", num_states, time_buckets=1)
    for i in range(num_states):
        model.set_head(0, i, exit_rate, np.where(np.arange(num_states) == i, 0.0, 1.0 / (num_states - 1)))
    return model


def test_exact_marginals_match_mixture(uniform3):
    table = exact_marginals(uniform3, P, [0.0, 0.5, 0.9])
    np.testing.assert_allclose(table.at(0.0), P, atol=1e-15)
    np.testing.assert_allclose(table.at(0.5), marginal(uniform3, P, 0.5), atol=1e-15)
    np.testing.assert_allclose(table.posterior[0], np.eye(3), atol=1e-15)
    with raises(DomainError):
        table.at(0.3)


def test_posterior_is_bayes_rule(uniform3):
    table = exact_marginals(uniform3, P, [0.4])
    for i in range(3):
        joint = np.array([P[x0] * forward_kernel(uniform3, 0.4, x0)[i] for x0 in range(3)])
        np.testing.assert_allclose(table.posterior[0, i], joint / joint.sum(), rtol=1e-13)


def test_unreachable_states_fall_back_to_p_data(masked4):
    table = exact_marginals(masked4, [0.5, 0.5, 0.0, 0.0], [0.0])
    np.testing.assert_allclose(table.posterior[0, 2], [0.5, 0.5, 0.0, 0.0])


def test_marginal_table_csv(tmp_path, uniform3):
    table = exact_marginals(uniform3, P, [0.0, 0.25, 0.5])
    text = table.to_csv()
    assert text.splitlines()[0] == "t,state,q,posterior_0,posterior_1,posterior_2"
    assert len(text.splitlines()) == 1 + 3 * 3
    back = MarginalTable.from_csv(table.save(tmp_path / "marginals.csv").read_text())
    np.testing.assert_array_equal(back.q, table.q)
    np.testing.assert_array_equal(back.posterior, table.posterior)
    np.testing.assert_array_equal(back.t_grid, table.t_grid)


def test_marginal_table_rejects_bad_rows():
    with raises(DomainError):
        MarginalTable(np.array([0.0]), np.array([[0.5, 0.6]]), np.array([[[1.0, 0.0], [0.0, 1.0]]]))


def test_master_equation_matches_kernel(uniform3):
    q, drift = integrate_master_equation(rate_from_schedule(uniform3), [1.0, 0.0, 0.0], 0.5, 1e-3,
                                         return_drift=True)
    np.testing.assert_allclose(q, forward_kernel(uniform3, 0.5, 0), atol=1e-10)
    assert drift < 1e-12


def test_master_equation_masked_cosine():
    schedule = Schedule(ScheduleKind.MASKED, 4, family="cosine")
    q = integrate_master_equation(rate_from_schedule(schedule), [0.0, 1.0, 0.0, 0.0], 0.7, 5e-4, t_start=0.2)
    a = schedule.alpha(0.7) / schedule.alpha(0.2)
    np.testing.assert_allclose(q, [0.0, a, 0.0, 1.0 - a], atol=1e-10)


def test_master_equation_step_bounds(uniform3):
    with raises(DomainError):
        integrate_master_equation(rate_from_schedule(uniform3), [1.0, 0.0, 0.0], 0.5, 1e-2)


def test_nll_of_exact_reverse_model_is_data_nll(uniform2):
    # started from pi instead of q_{T - eps}; the mismatch is second order in eps
    p = np.array([0.8, 0.2])
    model = ExactReverseModel.from_distribution(uniform2, p)
    for x0 in range(2):
        assert exact_nll_small_chain(uniform2, model, x0) == approx(-np.log(p[x0]), abs=5e-3)


def test_nll_of_constant_chain(uniform2):
    # symmetric two-state chain with rate 1 for time T - eps from the uniform prior keeps it uniform
    assert exact_nll_small_chain(uniform2, constant_model(2, 1.0), 0) == approx(np.log(2.0), abs=1e-9)


def test_nll_argument_checks(uniform2):
    model = constant_model(2, 1.0)
    with raises(DomainError):
        exact_nll_small_chain(uniform2, model, 0, grid_size=100)
    with raises(DomainError):
        exact_nll_small_chain(uniform2, model, 2)
    with raises(DomainError):
        exact_nll_small_chain(Schedule(ScheduleKind.UNIFORM, 5), constant_model(5, 1.0), 0)


def test_finite_difference_gradient_of_quadratic():
    grad = finite_difference_gradient(lambda x: float(x @ x + x[0] * x[2]), [1.0, -2.0, 0.5], [0, 1, 2], 1e-5)
    np.testing.assert_allclose(grad, [2.5, -4.0, 2.0], rtol=1e-8)
    with raises(DomainError):
        finite_difference_gradient(lambda x: 0.0, [0.0], [0], 1e-3)
    with raises(DomainError):
        finite_difference_gradient(lambda x: 0.0, [0.0], [0], 1e-9)


def test_exact_reverse_model_matches_marginal_reverse(uniform3):
    model = ExactReverseModel.from_distribution(uniform3, P)
    for t in (0.1, 0.5, 0.95):
        for i in range(3):
            head = model.forward([i], t).per_position[0]
            target = marginal_reverse(uniform3, P, t, i)
            assert head.exit_rate == approx(target.exit_rate, rel=1e-12)
            np.testing.assert_allclose(head.jump_dist, target.jump_dist, atol=1e-13)


def test_exact_reverse_model_for_sequences(uniform3):
    support = np.array([[0, 1], [2, 2]])
    model = ExactReverseModel(uniform3, support, [0.25, 0.75])
    assert model.seq_len == 2
    post = model.posterior([0, 1], 0.2)
    assert post[0] > post[1]
    lam, r = model.forward_batch([[0, 1], [2, 2], [1, 0]], 0.5)
    assert lam.shape == (3, 2)
    assert np.all(lam > 0)
    np.testing.assert_allclose(r.sum(axis=-1), 1.0)


def test_exact_reverse_model_rejects_unreachable_states(masked4):
    model = ExactReverseModel(masked4, [[0], [1]], [0.5, 0.5])
    with raises(UnreachableStateError):
        model.forward([2], 0.5)
    with raises(DomainError):
        ExactReverseModel(masked4, [[0], [1]], [0.5, 0.6])
    with raises(DomainError):
        ExactReverseModel(masked4, [[0], [7]], [0.5, 0.5])
