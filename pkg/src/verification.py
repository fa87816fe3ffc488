"""
Acceptance runner: executes the identity and convergence checks and writes a
machine-readable report.

Every suite returns a list of CheckResult (measured value, tolerance and the
comparison applied). Quick mode shrinks Monte Carlo sizes and widens
statistical tolerances to four standard errors; full mode uses the
acceptance sizes.

Report schema ``neural-ctmc-verify/1``:

    {"schema": ..., "seed": int, "mode": "quick" | "full", "passed": bool,
     "suites": [{"name": str, "passed": bool,
                 "checks": [{"name", "passed", "measured", "tolerance", "comparison"}]}]}
"""

import json
import logging
import time
import zlib
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

try:
    from .config_loader import ExperimentConfig, load_experiment_config
    from .ctmc_core import (ExitJump, ReverseTarget, Schedule, ScheduleKind, forward_kernel,
                            rate_from_schedule, sample_forward)
    from .errors import ConfigError
    from .model import TwoHeadModel, masked_adapter
    from .numerics import empirical_distribution, total_variation, tv_standard_error
    from .objectives import (ObjectiveKind, batch_objective, bregman_density, compute_gap,
                             conditional_elbo, decompose_row_kl, exact_objective_gradient,
                             loss_cond_stable, loss_conditional, loss_kl, mdlm_loss)
    from .oracle import (ExactReverseModel, exact_marginals, exact_nll_small_chain,
                         finite_difference_gradient, integrate_master_equation)
    from .path_measure import ForwardRateProvider, campbell_mecke_check, sample_paths
    from .samplers import (SamplerConfig, SelfCorrectConfig, recover_clean, sample_euler,
                           sample_exact, sample_tau_leaping, self_correct)
    from .training import check_points, head_errors, train
except ImportError:
    from config_loader import ExperimentConfig, load_experiment_config
    from ctmc_core import (ExitJump, ReverseTarget, Schedule, ScheduleKind, forward_kernel,
                           rate_from_schedule, sample_forward)
    from errors import ConfigError
    from model import TwoHeadModel, masked_adapter
    from numerics import empirical_distribution, total_variation, tv_standard_error
    from objectives import (ObjectiveKind, batch_objective, bregman_density, compute_gap,
                            conditional_elbo, decompose_row_kl, exact_objective_gradient,
                            loss_cond_stable, loss_conditional, loss_kl, mdlm_loss)
    from oracle import (ExactReverseModel, exact_marginals, exact_nll_small_chain,
                        finite_difference_gradient, integrate_master_equation)
    from path_measure import ForwardRateProvider, campbell_mecke_check, sample_paths
    from samplers import (SamplerConfig, SelfCorrectConfig, recover_clean, sample_euler,
                          sample_exact, sample_tau_leaping, self_correct)
    from training import check_points, head_errors, train


REPORT_SCHEMA = "neural-ctmc-verify/1"
FAULT_OFFSET = 1e-6
COMPARISONS = {
    "<=": lambda m, tol: m <= tol,
    ">=": lambda m, tol: m >= tol,
    "<": lambda m, tol: m < tol,
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    comparison: str

    @classmethod
    def evaluate(cls, name: str, measured: float, tolerance: float, comparison: str = "<=") -> "CheckResult":
        measured = float(measured)
        passed = bool(np.isfinite(measured) and COMPARISONS[comparison](measured, tolerance))
        # JSON has no inf/nan; store a huge value of the right sign instead
        if np.isnan(measured):
            measured = 1e308
        elif np.isinf(measured):
            measured = float(np.copysign(1e308, measured))
        return cls(name, passed, measured, float(tolerance), comparison)


@dataclass
class SuiteResult:
    name: str
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass
class VerifyReport:
    seed: int
    mode: str
    suites: List[SuiteResult] = field(default_factory=list)
    schema: str = REPORT_SCHEMA

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "seed": self.seed,
            "mode": self.mode,
            "passed": self.passed,
            "suites": [
                {"name": s.name, "passed": s.passed, "checks": [c.__dict__.copy() for c in s.checks]}
                for s in self.suites
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def parse_report(text: str) -> VerifyReport:
    """Rebuild a report from its JSON form, validating the schema."""
    data = json.loads(text)
    if data.get("schema") != REPORT_SCHEMA:
        raise ConfigError(f"unknown report schema: {data.get('schema')!r}")
    if data.get("mode") not in ("quick", "full") or not isinstance(data.get("seed"), int):
        raise ConfigError("report needs an integer seed and mode quick/full")
    suites = []
    for s in data["suites"]:
        checks = []
        for c in s["checks"]:
            if c["comparison"] not in COMPARISONS:
                raise ConfigError(f"unknown comparison {c['comparison']!r}")
            checks.append(CheckResult(str(c["name"]), bool(c["passed"]), float(c["measured"]),
                                      float(c["tolerance"]), c["comparison"]))
        suite = SuiteResult(str(s["name"]), checks)
        if suite.passed != bool(s["passed"]):
            raise ConfigError(f"suite {suite.name}: passed flag disagrees with its checks")
        suites.append(suite)
    report = VerifyReport(data["seed"], data["mode"], suites)
    if report.passed != bool(data["passed"]):
        raise ConfigError("report passed flag disagrees with its suites")
    return report


@dataclass(frozen=True)
class SuiteContext:
    seed: int
    full: bool
    fault: Optional[str] = None

    def rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(name.encode())])

    def size(self, quick: int, full: int) -> int:
        return full if self.full else quick

    def stat_tol(self, base: float, stderr: float) -> float:
        """Acceptance tolerance in full mode, widened to four standard errors in quick mode."""
        return base if self.full else max(base, 4.0 * stderr)


def _toy_config(ctx: SuiteContext, **overrides) -> ExperimentConfig:
    values = {"seed": ctx.seed, "schedule.num_states": 3, "dataset.probs": "[0.7, 0.3, 0.0]"}
    values.update({k.replace("__", "."): v for k, v in overrides.items()})
    return load_experiment_config(overrides=values)


# -- suites -----------------------------------------------------------------

def suite_decomposition(ctx: SuiteContext) -> List[CheckResult]:
    rng = ctx.rng("decomposition")
    worst, lowest = 0.0, np.inf
    for _ in range(ctx.size(1000, 10_000)):
        S = int(rng.integers(2, 17))
        i = int(rng.integers(S))
        target_row = rng.exponential(1.0, S) * (rng.random(S) < 0.8)
        target_row[i] = 0.0
        if target_row.sum() == 0.0:
            target_row[(i + 1) % S] = 1.0
        model_row = rng.exponential(1.0, S)
        model_row[i] = 0.0
        split = decompose_row_kl(ReverseTarget.from_per_pair(target_row, i), ExitJump.from_rates(model_row, i))
        worst = max(worst, abs(split.total - (split.poisson_term + split.direction_term)))
        j = (i + 1) % S
        lowest = min(lowest, bregman_density(target_row[j], model_row[j]))
    if ctx.fault == "decomposition":
        worst += FAULT_OFFSET
    return [
        CheckResult.evaluate("row_kl_equals_poisson_plus_categorical", worst, 1e-12),
        CheckResult.evaluate("bregman_nonnegative", lowest, -1e-12, ">="),
    ]


def suite_mdlm(ctx: SuiteContext) -> List[CheckResult]:
    rng = ctx.rng("mdlm")
    worst, constant = 0.0, 0.0
    for _ in range(ctx.size(200, 1000)):
        S = int(rng.integers(3, 9))
        schedule = Schedule(ScheduleKind.MASKED, S)
        x0 = int(rng.integers(S - 1))
        x_t = x0 if rng.random() < 0.5 else schedule.mask_token
        x_theta = rng.dirichlet(np.ones(S - 1))
        t = float(rng.uniform(schedule.eps, schedule.horizon - schedule.eps))
        model = masked_adapter(lambda x, tt, p=x_theta: p, schedule)
        split = loss_cond_stable(schedule, model, x0, t, x_t)
        reference = mdlm_loss(schedule, x0, x_t, x_theta, t)
        worst = max(worst, abs(split.total - reference) / max(1.0, abs(reference)))
        constant = max(constant, abs(split.constant_term))
    return [
        CheckResult.evaluate("cond_stable_equals_mdlm", worst, 1e-10),
        CheckResult.evaluate("no_additive_constant", constant, 0.0),
    ]


def _random_tabular(rng: np.random.Generator, num_states: int, buckets: int, scale: float = 0.5) -> TwoHeadModel:
    model = TwoHeadModel("tabular", num_states, time_buckets=buckets)
    model.params = rng.normal(0.0, scale, model.n_params)
    return model


def suite_loss_equivalence(ctx: SuiteContext) -> List[CheckResult]:
    rng = ctx.rng("loss_equivalence")
    schedule = Schedule(ScheduleKind.UNIFORM, 3)
    p_data = np.array([0.5, 0.3, 0.2])
    models = [_random_tabular(rng, 3, 8) for _ in range(ctx.size(3, 5))]

    x0 = rng.choice(3, size=20, p=p_data)
    t = rng.uniform(schedule.eps, schedule.horizon - schedule.eps, size=20)
    x_t = sample_forward(schedule, t, x0, rng)
    diffs = np.array([[loss_kl(schedule, m, a, tt, b).total - loss_conditional(schedule, m, a, tt, b).total
                       for a, tt, b in zip(x0, t, x_t)] for m in models])
    spread = float(np.max(diffs.max(axis=0) - diffs.min(axis=0)))

    grad_err = 0.0
    for m in models[:ctx.size(2, 5)]:
        g_surrogate = exact_objective_gradient(schedule, p_data, m, target="l_kl")
        g_marginal = exact_objective_gradient(schedule, p_data, m, target="marginal")
        grad_err = max(grad_err, np.linalg.norm(g_surrogate - g_marginal) / np.linalg.norm(g_marginal))

    gaps = np.array([compute_gap(schedule, p_data, m).c_gap for m in models])
    delta_gap = compute_gap(schedule, np.array([1.0, 0.0, 0.0]), models[0]).c_gap
    return [
        CheckResult.evaluate("kl_minus_conditional_theta_free", spread, 1e-9),
        CheckResult.evaluate("exact_gradients_agree", grad_err, 1e-6),
        CheckResult.evaluate("c_gap_nonnegative", gaps.min(), -1e-10, ">="),
        CheckResult.evaluate("c_gap_theta_invariant", gaps.max() - gaps.min(), 1e-8),
        CheckResult.evaluate("c_gap_zero_for_delta_data", abs(delta_gap), 1e-10),
    ]


def suite_elbo(ctx: SuiteContext) -> List[CheckResult]:
    rng = ctx.rng("elbo")
    schedule = Schedule(ScheduleKind.UNIFORM, 2)
    margin, refinement = np.inf, 0.0
    for k in range(ctx.size(3, 20)):
        model = _random_tabular(rng, 2, 4, scale=1.0)
        x0 = k % 2
        nll = exact_nll_small_chain(schedule, model, x0, 10_000)
        margin = min(margin, conditional_elbo(schedule, model, x0) - nll)
        if k == 0:
            refinement = abs(nll - exact_nll_small_chain(schedule, model, x0, 20_000))
    return [
        CheckResult.evaluate("elbo_dominates_exact_nll", margin, -1e-6, ">="),
        CheckResult.evaluate("nll_grid_refinement", refinement, 1e-4),
    ]


def suite_forward(ctx: SuiteContext) -> List[CheckResult]:
    schedule = Schedule(ScheduleKind.UNIFORM, 3)
    rate = rate_from_schedule(schedule)
    provider = ForwardRateProvider(rate)
    n = ctx.size(10_000, 100_000)
    t_mid = 0.5

    kernel = forward_kernel(schedule, t_mid, 0)
    ends = [p.final_state for p in sample_paths(provider, 0, 0.0, t_mid, ctx.seed, n)]
    tv_kernel = total_variation(empirical_distribution(ends, 3), kernel)

    p_mix = np.array([0.6, 0.0, 0.4])
    table = exact_marginals(schedule, p_mix, [t_mid])
    counts = np.round(p_mix * n).astype(int)
    mixed = []
    for x0, count in enumerate(counts):
        if count:
            mixed += [p.final_state for p in sample_paths(provider, x0, 0.0, t_mid, ctx.seed + 1 + x0, count)]
    tv_mix = total_variation(empirical_distribution(mixed, 3), table.at(t_mid))

    q, drift = integrate_master_equation(rate, np.eye(3)[0], t_mid, 1e-3, return_drift=True)

    cm = campbell_mecke_check(rate, schedule, 0, lambda t, i, j: t + i - 0.5 * j,
                              ctx.size(2000, 10_000), ctx.rng("campbell_mecke"))
    return [
        CheckResult.evaluate("gillespie_vs_kernel_tv", tv_kernel, ctx.stat_tol(0.01, tv_standard_error(kernel, n))),
        CheckResult.evaluate("gillespie_vs_exact_marginals_tv", tv_mix,
                             ctx.stat_tol(0.01, tv_standard_error(table.at(t_mid), n))),
        CheckResult.evaluate("master_equation_vs_kernel_tv", total_variation(q, kernel), 1e-6),
        CheckResult.evaluate("master_equation_drift", drift, 1e-9),
        CheckResult.evaluate("campbell_mecke_z", abs(cm.mc_estimate - cm.analytic) / cm.standard_error, 3.0),
    ]


def suite_reverse(ctx: SuiteContext) -> List[CheckResult]:
    schedule = Schedule(ScheduleKind.UNIFORM, 3)
    p_data = np.array([0.6, 0.3, 0.1])
    n = ctx.size(10_000, 100_000)
    batch = sample_exact(ExactReverseModel.from_distribution(schedule, p_data), schedule,
                         SamplerConfig(scheme="exact", seed=ctx.seed, n_samples=n))
    tv = total_variation(empirical_distribution(batch.samples, 3), p_data)
    return [CheckResult.evaluate("exact_reverse_recovers_p_data", tv, ctx.stat_tol(0.02, tv_standard_error(p_data, n)))]


def suite_samplers(ctx: SuiteContext) -> List[CheckResult]:
    schedule = Schedule(ScheduleKind.UNIFORM, 3)
    p_data = np.array([0.6, 0.3, 0.1])
    model = ExactReverseModel.from_distribution(schedule, p_data)
    n = ctx.size(10_000, 100_000)
    se = tv_standard_error(p_data, n)
    checks = []
    for name, fn in (("tau", sample_tau_leaping), ("euler", sample_euler)):
        tvs = []
        for steps in (16, 64, 256):
            out = fn(model, schedule, SamplerConfig(steps=steps, seed=ctx.seed, n_samples=n))
            tvs.append(total_variation(empirical_distribution(out.samples, 3), p_data))
        checks.append(CheckResult.evaluate(f"{name}_tv_monotone", max(tvs[1] - tvs[0], tvs[2] - tvs[1]), 2.0 * se))
        checks.append(CheckResult.evaluate(f"{name}_tv_at_256", tvs[2], ctx.stat_tol(0.05, se)))

    binary = Schedule(ScheduleKind.UNIFORM, 2)
    p2 = np.array([0.7, 0.3])
    model2 = ExactReverseModel.from_distribution(binary, p2)
    n2 = ctx.size(10_000, 100_000)
    cfg = SamplerConfig(steps=1024, seed=ctx.seed, n_samples=n2)
    tau = empirical_distribution(sample_tau_leaping(model2, binary, cfg).samples, 2)
    euler = empirical_distribution(sample_euler(model2, binary, cfg).samples, 2)
    se2 = np.sqrt(2.0) * tv_standard_error(p2, n2)
    checks.append(CheckResult.evaluate("tau_vs_euler_at_1024", total_variation(tau, euler), 2.0 * se2))

    if ctx.full:
        n3 = 20_000
        cfg3 = SamplerConfig(steps=4096, seed=ctx.seed, n_samples=n3)
        exact = empirical_distribution(sample_exact(model2, binary, cfg3).samples, 2)
        euler = empirical_distribution(sample_euler(model2, binary, cfg3).samples, 2)
        checks.append(CheckResult.evaluate("exact_vs_euler_at_4096", total_variation(exact, euler),
                                           2.0 * np.sqrt(2.0) * tv_standard_error(p2, n3)))
    return checks


def suite_training(ctx: SuiteContext) -> List[CheckResult]:
    smoke = _toy_config(ctx, optimizer__steps=2000, optimizer__log_interval=100)
    history = np.array(train(smoke).loss_history)
    tenth = max(1, history.size // 10)
    decrease = history[-tenth:].mean() - history[:tenth].mean()

    frozen_cfg = _toy_config(ctx, optimizer__steps=5, optimizer__learning_rate=0.0)
    frozen = frozen_cfg.build_model()
    before = frozen.params.tobytes()
    train(frozen_cfg, model=frozen)
    changed = float(frozen.params.tobytes() != before)

    checks = [
        CheckResult.evaluate("loss_decreases", decrease, 0.0, "<"),
        CheckResult.evaluate("zero_lr_keeps_params", changed, 0.0),
    ]
    if ctx.full:
        cfg = _toy_config(ctx, optimizer__steps=50_000, optimizer__batch_size=256,
                          optimizer__lr_schedule="linear_decay", optimizer__log_interval=5000,
                          model__time_buckets=32)
        result = train(cfg)
        p_data = cfg.build_dataset().p_data()
        rate_err, tv = head_errors(result.model, cfg.schedule, p_data, check_points(result.model))
        checks.append(CheckResult.evaluate("trained_exit_rate_rel_error", rate_err, 0.05))
        checks.append(CheckResult.evaluate("trained_jump_dist_tv", tv, 0.02))
    return checks


def planted_codewords(num_states: int = 8, seq_len: int = 8, count: int = 4) -> np.ndarray:
    """Codewords c_k[l] = (l + 2k) mod S; any two differ in every position."""
    return (np.arange(seq_len)[None, :] + 2 * np.arange(count)[:, None]) % num_states


def planted_corruption_trials(seed: int, trials: int, temperature: float = 0.1, max_updates: int = 4,
                              noise_level: float = 0.05):
    """Fraction of trials repairing the corrupted token, and fraction not adding disagreements."""
    schedule = Schedule(ScheduleKind.UNIFORM, 8)
    codes = planted_codewords()
    model = ExactReverseModel(schedule, codes, np.full(len(codes), 1.0 / len(codes)))
    config = SelfCorrectConfig(temperature, max_updates, noise_level)
    repaired, not_worse = 0, 0
    for child in np.random.SeedSequence(seed).spawn(trials):
        rng = np.random.default_rng(child)
        code = codes[rng.integers(len(codes))]
        pos = int(rng.integers(code.size))
        x = code.copy()
        x[pos] = (code[pos] + 1 + rng.integers(schedule.num_states - 1)) % schedule.num_states
        out = self_correct(model, schedule, x, config, rng)
        repaired += int(out[pos] == code[pos])
        not_worse += int((out != code).sum() <= (x != code).sum())
    return repaired / trials, not_worse / trials


def suite_self_correction(ctx: SuiteContext) -> List[CheckResult]:
    binary = Schedule(ScheduleKind.UNIFORM, 2)
    rec = recover_clean(ExitJump(1.0 / 3.0, np.array([0.0, 1.0]), 0), binary, 0.5, 0)
    round_trip = max(np.abs(rec.q_tilde - [0.75, 0.25]).max(), np.abs(rec.p0_hat - [1.0, 0.0]).max())

    rng = ctx.rng("self_correction")
    schedule = Schedule(ScheduleKind.UNIFORM, 4)
    inverse = 0.0
    for _ in range(100):
        i = int(rng.integers(4))
        t = float(rng.uniform(0.05, 0.95))
        r = rng.dirichlet(np.ones(3))
        row = np.insert(r, i, 0.0)
        out = ExitJump(float(rng.exponential(2.0)), row, i)
        back = recover_clean(out, schedule, t, i).implied_exit_jump(schedule, t)
        inverse = max(inverse, abs(back.exit_rate - out.exit_rate) / out.exit_rate,
                      np.abs(back.jump_dist - out.jump_dist).max())

    trials = ctx.size(100, 1000)
    repair_rate, not_worse = planted_corruption_trials(ctx.seed, trials)
    return [
        CheckResult.evaluate("recover_clean_round_trip", round_trip, 1e-10),
        CheckResult.evaluate("recover_clean_inverse_map", inverse, 1e-10),
        CheckResult.evaluate("planted_corruption_repair_rate", repair_rate, 0.9, ">="),
        CheckResult.evaluate("never_adds_disagreements", not_worse, 0.95, ">="),
    ]


def _gradient_error(model, kind: ObjectiveKind, schedule: Schedule, rng: np.random.Generator) -> float:
    n = 8
    x0 = rng.integers(schedule.num_states, size=(n, model.seq_len))
    t = rng.uniform(0.05, 0.95, size=n)
    x_t = sample_forward(schedule, t, x0, rng)
    base = model.params.copy()
    analytic = batch_objective(kind, schedule, model, x0, t, x_t).grad

    def loss(theta):
        model.params = theta
        return batch_objective(kind, schedule, model, x0, t, x_t).breakdown.total

    coords = rng.choice(model.n_params, size=min(50, model.n_params), replace=False)
    numeric = finite_difference_gradient(loss, base, coords, 1e-6)
    model.params = base
    a = analytic[coords]
    return float(np.max(np.abs(a - numeric) / np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-3)))


def suite_gradients(ctx: SuiteContext) -> List[CheckResult]:
    rng = ctx.rng("gradients")
    schedule = Schedule(ScheduleKind.UNIFORM, 3)
    models = {
        "tabular": _random_tabular(rng, 3, 4),
        "mlp": TwoHeadModel("mlp", 3, seq_len=2, hidden_width=8, time_features=4, seed=ctx.seed),
    }
    checks = []
    for variant, model in models.items():
        for kind in ObjectiveKind:
            err = _gradient_error(model, kind, schedule, rng)
            checks.append(CheckResult.evaluate(f"{variant}_{kind.value}_gradient", err, 1e-4))
    return checks


def suite_determinism(ctx: SuiteContext) -> List[CheckResult]:
    cfg = _toy_config(ctx, optimizer__steps=100, optimizer__log_interval=20)
    first, second = train(cfg), train(cfg.with_overrides(optimizer__workers=3))
    mismatches = int(first.records != second.records) + int(first.model.params.tobytes() != second.model.params.tobytes())

    schedule = Schedule(ScheduleKind.UNIFORM, 3)
    model = ExactReverseModel.from_distribution(schedule, [0.6, 0.3, 0.1])
    sc = SamplerConfig(steps=16, seed=ctx.seed, n_samples=300)
    mismatches += int(not np.array_equal(sample_tau_leaping(model, schedule, sc).samples,
                                         sample_tau_leaping(model, schedule, sc).samples))
    single = sample_tau_leaping(model, schedule, SamplerConfig(steps=16, seed=ctx.seed, n_samples=300, chunk_size=7))
    mismatches += int(not np.array_equal(single.samples, sample_tau_leaping(model, schedule, sc).samples))

    provider = ForwardRateProvider(rate_from_schedule(schedule))
    serial = [p.to_record() for p in sample_paths(provider, 0, 0.0, 0.9, ctx.seed, 50, workers=1)]
    threaded = [p.to_record() for p in sample_paths(provider, 0, 0.0, 0.9, ctx.seed, 50, workers=3)]
    mismatches += int(serial != threaded)
    return [CheckResult.evaluate("byte_identical_reruns", mismatches, 0.0)]


SUITES: Dict[str, Callable[[SuiteContext], List[CheckResult]]] = {
    "decomposition": suite_decomposition,
    "mdlm": suite_mdlm,
    "loss_equivalence": suite_loss_equivalence,
    "elbo": suite_elbo,
    "forward": suite_forward,
    "reverse": suite_reverse,
    "samplers": suite_samplers,
    "training": suite_training,
    "self_correction": suite_self_correction,
    "gradients": suite_gradients,
    "determinism": suite_determinism,
}


def verify(suites: Optional[Sequence[str]] = None, full: bool = False, seed: int = 0,
           inject_fault: Optional[str] = None) -> VerifyReport:
    """Run the selected suites (all by default) and collect a report."""
    names = list(suites) if suites else list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ConfigError(f"Unknown suite(s): {', '.join(unknown)}")
    ctx = SuiteContext(seed, full, inject_fault)
    report = VerifyReport(seed, "full" if full else "quick")
    for name in names:
        started = time.perf_counter()
        logging.info(f"Running suite: {name}")
        suite = SuiteResult(name, SUITES[name](ctx))
        report.suites.append(suite)
        status = "passed" if suite.passed else "FAILED"
        logging.info(f"Suite {name} {status} in {time.perf_counter() - started:.1f}s")
        for check in suite.checks:
            if not check.passed:
                logging.warning(f"  {check.name}: measured {check.measured:.3e}, need {check.comparison} {check.tolerance:.3e}")
    return report
