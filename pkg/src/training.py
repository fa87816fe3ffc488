"""
Training loop for two-head models on toy data.

Each step draws x0 from the dataset, t ~ U(eps, T - eps) and x_t ~ q_{t|0},
evaluates the configured objective against the conditional reverse targets
and takes one momentum step. Metrics go to JSON lines plus a summary CSV.
"""

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

try:
    from .config_loader import ExperimentConfig
    from .ctmc_core import marginal_reverse, sample_forward
    from .model import MomentumSGD, TwoHeadModel
    from .numerics import total_variation, tree_sum, tree_sum_arrays
    from .objectives import BatchResult, batch_objective
except ImportError:
    from config_loader import ExperimentConfig
    from ctmc_core import marginal_reverse, sample_forward
    from model import MomentumSGD, TwoHeadModel
    from numerics import total_variation, tree_sum, tree_sum_arrays
    from objectives import BatchResult, batch_objective


METRIC_FIELDS = ('step', 'loss', 'poisson', 'direction', 'constant', 'lr')


@dataclass
class TrainingResult:
    model: TwoHeadModel
    records: List[Dict[str, Any]] = field(default_factory=list)
    loss_history: List[float] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)
    checkpoint: Optional[Path] = None

    @property
    def aborted(self) -> bool:
        return bool(self.errors)


class MetricsWriter:
    """JSON-lines records and a summary CSV; both optional (out_dir None keeps them in memory)."""

    def __init__(self, out_dir: Optional[Union[str, Path]] = None):
        self.records: List[Dict[str, Any]] = []
        self.out_dir = Path(out_dir) if out_dir is not None else None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            (self.out_dir / 'metrics.jsonl').write_text('', encoding='utf-8')

    def write_metadata(self, metadata: Dict[str, Any]) -> None:
        if self.out_dir is not None:
            (self.out_dir / 'run.json').write_text(json.dumps(metadata, indent=2, sort_keys=True) + '\n',
                                                   encoding='utf-8')

    def write(self, record: Dict[str, Any]) -> None:
        self.records.append(record)
        if self.out_dir is not None:
            with open(self.out_dir / 'metrics.jsonl', 'a', encoding='utf-8') as f:
                f.write(json.dumps(record) + '\n')

    def close(self) -> None:
        if self.out_dir is None:
            return
        with open(self.out_dir / 'summary.csv', 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(['step', 'loss', 'poisson', 'direction'])
            for r in self.records:
                if 'abort' not in r:
                    writer.writerow([r['step'], repr(r['loss']), repr(r['poisson']), repr(r['direction'])])


def read_metrics(path: Union[str, Path]) -> List[Dict[str, Any]]:
    return [json.loads(line) for line in Path(path).read_text(encoding='utf-8').splitlines() if line.strip()]


def _shard_bounds(n: int, shards: int) -> List[slice]:
    edges = np.linspace(0, n, min(shards, n) + 1).astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def sharded_objective(config: ExperimentConfig, model: TwoHeadModel, x0: np.ndarray, t: np.ndarray,
                      x_t: np.ndarray, pool: Optional[ThreadPoolExecutor] = None) -> Tuple[float, Dict[str, float], np.ndarray]:
    """
    Batch objective over fixed shards, combined by pairwise summation.

    Shard boundaries depend only on the batch size and ``optimizer.shards``,
    so the result is identical for any number of workers.
    """
    n = x0.shape[0]
    slices = _shard_bounds(n, int(config.optimizer.get('shards', 1)))

    def run(sl: slice) -> BatchResult:
        return batch_objective(config.objective, config.schedule, model, x0[sl], t[sl], x_t[sl])

    results = list(pool.map(run, slices)) if pool is not None else [run(sl) for sl in slices]
    weights = [(sl.stop - sl.start) / n for sl in slices]
    parts = {
        'loss': tree_sum([w * r.breakdown.total for w, r in zip(weights, results)]),
        'poisson': tree_sum([w * r.breakdown.poisson_term for w, r in zip(weights, results)]),
        'direction': tree_sum([w * r.breakdown.direction_term for w, r in zip(weights, results)]),
    }
    grad = tree_sum_arrays([w * r.grad for w, r in zip(weights, results)])
    return parts['loss'], parts, grad


def train(config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None,
          model: Optional[TwoHeadModel] = None) -> TrainingResult:
    """
    Run the training loop described by ``config``.

    A non-finite loss stops training; the abort is recorded as a final
    metrics record and in ``errors``.
    """
    schedule = config.schedule
    opt_cfg = config.optimizer
    steps = int(opt_cfg['steps'])
    batch = int(opt_cfg['batch_size'])
    interval = max(1, int(opt_cfg['log_interval']))
    model = model if model is not None else config.build_model()
    dataset = config.build_dataset()
    optimizer = MomentumSGD(float(opt_cfg['learning_rate']), float(opt_cfg['momentum']),
                            opt_cfg['lr_schedule'], steps if opt_cfg['lr_schedule'] == 'linear_decay' else None)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    writer = MetricsWriter(out_dir)
    result = TrainingResult(model)
    eps, T = schedule.eps, schedule.horizon
    workers = int(opt_cfg.get('workers', 1))
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    started = time.perf_counter()
    window: List[Dict[str, float]] = []

    writer.write_metadata({
        'objective': config.objective.value,
        'variant': model.variant.value,
        'seed': config.seed,
        'steps': steps,
        'batch_size': batch,
        'time_scaling': 'integrated',
        'window': [eps, T - eps],
    })
    logging.info(f"Training {model.variant.value} model ({model.n_params} parameters) "
                 f"with {config.objective.value} for {steps} steps, batch {batch}")
    try:
        for step in range(1, steps + 1):
            x0 = dataset.sample(batch, rng)
            t = eps + (T - 2.0 * eps) * rng.random(batch)
            x_t = sample_forward(schedule, t, x0, rng)
            loss, parts, grad = sharded_objective(config, model, x0, t, x_t, pool)
            lr = optimizer.current_lr()

            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                message = f"Non-finite loss at step {step}: {loss}"
                logging.error(message)
                result.errors.append(message)
                writer.write({'step': step, 'abort': 'non_finite_loss', 'loss': repr(float(loss))})
                break

            model.params = optimizer.step(model.params, grad)
            result.loss_history.append(loss)
            window.append(dict(parts, lr=lr))

            if step % interval == 0 or step == steps:
                record = {'step': step}
                for key in ('loss', 'poisson', 'direction'):
                    record[key] = tree_sum([w[key] for w in window]) / len(window)
                record['constant'] = 0.0
                record['lr'] = window[-1]['lr']
                if config.wall_clock:
                    record['wall_clock'] = round(time.perf_counter() - started, 3)
                writer.write(record)
                window = []
                logging.info(f"step {step}: loss {record['loss']:.6f} "
                             f"(poisson {record['poisson']:.6f}, direction {record['direction']:.6f})")
    finally:
        if pool is not None:
            pool.shutdown()
        writer.close()

    result.records = writer.records
    if out_dir is not None:
        result.checkpoint = model.save(Path(out_dir) / 'checkpoint.txt')
    return result


def check_points(model: TwoHeadModel, count: int = 20, t_range: Tuple[float, float] = (0.4, 0.75)) -> List[Tuple[int, int]]:
    """(bucket, state) pairs whose bucket centre lies in ``t_range`` (fractions of T), bucket-major."""
    lo, hi = t_range[0] * model.horizon, t_range[1] * model.horizon
    pairs = [(b, i) for b in range(model.time_buckets) if lo <= model.bucket_center(b) <= hi
             for i in range(model.num_states)]
    return pairs[:count]


def head_errors(model: TwoHeadModel, schedule, p_data, points: List[Tuple[int, int]]) -> Tuple[float, float]:
    """
    Largest relative exit-rate error and largest jump-distribution TV against
    the exact marginal reverse rates, over the check points.
    """
    worst_rate, worst_tv = 0.0, 0.0
    for bucket, state in points:
        t = model.bucket_center(bucket)
        target = marginal_reverse(schedule, p_data, t, state)
        head = model.forward([state], t).per_position[0]
        worst_rate = max(worst_rate, abs(head.exit_rate - target.exit_rate) / target.exit_rate)
        worst_tv = max(worst_tv, total_variation(head.jump_dist, target.jump_dist))
    return worst_rate, worst_tv
