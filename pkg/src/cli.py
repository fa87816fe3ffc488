#!/usr/bin/env python3
"""
Command-line interface for the Neural CTMC toolkit.
Forward path simulation, training, sampling, self-correction, verification
and marginal export, all driven by one experiment config.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

try:
    from .config_loader import ExperimentConfig, load_experiment_config
    from .ctmc_core import rate_from_schedule
    from .errors import ConfigError, DomainError
    from .model import TwoHeadModel
    from .oracle import ExactReverseModel, exact_marginals
    from .path_measure import ForwardRateProvider, sample_paths
    from .samplers import SCHEME_ALIASES, read_samples, sample, self_correct
    from .training import train
    from .verification import SUITES, verify
except ImportError:
    # Fallback for when running directly
    sys.path.append(str(Path(__file__).parent.parent))
    from src.config_loader import ExperimentConfig, load_experiment_config
    from src.ctmc_core import rate_from_schedule
    from src.errors import ConfigError, DomainError
    from src.model import TwoHeadModel
    from src.oracle import ExactReverseModel, exact_marginals
    from src.path_measure import ForwardRateProvider, sample_paths
    from src.samplers import SCHEME_ALIASES, read_samples, sample, self_correct
    from src.training import train
    from src.verification import SUITES, verify


EXIT_USAGE = 2


def setup_logging(verbose: bool = False, level: int = logging.INFO) -> None:
    """Set up logging configuration."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else level,
        format='%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )


def load_reverse_model(config: ExperimentConfig, checkpoint: Optional[str]):
    """
    Model used by sample/self-correct: a checkpoint if given, otherwise the
    exact reverse model of the configured (enumerable) dataset.
    """
    if checkpoint:
        model = TwoHeadModel.load(checkpoint)
        if model.num_states != config.schedule.num_states:
            raise ConfigError(f"checkpoint has {model.num_states} states, config {config.schedule.num_states}")
        logging.info(f"Loaded checkpoint: {checkpoint}")
        return model
    support, probs = config.build_dataset().support()
    logging.info(f"No checkpoint given; using the exact reverse model of {len(probs)} data sequences")
    return ExactReverseModel(config.schedule, support, probs)


def cmd_simulate(config: ExperimentConfig, args) -> int:
    sim = config.simulate
    t_end = sim['t_end'] if sim['t_end'] is not None else config.schedule.horizon - config.schedule.eps
    provider = ForwardRateProvider(rate_from_schedule(config.schedule))
    paths = sample_paths(provider, int(sim['x0']), 0.0, float(t_end), config.seed,
                         int(sim['n_paths']), workers=int(sim['workers']))
    out = Path(args.out or 'paths.txt')
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(''.join(p.to_record() + '\n' for p in paths), encoding='utf-8')
    mean_jumps = np.mean([p.n_jumps for p in paths])
    print(f"✓ {len(paths)} forward paths saved to: {out} (mean jumps {mean_jumps:.3f})")
    return 0


def cmd_train(config: ExperimentConfig, args) -> int:
    out = Path(args.out or 'runs/train')
    result = train(config, out)
    if result.aborted:
        for error in result.errors:
            print(f"⚠ {error}")
        return 1
    print(f"✓ Trained {result.model.variant.value} model for {len(result.loss_history)} steps")
    print(f"✓ Metrics saved to: {out / 'metrics.jsonl'}")
    print(f"✓ Checkpoint saved to: {result.checkpoint}")
    return 0


def cmd_sample(config: ExperimentConfig, args) -> int:
    model = load_reverse_model(config, args.checkpoint)
    batch = sample(model, config.schedule, config.sampler)
    samples_path, sidecar_path = batch.save(args.out or 'samples.txt')
    print(f"✓ {batch.samples.shape[0]} samples saved to: {samples_path}")
    print(f"✓ Run statistics saved to: {sidecar_path}")
    if batch.overflow_count:
        print(f"⚠ Euler overflow rescaled {batch.overflow_count} rows over {batch.overflow_steps} steps")
    return 0


def cmd_self_correct(config: ExperimentConfig, args) -> int:
    if not args.input:
        raise ConfigError("self-correct needs --input <samples file>")
    model = load_reverse_model(config, args.checkpoint)
    sequences = read_samples(args.input)
    children = np.random.SeedSequence(config.seed).spawn(len(sequences))
    corrected = [self_correct(model, config.schedule, x, config.self_correct, np.random.default_rng(c))
                 for x, c in zip(sequences, children)]
    edits = int(sum((a != b).sum() for a, b in zip(sequences, corrected)))
    out = Path(args.out or 'corrected.txt')
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(''.join(' '.join(str(int(v)) for v in x) + '\n' for x in corrected), encoding='utf-8')
    print(f"✓ {len(corrected)} sequences corrected with {edits} token edits, saved to: {out}")
    return 0


def cmd_verify(args) -> int:
    report = verify(args.suite, full=args.full, seed=args.seed if args.seed is not None else 0,
                    inject_fault=args.inject_fault)
    out = Path(args.out or 'verify_report.json')
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json(), encoding='utf-8')
    for suite in report.suites:
        mark = '✓' if suite.passed else '⚠'
        print(f"{mark} {suite.name}: {sum(c.passed for c in suite.checks)}/{len(suite.checks)} checks passed")
    print(f"\n{'✓ All suites passed' if report.passed else '⚠ Verification failed'}; report saved to: {out}")
    return 0 if report.passed else 1


def cmd_export_marginals(config: ExperimentConfig, args) -> int:
    p_data = config.build_dataset().p_data()
    n = args.steps or 10
    t_grid = np.linspace(0.0, config.schedule.horizon - config.schedule.eps, n + 1)
    table = exact_marginals(config.schedule, p_data, t_grid)
    out = table.save(args.out or 'marginals.csv')
    print(f"✓ Marginals at {len(t_grid)} times saved to: {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='neural_ctmc',
        description="Neural CTMC discrete diffusion: simulation, training, sampling and verification",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s simulate --config golden/toy_s3.conf --out paths.txt
  %(prog)s train --config golden/toy_s3.conf --steps 5000 --out runs/toy
  %(prog)s sample --config golden/toy_s3.conf --checkpoint runs/toy/checkpoint.txt --scheme tau --steps 64 --seed 7
  %(prog)s self-correct --config golden/toy_s3.conf --input samples.txt
  %(prog)s verify                              # quick run of every suite
  %(prog)s verify --suite decomposition --full
  %(prog)s export-marginals --config golden/toy_s3.conf --out marginals.csv
        """
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='Flat key = value experiment config')
    common.add_argument('--seed', type=int, help='Root seed (overrides the config)')
    common.add_argument('--out', help='Output path')
    common.add_argument('--steps', type=int, help='Training steps (train), sampler steps (sample) or grid intervals')
    common.add_argument('--verbose', '-v', action='store_true', help='Enable verbose logging')

    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('simulate', parents=[common], help='Simulate forward noising paths')
    sub.add_parser('train', parents=[common], help='Train a two-head model')
    p = sub.add_parser('sample', parents=[common], help='Generate sequences with the reverse process')
    p.add_argument('--scheme', choices=sorted(SCHEME_ALIASES), help='Sampler scheme')
    p.add_argument('--checkpoint', help='Model checkpoint (defaults to the exact reverse model)')
    p = sub.add_parser('self-correct', parents=[common], help='Edit finished sequences token by token')
    p.add_argument('--input', help='Samples file, one sequence per line')
    p.add_argument('--checkpoint', help='Model checkpoint (defaults to the exact reverse model)')
    p = sub.add_parser('verify', parents=[common], help='Run the acceptance suites')
    p.add_argument('--suite', action='append', choices=sorted(SUITES), help='Suite to run (repeatable)')
    p.add_argument('--full', action='store_true', help='Acceptance-size runs')
    p.add_argument('--inject-fault', choices=['decomposition'], help='Perturb one identity to check the runner fails')
    sub.add_parser('export-marginals', parents=[common], help='Write exact marginals and posteriors as CSV')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == 'verify':
        setup_logging(args.verbose)
        return cmd_verify(args)

    overrides = {'seed': args.seed}
    if args.steps is not None and args.command == 'train':
        overrides['optimizer.steps'] = args.steps
    if args.steps is not None and args.command == 'sample':
        overrides['sampler.steps'] = args.steps
    if getattr(args, 'scheme', None):
        overrides['sampler.scheme'] = SCHEME_ALIASES[args.scheme].value

    try:
        config = load_experiment_config(args.config, overrides)
    except ConfigError as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    setup_logging(args.verbose, config.log_level)
    handlers = {
        'simulate': cmd_simulate,
        'train': cmd_train,
        'sample': cmd_sample,
        'self-correct': cmd_self_correct,
        'export-marginals': cmd_export_marginals,
    }
    try:
        return handlers[args.command](config, args)
    except ConfigError as e:
        logging.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except (DomainError, FileNotFoundError) as e:
        logging.error(f"Error during {args.command}: {e}")
        return 1


def cli_entry(argv: Optional[List[str]] = None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
