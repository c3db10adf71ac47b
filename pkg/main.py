"""Main entry point for the perturbation uncertainty toolkit."""
import argparse
import math
import os
import sys
from datetime import datetime
from typing import Any, Dict, List, Optional

# Add current directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from pipeline.experiment import ExperimentRunner
from utils.config import config, load_experiment_config
from utils.errors import (
    ArtifactError,
    ConfigurationError,
    DataFileError,
    IdxFormatError,
    IdxLengthError,
    InvariantViolation,
)
from utils.logger import experiment_logger

EXIT_OK = 0
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_INTERNAL = 4

# CLI flag dest -> ExperimentConfig field
FLAG_FIELDS = {
    'data_dir': 'data_dir',
    'model': 'model',
    'epochs': 'epochs',
    'batch_size': 'batch_size',
    'sigmas': 'sigmas',
    'lambdas': 'lambdas',
    'iters': 'iters',
    'modes': 'modes',
    'seed': 'master_seed',
    'out': 'output_dir',
    'jobs': 'jobs',
    'full': 'full',
    'independent_draws': 'independent_draws',
    'eval_subset': 'eval_subset',
    'train_subset': 'train_subset',
    'checkpoint': 'checkpoint',
    'corr_pooling': 'corr_pooling',
    'num_bins': 'num_bins',
    'min_count': 'min_count',
}


def parse_csv(text: Optional[str], field: str, cast=float) -> Optional[List[Any]]:
    """Comma-separated flag value; malformed entries are configuration errors."""
    if text is None:
        return None
    items = [item.strip() for item in text.split(',') if item.strip()]
    try:
        return [cast(item) for item in items]
    except ValueError as e:
        raise ConfigurationError(f"cannot parse {text!r} ({e})", field=field) from e


def parse_alpha(text: Optional[str]) -> Optional[float]:
    """--alpha as a finite accuracy in [0, 1]."""
    if text is None:
        return None
    try:
        alpha = float(text)
    except ValueError as e:
        raise ConfigurationError(f"cannot parse {text!r} ({e})", field='alpha') from e
    if not math.isfinite(alpha) or not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"must lie in [0, 1], got {text}", field='alpha')
    return alpha


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values that were given on the command line, keyed by config field."""
    values = {dest: getattr(args, dest) for dest in FLAG_FIELDS}
    values['sigmas'] = parse_csv(args.sigmas, 'sigmas')
    values['lambdas'] = parse_csv(args.lambdas, 'lambdas')
    values['modes'] = parse_csv(args.modes, 'modes', cast=str)
    return {FLAG_FIELDS[dest]: value for dest, value in values.items() if value is not None}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON experiment config; flags override its values')
    common.add_argument('--data-dir', help=f'Directory holding the MNIST IDX files (default: {config.DATA_DIR})')
    common.add_argument('--model', help='Model type: linear, mlp or cnn (default: linear)')
    common.add_argument('--epochs', help='Training epochs (default: 10)')
    common.add_argument('--batch-size', help='Mini-batch size (default: 64)')
    common.add_argument('--sigmas', help='Noise scales, comma separated (default: 0.1,0.5,1,10)')
    common.add_argument('--lambdas', help='PSI lambda grid, comma separated (default: 0.1,0.5,1,2)')
    common.add_argument('--iters', help='Perturbed draws per sample (default: 10)')
    common.add_argument('--modes', help='Perturbation modes, comma separated (default: weight,input)')
    common.add_argument('--seed', help=f'Master seed (default: {config.MASTER_SEED})')
    common.add_argument('--out', help=f'Output directory (default: {config.OUTPUT_DIR})')
    common.add_argument('--jobs', help='Grid points computed in parallel')
    common.add_argument('--full', action='store_true', default=None,
                        help='Evaluate on the full test set (cnn defaults to a 2000-sample subset)')
    common.add_argument('--force', action='store_true', help="Overwrite a stage's existing outputs")
    common.add_argument('--independent-draws', action='store_true', default=None,
                        help='Fresh weight noise per sample in weight mode')
    common.add_argument('--eval-subset', help='Seeded evaluation subset size')
    common.add_argument('--train-subset', help='Seeded training subset size')
    common.add_argument('--checkpoint', help='Load this checkpoint instead of training')
    common.add_argument('--corr-pooling',
                        help='Correctness/entropy correlation pooling: pooled or per_sample (default: pooled)')
    common.add_argument('--alpha',
                        help='Unperturbed accuracy for the metrics stage (default: read baseline.json)')
    common.add_argument('--num-bins', help='Entropy bins of the EAC graph (default: 20)')
    common.add_argument('--min-count', help='Smallest reported bin population (default: 5)')

    parser = argparse.ArgumentParser(
        description="Perturbation-based uncertainty quantification - PI / PSI / EAC experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Full experiment, naive multinomial regression
  python main.py run --data-dir data/mnist --out runs/linear

  # Noise-free sanity run on a small subset
  python main.py run --sigmas 0 --eval-subset 200 --epochs 1

  # Stage by stage
  python main.py train --model mlp --out runs/mlp
  python main.py perturb --model mlp --out runs/mlp
  python main.py metrics --model mlp --out runs/mlp

  # Metrics for externally produced prediction logs
  python main.py metrics --out runs/external --alpha 0.92
        """
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    subparsers.add_parser('train', parents=[common], help='Train (or load) the model and record alpha')
    subparsers.add_parser('perturb', parents=[common], help='Write one prediction log per (sigma, mode)')
    subparsers.add_parser('metrics', parents=[common], help='Compute CSVs and plots from prediction logs')
    subparsers.add_parser('run', parents=[common], help='All stages in sequence')
    return parser


def run_command(args: argparse.Namespace) -> int:
    cfg = load_experiment_config(args.config, collect_overrides(args))
    runner = ExperimentRunner(cfg, force=args.force, alpha=parse_alpha(args.alpha))

    print(f"\n[*] Starting {args.command.upper()} ({cfg.model} model, seed {cfg.master_seed})")
    print(f"[TIME] {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print("="*80 + "\n")

    if args.command == 'train':
        _, alpha = runner.train_stage()
        print(f"\n[OK] Unperturbed accuracy alpha = {alpha:.4f}")
    elif args.command == 'perturb':
        logs = runner.perturb_stage()
        print(f"\n[OK] Wrote {len(logs)} prediction logs")
    else:
        rows = runner.run() if args.command == 'run' else runner.metrics_stage()
        alpha = rows[0].alpha if rows else runner.resolve_alpha()
        experiment_logger.print_metrics_summary(rows, alpha)

    print(f"[OK] Artifacts saved under {cfg.output_dir}")
    print(f"[LOG] View logs: {config.LOG_FILE}\n")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main function; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    # Print banner
    print("\n" + "="*80)
    print(" "*22 + "PERTURBATION UNCERTAINTY EXPERIMENTS")
    print("="*80)

    try:
        config.validate()
        return run_command(args)

    except ConfigurationError as e:
        print(f"\n[X] Configuration Error: {e}\n")
        return EXIT_CONFIG
    except (OSError, ArtifactError, DataFileError, IdxFormatError, IdxLengthError) as e:
        experiment_logger.log_error("I/O failure", e)
        print(f"\n[X] I/O Error: {e}\n")
        return EXIT_IO
    except InvariantViolation as e:
        experiment_logger.log_error("Invariant violated", e)
        print(f"\n[X] Invariant violated: {e}\n")
        return EXIT_INTERNAL
    except Exception as e:
        experiment_logger.log_error(f"{args.command} failed", e)
        print(f"\n[X] {args.command} failed: {e}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
