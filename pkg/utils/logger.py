"""Logging and console reporting utilities."""
import logging
import os
from typing import Iterable, Optional

from utils.config import config


class ExperimentLogger:
    """Manage the experiment log file and console summaries."""

    def __init__(self):
        """Initialize experiment logger."""
        self.setup_logging()

    def setup_logging(self):
        """Configure logging."""
        self.logger = logging.getLogger('perturbation_uq')
        self.logger.setLevel(config.LOG_LEVEL)

        # Handlers survive re-imports of this module
        if self.logger.handlers:
            return

        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )

        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        self.logger.addHandler(console_handler)

        try:
            os.makedirs(config.LOG_DIR, exist_ok=True)
            file_handler = logging.FileHandler(config.LOG_FILE)
            file_handler.setFormatter(formatter)
            self.logger.addHandler(file_handler)
        except OSError as e:
            self.logger.warning(f"File logging disabled ({config.LOG_FILE}): {e}")

    def log_stage_start(self, stage: str, output_dir: str):
        """Log the start of a pipeline stage."""
        self.logger.info(f"Starting {stage} stage (output: {output_dir})")

    def log_stage_complete(self, stage: str, detail: str = ''):
        """Log stage completion."""
        suffix = f" - {detail}" if detail else ''
        self.logger.info(f"Completed {stage} stage{suffix}")

    def log_metric_row(self, row):
        """Log one metric grid row; large accuracy drops are warnings."""
        psi_text = ', '.join(f"psi@{lam:g}={value:.3f}" for lam, value in row.psi.items())
        message = (
            f"[{row.mode.upper()}] sigma={row.sigma:g}: alpha={row.alpha:.4f} "
            f"alpha_sigma={row.alpha_sigma:.4f} pi={row.pi:.4f} corr={row.corr:.4f} ({psi_text})"
        )

        if row.pi > config.PI_ALERT_THRESHOLD:
            self.logger.warning(message)
        else:
            self.logger.info(message)

    def log_error(self, message: str, error: Optional[Exception] = None):
        """Log an error."""
        if error:
            self.logger.error(f"{message}: {str(error)}")
        else:
            self.logger.error(message)

    def print_metrics_summary(self, rows: Iterable, alpha: float):
        """Print a formatted summary of the metric grid to console."""
        rows = list(rows)
        if not rows:
            print("\n[OK] No metric rows computed")
            return

        lambdas = list(rows[0].psi.keys())

        print("\n" + "="*80)
        print(f"[METRICS] PI / PSI SUMMARY - unperturbed accuracy {alpha:.4f}")
        print("="*80)

        header = f"{'sigma':>7} {'mode':>7} {'alpha_s':>8} {'pi':>7} {'corr':>7}"
        header += ''.join(f" {'psi@' + format(lam, 'g'):>9}" for lam in lambdas)
        print(header)

        for row in rows:
            line = f"{row.sigma:>7g} {row.mode:>7} {row.alpha_sigma:>8.4f} {row.pi:>7.4f} {row.corr:>7.4f}"
            line += ''.join(f" {row.psi[lam]:>9.4f}" for lam in lambdas)
            print(line)

        print("="*80 + "\n")


# Global experiment logger instance
experiment_logger = ExperimentLogger()
