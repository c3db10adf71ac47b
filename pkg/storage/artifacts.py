"""On-disk artifact tree of one experiment run."""
import json
import os
from typing import Dict, Iterable, List, Sequence

import pandas as pd

from metrics.eac import ClassEac, EntropyBin
from metrics.grid import MetricRow
from metrics.uq import SampleStats
from models.training import EpochRecord
from perturbation.inject import PerturbMode
from utils.errors import ArtifactError

CONFIG_FILE = 'config.resolved.json'
CHECKPOINT_FILE = 'model.npz'
HISTORY_FILE = 'training_history.csv'
BASELINE_FILE = 'baseline.json'
METRICS_FILE = 'metrics.csv'
LOGS_DIR = 'logs'

STAGES = ('train', 'perturb', 'metrics')


def sigma_label(sigma: float) -> str:
    return f"sigma{float(sigma):g}"


class ArtifactStore:
    """Paths, collision checks and CSV/JSON writers under one output directory."""

    def __init__(self, root: str):
        """Initialize store rooted at the run's output directory."""
        self.root = root

    def path(self, *parts: str) -> str:
        return os.path.join(self.root, *parts)

    def log_path(self, sigma: float, mode: str) -> str:
        return self.path(LOGS_DIR, f"{sigma_label(sigma)}_{PerturbMode(mode).value}.csv")

    def point_dir(self, sigma: float, mode: str) -> str:
        return self.path(f"{sigma_label(sigma)}_{PerturbMode(mode).value}")

    # -- stage bookkeeping -------------------------------------------------

    def existing_outputs(self, stage: str) -> List[str]:
        """Artifacts of a stage already present in the output directory."""
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        if not os.path.isdir(self.root):
            return []

        if stage == 'train':
            names = [CHECKPOINT_FILE, HISTORY_FILE, BASELINE_FILE]
            return [name for name in names if os.path.exists(self.path(name))]

        if stage == 'perturb':
            logs_dir = self.path(LOGS_DIR)
            if not os.path.isdir(logs_dir):
                return []
            return sorted(os.path.join(LOGS_DIR, name) for name in os.listdir(logs_dir) if name.endswith('.csv'))

        found = [METRICS_FILE] if os.path.exists(self.path(METRICS_FILE)) else []
        found += sorted(
            name for name in os.listdir(self.root)
            if name.startswith('sigma') and os.path.isdir(self.path(name))
        )
        return found

    def prepare(self, stages: Iterable[str], force: bool = False):
        """Create the output tree; refuse to overwrite a stage's outputs without force."""
        stages = list(stages)
        if not force:
            for stage in stages:
                existing = self.existing_outputs(stage)
                if existing:
                    shown = ', '.join(existing[:3]) + (' ...' if len(existing) > 3 else '')
                    raise ArtifactError(
                        f"{self.root} already holds {stage} outputs ({shown}); use --force to overwrite"
                    )

        try:
            os.makedirs(self.root, exist_ok=True)
            if 'perturb' in stages:
                os.makedirs(self.path(LOGS_DIR), exist_ok=True)
        except OSError as e:
            raise ArtifactError(f"cannot create output directory {self.root}: {e}") from e

    def require(self, *parts: str) -> str:
        """Path of an input produced by an earlier stage."""
        path = self.path(*parts)
        if not os.path.exists(path):
            raise ArtifactError(f"missing stage input {path}; run the earlier stage first")
        return path

    # -- writers -----------------------------------------------------------

    def write_json(self, name: str, values: Dict):
        with open(self.path(name), 'w') as f:
            json.dump(values, f, indent=2, sort_keys=True)
            f.write('\n')

    def read_json(self, name: str) -> Dict:
        with open(self.require(name), 'r') as f:
            return json.load(f)

    def write_frame(self, frame: pd.DataFrame, *parts: str) -> str:
        path = self.path(*parts)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        frame.to_csv(path, index=False, lineterminator='\n')
        return path

    def write_config(self, resolved: Dict):
        self.write_json(CONFIG_FILE, resolved)

    def write_training_history(self, history: Sequence[EpochRecord]):
        frame = pd.DataFrame(
            [(r.epoch, r.loss, r.accuracy) for r in history],
            columns=['epoch', 'loss', 'accuracy'],
        )
        self.write_frame(frame, HISTORY_FILE)

    def write_baseline(self, alpha: float, eval_size: int, model_id: str):
        self.write_json(BASELINE_FILE, {'alpha': alpha, 'eval_size': eval_size, 'model': model_id})

    def read_baseline(self) -> Dict:
        return self.read_json(BASELINE_FILE)

    def write_samples(self, stats: Sequence[SampleStats], sigma: float, mode: str):
        frame = pd.DataFrame(
            [(j, s.true_label, s.entropy, s.mean_correct, s.certainty) for j, s in enumerate(stats)],
            columns=['id', 'true_label', 'entropy', 'mean_correct', 'certainty'],
        )
        self.write_frame(frame, self.point_dir(sigma, mode), 'samples.csv')

    def write_bins(self, bins: Sequence[EntropyBin], sigma: float, mode: str):
        frame = pd.DataFrame(
            [(b.lo, b.hi, b.count, b.accuracy) for b in bins],
            columns=['lo', 'hi', 'count', 'accuracy'],
        )
        self.write_frame(frame, self.point_dir(sigma, mode), 'bins.csv')

    def write_class_eac(self, rows: Sequence[ClassEac], sigma: float, mode: str):
        # classes without samples keep blank averages
        frame = pd.DataFrame(
            [(r.label, r.count, r.entropy_pct, r.accuracy, r.certainty) for r in rows],
            columns=['class', 'count', 'entropy_pct', 'accuracy', 'certainty'],
        )
        self.write_frame(frame, self.point_dir(sigma, mode), 'eac_class.csv')

    def write_metrics(self, rows: Sequence[MetricRow]):
        frame = pd.DataFrame([row.as_record() for row in rows])
        self.write_frame(frame, METRICS_FILE)
