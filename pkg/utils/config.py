"""Configuration management for the perturbation UQ toolkit."""
import json
import math
import os
from typing import Any, Dict, List, Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from utils.errors import ConfigurationError

# Load environment variables
load_dotenv()


class Config:
    """Environment-level settings."""

    # Paths
    DATA_DIR = os.getenv('UQ_DATA_DIR', os.path.join('data', 'mnist'))
    OUTPUT_DIR = os.getenv('UQ_OUTPUT_DIR', os.path.join('runs', 'latest'))

    # Run defaults
    MASTER_SEED = int(os.getenv('UQ_MASTER_SEED', '0'))
    JOBS = int(os.getenv('UQ_JOBS', '1'))
    PI_ALERT_THRESHOLD = float(os.getenv('UQ_PI_ALERT_THRESHOLD', '0.5'))

    # Logging Configuration
    LOG_DIR = os.getenv('UQ_LOG_DIR', 'logs')
    LOG_FILE = os.path.join(LOG_DIR, 'experiment.log')
    LOG_LEVEL = os.getenv('UQ_LOG_LEVEL', 'INFO')

    @staticmethod
    def validate():
        """Validate environment settings."""
        if Config.JOBS < 1:
            raise ConfigurationError("must be at least 1", field='UQ_JOBS')
        return True


config = Config()


# MNIST file names, plain or gzip-compressed
MNIST_FILES = {
    'train_images': 'train-images-idx3-ubyte',
    'train_labels': 'train-labels-idx1-ubyte',
    'test_images': 't10k-images-idx3-ubyte',
    'test_labels': 't10k-labels-idx1-ubyte',
}

CNN_DEFAULT_EVAL_SUBSET = 2000


def _check_scale_grid(value: List[float], what: str) -> List[float]:
    """Non-empty, finite, >= 0, and unique under the %g labels of artifact names."""
    if not value:
        raise ValueError('grid must not be empty')
    if not all(math.isfinite(v) for v in value):
        raise ValueError(f'{what} must be finite')
    if any(v < 0 for v in value):
        raise ValueError(f'{what} must be >= 0')
    labels = [f"{v:g}" for v in value]
    if len(set(labels)) != len(labels):
        raise ValueError(f'{what} must be unique, got {labels}')
    return value


class AdamSettings(BaseModel):
    """Adam hyperparameters, identical for every model."""

    model_config = ConfigDict(extra='forbid')

    lr: float = Field(1e-3, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)


class CnnSettings(BaseModel):
    """TinyCnn geometry; rejected at resolve time if any size is non-integral."""

    model_config = ConfigDict(extra='forbid')

    filters: int = Field(8, ge=1)
    kernel: int = Field(5, ge=1)
    stride: int = Field(1, ge=1)
    padding: int = Field(0, ge=0)
    pool: int = Field(2, ge=1)


class ExperimentConfig(BaseModel):
    """Full reproducibility record of one experiment."""

    model_config = ConfigDict(extra='forbid')

    data_dir: str = Field(default_factory=lambda: config.DATA_DIR)
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None

    model: Literal['linear', 'mlp', 'cnn'] = 'linear'
    hidden_size: int = Field(128, ge=1)
    cnn: CnnSettings = Field(default_factory=CnnSettings)
    checkpoint: Optional[str] = None

    epochs: int = Field(10, ge=1)
    batch_size: int = Field(64, ge=1)
    adam: AdamSettings = Field(default_factory=AdamSettings)

    sigmas: List[float] = Field(default_factory=lambda: [0.1, 0.5, 1.0, 10.0])
    lambdas: List[float] = Field(default_factory=lambda: [0.1, 0.5, 1.0, 2.0])
    iters: int = Field(10, ge=1)
    modes: List[Literal['weight', 'input']] = Field(default_factory=lambda: ['weight', 'input'])
    independent_draws: bool = False
    corr_pooling: Literal['pooled', 'per_sample'] = 'pooled'

    master_seed: int = Field(default_factory=lambda: config.MASTER_SEED, ge=0)
    num_bins: int = Field(20, ge=1)
    min_count: int = Field(5, ge=0)

    eval_subset: Optional[int] = Field(None, ge=1)
    train_subset: Optional[int] = Field(None, ge=1)
    full: bool = False

    output_dir: str = Field(default_factory=lambda: config.OUTPUT_DIR)
    jobs: int = Field(default_factory=lambda: config.JOBS, ge=1)

    @field_validator('sigmas')
    @classmethod
    def _check_sigmas(cls, value: List[float]) -> List[float]:
        return _check_scale_grid(value, 'noise scales')

    @field_validator('lambdas')
    @classmethod
    def _check_lambdas(cls, value: List[float]) -> List[float]:
        return _check_scale_grid(value, 'lambda values')

    @field_validator('modes')
    @classmethod
    def _check_modes(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError('grid must not be empty')
        if len(set(value)) != len(value):
            raise ValueError('modes must be unique')
        return value

    @model_validator(mode='after')
    def _check_cnn_geometry(self) -> 'ExperimentConfig':
        if self.model == 'cnn':
            from models.cnn import cnn_geometry
            cnn_geometry(28, self.cnn.kernel, self.cnn.padding, self.cnn.stride, self.cnn.pool)
        return self

    def data_path(self, key: str) -> str:
        """Explicit path for one IDX file, or its default under data_dir."""
        explicit = getattr(self, key)
        return explicit if explicit else os.path.join(self.data_dir, MNIST_FILES[key])

    def effective_eval_subset(self) -> Optional[int]:
        """Evaluation subset size after the CNN desk-scale default."""
        if self.full:
            return None
        if self.eval_subset is None and self.model == 'cnn':
            return CNN_DEFAULT_EVAL_SUBSET
        return self.eval_subset

    def resolved(self) -> Dict[str, Any]:
        """Every field materialised, JSON-ready."""
        snapshot = self.model_dump(mode='json')
        snapshot['resolved_eval_subset'] = self.effective_eval_subset()
        return snapshot


def _field_name(error: Dict[str, Any]) -> str:
    return '.'.join(str(part) for part in error.get('loc', ())) or 'config'


def build_experiment_config(values: Dict[str, Any]) -> ExperimentConfig:
    """Validate a raw mapping, translating pydantic errors."""
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigurationError(first.get('msg', 'invalid value'), field=_field_name(first)) from e


def load_experiment_config(path: Optional[str] = None,
                           overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Defaults <- JSON file <- overrides (CLI flags)."""
    values: Dict[str, Any] = {}

    if path:
        try:
            with open(path, 'r') as f:
                values = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"not valid JSON ({e})", field='config') from e
        if not isinstance(values, dict):
            raise ConfigurationError("top level must be an object", field='config')

    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    return build_experiment_config(values)
