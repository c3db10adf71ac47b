"""PI / PSI table over the (sigma, mode) grid."""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

from metrics.uq import alpha_and_corr, perturbation_index, psi, sample_stats
from perturbation.inject import PerturbMode
from perturbation.sampler import PredictionLog
from utils.errors import InvalidInputError, InvariantViolation

CONSISTENCY_TOL = 1e-12


@dataclass(frozen=True)
class MetricRow:
    sigma: float
    mode: str
    alpha: float
    alpha_sigma: float
    pi: float
    corr: float
    psi: Dict[float, float] = field(default_factory=dict)

    def check_invariants(self):
        """pi = alpha - alpha_sigma and psi_lambda = alpha_sigma - corr * lambda."""
        if abs(self.pi - (self.alpha - self.alpha_sigma)) > CONSISTENCY_TOL:
            raise InvariantViolation(f"sigma={self.sigma:g} {self.mode}: pi != alpha - alpha_sigma")
        for lam, value in self.psi.items():
            if abs(value - (self.alpha_sigma - self.corr * lam)) > CONSISTENCY_TOL:
                raise InvariantViolation(f"sigma={self.sigma:g} {self.mode}: psi@{lam:g} inconsistent")

    def as_record(self) -> Dict[str, float]:
        record = {
            'sigma': self.sigma,
            'mode': self.mode,
            'alpha': self.alpha,
            'alpha_sigma': self.alpha_sigma,
            'pi': self.pi,
            'corr': self.corr,
        }
        for lam, value in self.psi.items():
            record[f"psi_{lam:g}"] = value
        return record


def metric_row(log: PredictionLog, lambdas: Sequence[float], alpha: float, pooling: str = 'pooled') -> MetricRow:
    alpha_sigma, corr = alpha_and_corr(sample_stats(log), pooling)
    row = MetricRow(
        sigma=log.meta.sigma,
        mode=log.meta.mode.value,
        alpha=alpha,
        alpha_sigma=alpha_sigma,
        pi=perturbation_index(alpha, alpha_sigma),
        corr=corr,
        psi={float(lam): psi(alpha_sigma, corr, lam) for lam in lambdas},
    )
    row.check_invariants()
    return row


def metric_grid(logs: Mapping[Tuple[float, str], PredictionLog], lambdas: Sequence[float], alpha: float,
                sigmas: Sequence[float], modes: Sequence[str], pooling: str = 'pooled') -> List[MetricRow]:
    """One row per (sigma, mode), sigma-major in grid order."""
    rows = []
    for sigma in sigmas:
        for mode in modes:
            key = (float(sigma), PerturbMode(mode).value)
            if key not in logs:
                raise InvalidInputError(f"no prediction log for sigma={sigma:g}, mode={key[1]}")
            rows.append(metric_row(logs[key], lambdas, alpha, pooling))
    return rows
