"""Error and spectrum diagnostics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .types import DimensionError, Ensemble, STPError


@dataclass(frozen=True, eq=False)
class ErrorReport:
    """Per-time-step RMSE of each episode plus its ensemble mean and spread.

    ``per_episode`` has shape ``(k, n+m)``.  ``std`` is ``None`` when only one
    episode was evaluated.
    """

    per_episode: np.ndarray
    mean: np.ndarray
    std: Optional[np.ndarray]
    forecast_start_index: int

    @property
    def hindcast_mean(self) -> np.ndarray:
        return self.mean[: self.forecast_start_index]

    @property
    def forecast_mean(self) -> np.ndarray:
        return self.mean[self.forecast_start_index:]


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    cumulative_fraction: np.ndarray

    def modes_for_fraction(self, fraction: float) -> int:
        """Smallest number of leading modes whose cumulative share reaches ``fraction``."""
        idx = int(np.searchsorted(self.cumulative_fraction, fraction - 1e-15))
        return min(idx + 1, self.eigenvalues.size)


def rmse_step(u_true, u_pred) -> float:
    """Root-mean-square difference of two snapshots, ``||u - u*||_2 / sqrt(p)``."""
    u = np.asarray(u_true, dtype=np.float64)
    v = np.asarray(u_pred, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionError(f"snapshot shapes differ: {u.shape} vs {v.shape}")
    return float(np.sqrt(np.mean((u - v) ** 2)))


def rmse_trajectories(truth: np.ndarray, pred: np.ndarray, p: int) -> np.ndarray:
    """RMSE per snapshot for stacked trajectories, shape ``(k, snapshots)``."""
    diff = np.asarray(truth, dtype=np.float64) - np.asarray(pred, dtype=np.float64)
    k = diff.shape[0]
    return np.sqrt(np.mean(diff.reshape(k, -1, p) ** 2, axis=2))


def summarize(per_episode: np.ndarray, forecast_start_index: int) -> ErrorReport:
    per_episode = np.asarray(per_episode, dtype=np.float64)
    k = per_episode.shape[0]
    if k == 0:
        raise STPError("no episodes to summarize")
    mean = per_episode.mean(axis=0)
    std = per_episode.std(axis=0, ddof=1) if k >= 2 else None
    return ErrorReport(per_episode, mean, std, forecast_start_index)


def error_report(truth: Ensemble, predictions: Sequence) -> ErrorReport:
    """Per-step RMSE between ``truth`` episodes and their predictions.

    ``predictions`` holds either :class:`~stpforecast.stp.Prediction` objects
    or a ``(k, (n+m)*p)`` array of predicted trajectories.  Both sides should
    be on the same (centered or uncentered) footing.
    """
    h = truth.horizon
    if isinstance(predictions, np.ndarray):
        pred = predictions
    else:
        pred = np.stack([np.concatenate([pr.hindcast, pr.forecast]) for pr in predictions]) \
            if len(predictions) else np.empty((0, h.size))
    if pred.shape[0] != truth.k:
        raise DimensionError(
            f"{pred.shape[0]} predictions for {truth.k} truth episodes")
    if pred.shape[1] != h.size:
        raise DimensionError(f"predictions have length {pred.shape[1]}, expected {h.size}")
    return summarize(rmse_trajectories(truth.data, pred, h.p), h.n)


def spectrum_from_eigenvalues(eigenvalues) -> SpectrumReport:
    lam = np.asarray(eigenvalues, dtype=np.float64)
    total = lam.sum()
    if total > 0:
        cum = np.cumsum(lam) / total
        cum[-1] = 1.0
    else:
        cum = np.ones_like(lam)
    return SpectrumReport(lam, cum)


def spectrum_report(model) -> SpectrumReport:
    """Spectrum of a fitted model.

    Uses every eigenvalue of the correlation matrix when the model kept them,
    so the cumulative fraction is relative to the total variance; otherwise
    only the retained modes.
    """
    lam = model.all_eigenvalues if model.all_eigenvalues is not None else model.eigenvalues
    return spectrum_from_eigenvalues(lam)
