"""Mean removal and episode construction for transient and stationary data."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .types import (ENSEMBLE_MEAN, STATIONARY, TEMPORAL_MEAN, TRANSIENT,
                    DimensionError, Ensemble, HorizonSpec, MeanField, STPError,
                    validate_ensemble)


class CenteringError(STPError):
    pass


@dataclass(frozen=True)
class SegmentationSpec:
    """How a long stationary series is cut into overlapping episodes.

    ``stride`` is the offset (in snapshots) between consecutive episode
    starts; ``split_fraction`` is the share of episodes used for training.
    """

    n: int
    m: int
    stride: int = 10
    split_fraction: float = 0.8

    def __post_init__(self):
        HorizonSpec(self.n, self.m, 1)
        if int(self.stride) != self.stride or self.stride < 1:
            raise STPError(f"stride must be a positive integer, got {self.stride!r}")
        if not 0.0 < self.split_fraction < 1.0:
            raise STPError(f"split_fraction must lie in (0, 1), got {self.split_fraction!r}")


def ensemble_mean(ensemble: Ensemble) -> MeanField:
    validate_ensemble(ensemble)
    if ensemble.kind != TRANSIENT:
        raise CenteringError("ensemble mean is defined for transient ensembles")
    # Shifted by the first episode: identical episodes give their value exactly.
    ref = ensemble.data[0]
    return MeanField(ENSEMBLE_MEAN, ref + (ensemble.data - ref).mean(axis=0), ensemble.horizon)


def center_transient(ensemble: Ensemble) -> tuple[Ensemble, MeanField]:
    """Subtract the per-time-index ensemble mean from every episode."""
    if ensemble.centered:
        raise CenteringError("ensemble is already centered")
    mean = ensemble_mean(ensemble)
    return ensemble.with_data(ensemble.data - mean.values, centered=True), mean


def uncenter(ensemble: Ensemble, mean: MeanField) -> Ensemble:
    if not ensemble.centered:
        raise CenteringError("ensemble is not centered")
    return ensemble.with_data(ensemble.data + mean.stacked(ensemble.horizon),
                              centered=False)


def _as_series(series) -> np.ndarray:
    s = np.asarray(series, dtype=np.float64)
    if s.ndim == 1:
        s = s.reshape(-1, 1)
    if s.ndim != 2:
        raise DimensionError("a snapshot series must be a (T, p) array")
    if s.shape[0] < 1 or s.shape[1] < 1:
        raise DimensionError("snapshot series is empty")
    return s


def center_stationary(series) -> tuple[np.ndarray, MeanField]:
    """Subtract the temporal mean of a ``(T, p)`` snapshot series."""
    s = _as_series(series)
    mu = s.mean(axis=0)
    # MeanField needs a horizon; the temporal mean only uses p.
    mean = MeanField(TEMPORAL_MEAN, mu, HorizonSpec(1, 1, s.shape[1]))
    return s - mu, mean


def segment_starts(length: int, episode_length: int, stride: int) -> np.ndarray:
    if length < episode_length:
        raise DimensionError(
            f"series of {length} snapshots is shorter than one episode "
            f"({episode_length} snapshots)")
    return np.arange(0, length - episode_length + 1, stride)


def split_counts(starts: np.ndarray, episode_length: int, split_fraction: float):
    """Number of training episodes and index of the first testing episode.

    The first ``round(split_fraction * K)`` episodes train.  Testing starts
    with the first later episode that does not overlap the last training
    episode, so no snapshot is shared between the two sets.
    """
    total = starts.size
    k_train = int(math.floor(split_fraction * total + 0.5))
    k_train = min(max(k_train, 1), total)
    if k_train == total:
        return k_train, total
    train_end = starts[k_train - 1] + episode_length
    first_test = int(np.searchsorted(starts, train_end, side="left"))
    return k_train, first_test


def segment_stationary(series, spec: SegmentationSpec, centered: bool = False):
    """Cut a ``(T, p)`` series into overlapping train and test ensembles.

    Returns ``(train, test)``.  ``test`` is ``None`` when no episode is left
    after the training block.
    """
    s = _as_series(series)
    horizon = HorizonSpec(spec.n, spec.m, s.shape[1])
    length = horizon.length
    starts = segment_starts(s.shape[0], length, spec.stride)
    k_train, first_test = split_counts(starts, length, spec.split_fraction)

    windows = np.lib.stride_tricks.sliding_window_view(s, length, axis=0)
    # windows[t] has shape (p, length); episodes are snapshot-major.
    def build(sel):
        data = np.ascontiguousarray(
            windows[starts[sel]].transpose(0, 2, 1)).reshape(len(starts[sel]), -1)
        return Ensemble(data, horizon, kind=STATIONARY, centered=centered)

    train = build(slice(0, k_train))
    test = build(slice(first_test, None)) if first_test < starts.size else None
    return train, test
