"""Shared data model: horizons, episodes, ensembles, weights and mean fields.

Episodes are flattened snapshot-major: snapshot ``i`` of an episode occupies
elements ``[i*p, (i+1)*p)``.  An :class:`Ensemble` keeps all of its episodes
in one read-only ``(k, (n+m)*p)`` array so that the data matrices used by the
method are views rather than copies.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

TRANSIENT = "transient"
STATIONARY = "stationary"
ENSEMBLE_MEAN = "ensemble_mean"
TEMPORAL_MEAN = "temporal_mean"


class STPError(ValueError):
    """Base class for all errors raised by this package."""


class DimensionError(STPError):
    pass


class TimeIndexError(STPError):
    pass


class EmptyEnsembleError(STPError):
    pass


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HorizonSpec:
    """Hindcast length ``n``, forecast length ``m`` and state size ``p``."""

    n: int
    m: int
    p: int

    def __post_init__(self):
        for name in ("n", "m", "p"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DimensionError(f"{name} must be a positive integer, got {v!r}")

    @property
    def length(self) -> int:
        """Snapshots per episode (the prediction horizon)."""
        return self.n + self.m

    @property
    def hindcast_size(self) -> int:
        return self.n * self.p

    @property
    def forecast_size(self) -> int:
        return self.m * self.p

    @property
    def size(self) -> int:
        return (self.n + self.m) * self.p


@dataclass(frozen=True, eq=False)
class Episode:
    values: np.ndarray
    horizon: HorizonSpec
    time_indices: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size != self.horizon.size:
            raise DimensionError(
                f"episode has {values.size} values, expected "
                f"(n+m)*p = {self.horizon.size}")
        if not values.flags.writeable:
            object.__setattr__(self, "values", values)
        else:
            object.__setattr__(self, "values", _frozen(values))
        if self.time_indices is not None:
            t = _frozen(self.time_indices)
            _check_times(t, self.horizon)
            object.__setattr__(self, "time_indices", t)

    @property
    def hindcast(self) -> np.ndarray:
        return self.values[: self.horizon.hindcast_size]

    @property
    def forecast(self) -> np.ndarray:
        return self.values[self.horizon.hindcast_size:]

    def snapshots(self) -> np.ndarray:
        """``(n+m, p)`` view of the episode."""
        return self.values.reshape(self.horizon.length, self.horizon.p)


def _check_times(t: np.ndarray, horizon: HorizonSpec) -> None:
    if t.ndim != 1 or t.size != horizon.length:
        raise TimeIndexError(
            f"expected {horizon.length} time stamps, got {t.size}")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise TimeIndexError("time stamps must be strictly increasing")


@dataclass(frozen=True, eq=False)
class Ensemble:
    """``k`` episodes sharing one horizon.

    ``data`` is the ``(k, (n+m)*p)`` array of stacked episodes (one episode
    per row).  Use :meth:`from_episodes` to build one from :class:`Episode`
    objects.
    """

    data: np.ndarray
    horizon: HorizonSpec
    kind: str = TRANSIENT
    centered: bool = False
    time_indices: Optional[np.ndarray] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data.reshape(1, -1) if data.size else data.reshape(0, 0)
        if data.ndim != 2:
            raise DimensionError("ensemble data must be two-dimensional")
        if data.flags.writeable:
            data = _frozen(data)
        object.__setattr__(self, "data", data)
        if self.time_indices is not None:
            object.__setattr__(self, "time_indices", _frozen(self.time_indices))
        if self.kind not in (TRANSIENT, STATIONARY):
            raise STPError(f"unknown ensemble kind {self.kind!r}")

    @classmethod
    def from_episodes(cls, episodes: Sequence[Episode], horizon: Optional[HorizonSpec] = None,
                      kind: str = TRANSIENT, centered: bool = False) -> "Ensemble":
        episodes = list(episodes)
        if not episodes:
            raise EmptyEnsembleError("an ensemble needs at least one episode")
        horizon = horizon or episodes[0].horizon
        times = None
        for j, ep in enumerate(episodes):
            if ep.horizon != horizon:
                raise DimensionError(
                    f"episode {j} has horizon {ep.horizon}, expected {horizon}")
            if ep.values.size != horizon.size:
                raise DimensionError(
                    f"episode {j} has {ep.values.size} values, expected {horizon.size}")
            if ep.time_indices is not None:
                if times is None and j == 0:
                    times = ep.time_indices
                elif times is None or not np.array_equal(times, ep.time_indices):
                    raise TimeIndexError(
                        f"episode {j} time stamps differ from episode 0")
            elif times is not None:
                raise TimeIndexError(f"episode {j} has no time stamps")
        data = np.stack([ep.values for ep in episodes])
        return cls(data, horizon, kind=kind, centered=centered, time_indices=times)

    @property
    def k(self) -> int:
        return self.data.shape[0]

    @property
    def episodes(self) -> list[Episode]:
        return [Episode(row, self.horizon, self.time_indices) for row in self.data]

    def __len__(self) -> int:
        return self.k

    def subset(self, indices: Iterable[int]) -> "Ensemble":
        idx = np.asarray(list(indices), dtype=np.int64)
        return Ensemble(self.data[idx], self.horizon, self.kind, self.centered,
                        self.time_indices)

    def with_data(self, data: np.ndarray, centered: bool) -> "Ensemble":
        return Ensemble(data, self.horizon, self.kind, centered, self.time_indices)


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Per degree-of-freedom weights (the diagonal of ``W`` for one snapshot)."""

    w: np.ndarray

    def __post_init__(self):
        w = _frozen(self.w)
        if w.ndim != 1 or w.size < 1:
            raise DimensionError("weights must be a non-empty vector")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise STPError("weights must be finite and strictly positive")
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, p: int) -> "WeightVector":
        return cls(np.ones(p))

    @property
    def p(self) -> int:
        return self.w.size

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.w == 1.0))

    def replicated(self, snapshots: int) -> np.ndarray:
        """Weights for a stacked vector spanning ``snapshots`` snapshots."""
        return np.tile(self.w, snapshots)


@dataclass(frozen=True, eq=False)
class MeanField:
    kind: str
    values: np.ndarray
    horizon: HorizonSpec

    def __post_init__(self):
        values = _frozen(self.values)
        if self.kind == ENSEMBLE_MEAN:
            expected = self.horizon.size
        elif self.kind == TEMPORAL_MEAN:
            expected = self.horizon.p
        else:
            raise STPError(f"unknown mean kind {self.kind!r}")
        if values.ndim != 1 or values.size != expected:
            raise DimensionError(
                f"{self.kind} needs {expected} values, got {values.size}")
        object.__setattr__(self, "values", values)

    def stacked(self, horizon: Optional[HorizonSpec] = None) -> np.ndarray:
        """The mean laid out over a full ``(n+m)*p`` episode."""
        horizon = horizon or self.horizon
        if self.kind == TEMPORAL_MEAN:
            return np.tile(self.values, horizon.length)
        if horizon != self.horizon:
            raise DimensionError("ensemble mean is tied to its original horizon")
        return self.values

    def hindcast(self, horizon: Optional[HorizonSpec] = None) -> np.ndarray:
        horizon = horizon or self.horizon
        if self.kind == TEMPORAL_MEAN:
            return np.tile(self.values, horizon.n)
        return self.stacked(horizon)[: horizon.hindcast_size]


def validate_ensemble(ensemble: Ensemble) -> Ensemble:
    """Check the ensemble invariants and return it unchanged."""
    h = ensemble.horizon
    if ensemble.data.size == 0 or ensemble.k == 0:
        raise EmptyEnsembleError("ensemble has no episodes (k = 0)")
    if ensemble.data.shape[1] != h.size:
        raise DimensionError(
            f"episode length {ensemble.data.shape[1]} != (n+m)*p = {h.size}")
    if ensemble.time_indices is not None:
        _check_times(ensemble.time_indices, h)
    if not np.all(np.isfinite(ensemble.data)):
        raise STPError("ensemble contains non-finite values")
    return ensemble
