"""Space-time projection: fit an extended space-time POD basis and forecast.

Fitting works on the small ``k x k`` ensemble correlation matrix of the
hindcast data.  Its eigenvectors give the hindcast modes and, applied to the
full episodes, the STP modes whose forecast block carries the part of the
forecast data that is correlated with the hindcast.  A new trajectory is
forecast by projecting its hindcast onto the hindcast modes and expanding
the STP modes with those coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import EigResult, eig_symmetric
from .types import (DimensionError, Ensemble, HorizonSpec, MeanField, STPError,
                    WeightVector, validate_ensemble)

EIG_RTOL = 1e-12
ORTHONORMALITY_TOL = 1e-10


class NotCenteredError(STPError):
    pass


class RankError(STPError):
    pass


class ModelInvariantError(STPError):
    pass


class MissingMeanError(STPError):
    pass


def _weights(w: Optional[WeightVector], p: int) -> WeightVector:
    if w is None:
        return WeightVector.uniform(p)
    if w.p != p:
        raise DimensionError(f"weight vector has length {w.p}, state has p = {p}")
    return w


def _apply_weights(x: np.ndarray, w: WeightVector, axis0_snapshots: int) -> np.ndarray:
    """Multiply the rows of a stacked (snapshots*p, ...) array by W."""
    if w.is_uniform:
        return x
    wr = w.replicated(axis0_snapshots)
    return x * (wr[:, None] if x.ndim == 2 else wr)


def build_hindcast_matrix(ensemble: Ensemble) -> np.ndarray:
    """``Q-``: one column per episode, holding its first ``n*p`` values."""
    if not ensemble.centered:
        raise NotCenteredError("the hindcast matrix needs a centered ensemble")
    validate_ensemble(ensemble)
    return ensemble.data[:, : ensemble.horizon.hindcast_size].T


def build_prediction_matrix(ensemble: Ensemble) -> np.ndarray:
    """``Q+-``: one column per full episode."""
    if not ensemble.centered:
        raise NotCenteredError("the prediction matrix needs a centered ensemble")
    validate_ensemble(ensemble)
    return ensemble.data.T


def hindcast_correlation(q_minus, w: Optional[WeightVector] = None) -> np.ndarray:
    """``C- = Q-^T W Q- / k`` with ``W`` repeated over the hindcast snapshots."""
    q = np.asarray(q_minus, dtype=np.float64)
    if q.ndim != 2:
        raise DimensionError("Q- must be a matrix")
    rows, k = q.shape
    if w is None:
        w = WeightVector(np.ones(1))
    if rows % w.p:
        raise DimensionError(
            f"Q- has {rows} rows, not a multiple of the weight length {w.p}")
    # Always a separate operand: keeps one BLAS kernel for every weighting.
    wq = q * w.replicated(rows // w.p)[:, None]
    c = (q.T @ wq) / k
    # Symmetrize away round-off from the BLAS kernel.
    return 0.5 * (c + c.T)


def solve_pod(c_minus) -> EigResult:
    """Eigenpairs of ``C-``; negative round-off eigenvalues are clamped to 0."""
    eig = eig_symmetric(c_minus)
    lam = np.clip(eig.eigenvalues, 0.0, None)
    return EigResult(lam, eig.eigenvectors)


def truncate(eig: EigResult, r: int, rtol: float = EIG_RTOL) -> EigResult:
    """Keep the leading ``r`` eigenpairs, dropping any with ``lam <= rtol*lam_1``.

    The size of the result is the effective rank.
    """
    k = eig.eigenvalues.size
    if int(r) != r or not 1 <= r <= k:
        raise RankError(f"rank r = {r} outside 1..{k}")
    lam = eig.eigenvalues[:r]
    keep = lam > rtol * lam[0] if lam[0] > 0 else np.zeros(r, dtype=bool)
    r_eff = int(np.count_nonzero(keep))
    # Eigenvalues are sorted, so the kept modes form a prefix.
    return EigResult(lam[:r_eff].copy(), eig.eigenvectors[:, :r_eff].copy())


def _expansion_matrix(eig: EigResult, k: int) -> np.ndarray:
    lam = eig.eigenvalues
    if lam.size == 0 or np.any(lam <= 0):
        raise RankError("retained modes must have strictly positive eigenvalues")
    return eig.eigenvectors * (1.0 / np.sqrt(lam)) / math.sqrt(k)


def hindcast_modes(q_minus, eig: EigResult, k: int) -> np.ndarray:
    """``Phi- = Q- Psi Lambda^{-1/2} / sqrt(k)``."""
    return np.asarray(q_minus, dtype=np.float64) @ _expansion_matrix(eig, k)


def stp_modes(q_pm, eig: EigResult, k: int) -> np.ndarray:
    """``Phi+-* = Q+- Psi Lambda^{-1/2} / sqrt(k)`` (hindcast modes extended)."""
    return np.asarray(q_pm, dtype=np.float64) @ _expansion_matrix(eig, k)


def expansion_coefficients(phi_minus, w: Optional[WeightVector], q_minus) -> np.ndarray:
    """``A- = Phi-^T W Q-``."""
    phi = np.asarray(phi_minus, dtype=np.float64)
    q = np.asarray(q_minus, dtype=np.float64)
    if phi.shape[0] != q.shape[0]:
        raise DimensionError(f"modes have {phi.shape[0]} rows, data has {q.shape[0]}")
    if w is None:
        return phi.T @ q
    return phi.T @ _apply_weights(q, w, q.shape[0] // w.p)


@dataclass(frozen=True, eq=False)
class STPModel:
    """A fitted space-time projection basis.

    ``stp_modes`` holds the ``((n+m)*p, r)`` extended modes; the hindcast
    modes are its first ``n*p`` rows and are never stored separately.
    """

    horizon: HorizonSpec
    eigenvalues: np.ndarray
    stp_modes: np.ndarray
    weights: WeightVector
    k_train: int
    mean: Optional[MeanField] = None
    requested_rank: Optional[int] = None
    all_eigenvalues: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("eigenvalues", "stp_modes", "all_eigenvalues"):
            a = getattr(self, name)
            if a is not None:
                # One memory layout, so BLAS results do not depend on provenance.
                a = np.ascontiguousarray(a, dtype=np.float64)
                a.setflags(write=False)
                object.__setattr__(self, name, a)

    @property
    def rank(self) -> int:
        return self.eigenvalues.size

    @property
    def hindcast_modes(self) -> np.ndarray:
        return self.stp_modes[: self.horizon.hindcast_size]

    @property
    def forecast_modes(self) -> np.ndarray:
        return self.stp_modes[self.horizon.hindcast_size:]

    def check(self, tol: float = ORTHONORMALITY_TOL) -> "STPModel":
        """Raise :class:`ModelInvariantError` unless the model is consistent."""
        h, lam, modes = self.horizon, self.eigenvalues, self.stp_modes
        if modes.shape != (h.size, lam.size):
            raise ModelInvariantError(
                f"STP modes have shape {modes.shape}, expected ({h.size}, {lam.size})")
        if not 1 <= lam.size <= self.k_train:
            raise ModelInvariantError(f"rank {lam.size} outside 1..{self.k_train}")
        if np.any(lam < 0) or np.any(np.diff(lam) > 0) or not np.all(np.isfinite(lam)):
            raise ModelInvariantError("eigenvalues must be nonnegative and descending")
        if self.weights.p != h.p:
            raise ModelInvariantError("weight length does not match p")
        phi = self.hindcast_modes
        gram = phi.T @ _apply_weights(phi, self.weights, h.n)
        err = float(np.max(np.abs(gram - np.eye(lam.size))))
        if err > tol:
            raise ModelInvariantError(
                f"hindcast modes are not W-orthonormal (max error {err:.3e})")
        if self.mean is not None and self.mean.kind == "ensemble_mean" \
                and self.mean.horizon != h:
            raise ModelInvariantError("stored ensemble mean has a different horizon")
        return self

    def truncated(self, r: int) -> "STPModel":
        """The same model restricted to its leading ``r`` modes."""
        if not 1 <= r <= self.rank:
            raise RankError(f"rank r = {r} outside 1..{self.rank}")
        return STPModel(self.horizon, self.eigenvalues[:r], self.stp_modes[:, :r],
                        self.weights, self.k_train, self.mean, r, self.all_eigenvalues)


@dataclass(frozen=True, eq=False)
class Prediction:
    coefficients: np.ndarray
    hindcast: np.ndarray
    forecast: np.ndarray
    mean_added: bool = False

    @property
    def trajectory(self) -> np.ndarray:
        return np.concatenate([self.hindcast, self.forecast])


def fit(train: Ensemble, r: Optional[int] = None, w: Optional[WeightVector] = None,
        mean: Optional[MeanField] = None) -> STPModel:
    """Fit an STP basis of rank ``r`` (default: full rank ``k``) to a centered ensemble.

    ``mean`` is the field that was removed from the data; it is stored so
    that predictions can work on raw inputs.
    """
    validate_ensemble(train)
    h, k = train.horizon, train.k
    w = _weights(w, h.p)
    r = k if r is None else r
    if int(r) != r or not 1 <= r <= k:
        raise RankError(f"rank r = {r} must satisfy 1 <= r <= k = {k}")
    q_minus = build_hindcast_matrix(train)
    eig = solve_pod(hindcast_correlation(q_minus, w))
    kept = truncate(eig, r)
    if kept.rank == 0:
        raise RankError("training ensemble has no variance; nothing to fit")
    # Hindcast modes are the top block of the STP modes by construction.
    modes = stp_modes(build_prediction_matrix(train), kept, k)
    return STPModel(h, kept.eigenvalues, modes, w, k, mean, int(r), eig.eigenvalues)


def _centered_hindcast(model: STPModel, q_new, raw: bool) -> np.ndarray:
    q = np.asarray(q_new, dtype=np.float64)
    if q.ndim != 1 or q.size != model.horizon.hindcast_size:
        raise DimensionError(
            f"hindcast vector has {q.size} values, model expects "
            f"n*p = {model.horizon.hindcast_size}")
    if raw:
        if model.mean is None:
            raise MissingMeanError("model has no stored mean to center raw data")
        q = q - model.mean.hindcast(model.horizon)
    return q


def project(model: STPModel, q_new, raw: bool = False) -> np.ndarray:
    """Hindcast coefficients ``a-* = Phi-^T W q_new``.

    With ``raw=True`` the model's stored mean is subtracted first.
    """
    q = _centered_hindcast(model, q_new, raw)
    return model.hindcast_modes.T @ _apply_weights(q, model.weights, model.horizon.n)


def predict(model: STPModel, q_new, raw: bool = False, add_mean: bool = False) -> Prediction:
    """Forecast the ``m`` snapshots following the hindcast ``q_new``."""
    a = project(model, q_new, raw=raw)
    traj = model.stp_modes @ a
    if add_mean:
        if model.mean is None:
            raise MissingMeanError("model has no stored mean to add back")
        traj = traj + model.mean.stacked(model.horizon)
    npn = model.horizon.hindcast_size
    return Prediction(a, traj[:npn], traj[npn:], mean_added=add_mean)


def predict_ensemble(model: STPModel, ensemble: Ensemble) -> np.ndarray:
    """Predicted trajectories (one row per episode) for a centered ensemble."""
    if ensemble.horizon != model.horizon:
        raise DimensionError(
            f"ensemble horizon {ensemble.horizon} does not match model {model.horizon}")
    q = build_hindcast_matrix(ensemble)
    a = model.hindcast_modes.T @ _apply_weights(q, model.weights, model.horizon.n)
    return (model.stp_modes @ a).T
