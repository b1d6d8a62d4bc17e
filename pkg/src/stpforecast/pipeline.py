"""End-to-end helpers: data preparation, evaluation and parameter sweeps."""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .metrics import ErrorReport, error_report
from .preprocess import (SegmentationSpec, center_stationary, center_transient,
                         segment_stationary)
from .stp import STPModel, fit, predict_ensemble
from .types import (STATIONARY, DimensionError, Ensemble, HorizonSpec, MeanField,
                    STPError, WeightVector)

FIXED_TOTAL = "fixed_total"
FIXED_M = "fixed_m"


@dataclass(frozen=True, eq=False)
class Prepared:
    """Centered train/test ensembles and the mean that was removed."""

    train: Ensemble
    test: Optional[Ensemble]
    mean: MeanField


def center_with(ensemble: Ensemble, mean: MeanField) -> Ensemble:
    """Subtract an existing mean (e.g. a training mean) from raw episodes."""
    if ensemble.centered:
        return ensemble
    return ensemble.with_data(ensemble.data - mean.stacked(ensemble.horizon), centered=True)


def split_ensemble(ensemble: Ensemble, split_fraction: float):
    """Contiguous split: the first ``round(f*k)`` episodes train, the rest test."""
    k = ensemble.k
    k_train = min(max(int(np.floor(split_fraction * k + 0.5)), 1), k)
    test = ensemble.subset(range(k_train, k)) if k_train < k else None
    return ensemble.subset(range(k_train)), test


def prepare_transient(ensemble: Ensemble, split_fraction: Optional[float] = None,
                      test: Optional[Ensemble] = None) -> Prepared:
    """Center with the training ensemble mean; the test set reuses that mean."""
    train = ensemble
    if split_fraction is not None:
        train, test = split_ensemble(ensemble, split_fraction)
    centered, mean = center_transient(train)
    if test is not None:
        test = center_with(test, mean)
    return Prepared(centered, test, mean)


def prepare_stationary(series, seg: SegmentationSpec) -> Prepared:
    """Remove the temporal mean, then cut overlapping train/test episodes."""
    centered, mean = center_stationary(series)
    train, test = segment_stationary(centered, seg, centered=True)
    return Prepared(train, test, mean)


def evaluate(model: STPModel, test: Ensemble) -> ErrorReport:
    """Per-step RMSE of the model's predictions on a test ensemble.

    Raw test data is centered with the model's stored mean; errors are on
    the centered fields, where an added-back mean would cancel anyway.
    """
    if test.horizon != model.horizon:
        raise DimensionError(
            f"test horizon {test.horizon} does not match model horizon {model.horizon}")
    if not test.centered:
        if model.mean is None:
            raise STPError("raw test data needs a model with a stored mean")
        test = center_with(test, model.mean)
    return error_report(test, predict_ensemble(model, test))


@dataclass(eq=False)
class SweepResult:
    axis: str
    values: list
    reports: list
    horizons: list
    optimal: Optional[dict] = None


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def rank_sweep(train: Ensemble, test: Ensemble, ranks: Sequence[int],
               w: Optional[WeightVector] = None, mean: Optional[MeanField] = None,
               workers: int = 1) -> SweepResult:
    """Errors for each rank, from a single fit truncated per grid point."""
    ranks = list(ranks)
    if not ranks:
        raise STPError("rank grid is empty")
    full = fit(train, max(ranks), w, mean)

    def one(r):
        return evaluate(full.truncated(min(r, full.rank)), test)

    reports = _map(one, ranks, workers)
    return SweepResult("r", ranks, reports, [train.horizon] * len(ranks))


def k_sweep(train: Ensemble, test: Ensemble, ks: Sequence[int], r: int,
            w: Optional[WeightVector] = None, workers: int = 1) -> SweepResult:
    """Refit on the first ``k`` training episodes for each ``k``; rank is ``min(r, k)``."""
    ks = list(ks)
    if not ks:
        raise STPError("ensemble-size grid is empty")
    for k in ks:
        if not 1 <= k <= train.k:
            raise STPError(f"ensemble size {k} outside 1..{train.k}")

    def one(k):
        return evaluate(fit(train.subset(range(k)), min(r, k), w), test)

    return SweepResult("k", ks, _map(one, ks, workers), [train.horizon] * len(ks))


def halvings(k: int, levels: int) -> list[int]:
    """``[k, k//2, k//4, ...]`` with ``levels`` entries."""
    out = [k]
    for _ in range(levels - 1):
        out.append(max(out[-1] // 2, 1))
    return out


def reslice(ensemble: Ensemble, n: int, mode: str, n0: int) -> Ensemble:
    """Re-interpret raw episodes for a new hindcast length ``n``.

    ``fixed_total`` keeps every snapshot and moves the hindcast/forecast
    boundary.  ``fixed_m`` keeps the forecast block and drops the earliest
    ``n0 - n`` hindcast snapshots.
    """
    h = ensemble.horizon
    if mode == FIXED_TOTAL:
        if not 1 <= n < h.length:
            raise STPError(f"hindcast length {n} outside 1..{h.length - 1}")
        return Ensemble(ensemble.data, HorizonSpec(n, h.length - n, h.p), ensemble.kind,
                        ensemble.centered)
    if mode == FIXED_M:
        if not 1 <= n <= n0:
            raise STPError(f"hindcast length {n} outside 1..{n0} for a fixed forecast horizon")
        start = (n0 - n) * h.p
        return Ensemble(ensemble.data[:, start:], HorizonSpec(n, h.m, h.p), ensemble.kind,
                        ensemble.centered)
    raise STPError(f"unknown horizon mode {mode!r}")


def optimal_hindcast(values: Sequence[int], reports: Sequence[ErrorReport]) -> dict:
    """Minimum mean forecast error per lead time and the hindcast length attaining it."""
    max_lead = max(rep.forecast_mean.size for rep in reports)
    leads, best, arg = [], [], []
    for lead in range(1, max_lead + 1):
        cand = [(rep.forecast_mean[lead - 1], n) for n, rep in zip(values, reports)
                if rep.forecast_mean.size >= lead]
        err, n = min(cand, key=lambda c: (c[0], c[1]))
        leads.append(lead)
        best.append(err)
        arg.append(n)
    return {"lead": np.array(leads), "min_mean_error": np.array(best), "argmin_n": np.array(arg)}


def hindcast_sweep_series(series, ns: Sequence[int], m: int, r: int, stride: int,
                          split_fraction: float, w: Optional[WeightVector] = None,
                          workers: int = 1, mode: str = FIXED_M,
                          total: Optional[int] = None) -> SweepResult:
    """Stationary data: re-segment and refit for each hindcast length.

    With ``mode="fixed_total"`` the forecast length is ``total - n``
    (``total`` defaults to ``max(ns) + m``); otherwise ``m`` is fixed.
    """
    ns = list(ns)
    if not ns:
        raise STPError("hindcast grid is empty")
    if mode not in (FIXED_M, FIXED_TOTAL):
        raise STPError(f"unknown horizon mode {mode!r}")
    total = total or max(ns) + m
    centered, mean = center_stationary(series)

    def one(n):
        m_n = m if mode == FIXED_M else total - n
        train, test = segment_stationary(centered, SegmentationSpec(n, m_n, stride, split_fraction),
                                         centered=True)
        if test is None:
            raise STPError(f"no test episodes for n = {n}")
        return evaluate(fit(train, min(r, train.k), w, mean), test), train.horizon

    out = _map(one, ns, workers)
    reports = [o[0] for o in out]
    return SweepResult("n", ns, reports, [o[1] for o in out], optimal_hindcast(ns, reports))


def hindcast_sweep_ensemble(train_raw: Ensemble, test_raw: Ensemble, ns: Sequence[int], r: int,
                            mode: str = FIXED_TOTAL, w: Optional[WeightVector] = None,
                            workers: int = 1) -> SweepResult:
    """Transient data: refit for each hindcast length on re-sliced raw episodes."""
    ns = list(ns)
    if not ns:
        raise STPError("hindcast grid is empty")
    n0 = train_raw.horizon.n

    def one(n):
        tr = reslice(train_raw, n, mode, n0)
        prep = prepare_transient(tr, test=reslice(test_raw, n, mode, n0))
        return evaluate(fit(prep.train, min(r, tr.k), w, prep.mean), prep.test), tr.horizon

    out = _map(one, ns, workers)
    reports = [o[0] for o in out]
    return SweepResult("n", ns, reports, [o[1] for o in out], optimal_hindcast(ns, reports))


def write_sweep_csv(result: SweepResult, path) -> None:
    """One row per grid point per time step.

    ``lead`` counts forecast steps (1 = first forecast snapshot); hindcast
    steps have ``lead <= 0``.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([result.axis, "step_index", "lead", "phase", "mean_error", "std_error"])
        for value, rep, h in zip(result.values, result.reports, result.horizons):
            for i, e in enumerate(rep.mean):
                lead = i - h.n + 1
                std = "" if rep.std is None else repr(float(rep.std[i]))
                w.writerow([value, i, lead, "forecast" if lead > 0 else "hindcast",
                            repr(float(e)), std])


def write_optimal_csv(result: SweepResult, path) -> None:
    opt = result.optimal
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lead", "min_mean_error", "argmin_n"])
        for lead, err, n in zip(opt["lead"], opt["min_mean_error"], opt["argmin_n"]):
            w.writerow([int(lead), repr(float(err)), int(n)])
