"""On-disk formats.

Every binary file is a small container::

    b"STP1 <H>\\n"      magic, format version and header size in bytes
    <H bytes>          one line of JSON (sorted keys, UTF-8, ends in "\\n")
    <payload>          little-endian float64 blocks, in the order listed
                       under "blocks" in the header

The header records the payload size and its SHA-256 digest.  The "type"
field selects the layout: ``ensemble`` (episodes concatenated, each
snapshot-major), ``series`` (snapshots in time order), ``model`` (eigenvalues,
STP modes column by column, mean, weights, full eigenvalue spectrum) and
``predictions``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path
from typing import Optional

import numpy as np

from .metrics import ErrorReport, SpectrumReport
from .stp import STPModel
from .types import (ENSEMBLE_MEAN, TEMPORAL_MEAN, DimensionError, Ensemble,
                    HorizonSpec, MeanField, STPError, WeightVector)

MAGIC = b"STP"
VERSION = b"1"
FORMAT = "STP1"
LE_F64 = np.dtype("<f8")


class FormatError(STPError):
    pass


class VersionError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class ChecksumError(FormatError):
    pass


def write_container(path, header: dict, blocks: list[tuple[str, np.ndarray]]) -> None:
    """Write ``blocks`` (name, array) after a JSON header.

    Arrays are written in C order; callers choose the layout.
    """
    payload = b"".join(np.ascontiguousarray(a, dtype=LE_F64).tobytes() for _, a in blocks)
    header = dict(header)
    header["format"] = FORMAT
    header["blocks"] = [[name, int(np.size(a))] for name, a in blocks]
    header["payload_bytes"] = len(payload)
    header["sha256"] = hashlib.sha256(payload).hexdigest()
    text = (json.dumps(header, sort_keys=True) + "\n").encode("utf-8")
    tmp = Path(f"{path}.tmp")
    with open(tmp, "wb") as fh:
        fh.write(FORMAT.encode() + b" " + str(len(text)).encode() + b"\n")
        fh.write(text)
        fh.write(payload)
    os.replace(tmp, path)


def read_container(path, expected_type: Optional[str] = None):
    """Return ``(header, {name: 1-D array})`` after integrity checks."""
    with open(path, "rb") as fh:
        raw = fh.read()
    first, sep, rest = raw.partition(b"\n")
    parts = first.split(b" ")
    if not sep or len(parts) != 2 or not parts[0].startswith(MAGIC):
        raise FormatError(f"{path}: not an STP container")
    if parts[0] != FORMAT.encode():
        raise VersionError(
            f"{path}: unsupported format version {parts[0].decode(errors='replace')!r}, "
            f"expected {FORMAT}")
    try:
        hlen = int(parts[1])
        header = json.loads(rest[:hlen].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header ({exc})") from exc
    if header.get("format") != FORMAT:
        raise VersionError(f"{path}: header declares format {header.get('format')!r}")
    if expected_type and header.get("type") != expected_type:
        raise FormatError(f"{path}: expected a {expected_type} file, got {header.get('type')!r}")
    payload = rest[hlen:]
    counts = [int(c) for _, c in header["blocks"]]
    expected = 8 * sum(counts)
    if header["payload_bytes"] != expected:
        raise DimensionError(
            f"{path}: header payload size {header['payload_bytes']} bytes does not match "
            f"block sizes ({expected} bytes)")
    if len(payload) < expected:
        raise TruncatedError(
            f"{path}: payload truncated, expected {expected} bytes, found {len(payload)}")
    if len(payload) > expected:
        raise DimensionError(
            f"{path}: payload has {len(payload)} bytes, header describes {expected}")
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise ChecksumError(f"{path}: payload checksum mismatch")
    flat = np.frombuffer(payload, dtype=LE_F64).astype(np.float64)
    blocks, offset = {}, 0
    for (name, _), count in zip(header["blocks"], counts):
        blocks[name] = flat[offset:offset + count]
        offset += count
    return header, blocks


def _horizon(header) -> HorizonSpec:
    return HorizonSpec(header["n"], header["m"], header["p"])


def save_ensemble(ensemble: Ensemble, path, provenance: Optional[dict] = None) -> None:
    h = ensemble.horizon
    times = None if ensemble.time_indices is None else [float(t) for t in ensemble.time_indices]
    header = {"type": "ensemble", "k": ensemble.k, "n": h.n, "m": h.m, "p": h.p,
              "kind": ensemble.kind, "centered": bool(ensemble.centered),
              "time_indices": times, "provenance": provenance}
    write_container(path, header, [("episodes", ensemble.data)])


def load_ensemble(path) -> Ensemble:
    header, blocks = read_container(path, "ensemble")
    h = _horizon(header)
    data = blocks["episodes"]
    if data.size != header["k"] * h.size:
        raise DimensionError(
            f"{path}: header says k = {header['k']} episodes of {h.size} values "
            f"({header['k'] * h.size} values), payload holds {data.size}")
    return Ensemble(data.reshape(header["k"], h.size), h, kind=header["kind"],
                    centered=header["centered"], time_indices=header.get("time_indices"))


def load_provenance(path) -> Optional[dict]:
    return read_container(path)[0].get("provenance")


def save_series(series: np.ndarray, path, provenance: Optional[dict] = None) -> None:
    s = np.asarray(series, dtype=np.float64)
    header = {"type": "series", "length": s.shape[0], "p": s.shape[1],
              "provenance": provenance}
    write_container(path, header, [("snapshots", s)])


def load_series(path) -> np.ndarray:
    header, blocks = read_container(path, "series")
    s = blocks["snapshots"]
    if s.size != header["length"] * header["p"]:
        raise DimensionError(f"{path}: series payload does not match its header")
    return s.reshape(header["length"], header["p"])


def save_model(model: STPModel, path) -> None:
    h = model.horizon
    mean_kind = "none" if model.mean is None else model.mean.kind
    mean_vals = np.empty(0) if model.mean is None else model.mean.values
    all_eig = np.empty(0) if model.all_eigenvalues is None else model.all_eigenvalues
    w = model.weights.w
    header = {"type": "model", "n": h.n, "m": h.m, "p": h.p, "rank": model.rank,
              "requested_rank": model.requested_rank, "k_train": model.k_train,
              "weights": {"uniform": model.weights.is_uniform,
                          "min": float(w.min()), "max": float(w.max())},
              "mean_kind": mean_kind}
    # Modes are stored column-major: all rows of mode 1, then mode 2, ...
    write_container(path, header, [
        ("eigenvalues", model.eigenvalues),
        ("stp_modes", model.stp_modes.T),
        ("mean", mean_vals),
        ("weights", w),
        ("all_eigenvalues", all_eig),
    ])


def load_model(path) -> STPModel:
    """Read a model file and verify the model invariants before returning it."""
    header, b = read_container(path, "model")
    h = _horizon(header)
    r = header["rank"]
    if b["eigenvalues"].size != r or b["stp_modes"].size != r * h.size \
            or b["weights"].size != h.p:
        raise DimensionError(f"{path}: model blocks do not match rank {r} and horizon {h}")
    mean = None
    if header["mean_kind"] != "none":
        mh = h if header["mean_kind"] == ENSEMBLE_MEAN else HorizonSpec(1, 1, h.p)
        mean = MeanField(header["mean_kind"], b["mean"], mh)
    all_eig = b["all_eigenvalues"] if b["all_eigenvalues"].size else None
    model = STPModel(h, b["eigenvalues"], b["stp_modes"].reshape(r, h.size).T,
                     WeightVector(b["weights"]), header["k_train"], mean,
                     header.get("requested_rank"), all_eig)
    return model.check()


def save_predictions(path, coefficients, hindcasts, forecasts, horizon: HorizonSpec,
                     mean_added: bool) -> None:
    a = np.atleast_2d(coefficients)
    header = {"type": "predictions", "count": a.shape[0], "rank": a.shape[1],
              "n": horizon.n, "m": horizon.m, "p": horizon.p, "mean_added": mean_added}
    write_container(path, header, [("coefficients", a), ("hindcast", np.atleast_2d(hindcasts)),
                                   ("forecast", np.atleast_2d(forecasts))])


def load_predictions(path) -> dict:
    header, b = read_container(path, "predictions")
    c, h = header["count"], _horizon(header)
    return {"coefficients": b["coefficients"].reshape(c, header["rank"]),
            "hindcast": b["hindcast"].reshape(c, h.hindcast_size),
            "forecast": b["forecast"].reshape(c, h.forecast_size),
            "mean_added": header["mean_added"], "horizon": h}


def _fmt(x: float) -> str:
    return repr(float(x))


def export_csv(report, path) -> None:
    """Write an :class:`ErrorReport` or :class:`SpectrumReport` as CSV.

    Error tables have one row per time step (``index, mean, std,
    episode_0, ...``) preceded by a ``# forecast_start_index`` comment line;
    the ``std`` column is replaced by a warning comment when only one
    episode was evaluated.  Spectrum tables have one row per mode.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(report, SpectrumReport):
            w.writerow(["index", "eigenvalue", "cumulative_fraction"])
            for i, (lam, c) in enumerate(zip(report.eigenvalues, report.cumulative_fraction), 1):
                w.writerow([i, _fmt(lam), _fmt(c)])
            return
        if not isinstance(report, ErrorReport):
            raise TypeError(f"cannot export {type(report).__name__}")
        fh.write(f"# forecast_start_index,{report.forecast_start_index}\n")
        k = report.per_episode.shape[0]
        cols = ["index", "mean"]
        if report.std is None:
            fh.write("# warning,std omitted: undefined for a single episode\n")
        else:
            cols.append("std")
        w.writerow(cols + [f"episode_{j}" for j in range(k)])
        for i in range(report.mean.size):
            row = [i, _fmt(report.mean[i])]
            if report.std is not None:
                row.append(_fmt(report.std[i]))
            w.writerow(row + [_fmt(v) for v in report.per_episode[:, i]])


def read_csv_table(path) -> tuple[dict, dict]:
    """Parse a CSV written by this module into ``(columns, comments)``."""
    comments, rows = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(",")
                comments[key.strip()] = val.strip()
            else:
                rows.append(line)
    reader = list(csv.reader(rows))
    names = reader[0]
    cols = {name: np.array([float(r[i]) for r in reader[1:]]) for i, name in enumerate(names)}
    return cols, comments


def load_series_csv(path) -> np.ndarray:
    """A ``(T, p)`` snapshot series from CSV, one snapshot per row."""
    s = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, dtype=np.float64)
    if s.size == 0:
        raise DimensionError(f"{path}: no snapshots")
    return s


def load_ensemble_csv(path, n: int, m: int, kind: str = "transient") -> Ensemble:
    """Ensemble from CSV rows: episode 1's ``n+m`` snapshots, then episode 2's, ..."""
    s = load_series_csv(path)
    h = HorizonSpec(n, m, s.shape[1])
    if s.shape[0] % h.length:
        raise DimensionError(
            f"{path}: {s.shape[0]} rows is not a multiple of n+m = {h.length}")
    return Ensemble(s.reshape(-1, h.size), h, kind=kind)
