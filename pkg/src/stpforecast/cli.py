"""Command-line front end: ``stp {synth,fit,predict,evaluate,sweep}``.

Every subcommand also accepts ``--config FILE`` pointing at a JSON object
whose keys mirror the long flag names (``split_fraction`` or
``split-fraction``).  Flags given on the command line override the file.
Failures exit with status 1 (2 for usage errors) after printing one line
``error: {"type": ..., "message": ...}`` to stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import io, pipeline, synth
from .metrics import spectrum_report
from .preprocess import SegmentationSpec
from .stp import RankError, fit, predict
from .types import DimensionError, Ensemble, STPError, WeightVector

CAVITY_N, CAVITY_M, CAVITY_R, CAVITY_STRIDE = 15, 20, 100, 10
TRANSIENT_N, TRANSIENT_M = 30, 29


class CLIError(STPError):
    pass


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text) -> list[int]:
    if isinstance(text, list):
        return [int(v) for v in text]
    try:
        vals = [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("grid must not be empty")
    return vals


def _positive_int(text) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_segmentation(p, with_nm=True):
    if with_nm:
        p.add_argument("--n", type=_positive_int, default=None,
                       help="hindcast length for series/CSV input (default: 15)")
        p.add_argument("--m", type=_positive_int, default=None,
                       help="forecast length for series/CSV input (default: 20)")
    p.add_argument("--stride", type=_positive_int, default=CAVITY_STRIDE,
                   help="snapshots between episode starts for stationary series (default: %(default)s)")
    p.add_argument("--split-fraction", type=float, default=0.8,
                   help="share of episodes used for training (default: %(default)s)")


def build_parser() -> Parser:
    parser = Parser(prog="stp", description="Space-time projection forecasting.",
                    formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("synth", help="write a synthetic ensemble or series", formatter_class=fmt)
    p.add_argument("--config", help="JSON file with default flag values")
    p.add_argument("--kind", choices=synth.KINDS, required=True)
    p.add_argument("--k", type=int, default=50, help="episodes")
    p.add_argument("--n", type=int, default=None, help="hindcast snapshots (30 for decaying_transient, else 15)")
    p.add_argument("--m", type=int, default=None, help="forecast snapshots (29 for decaying_transient, else 20)")
    p.add_argument("--p", type=int, default=8, help="degrees of freedom per snapshot")
    p.add_argument("--rank", type=int, default=5, help="true rank (rank_limited)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length", type=int, default=16000, help="series length (traveling_wave)")
    p.add_argument("--waves", type=int, default=6, help="wave components (traveling_wave)")
    p.add_argument("--transit-time", type=float, default=32.0, help="steps for a wave to cross the domain")
    p.add_argument("--noise", type=float, default=0.3, help="white measurement noise amplitude")
    p.add_argument("--coherence-time", type=float, default=15.0,
                   help="amplitude correlation time in steps; <= 0 freezes the amplitudes")
    p.add_argument("--map", choices=("random", "zero", "persistence"), default="random")
    p.add_argument("--map-scale", type=float, default=1.0)
    p.add_argument("--perturbation", type=float, default=0.2, help="randomness of decaying_transient episodes")
    p.add_argument("--n-angle", type=int, default=8, help="angular grid points (decaying_transient)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit a model to an ensemble or series", formatter_class=fmt)
    p.add_argument("--config", help="JSON file with default flag values")
    p.add_argument("--data", required=True, help="ensemble/series file (.stp) or snapshot CSV")
    p.add_argument("--r", type=_positive_int, default=CAVITY_R, help="truncation rank")
    _add_segmentation(p)
    p.add_argument("--weights", help="CSV with p positive weights")
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--spectrum", help="spectrum CSV (default: <out>.spectrum.csv)")
    p.add_argument("--test-out", help="write the held-out (series) test ensemble here")

    p = sub.add_parser("predict", help="forecast from hindcasts", formatter_class=fmt)
    p.add_argument("--config", help="JSON file with default flag values")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True,
                   help="ensemble file, or CSV with one flattened n*p hindcast per row (raw)")
    p.add_argument("--add-mean", action="store_true", help="re-add the stored mean to the output")
    p.add_argument("--out", required=True, help="predictions file")
    p.add_argument("--csv", help="also write forecasts as CSV, one trajectory per row")

    p = sub.add_parser("evaluate", help="error statistics on a test ensemble", formatter_class=fmt)
    p.add_argument("--config", help="JSON file with default flag values")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="test ensemble file")
    p.add_argument("--out", required=True, help="error CSV")

    p = sub.add_parser("sweep", help="parameter study over n, r or k", formatter_class=fmt)
    p.add_argument("--config", help="JSON file with default flag values")
    p.add_argument("--data", required=True, help="series or ensemble file (.stp) or snapshot CSV")
    p.add_argument("--test", help="separate test ensemble (ensemble input only)")
    grid = p.add_mutually_exclusive_group()
    grid.add_argument("--n-grid", type=_int_list, help="hindcast lengths, e.g. 1,5,15")
    grid.add_argument("--r-grid", type=_int_list, help="ranks, e.g. 1,10,100")
    grid.add_argument("--k-grid", type=_int_list, help="training ensemble sizes")
    grid.add_argument("--k-halvings", type=_positive_int, help="number of halving levels of k")
    p.add_argument("--r", type=_positive_int, default=CAVITY_R, help="rank for n and k sweeps")
    _add_segmentation(p)
    p.add_argument("--horizon-mode", choices=(pipeline.FIXED_M, pipeline.FIXED_TOTAL),
                   default=None, help="n sweeps: keep m or n+m fixed "
                   "(default: fixed_m for series, fixed_total for ensembles)")
    p.add_argument("--weights", help="CSV with p positive weights")
    p.add_argument("--workers", type=_positive_int, default=1, help="parallel grid points")
    p.add_argument("--out", required=True, help="sweep CSV")
    return parser


def _config_path(argv: list[str]) -> tuple[Optional[str], Optional[str]]:
    """Subcommand and ``--config`` value, found before full parsing."""
    pre = Parser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    return known.command, known.config


def _apply_config(parser: Parser, argv: list[str]) -> argparse.Namespace:
    command, config = _config_path(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    if config and command in subparsers:
        try:
            cfg = json.loads(Path(config).read_text())
        except (OSError, ValueError) as exc:
            raise CLIError(f"cannot read config {config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise CLIError("config file must hold a JSON object")
        subparser = subparsers[command]
        known = {a.dest for a in subparser._actions}
        defaults = {}
        for key, val in cfg.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("help", "config"):
                raise UsageError(f"unknown config key {key!r} for {command}")
            defaults[dest] = val
        subparser.set_defaults(**defaults)
        # Values from the file satisfy required flags; the command line still wins.
        for action in subparser._actions:
            if action.dest in defaults:
                action.required = False
    return parser.parse_args(argv)


def _load_weights(path: Optional[str], p: int) -> Optional[WeightVector]:
    if not path:
        return None
    w = np.loadtxt(path, delimiter=",", ndmin=1).ravel()
    if w.size != p:
        raise DimensionError(f"weights file has {w.size} entries, p = {p}")
    return WeightVector(w)


def _read_data(path: str, n: Optional[int] = None, m: Optional[int] = None):
    """Return ``("ensemble", Ensemble)`` or ``("series", array)``."""
    if path.lower().endswith(".csv"):
        return "series", io.load_series_csv(path)
    header, _ = io.read_container(path)
    if header["type"] == "ensemble":
        return "ensemble", io.load_ensemble(path)
    if header["type"] == "series":
        return "series", io.load_series(path)
    raise CLIError(f"{path}: expected an ensemble or series file, got {header['type']!r}")


def _seg(args) -> SegmentationSpec:
    return SegmentationSpec(args.n or CAVITY_N, args.m or CAVITY_M, args.stride,
                            args.split_fraction)


def cmd_synth(args) -> None:
    kind = args.kind
    n = args.n or (TRANSIENT_N if kind == synth.DECAYING_TRANSIENT else CAVITY_N)
    m = args.m or (TRANSIENT_M if kind == synth.DECAYING_TRANSIENT else CAVITY_M)
    coh = args.coherence_time if args.coherence_time and args.coherence_time > 0 else None
    spec = synth.GeneratorSpec(kind=kind, k=args.k, n=n, m=m, p=args.p, seed=args.seed,
                               rank=args.rank, length=args.length, waves=args.waves,
                               transit_time=args.transit_time, noise=args.noise,
                               coherence_time=coh, map=args.map, map_scale=args.map_scale,
                               perturbation=args.perturbation, n_angle=args.n_angle)
    data = synth.generate(spec)
    prov = {"generator": kind, "seed": args.seed}
    if kind == synth.TRAVELING_WAVE:
        prov.update(waves=args.waves, transit_time=args.transit_time, noise=args.noise,
                    coherence_time=coh)
        io.save_series(data, args.out, provenance=prov)
    else:
        io.save_ensemble(data, args.out, provenance=prov)


def cmd_fit(args) -> None:
    what, data = _read_data(args.data)
    if what == "series":
        prep = pipeline.prepare_stationary(data, _seg(args))
        if args.test_out and prep.test is not None:
            io.save_ensemble(prep.test, args.test_out)
    else:
        if data.centered:
            raise CLIError("ensemble is already centered; fit needs the raw data to store its mean")
        prep = pipeline.prepare_transient(data)
    k = prep.train.k
    if args.r > k:
        raise RankError(f"rank r = {args.r} exceeds training ensemble size k = {k}")
    model = fit(prep.train, args.r, _load_weights(args.weights, prep.train.horizon.p), prep.mean)
    io.save_model(model, args.out)
    io.export_csv(spectrum_report(model), args.spectrum or f"{args.out}.spectrum.csv")


def cmd_predict(args) -> None:
    model = io.load_model(args.model)
    h = model.horizon
    if args.data.lower().endswith(".csv"):
        rows = io.load_series_csv(args.data)
        if rows.shape[1] != h.hindcast_size:
            raise DimensionError(
                f"hindcast rows have {rows.shape[1]} values, model expects "
                f"n*p = {h.n}*{h.p} = {h.hindcast_size}")
        hindcasts, raw = rows, True
    else:
        ens = io.load_ensemble(args.data)
        if ens.horizon.n != h.n or ens.horizon.p != h.p:
            raise DimensionError(
                f"horizon mismatch: model has n = {h.n}, p = {h.p}; "
                f"data has n = {ens.horizon.n}, p = {ens.horizon.p}")
        hindcasts, raw = ens.data[:, : ens.horizon.hindcast_size], not ens.centered
    preds = [predict(model, q, raw=raw, add_mean=args.add_mean) for q in hindcasts]
    io.save_predictions(args.out, np.array([p.coefficients for p in preds]),
                        np.array([p.hindcast for p in preds]),
                        np.array([p.forecast for p in preds]), h, args.add_mean)
    if args.csv:
        np.savetxt(args.csv, np.array([p.trajectory for p in preds]), delimiter=",", fmt="%.17g")


def cmd_evaluate(args) -> None:
    model = io.load_model(args.model)
    test = io.load_ensemble(args.data)
    if test.k == 0:
        raise CLIError("test ensemble is empty")
    if test.horizon != model.horizon:
        raise DimensionError(f"horizon mismatch: model {model.horizon}, data {test.horizon}")
    io.export_csv(pipeline.evaluate(model, test), args.out)


def cmd_sweep(args) -> None:
    axes = [a for a in ("n_grid", "r_grid", "k_grid", "k_halvings") if getattr(args, a) is not None]
    if len(axes) != 1:
        raise UsageError("give exactly one of --n-grid, --r-grid, --k-grid, --k-halvings")
    axis = axes[0]
    what, data = _read_data(args.data)
    workers = args.workers

    if axis == "n_grid" and what == "series":
        result = pipeline.hindcast_sweep_series(
            data, args.n_grid, args.m or CAVITY_M, args.r, args.stride, args.split_fraction,
            _load_weights(args.weights, data.shape[1]), workers,
            mode=args.horizon_mode or pipeline.FIXED_M,
            total=(args.n or CAVITY_N) + (args.m or CAVITY_M) if args.horizon_mode == pipeline.FIXED_TOTAL else None)
    elif what == "series":
        prep = pipeline.prepare_stationary(data, _seg(args))
    else:
        if args.test:
            train_raw, test_raw = data, io.load_ensemble(args.test)
        else:
            train_raw, test_raw = pipeline.split_ensemble(data, args.split_fraction)
        if test_raw is None:
            raise CLIError("no test episodes; give --test or a smaller --split-fraction")
        if axis == "n_grid":
            result = pipeline.hindcast_sweep_ensemble(
                train_raw, test_raw, args.n_grid, args.r,
                args.horizon_mode or pipeline.FIXED_TOTAL,
                _load_weights(args.weights, data.horizon.p), workers)
        else:
            prep = pipeline.prepare_transient(train_raw, test=test_raw)

    if axis != "n_grid":
        if prep.test is None:
            raise CLIError("no test episodes after the train/test split")
        w = _load_weights(args.weights, prep.train.horizon.p)
        if axis == "r_grid":
            bad = [r for r in args.r_grid if r > prep.train.k]
            if bad:
                raise RankError(f"ranks {bad} exceed training ensemble size k = {prep.train.k}")
            result = pipeline.rank_sweep(prep.train, prep.test, args.r_grid, w, prep.mean, workers)
        else:
            ks = args.k_grid or pipeline.halvings(prep.train.k, args.k_halvings)
            result = pipeline.k_sweep(prep.train, prep.test, ks, args.r, w, workers)

    pipeline.write_sweep_csv(result, args.out)
    if result.optimal is not None:
        out = Path(args.out)
        pipeline.write_optimal_csv(result, out.with_name(out.stem + "_optimal.csv"))


COMMANDS = {"synth": cmd_synth, "fit": cmd_fit, "predict": cmd_predict,
            "evaluate": cmd_evaluate, "sweep": cmd_sweep}


def _fail(kind: str, message: str, code: int) -> int:
    print("error: " + json.dumps({"type": kind, "message": message}), file=sys.stderr)
    return code


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    except (STPError, OSError, KeyError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
