"""``gridpulse`` command line: one subcommand per pipeline stage.

Every stage reads from and writes to a work directory laid out as::

    series/  spatial/  temporal/  cluster/  model/  report/summary.txt

Options can also come from a flat ``key = value`` config file (``--config``);
keys are option names with dashes or underscores, and flags given on the
command line win. Exit status is 0 on success, 1 on usage errors and 2 on
data errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import shutil
import sys
from pathlib import Path

import numpy as np

from . import analysis, classifier, clustering
from .cube import GridSpec, downsample, hourly, slot_aggregate, stream_cube, export_cube_csv
from .ingest import FORMATS, parse_records, series_by_cell, impute_gaps, write_records
from .synth import SynthConfig, generate

STAGE_DIRS = ("series", "spatial", "temporal", "cluster", "model")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def derive_seed(seed: int, stage: str) -> int:
    """Stage-specific seed from the global one (stable across runs and platforms)."""
    digest = hashlib.sha256(f"{stage}:{seed}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def read_config(path: str | Path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _rc(text: str) -> tuple[int, int]:
    try:
        r, c = (int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROW,COL, got {text!r}") from None
    return r, c


def _k_range(text: str) -> range:
    try:
        lo, hi = (int(p) for p in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO..HI, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad k range {text!r}")
    return range(lo, hi + 1)


def _grid(text: str) -> GridSpec:
    try:
        return GridSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# ---------------------------------------------------------------------------
# small file helpers


def _write_kv(path: Path, items: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in items.items():
            fh.write(f"{k}={v}\n")


def _read_kv(path: Path) -> dict[str, str]:
    if not path.exists():
        raise DataError(f"{path} not found; run the earlier stage first")
    return dict(line.split("=", 1) for line in path.read_text(encoding="utf-8").splitlines() if "=" in line)


def _stage_dir(args, name: str) -> Path:
    d = Path(args.workdir) / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def _echo_config(args, stage_dir: Path) -> None:
    items = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}
    _write_kv(stage_dir / "config.txt", {k: _fmt(v) for k, v in items.items()})


def _fmt(v) -> str:
    if isinstance(v, GridSpec):
        return f"{v.rows}x{v.cols}"
    if isinstance(v, range):
        return f"{v.start}..{v.stop - 1}"
    if isinstance(v, tuple):
        return ",".join(str(p) for p in v)
    return str(v)


def _open_out(path: Path):
    return open(path, "w", encoding="utf-8", newline="\n")


def _load_cube(args):
    series_dir = Path(args.workdir) / "series"
    meta = _read_kv(series_dir / "meta.txt")
    grid = GridSpec.parse(meta["grid"])
    with open(series_dir / "series.csv", encoding="utf-8") as fh:
        records = parse_records(fh, "canonical_csv")
    return stream_cube(records, grid, int(meta["bin_width_ms"]), int(meta["start_ms"]), int(meta["end_ms"]))


# ---------------------------------------------------------------------------
# stages


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        grid=args.grid,
        days=args.days,
        bin_width_ms=args.bin_width_ms,
        base_amplitude=args.base_amplitude,
        center_boost=args.center_boost,
        noise_sigma=args.noise,
        gap_rate=args.gap_rate,
        bands=args.bands,
        profile=args.profile,
        seed=derive_seed(args.seed, "synth"),
    )
    out = Path(args.output) if args.output else _stage_dir(args, "synth") / "records.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    records = generate(cfg)
    with _open_out(out) as fh:
        write_records(records, fh)
    _echo_config(args, out.parent)
    print(f"wrote {len(records)} records to {out}")
    return 0


def cmd_ingest(args) -> int:
    with open(args.input, encoding="utf-8") as fh:
        parsed = parse_records(fh, args.format, strict=not args.lenient)
    if not parsed.records:
        raise DataError("no records parsed")
    bw = args.bin_width_ms
    start = args.start_ms
    if start is None:
        first = min(r.timestamp_ms for r in parsed.records)
        start = first - first % bw
    end = args.end_ms
    if end is None:
        last = max(r.timestamp_ms for r in parsed.records)
        end = last - last % bw + bw
    grid = args.grid
    series = series_by_cell(parsed.records, bw, start, end)
    out_of_grid = [c for c in series if c > grid.n_cells]
    if out_of_grid:
        raise DataError(f"cell ids beyond grid {grid.rows}x{grid.cols}, e.g. {out_of_grid[0]}")

    d = _stage_dir(args, "series")
    gap_rows = []
    with _open_out(d / "series.csv") as fh:
        fh.write("cell_id,timestamp_ms,internet_activity\n")
        for cell, s in series.items():
            gap_rows.append((cell, len(s), s.n_gaps))
            filled = impute_gaps(s)
            for t, v in zip(filled.timestamps().tolist(), filled.values.tolist()):
                fh.write(f"{cell},{t},{v!r}\n")
    with _open_out(d / "gaps.csv") as fh:
        fh.write("cell_id,n_bins,n_gaps\n")
        for row in gap_rows:
            fh.write("%d,%d,%d\n" % row)
    missing = grid.n_cells - len(series)
    meta = {
        "grid": f"{grid.rows}x{grid.cols}",
        "bin_width_ms": bw,
        "start_ms": start,
        "end_ms": end,
        "records": len(parsed.records),
        "parse_errors": len(parsed.errors),
        "skipped_empty": parsed.skipped_empty,
        "cells_with_data": len(series),
        "cells_missing": missing,
        "gaps_imputed": sum(g for _, _, g in gap_rows),
    }
    _write_kv(d / "meta.txt", meta)
    _write_kv(d / "summary.txt", meta)
    _echo_config(args, d)
    print(f"ingested {len(parsed.records)} records into {len(series)} series ({meta['gaps_imputed']} gaps imputed)")
    return 0


def cmd_spatial(args) -> int:
    cube = _load_cube(args)
    try:
        coarse = slot_aggregate(downsample(cube, args.downsample), args.slot_hours)
        cmap = analysis.spatial_corr_map(coarse, args.target)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    d = _stage_dir(args, "spatial")
    with _open_out(d / "slots.csv") as fh:
        export_cube_csv(coarse, fh)
    with _open_out(d / "corr.csv") as fh:
        cmap.to_csv(fh)
    _write_kv(d / "summary.txt", {
        "grid": f"{coarse.grid.rows}x{coarse.grid.cols}",
        "slots": coarse.n_bins,
        "target": f"{args.target[0]},{args.target[1]}",
        "undefined_cells": int(cmap.rho.mask.sum()),
    })
    _echo_config(args, d)
    print(f"correlation map over {coarse.grid.rows}x{coarse.grid.cols} grid, {coarse.n_bins} slots")
    return 0


def cmd_temporal(args) -> int:
    cube = hourly(_load_cube(args))
    r, c = args.cell if args.cell is not None else (cube.grid.rows // 2, cube.grid.cols // 2)
    if not (0 <= r < cube.grid.rows and 0 <= c < cube.grid.cols):
        raise DataError(f"cell {r},{c} outside grid")
    series = cube.series(r, c)
    max_lag = args.max_lag
    note = ""
    if max_lag >= len(series):
        max_lag = len(series) - 1
        note = f"max_lag clamped from {args.max_lag} to {max_lag} (series has {len(series)} hours)"
        print(note, file=sys.stderr)
    try:
        result = analysis.acf(series, max_lag, args.acf_denominator, step_ms=cube.bin_width_ms)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    d = _stage_dir(args, "temporal")
    with _open_out(d / "acf.csv") as fh:
        result.to_csv(fh)
    with _open_out(d / "hourly.csv") as fh:
        fh.write("hour_index,value\n")
        for i, v in enumerate(series.tolist()):
            fh.write(f"{i},{v!r}\n")
    peaks = result.peaks()
    summary = {
        "cell": f"{r},{c}",
        "max_lag": max_lag,
        "denominator": args.acf_denominator,
        "argmax_lag": result.argmax(),
        "first_peak_lag": int(peaks[0]) if len(peaks) else "",
    }
    if note:
        summary["note"] = note
    _write_kv(d / "summary.txt", summary)
    _echo_config(args, d)
    print(f"acf over {max_lag} lags: argmax lag {summary['argmax_lag']}, first peak {summary['first_peak_lag']}")
    return 0


def _write_normalization(m: clustering.FeatureMatrix, path: Path) -> None:
    with _open_out(path) as fh:
        fh.write("feature,mean,std,constant\n")
        for i, name in enumerate(m.names):
            if m.normalization == "zscore":
                fh.write(f"{name},{float(m.mean[i])!r},{float(m.std[i])!r},{int(m.constant[i])}\n")
            else:
                fh.write(f"{name},0.0,1.0,0\n")


def _read_features(path: Path, norm_path: Path) -> clustering.FeatureMatrix:
    if not path.exists():
        raise DataError(f"{path} not found")
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    names = tuple(rows[0][2:])
    cells = np.array([(int(r[0]), int(r[1])) for r in rows[1:]], dtype=int).reshape(-1, 2)
    values = np.array([[float(v) for v in r[2:]] for r in rows[1:]], dtype=float).reshape(-1, len(names))
    raw = clustering.FeatureMatrix(values, cells, names, names.index("log_total"))
    with open(norm_path, encoding="utf-8") as fh:
        norm = list(csv.DictReader(fh))
    if [n["feature"] for n in norm] != list(names):
        raise DataError("normalization file does not match feature columns")
    mean = np.array([float(n["mean"]) for n in norm])
    std = np.array([float(n["std"]) for n in norm])
    constant = np.array([n["constant"] == "1" for n in norm])
    if np.all(mean == 0) and np.all(std == 1) and not constant.any():
        return raw
    ref = clustering.FeatureMatrix(values[:0], cells[:0], names, raw.activity_col, "zscore", mean, std, constant)
    return clustering.apply_normalization(raw, ref)


def cmd_cluster(args) -> int:
    cube = _load_cube(args)
    try:
        raw = clustering.extract_features(cube, args.features)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    m = clustering.zscore_normalize(raw) if args.normalize == "zscore" else raw
    seed = derive_seed(args.seed, "cluster")
    d = _stage_dir(args, "cluster")
    summary = {"features": args.features, "normalize": args.normalize, "n_cells": m.n, "d": m.d}
    if args.k is not None:
        if args.k > m.n:
            raise DataError(f"k={args.k} exceeds {m.n} cells")
        report = clustering.score_k(m, [args.k], args.criterion, seed, args.restarts)
    else:
        if args.k_range.stop - 1 > m.n:
            raise DataError(f"k range exceeds {m.n} cells")
        report = clustering.score_k(m, args.k_range, args.criterion, seed, args.restarts)
    with _open_out(d / "kselect.csv") as fh:
        report.to_csv(fh)
    model = report.best
    summary.update(criterion=args.criterion, chosen_k=model.k, chosen_k_aic=report.chosen_k["aic"],
                   chosen_k_bic=report.chosen_k["bic"], wcss=repr(model.wcss))
    with _open_out(d / "clusters.csv") as fh:
        clustering.export_clusters_csv(model, m, fh)
    with _open_out(d / "features.csv") as fh:
        raw.to_csv(fh)
    _write_normalization(m, d / "normalization.csv")
    counts = np.bincount(clustering.tier_ranks(model, m), minlength=model.k)
    for name, n in zip(clustering.tier_names(model.k), counts):
        summary[f"tier_{name}" if not name.startswith("tier_") else name] = int(n)
    _write_kv(d / "summary.txt", summary)
    _echo_config(args, d)
    print(f"chosen_k={model.k} ({args.criterion})")
    return 0


def _tier_rank(name: str, k: int) -> int:
    names = clustering.tier_names(k)
    if name not in names:
        raise DataError(f"unknown tier {name!r}")
    return names.index(name)


def cmd_train(args) -> int:
    cdir = Path(args.workdir) / "cluster"
    m = _read_features(cdir / "features.csv", cdir / "normalization.csv")
    with open(cdir / "clusters.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    tiers = {(int(r["row"]), int(r["col"])): r["tier"] for r in rows}
    k = len({r["cluster_id"] for r in rows})
    y = np.array([_tier_rank(tiers[(int(r), int(c))], k) for r, c in m.cells])
    model = classifier.init_model(m.d, args.hidden, k, derive_seed(args.seed, "train-init"))
    try:
        fitted, report = classifier.train(model, m, y, args.epochs, args.lr, args.batch_size, args.split,
                                          derive_seed(args.seed, "train"))
    except ValueError as exc:
        raise DataError(str(exc)) from None
    d = _stage_dir(args, "model")
    classifier.save_model(fitted, d / "model.txt")
    shutil.copyfile(cdir / "normalization.csv", d / "normalization.csv")
    with _open_out(d / "classes.txt") as fh:
        fh.write("\n".join(clustering.tier_names(k)) + "\n")
    with _open_out(d / "training.csv") as fh:
        report.to_csv(fh)
    f = report.final
    _write_kv(d / "summary.txt", {
        "layer_dims": ",".join(map(str, fitted.layer_dims)),
        "epochs": args.epochs,
        "final_train_loss": repr(f.train_loss),
        "final_test_loss": repr(f.test_loss),
        "final_train_acc": repr(f.train_acc),
        "final_test_acc": repr(f.test_acc),
    })
    _echo_config(args, d)
    print(f"test accuracy {f.test_acc:.4f}, test loss {f.test_loss:.4f}")
    return 0


def cmd_classify(args) -> int:
    mdir = Path(args.model_dir) if args.model_dir else Path(args.workdir) / "model"
    try:
        model = classifier.load_model(mdir / "model.txt")
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None
    classes = (mdir / "classes.txt").read_text(encoding="utf-8").split()
    feature_path = Path(args.features) if args.features else Path(args.workdir) / "cluster" / "features.csv"
    m = _read_features(feature_path, mdir / "normalization.csv")
    try:
        probs = classifier.forward(model, m.values)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    out = Path(args.output) if args.output else mdir / "predictions.csv"
    with _open_out(out) as fh:
        fh.write("row,col,class,tier," + ",".join(f"p_{i}" for i in range(len(classes))) + "\n")
        for (r, c), p in zip(m.cells, probs):
            j = int(np.argmax(p))
            fh.write(f"{r},{c},{j},{classes[j]}," + ",".join(repr(float(v)) for v in p) + "\n")
    print(f"classified {m.n} cells into {out}")
    return 0


def cmd_report(args) -> int:
    root = Path(args.workdir)
    d = _stage_dir(args, "report")
    lines = []
    found = False
    for stage in STAGE_DIRS:
        sdir = root / stage
        if not sdir.is_dir():
            continue
        found = True
        summary = sdir / "summary.txt"
        if summary.exists():
            lines.append(f"[{stage}]")
            lines.extend(summary.read_text(encoding="utf-8").splitlines())
            lines.append("")
        for f in sorted(sdir.glob("*.csv")):
            shutil.copyfile(f, d / f"{stage}_{f.name}")
    if not found:
        raise DataError(f"no stage outputs under {root}")
    (d / "summary.txt").write_text("\n".join(lines), encoding="utf-8")
    print(f"report written to {d}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--workdir", default="gridpulse-out", help="pipeline work directory")
    common.add_argument("--seed", type=int, default=0, help="global seed")
    common.add_argument("--config", help="key=value config file")

    parser = _Parser(prog="gridpulse", description="Cell-grid internet activity analysis pipeline")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    p.add_argument("--grid", type=_grid, default=GridSpec(10, 10))
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--bin-width-ms", type=int, default=600_000)
    p.add_argument("--base-amplitude", type=float, default=10.0)
    p.add_argument("--center-boost", type=float, default=3.0)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--gap-rate", type=float, default=0.01)
    p.add_argument("--bands", type=int, default=3)
    p.add_argument("--profile", choices=("sine", "two_peak"), default="sine")
    p.add_argument("--output", help="CSV path (default WORKDIR/synth/records.csv)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", parents=[common], help="parse, bin and impute records")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=FORMATS, default="canonical_csv")
    p.add_argument("--grid", type=_grid, default=GridSpec(100, 100))
    p.add_argument("--bin-width-ms", type=int, default=600_000)
    p.add_argument("--start-ms", type=int)
    p.add_argument("--end-ms", type=int)
    p.add_argument("--lenient", action="store_true", help="skip malformed lines instead of aborting")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("spatial", parents=[common], help="downsample, slot-aggregate, correlation map")
    p.add_argument("--target", type=_rc, required=True, help="ROW,COL in the downsampled grid")
    p.add_argument("--downsample", type=int, default=1)
    p.add_argument("--slot-hours", type=int, default=3)
    p.set_defaults(func=cmd_spatial)

    p = sub.add_parser("temporal", parents=[common], help="hourly aggregation and ACF")
    p.add_argument("--cell", type=_rc, help="ROW,COL (default: grid centre)")
    p.add_argument("--max-lag", type=int, default=168)
    p.add_argument("--acf-denominator", choices=("overlap", "full"), default="overlap")
    p.set_defaults(func=cmd_temporal)

    p = sub.add_parser("cluster", parents=[common], help="features, k selection, tiers")
    p.add_argument("--features", choices=clustering.FEATURE_SETS, default="profile")
    p.add_argument("--normalize", choices=("zscore", "raw"), default="zscore")
    p.add_argument("--k", type=int)
    p.add_argument("--k-range", type=_k_range, default=range(1, 9))
    p.add_argument("--criterion", choices=("aic", "bic"), default="bic")
    p.add_argument("--restarts", type=int, default=10)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("train", parents=[common], help="fit the tier classifier")
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--split", type=float, default=0.8, help="training fraction")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", parents=[common], help="label feature rows with a saved model")
    p.add_argument("--model-dir")
    p.add_argument("--features", help="features CSV (default WORKDIR/cluster/features.csv)")
    p.add_argument("--output")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", parents=[common], help="collect outputs into report/")
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> None:
    pre = _Parser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_config(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    target = subparsers.choices.get(known.command)
    if target is None:
        return
    dests = {a.dest: a for a in target._actions}
    unknown = sorted(set(values) - set(dests))
    if unknown:
        raise UsageError(f"unknown config keys for {known.command}: {', '.join(unknown)}")
    defaults = {}
    for key, value in values.items():
        action = dests[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                defaults[key] = action.type(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key}: {exc}") from None
        else:
            defaults[key] = value
    target.set_defaults(**defaults)
    for action in target._actions:
        if action.dest in defaults:
            action.required = False


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"gridpulse: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (DataError, ValueError, OSError) as exc:
        print(f"gridpulse {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
