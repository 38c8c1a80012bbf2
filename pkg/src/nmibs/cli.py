"""Command-line entry point: ``nmibs {select,pipeline,eval,fixtures}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datacube import (
    CubeHeader,
    GroundTruth,
    load_csv_fixture,
    load_cube,
    load_ground_truth,
    parse_header,
    write_cube,
    write_ground_truth,
)
from .evaluation import evaluate, write_report_csv
from .pipeline import ALL_BANDS, PipelineError, run_pipeline
from .selection import METHODS
from .synthetic import planted_cube, trend_cube

OUTPUT_ENV = "NMIBS_OUTPUT_DIR"


class UsageError(Exception):
    def __init__(self, message: str, stage: str = "args"):
        super().__init__(message)
        self.stage = stage


class _Parser(argparse.ArgumentParser):
    """Argument errors report the 'args' stage like every other failure."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error in stage 'args': {message}\n")


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {value}")
    return value


def _add_input_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("input")
    g.add_argument("--header", type=Path, help="ENVI-style .hdr file")
    g.add_argument("--raw", type=Path, help="band-sequential payload")
    g.add_argument("--gt", type=Path, help="unsigned-16 label raster")
    g.add_argument("--csv", type=Path, help="CSV fixture (band columns + label column) instead of hdr/raw/gt")


def _add_selection_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=[*METHODS, "all"], default="nmibs")
    p.add_argument("--k", type=_positive_int, required=True, help="number of bands to select")
    p.add_argument("--th", type=float, default=0.0, help="redundancy threshold (default 0)")
    p.add_argument("--bins", type=int, default=256, help="quantization levels per band (default 256)")


def _add_output_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None, help=f"output directory (default ${OUTPUT_ENV} or ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmibs", description="NMI-driven band selection for hyperspectral cubes")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="select bands and write selection JSON")
    _add_input_args(p)
    _add_selection_args(p)
    _add_output_arg(p)

    p = sub.add_parser("pipeline", help="select, train an SVM, classify the scene and score it")
    _add_input_args(p)
    _add_selection_args(p)
    p.add_argument(
        "--train-fraction", type=_fraction, nargs="+", default=[0.1, 0.25, 0.5], help="default: 0.1 0.25 0.5"
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--svm-c", type=float, default=100.0)
    p.add_argument("--svm-gamma", type=float, default=None, help="RBF gamma (default 1 / number of bands used)")
    p.add_argument("--with-all-bands", action="store_true", help="also run the SVM on every band")
    _add_output_arg(p)

    p = sub.add_parser("eval", help="score a classified map against ground truth")
    p.add_argument("--pred", type=Path, required=True, help="map.csv (row,col,label) or unsigned-16 raw raster")
    p.add_argument("--gt", type=Path, required=True, help="unsigned-16 raw raster or row,col,label CSV")
    p.add_argument("--header", type=Path, help="header giving raster dimensions for .raw inputs")
    _add_output_arg(p)

    p = sub.add_parser("fixtures", help="write a built-in synthetic cube")
    p.add_argument("--kind", choices=["planted", "duplicated", "trend"], default="trend")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", action="store_true", help="also write the cube as a CSV fixture")
    _add_output_arg(p)
    return parser


def _output_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUTPUT_ENV, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_inputs(args):
    if args.csv is not None:
        if not args.csv.is_file():
            raise UsageError(f"file not found: {args.csv}", "load")
        return _in_stage("load", load_csv_fixture, args.csv)
    missing = [name for name in ("header", "raw", "gt") if getattr(args, name) is None]
    if missing:
        raise UsageError("need --csv or all of --header/--raw/--gt (missing: " + ", ".join(missing) + ")")
    for path in (args.header, args.raw, args.gt):
        if not path.is_file():
            raise UsageError(f"file not found: {path}", "load")
    cube = _in_stage("load", load_cube, args.header, args.raw)
    gt = _in_stage("load", load_ground_truth, args.gt, cube.header)
    return cube, gt


def _in_stage(stage, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except PipelineError as exc:
        raise StageError(exc.stage, str(exc.error)) from exc
    except (ValueError, ArithmeticError, OSError) as exc:
        raise StageError(stage, str(exc)) from exc


def _methods(name: str) -> list[str]:
    return list(METHODS) if name == "all" else [name]


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_select(args) -> int:
    cube, gt = _load_inputs(args)
    if args.k > cube.n_bands:
        raise UsageError(f"--k {args.k} exceeds the number of bands ({cube.n_bands})")
    out = _output_dir(args)
    methods = _methods(args.method)
    for method in methods:
        result = _in_stage("select", METHODS[method], cube, gt, args.k, args.th, args.bins)
        name = "selection.json" if len(methods) == 1 else f"selection_{method}.json"
        _dump_json(result.to_dict(), out / name)
        print(f"{method}: {result.selected}")
    return 0


def _gray_levels(class_map: np.ndarray, class_count: int) -> np.ndarray:
    return np.floor(255 * class_map.astype(np.int64) / max(class_count, 1)).astype(np.uint8)


def write_pgm(class_map: np.ndarray, class_count: int, path: Path) -> None:
    lines, samples = class_map.shape
    body = _gray_levels(class_map, class_count).tobytes()
    path.write_bytes(f"P5\n{samples} {lines}\n255\n".encode("ascii") + body)


def read_pgm(path: Path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    samples, lines = int(tokens[1]), int(tokens[2])
    return np.frombuffer(data[pos + 1 :], dtype=np.uint8).reshape(lines, samples)


def write_map_csv(class_map: np.ndarray, path: Path) -> None:
    rows, cols = np.indices(class_map.shape)
    table = np.column_stack([rows.ravel(), cols.ravel(), class_map.ravel()])
    with open(path, "w") as fh:
        fh.write("row,col,label\n")
        np.savetxt(fh, table, fmt="%d", delimiter=",")


def read_map_csv(path: Path) -> np.ndarray:
    table = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    if table.shape[1] != 3:
        raise ValueError(f"{path}: expected row,col,label columns")
    shape = (int(table[:, 0].max()) + 1, int(table[:, 1].max()) + 1)
    raster = np.zeros(shape, dtype=np.int64)
    raster[table[:, 0], table[:, 1]] = table[:, 2]
    return raster


def cmd_pipeline(args) -> int:
    cube, gt = _load_inputs(args)
    if args.k > cube.n_bands:
        raise UsageError(f"--k {args.k} exceeds the number of bands ({cube.n_bands})")
    out = _output_dir(args)
    methods = _methods(args.method) + ([ALL_BANDS] if args.with_all_bands else [])
    results = _in_stage(
        "pipeline",
        run_pipeline,
        cube,
        gt,
        methods,
        args.k,
        args.train_fraction,
        th=args.th,
        bins=args.bins,
        seed=args.seed,
        c=args.svm_c,
        gamma=args.svm_gamma,
    )
    report = {
        "config": {
            "methods": methods,
            "k": args.k,
            "th": args.th,
            "bins": args.bins,
            "train_fractions": args.train_fraction,
            "seed": args.seed,
            "svm_c": args.svm_c,
            "svm_gamma": args.svm_gamma,
        },
        # wall-clock time is kept out of report.json so it stays reproducible; see report.csv
        "runs": [r.report.to_dict(include_timing=False) for r in results],
    }
    _dump_json(report, out / "report.json")
    write_report_csv([r.csv_row() for r in results], out / "report.csv")
    for r in results:
        stem = "map" if len(results) == 1 else f"map_{r.method}_{r.train_fraction:g}"
        write_pgm(r.class_map, gt.class_count, out / f"{stem}.pgm")
        write_map_csv(r.class_map, out / f"{stem}.csv")
        print(
            f"{r.method:>9} k={r.k:<3} train={100 * r.train_fraction:5.1f}%  "
            f"OA={100 * r.report.oa:6.2f}  AA={100 * r.report.aa:6.2f}  time={r.report.elapsed_seconds:.2f}s"
        )
    return 0


def _read_raster(path: Path, header: CubeHeader | None) -> np.ndarray:
    if path.suffix.lower() == ".csv":
        return read_map_csv(path)
    if header is None:
        raise UsageError(f"--header is required to read raw raster {path}", "load")
    expected = header.n_pixels * 2
    size = path.stat().st_size
    if size != expected:
        raise UsageError(
            f"{path}: size mismatch, expected {expected} bytes for {header.lines}x{header.samples}, found {size}", "load"
        )
    return np.fromfile(path, dtype="<u2").reshape(header.lines, header.samples).astype(np.int64)


def cmd_eval(args) -> int:
    for path in (args.pred, args.gt, args.header):
        if path is not None and not path.is_file():
            raise UsageError(f"file not found: {path}", "load")
    header = _in_stage("load", lambda p: parse_header(p.read_text()), args.header) if args.header else None
    pred = _in_stage("load", _read_raster, args.pred, header)
    truth = _in_stage("load", _read_raster, args.gt, header)
    if pred.shape != truth.shape:
        raise UsageError(
            f"prediction map shape {pred.shape} does not match ground truth shape {truth.shape}", "evaluate"
        )
    gt = _in_stage("load", GroundTruth, truth)
    idx = gt.labeled_indices
    report = _in_stage("evaluate", evaluate, gt.labels.ravel()[idx], pred.ravel()[idx], [int(c) for c in gt.classes])
    print(f"OA {100 * report.oa:.2f}")
    print(f"AA {100 * report.aa:.2f}")
    for label, acc in zip(report.class_labels, report.per_class):
        print(f"class {label}: {100 * acc:.2f}")
    _dump_json(report.to_dict(include_timing=False), _output_dir(args) / "eval.json")
    return 0


def cmd_fixtures(args) -> int:
    if args.kind == "trend":
        fixture = trend_cube(args.seed)
    elif args.kind == "duplicated":
        fixture = planted_cube(3, 8, noise=1.0, duplicate_signal=True, seed=args.seed)
    else:
        fixture = planted_cube(3, 12, noise=1.0, seed=args.seed)
    out = _output_dir(args)
    write_cube(fixture.cube, out / "cube.hdr", out / "cube.raw")
    write_ground_truth(fixture.gt, out / "cube_gt.raw")
    meta = {
        "kind": args.kind,
        "seed": args.seed,
        "shape": list(fixture.cube.shape),
        "bands": fixture.cube.n_bands,
        "signal_bands": fixture.signal_bands,
        "duplicates": [list(pair) for pair in fixture.duplicates],
    }
    _dump_json(meta, out / "fixture.json")
    if args.csv:
        pixels = fixture.cube.pixel_matrix()
        labels = fixture.gt.labels.ravel()
        with open(out / "cube.csv", "w") as fh:
            for row, label in zip(pixels, labels):
                fh.write(",".join(repr(float(v)) for v in row) + f",{label}\n")
    print(f"wrote {args.kind} fixture to {out}")
    return 0


COMMANDS = {"select": cmd_select, "pipeline": cmd_pipeline, "eval": cmd_eval, "fixtures": cmd_fixtures}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nmibs {args.command}: usage error in stage '{exc.stage}': {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"nmibs {args.command}: error in stage '{exc.stage}': {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
