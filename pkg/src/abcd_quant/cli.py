"""Command-line front end: ``abcd-quant <subcommand> ...``.

Machine output (JSON/CSV) goes to ``--out`` or stdout; logs go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataset, evolution, fileio, metrics, synth
from .errors import AbcdError, InputError
from .features import CalibrationParams, analyze_lesion, calibrate_p6mm

log = logging.getLogger("abcd_quant")

DEFAULT_SEED = 42
UINT64_MAX = 2**64 - 1


def _uint64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v <= UINT64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (np.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError("must be a positive finite number")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _vector(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not all(np.isfinite(vals)):
        raise argparse.ArgumentTypeError("vector entries must be finite")
    return vals


def _emit(out, text: str) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        fileio.write_text(out, text)


def _load_calibration(path) -> CalibrationParams:
    data = fileio.read_json(path)
    if not isinstance(data, dict) or "p6mm_px" not in data:
        raise InputError(f"{path}: calibration JSON needs a 'p6mm_px' entry")
    try:
        return CalibrationParams(float(data["p6mm_px"]))
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid p6mm_px: {exc}") from exc


# ---- subcommands -----------------------------------------------------------


def cmd_score(args) -> int:
    if args.calibration is not None:
        cal = _load_calibration(args.calibration)
    elif args.p6mm is not None:
        cal = CalibrationParams(args.p6mm)
    else:
        cal = CalibrationParams()
    img = fileio.read_image(args.image)
    result = analyze_lesion(img, cal, args.seed)
    if args.mask is not None:
        fileio.write_mask_png(args.mask, result.segmentation.mask)
    _emit(args.out, fileio.dump_json(result.to_dict()))
    log.info("scored %s: A=%.3f B=%.3f C=%.3f D=%.3f", args.image, *result.scores.as_tuple())
    return 0


def cmd_synth(args) -> int:
    data = fileio.read_json(args.spec)
    if not isinstance(data, dict):
        raise InputError(f"{args.spec}: synth spec must be a JSON object")
    spec = synth.SynthSpec.from_dict(data)
    out = Path(args.out)
    fileio.write_png(out, synth.render(spec, args.seed))
    sidecar = {"seed": args.seed, "spec": spec.to_dict()}
    fileio.write_json(out.with_suffix(".json"), sidecar)
    log.info("wrote %s and %s", out, out.with_suffix(".json"))
    return 0


def cmd_label_dataset(args) -> int:
    records = dataset.load_metadata(args.metadata)
    cal = _load_calibration(args.calibration)
    rows = dataset.label_dataset(records, args.images, cal, args.seed, args.jobs)
    _emit(args.out, dataset.format_labels(rows))
    failed = sum(not r.ok for r in rows)
    log.info("labeled %d images (%d failed)", len(rows), failed)
    return 0


def cmd_measure(args) -> int:
    records = dataset.load_metadata(args.metadata)
    rows = dataset.measure_diameters(records, args.images, args.jobs)
    body = [(i, "" if d is None else fileio.fmt6(d), s) for i, d, s in rows]
    _emit(args.out, fileio.format_csv(("image_id", "max_diameter_px", "status"), body))
    return 0


def cmd_calibrate(args) -> int:
    rows = fileio.read_csv(args.labels_raw, required=("max_diameter_px",))
    values = []
    for n, row in enumerate(rows, start=1):
        if (row.get("status") or "ok").strip() != "ok":
            continue
        text = (row["max_diameter_px"] or "").strip()
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError:
            raise InputError(f"{args.labels_raw}: row {n}: not a number: {text!r}") from None
    cal = calibrate_p6mm(values)
    _emit(args.out, fileio.dump_json({"p6mm_px": cal.p6mm_px, "n_samples": len(values)}))
    log.info("p6mm_px = %.3f from %d diameters", cal.p6mm_px, len(values))
    return 0


def cmd_split(args) -> int:
    records = dataset.split_dataset(dataset.load_metadata(args.metadata), args.seed)
    _emit(args.out, dataset.format_splits(records))
    return 0


def cmd_weights(args) -> int:
    records = dataset.apply_splits(dataset.load_metadata(args.metadata), args.split)
    _emit(args.out, fileio.dump_json(dataset.class_weights(records)))
    if args.oversample is not None:
        plan = dataset.oversample_plan(records, args.seed)
        fileio.write_csv(args.oversample, ("image_id",), [(i,) for i in plan])
    return 0


def _read_pairs(path):
    rows = fileio.read_csv(path)
    if not rows:
        raise InputError(f"{path}: no pairs")
    names = [k[len("start_"):] for k in rows[0] if k.startswith("start_")]
    if not names or any(f"end_{n}" not in rows[0] for n in names):
        raise InputError(f"{path}: need matching start_<f> and end_<f> columns")
    pairs = []
    for i, row in enumerate(rows, start=1):
        try:
            s = [float(row[f"start_{n}"]) for n in names]
            e = [float(row[f"end_{n}"]) for n in names]
        except (TypeError, ValueError):
            raise InputError(f"{path}: row {i}: non-numeric value") from None
        pairs.append((s, e))
    return names, pairs


def _trajectory_csv(steps: np.ndarray, names) -> str:
    body = [[str(t), *(fileio.fmt6(v) for v in row)] for t, row in enumerate(steps)]
    return fileio.format_csv(("step", *names), body)


def cmd_simulate(args) -> int:
    if args.fit is not None:
        names, pairs = _read_pairs(args.fit)
        model = evolution.fit_drift(pairs)
        if len(args.start) != model.n:
            raise InputError(f"--start has {len(args.start)} values, pairs have {model.n} features")
        abcd = names == ["a", "b", "c", "d"]
        traj = evolution.rollout(model, args.start, args.steps, clamp=abcd)
        if args.model_out is not None:
            fileio.write_json(args.model_out, model.to_dict())
        if not abcd:
            names = [f"f{i}" for i in range(model.n)]
        if args.target is not None:
            log.warning("--target is ignored when --fit is given")
    else:
        if args.target is None:
            raise InputError("simulate needs --target unless --fit is given")
        traj = evolution.abcd_trajectory(args.start, args.target, args.steps)
        names = ["a", "b", "c", "d"]
    _emit(args.out, _trajectory_csv(traj.steps, names))
    return 0


def _read_trajectory(path) -> np.ndarray:
    rows = fileio.read_csv(path, required=("step",))
    if not rows:
        raise InputError(f"{path}: empty trajectory")
    cols = [k for k in rows[0] if k != "step"]
    try:
        rows = sorted(rows, key=lambda r: int(r["step"]))
        return np.array([[float(r[c]) for c in cols] for r in rows])
    except (TypeError, ValueError):
        raise InputError(f"{path}: non-numeric trajectory entry") from None


def cmd_pca(args) -> int:
    traj = _read_trajectory(args.traj)
    fit_points = traj if args.fit_on is None else _read_trajectory(args.fit_on)
    proj = evolution.pca_fit(fit_points)
    xy = evolution.project(proj, traj)
    body = [[str(t), fileio.fmt6(p1), fileio.fmt6(p2)] for t, (p1, p2) in enumerate(xy)]
    _emit(args.out, fileio.format_csv(("step", "pc1", "pc2"), body))
    log.info("explained variance ratio: %.4f, %.4f", *proj.explained_variance_ratio)
    return 0


def _evaluate_class(args) -> dict:
    preds = metrics.read_class_predictions(args.pred)
    truth = {r.image_id: r.diagnosis for r in dataset.load_metadata(args.truth)}
    if set(preds) != set(truth):
        raise InputError(
            f"image_id mismatch: {len(set(truth) - set(preds))} only in truth, "
            f"{len(set(preds) - set(truth))} only in predictions"
        )
    ids = sorted(truth)
    y_true = [truth[i] for i in ids]
    y_pred = [preds[i][0] for i in ids]
    scores = [preds[i][1] for i in ids]
    report = metrics.classification_report(
        y_true, y_pred, None if any(s is None for s in scores) else scores
    )
    return report.to_dict()


def cmd_evaluate(args) -> int:
    out = {"task": args.task, "classification": None, "regression": None}
    if args.task == "class":
        out["classification"] = _evaluate_class(args)
    else:
        records = dataset.load_metadata(args.metadata) if args.metadata else None
        report = metrics.regression_report(
            dataset.read_feature_rows(args.truth), dataset.read_feature_rows(args.pred), records
        )
        out["regression"] = report.to_dict()
    _emit(args.out, fileio.dump_json(out))
    return 0


# ---- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # global flags live on a parent parser so they work before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_uint64, default=argparse.SUPPRESS, help="RNG seed (default 42)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="only log warnings")

    parser = argparse.ArgumentParser(prog="abcd-quant", parents=[common], description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("score", cmd_score, "ABCD scores of one image as JSON")
    p.add_argument("image")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--p6mm", type=_positive_float, help="pixels per 6 mm")
    g.add_argument("--calibration", help="calibration JSON from 'calibrate'")
    p.add_argument("--mask", help="also write the lesion mask as PNG")
    p.add_argument("--out")

    p = add("synth", cmd_synth, "render a synthetic lesion (PNG + JSON sidecar)")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)

    p = add("label-dataset", cmd_label_dataset, "score every image listed in the metadata")
    p.add_argument("--images", required=True)
    p.add_argument("--metadata", required=True)
    p.add_argument("--calibration", required=True)
    p.add_argument("--jobs", type=_positive_int, default=None,
                   help=f"worker processes (default: ${dataset.JOBS_ENV} or CPU count)")
    p.add_argument("--out")

    p = add("measure", cmd_measure, "max Feret diameter of every image (calibration input)")
    p.add_argument("--images", required=True)
    p.add_argument("--metadata", required=True)
    p.add_argument("--jobs", type=_positive_int, default=None)
    p.add_argument("--out")

    p = add("calibrate", cmd_calibrate, "derive p6mm_px from raw max diameters")
    p.add_argument("--labels-raw", required=True, help="CSV with a max_diameter_px column")
    p.add_argument("--out")

    p = add("split", cmd_split, "lesion-grouped train/val/test split")
    p.add_argument("--metadata", required=True)
    p.add_argument("--out")

    p = add("weights", cmd_weights, "inverse-frequency class weights from the train split")
    p.add_argument("--metadata", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--oversample", help="also write one balanced epoch of image ids")
    p.add_argument("--out")

    p = add("simulate", cmd_simulate, "feature trajectory (interpolation or fitted drift)")
    p.add_argument("--start", type=_vector, required=True)
    p.add_argument("--target", type=_vector)
    p.add_argument("--steps", type=_positive_int, default=evolution.DEFAULT_STEPS)
    p.add_argument("--fit", help="CSV of start_<f>,end_<f> pairs to fit a drift model")
    p.add_argument("--model-out", help="write the fitted drift model JSON")
    p.add_argument("--out")

    p = add("pca", cmd_pca, "project a trajectory onto its top two principal axes")
    p.add_argument("--traj", required=True)
    p.add_argument("--fit-on", help="fit the axes on these points instead of the trajectory")
    p.add_argument("--out")

    p = add("evaluate", cmd_evaluate, "classification or feature-regression report")
    p.add_argument("--task", choices=("class", "features"), required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True, help="metadata CSV (class) or labels CSV (features)")
    p.add_argument("--metadata", help="metadata for per-class MAE (features task)")
    p.add_argument("--out")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.seed = getattr(args, "seed", DEFAULT_SEED)
    args.quiet = getattr(args, "quiet", False)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    log.handlers[:] = [handler]
    log.propagate = False
    log.setLevel(logging.WARNING if args.quiet else logging.INFO)

    try:
        return args.func(args)
    except AbcdError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return InputError.exit_code
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("numeric failure: %s", exc)
        return AbcdError.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
