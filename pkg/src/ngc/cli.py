"""Command line front end: ``generate``, ``train``, ``detect`` and ``eval``.

Exit codes: 0 on success, 1 for invalid input (config, data files, flags),
2 for runtime failures (solver breakdown, I/O, missing artifacts).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, save_config
from .dataset import OOD, DatasetError, generate_synthetic, load_dataset, read_dataset_rows, save_dataset
from .metrics import MetricsReport, accuracy, auroc, f_measure, selection_report, zeta_sweep
from .model import load_model, save_model
from .ood import DetectionDecision, NoPrototypeError, Prototypes, classify_or_reject
from .trainer import TrainingError, fit

log = logging.getLogger("ngc")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

MODEL_FILE = "model.bin"
PROTOTYPE_FILE = "prototypes.bin"
SELECTION_FILE = "selection.csv"
EPOCH_LOG_FILE = "epoch_log.jsonl"
CONFIG_FILE = "config.json"
SUMMARY_FILE = "train_summary.json"


class ArtifactError(RuntimeError):
    """A file another command should have produced is missing or unusable."""


def _dump_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _out_dir(cfg: RunConfig, out) -> Path:
    path = Path(out) if out is not None else cfg.resolve(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_generate(config_path, out=None) -> tuple[Path, Path]:
    """Write the synthetic train and test CSVs named in the config.

    With ``out`` the files land in that directory under their base names.
    """
    cfg = load_config(config_path)
    paths = []
    for split, name in (("train", cfg.data.train_csv), ("test", cfg.data.test_csv)):
        target = Path(out) / Path(name).name if out is not None else cfg.resolve(name)
        target.parent.mkdir(parents=True, exist_ok=True)
        save_dataset(generate_synthetic(cfg.synthetic, split), target)
        paths.append(target)
    return tuple(paths)


def cmd_train(config_path, out=None) -> Path:
    """Warmup plus cleaning epochs; persists every artifact into one directory."""
    cfg = load_config(config_path)
    dataset = load_dataset(cfg.resolve(cfg.data.train_csv))
    try:
        cfg.hyper.validate(dataset.num_samples)
    except ValueError as exc:
        raise ConfigError(f"graph: {exc}") from None
    run_dir = _out_dir(cfg, out)
    with open(run_dir / EPOCH_LOG_FILE, "w") as log_stream:
        result = fit(dataset, cfg.hyper, seed=cfg.seed, log_stream=log_stream)
    save_model(result.model, run_dir / MODEL_FILE)
    result.selection.dump(run_dir / SELECTION_FILE, dataset.ids)
    stale = run_dir / PROTOTYPE_FILE
    if result.prototypes is not None:
        result.prototypes.save(stale)
    else:
        stale.unlink(missing_ok=True)
        log.warning("no prototypes produced (no cleaning epoch ran or nothing was selected)")
    save_config(cfg, run_dir / CONFIG_FILE)
    summary = {"epochs_run": len(result.log), "selected_count": int(result.selection.selected.sum())}
    if dataset.has_truth:
        summary.update(
            selection_report(
                result.selection.selected, dataset.given_labels, dataset.true_labels, result.selection.pseudo_labels
            )
        )
        summary["initial_noise_rate"] = result.initial_noise_rate
    _dump_json(summary, run_dir / SUMMARY_FILE)
    return run_dir


def cmd_detect(model_dir, test_csv, zeta: float, out=None) -> DetectionDecision:
    """Score a test CSV against stored prototypes and write the detection CSV."""
    model_dir = Path(model_dir)
    if not (model_dir / MODEL_FILE).exists():
        raise ArtifactError(f"{model_dir / MODEL_FILE}: model file not found")
    if not (model_dir / PROTOTYPE_FILE).exists():
        raise ArtifactError(f"{model_dir / PROTOTYPE_FILE}: missing prototypes; train with at least one epoch")
    if not -1.0 <= zeta <= 1.0:
        raise ConfigError(f"--zeta: must lie in [-1, 1], got {zeta}")
    model = load_model(model_dir / MODEL_FILE)
    prototypes = Prototypes.load(model_dir / PROTOTYPE_FILE)
    _, _, ids, _, _, features = read_dataset_rows(test_csv, model.num_classes)
    if len(ids) == 0:
        log.warning("%s: no test rows; writing an empty detection file", test_csv)
        empty = np.zeros(0)
        decision = DetectionDecision(empty, empty.astype(bool), empty.astype(np.int64), zeta)
    else:
        if features.shape[1] != model.input_dim:
            raise DatasetError(f"{test_csv}: {features.shape[1]} features, model expects {model.input_dim}")
        decision = classify_or_reject(features, model, prototypes, zeta)
    target = Path(out) if out is not None else model_dir / "detections.csv"
    decision.dump(target, ids)
    return decision


def read_detections(path) -> dict:
    """Map id -> (score, is_ood, predicted_class) from a detection CSV."""
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "score", "verdict", "predicted_class"]:
            raise DatasetError(f"{path}:1: header must be id,score,verdict,predicted_class")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4 or row[2] not in ("OOD", "IND"):
                raise DatasetError(f"{path}:{line}: malformed detection row")
            try:
                key = int(row[0])
                rows[key] = (float(row[1]), row[2] == "OOD", int(row[3]))
            except ValueError as exc:
                raise DatasetError(f"{path}:{line}: {exc}") from None
            if not np.isfinite(rows[key][0]):
                raise DatasetError(f"{path}:{line}: non-finite score")
    return rows


def cmd_eval(detection_csv, truth_csv, zeta=None, sweep=False, model_dir=None) -> dict:
    """Join detections with ground truth by id and compute the metrics report.

    Verdicts come from the detection file unless ``zeta`` is given, in which
    case they are recomputed from the stored scores.
    """
    detections = read_detections(detection_csv)
    num_classes, _, ids, _, truth, _ = read_dataset_rows(truth_csv)
    if truth is None:
        raise DatasetError(f"{truth_csv}: no true_label values to evaluate against")
    truth_by_id = dict(zip(ids.tolist(), truth.tolist()))
    if set(truth_by_id) != set(detections):
        missing = sorted(set(truth_by_id) ^ set(detections))
        raise DatasetError(f"id mismatch between {detection_csv} and {truth_csv} (e.g. id {missing[0]})")
    if not detections:
        raise DatasetError(f"{detection_csv}: no rows to evaluate")
    order = sorted(detections)
    scores = np.array([detections[i][0] for i in order])
    is_ood = np.array([detections[i][1] for i in order])
    pred = np.array([detections[i][2] for i in order])
    y = np.array([truth_by_id[i] for i in order])
    if zeta is not None:
        if not -1.0 <= zeta <= 1.0:
            raise ConfigError(f"--zeta: must lie in [-1, 1], got {zeta}")
        is_ood = scores < zeta

    ood = y == OOD
    macro, precision, recall = f_measure(pred, is_ood, y, num_classes, per_class=True)
    report = MetricsReport(
        accuracy=accuracy(pred, y),
        auroc=auroc(scores[~ood], scores[ood]) if ood.any() and (~ood).any() else None,
        f_measure=macro,
        zeta=zeta,
        num_samples=len(order),
        precision=precision,
        recall=recall,
    )
    if model_dir is not None and (Path(model_dir) / SUMMARY_FILE).exists():
        summary = json.loads((Path(model_dir) / SUMMARY_FILE).read_text())
        report.selected_count = summary.get("selected_count")
        report.selected_noise_rate = summary.get("selected_noise_rate")
        report.selected_label_noise_rate = summary.get("selected_label_noise_rate")
    out = report.to_dict()
    if sweep:
        curve = zeta_sweep(scores, pred, y, num_classes)
        best_zeta, best_f = max(curve, key=lambda item: (item[1], -item[0]))
        out["best_zeta"], out["best_f_measure"] = best_zeta, best_f
        out["sweep"] = [{"zeta": z, "f_measure": f} for z, f in curve]
    return out


def write_sweep_csv(report: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["zeta", "f_measure"])
        for item in report["sweep"]:
            writer.writerow([f"{item['zeta']:.2f}", repr(item["f_measure"])])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ngc", description="Noisy graph cleaning on embedding datasets.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write synthetic train/test CSVs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="directory for the CSVs (default: paths in the config)")

    p = sub.add_parser("train", help="warmup, clean and train; write model artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="artifact directory (default: out_dir in the config)")

    p = sub.add_parser("detect", help="score a test CSV and reject OOD samples")
    p.add_argument("--config", help="take model dir, test CSV and zeta defaults from a config")
    p.add_argument("--model", help="artifact directory written by train")
    p.add_argument("--test", help="test CSV")
    p.add_argument("--zeta", type=float)
    p.add_argument("--out", help="detection CSV (default: <model>/detections.csv)")

    p = sub.add_parser("eval", help="compute metrics from a detection CSV")
    p.add_argument("--detections", required=True)
    p.add_argument("--truth", required=True, help="dataset CSV holding true labels")
    p.add_argument("--zeta", type=float, help="recompute verdicts at this threshold")
    p.add_argument("--sweep-zeta", action="store_true", help="add the zeta -> F curve")
    p.add_argument("--model", help="artifact directory; adds selection statistics")
    p.add_argument("--out", help="report JSON (default: stdout)")
    return parser


def _run(args) -> None:
    if args.command == "generate":
        for path in cmd_generate(args.config, args.out):
            log.info("wrote %s", path)
    elif args.command == "train":
        log.info("artifacts in %s", cmd_train(args.config, args.out))
    elif args.command == "detect":
        cfg = load_config(args.config) if args.config else None
        model_dir = args.model or (cfg and cfg.resolve(cfg.out_dir))
        test_csv = args.test or (cfg and cfg.resolve(cfg.data.test_csv))
        zeta = args.zeta if args.zeta is not None else (cfg.detect.zeta if cfg else 0.5)
        if model_dir is None or test_csv is None:
            raise ConfigError("detect: pass --model and --test, or --config")
        cmd_detect(model_dir, test_csv, zeta, args.out)
    elif args.command == "eval":
        report = cmd_eval(args.detections, args.truth, args.zeta, args.sweep_zeta, args.model)
        if args.sweep_zeta and args.out:
            write_sweep_csv(report, Path(args.out).with_suffix(".sweep.csv"))
        _dump_json(report, args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        _run(args)
    except (TrainingError, ArtifactError, NoPrototypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:  # ConfigError, DatasetError and other validation failures
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
