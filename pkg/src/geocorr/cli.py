"""Command-line entry point: ``geocorr <command> ...``.

Exit codes: 0 success, 1 usage or config error, 2 data error,
3 pipeline degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .bench import BENCH_COLUMNS, VARIANTS, load_scene_spec, run_trials, summarize
from .config import default_config_text, load_config, profile_path
from .errors import FormatError, GeocorrError
from .ground_model import annotate_ground
from .io import load_scan, load_sequence, write_ground_csv, write_matrix, write_scan
from .registration import register_pair
from .sequence_eval import METRIC_NAMES, PAIR_COLUMNS, evaluate_sequence
from .synth_harness import (LoopSequenceSpec, SceneSpec, generate_loop_sequence, generate_scene,
                    write_labels_csv, write_sequence)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 1, 2, 3

METRIC_UNITS = {"ap_metric_1": "ratio", "ap_metric_2": "ratio", "max_f1": "ratio",
                "recall_at_1_pct": "percent", "recall_at_5_pct": "percent",
                "success_rate_pct": "percent", "rme_deg": "deg", "tme_m": "m"}

SUMMARY_COLUMNS = ["variant", "remove_ground", "ground_weighting", "trials",
                   "success_rate_pct", "rme_deg", "tme_m", "median_rotation_error_deg",
                   "median_translation_error_m", "mean_inlier_ratio"]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "inf" if np.isinf(value) else f"{value:.6f}"
    return str(value)


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return open(path, "w", newline=""), True


# -- commands ------------------------------------------------------------------

def cmd_ground(scan_path, config, output=None):
    cloud = load_scan(scan_path)
    if len(cloud):
        cloud = annotate_ground(cloud, config.grid(), config.ground_params())
    fh, own = _open_out(output)
    try:
        write_ground_csv(fh, cloud)
    finally:
        if own:
            fh.close()
    return EXIT_OK


def _transform_record(T):
    return {"rotation": T.rotation.tolist(), "translation": T.translation.tolist(),
            "matrix": T.as_matrix().tolist()}


def cmd_register(scan_a, scan_b, config, stream=None):
    stream = stream or sys.stdout
    A, B = load_scan(scan_a), load_scan(scan_b)
    try:
        result = register_pair(A, B, config)
    except GeocorrError as exc:
        record = {"status": "error", "error": type(exc).__name__, "message": str(exc),
                  "scan_a": scan_a, "scan_b": scan_b}
        json.dump(record, stream, indent=2)
        stream.write("\n")
        return exc.exit_code
    record = {"status": "ok", "scan_a": scan_a, "scan_b": scan_b, "method": result.method,
              "inlier_count": result.inlier_count, "match_count": result.match_count,
              "inlier_ratio": result.inlier_ratio, "residual_rms_m": result.residual_rms,
              **_transform_record(result.transform)}
    json.dump(record, stream, indent=2)
    stream.write("\n")
    return EXIT_OK


def load_sequence_scans(directory):
    """Load every scan; a bad one aborts with its index in the message."""
    meta = load_sequence(directory)
    if len(meta.scan_paths) != len(meta.poses):
        raise FormatError(f"{directory}: {len(meta.scan_paths)} scans but "
                          f"{len(meta.poses)} poses")
    scans = []
    for i, path in enumerate(meta.scan_paths):
        try:
            scans.append(load_scan(path))
        except (FormatError, OSError) as exc:
            raise FormatError(f"scan index {i} ({path}): {exc}") from None
    return scans, meta.poses


def cmd_eval_sequence(sequence_dir, config, output_dir, stream=None):
    """Write metrics, pairs, PR curve, similarity CSVs and the VLAD matrices."""
    scans, poses = load_sequence_scans(sequence_dir)
    name = os.path.basename(os.path.normpath(sequence_dir))
    report = evaluate_sequence(scans, poses, config)
    metrics, outcomes, pr = report.metrics, report.pairs, report.pr_curve
    os.makedirs(output_dir, exist_ok=True)
    write_matrix(os.path.join(output_dir, "vocabulary.bin"), report.vocabulary.centroids)
    write_matrix(os.path.join(output_dir, "database.bin"), report.database.matrix)

    with open(os.path.join(output_dir, "metrics.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "sequence", "value", "unit", "status"])
        for key in METRIC_NAMES:
            value = metrics[key]
            w.writerow([key, name, _fmt(value), METRIC_UNITS[key],
                        "undefined" if value is None else "ok"])

    with open(os.path.join(output_dir, "pairs.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PAIR_COLUMNS)
        for o in outcomes:
            w.writerow([_fmt(v) for v in (
                o.pair_id, o.query, o.candidate, o.gt_distance, o.rotation_error,
                o.translation_error, o.inlier_count, o.match_count, o.residual_rms,
                o.aux_residual, o.method, o.success, o.status)])

    with open(os.path.join(output_dir, "pr_curve.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "recall", "precision"])
        for rank, (r, p) in enumerate(pr, 1):
            w.writerow([rank, _fmt(r), _fmt(p)])

    with open(os.path.join(output_dir, "similarity.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query", "candidate", "similarity", "label"])
        for r in report.records:
            w.writerow([r.query, r.candidate, _fmt(r.score),
                        "positive" if r.is_true_positive else "negative"])

    if stream is not None:
        stream.write(summary_table(name, metrics))
    return EXIT_OK


def summary_table(name, metrics):
    width = max(len(k) for k in METRIC_NAMES)
    lines = [f"sequence {name}"]
    for key in METRIC_NAMES:
        value = metrics[key]
        shown = "undefined" if value is None else f"{value:.4f} {METRIC_UNITS[key]}"
        lines.append(f"  {key:<{width}}  {shown}")
    return "\n".join(lines) + "\n"


def cmd_synth_bench(spec_file, trials, config, output=None, trials_output=None):
    spec = load_scene_spec(spec_file)
    rows = run_trials(spec, trials, config)
    summary = summarize(rows)
    fh, own = _open_out(output)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for name, removal, weighting in VARIANTS:
            if name not in summary:
                continue
            s = summary[name]
            w.writerow([name, int(removal), int(weighting), s["trials"],
                        _fmt(s["success_rate"]), _fmt(s["rme_deg"]), _fmt(s["tme_m"]),
                        _fmt(s["median_rotation_error_deg"]),
                        _fmt(s["median_translation_error_m"]),
                        _fmt(s["mean_inlier_ratio"])])
    finally:
        if own:
            fh.close()
    if trials_output:
        with open(trials_output, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BENCH_COLUMNS)
            for r in rows:
                w.writerow([_fmt(v) for v in (
                    r.trial, r.variant, r.seed, r.success, r.rotation_error,
                    r.translation_error, r.inlier_count, r.match_count, r.inlier_ratio,
                    r.status)])
    return EXIT_OK


def cmd_synth_sequence(output_dir, seed=0, num_scans=50):
    loop = min(36, num_scans)
    scans, poses = generate_loop_sequence(LoopSequenceSpec(seed=seed, num_scans=num_scans,
                                                           loop_scans=loop))
    write_sequence(output_dir, scans, poses)
    return EXIT_OK


def cmd_synth_scene(spec_file, output_prefix):
    spec = load_scene_spec(spec_file) if spec_file else SceneSpec()
    scene = generate_scene(spec)
    write_scan(output_prefix + ".bin", scene.cloud)
    write_labels_csv(output_prefix + "_labels.csv", scene)
    return EXIT_OK


# -- argument handling ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="geocorr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(sp):
        sp.add_argument("--config", help="INI file overlaid on the defaults")
        sp.set_defaults(profile=None)
        return sp

    g = with_config(sub.add_parser("ground", help="per-point ground probability CSV"))
    g.add_argument("scan")
    g.add_argument("-o", "--output", help="CSV path (default stdout)")

    r = with_config(sub.add_parser("register", help="register two scans, JSON to stdout"))
    r.add_argument("scan_a", help="source scan (the pose maps it onto scan_b)")
    r.add_argument("scan_b")

    e = with_config(sub.add_parser("eval-sequence", help="retrieval and registration metrics"))
    e.add_argument("--profile", help="bundled override profile, e.g. loop_sequence")
    e.add_argument("sequence_dir", nargs="?", help="defaults to [run] sequence_dir")
    e.add_argument("-o", "--output-dir", help="defaults to [run] output_dir")
    e.add_argument("--workers", type=int, help="override [run] workers")

    b = with_config(sub.add_parser("synth-bench", help="ground-handling ablation on synthetic pairs"))
    b.add_argument("spec_file", help="INI file with a [scene] section")
    b.add_argument("--profile", default="synthetic_scene",
                   help="bundled override profile (default synthetic_scene)")
    b.add_argument("--trials", type=int, default=50)
    b.add_argument("-o", "--output", help="summary CSV path (default stdout)")
    b.add_argument("--trials-output", help="optional per-trial CSV path")

    s = sub.add_parser("synth-sequence", help="write a synthetic looping sequence")
    s.add_argument("output_dir")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--num-scans", type=int, default=50)

    c = sub.add_parser("synth-scene", help="write one synthetic scene and its labels")
    c.add_argument("output_prefix", help="writes <prefix>.bin and <prefix>_labels.csv")
    c.add_argument("--spec-file", help="INI file with a [scene] section")

    sub.add_parser("default-config", help="print the reference configuration")
    return p


def _run(args, parser):
    if args.command == "default-config":
        sys.stdout.write(default_config_text())
        return EXIT_OK
    if args.command == "synth-sequence":
        if args.num_scans < 1:
            parser.error("--num-scans must be >= 1")
        return cmd_synth_sequence(args.output_dir, args.seed, args.num_scans)
    if args.command == "synth-scene":
        return cmd_synth_scene(args.spec_file, args.output_prefix)

    profile = profile_path(args.profile) if args.profile else None
    config = load_config(args.config, profile=profile)
    if args.command == "ground":
        return cmd_ground(args.scan, config, args.output)
    if args.command == "register":
        return cmd_register(args.scan_a, args.scan_b, config)
    if args.command == "eval-sequence":
        if args.workers is not None:
            if args.workers < 1:
                parser.error("--workers must be >= 1")
            config = config.replace(workers=args.workers)
        seq = args.sequence_dir or config.sequence_dir
        out = args.output_dir or config.output_dir
        if not seq or not out:
            parser.error("eval-sequence needs a sequence dir and an output dir")
        return cmd_eval_sequence(seq, config, out, sys.stdout)
    if args.command == "synth-bench":
        if args.trials < 0:
            parser.error("--trials must be >= 0")
        return cmd_synth_bench(args.spec_file, args.trials, config, args.output,
                               args.trials_output)
    parser.error(f"unknown command {args.command}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args, parser)
    except GeocorrError as exc:
        print(f"geocorr {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        where = exc.filename if exc.filename is not None else ""
        print(f"geocorr {args.command}: {where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
