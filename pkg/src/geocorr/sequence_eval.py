"""End-to-end evaluation of one scan sequence: retrieval, then registration."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import NamedTuple, Optional

import numpy as np

from .config import derive_seed
from .correspondence import correspondence_aux_residual, geometric_weights
from .errors import GeocorrError, UndefinedMetricError
from .evaluation import (all_pair_records, ap_metric_1, ap_metric_2, label_pairs, max_f1, pose_errors,
                         pr_curve, recall_at_k, registration_summary, top1_records)
from .global_desc import DescriptorDatabase, aggregate, scan_descriptors, train_vocabulary
from .registration import correspond_pair, register_correspondence
from .synth_harness import relative_transform

METRIC_NAMES = ("ap_metric_1", "ap_metric_2", "max_f1", "recall_at_1_pct",
                "recall_at_5_pct", "success_rate_pct", "rme_deg", "tme_m")

PAIR_COLUMNS = ["pair_id", "query", "candidate", "gt_distance_m", "rotation_error_deg",
                "translation_error_m", "inlier_count", "match_count", "residual_rms_m",
                "aux_residual_m", "method", "success", "status"]


class PairOutcome(NamedTuple):
    pair_id: int
    query: int
    candidate: int
    gt_distance: float
    rotation_error: Optional[float]
    translation_error: Optional[float]
    inlier_count: int
    match_count: int
    residual_rms: Optional[float]
    aux_residual: Optional[float]
    method: str
    success: bool
    status: str
    transform: object


class SequenceReport(NamedTuple):
    metrics: dict
    pairs: list
    pr_curve: list
    records: list
    vocabulary: object
    database: object


def build_database(scans, config):
    """Train the vocabulary on every scan and aggregate one VLAD per scan."""
    local = [scan_descriptors(scan, config) for scan in scans]
    k = min(config.vocab_size, sum(len(d) for d in local))
    vocab = train_vocabulary(local, k, derive_seed(config.seed, "vocabulary"),
                             config.vocab_max_iters)
    return vocab, DescriptorDatabase((i, aggregate(d, vocab)) for i, d in enumerate(local))


def registration_pairs(poses, labels):
    """For each query with a positive, its closest positive candidate."""
    xyz = np.array([p.translation for p in poses])
    pairs = []
    for q in sorted({q for q, _ in labels.positives}):
        cands = sorted(c for qq, c in labels.positives if qq == q)
        d = np.linalg.norm(xyz[cands] - xyz[q], axis=1)
        c = cands[int(np.argmin(d))]
        pairs.append((q, c, float(d.min())))
    return pairs


def _register_one(job):
    pair_id, q, c, dist, cloud_q, cloud_c, T_gt, config = job
    try:
        corr = correspond_pair(cloud_q, cloud_c, config)
        result = register_correspondence(corr, config)
    except GeocorrError as exc:
        return PairOutcome(pair_id, q, c, dist, None, None, 0, 0, None, None,
                           config.pose_method, False, type(exc).__name__, None)
    rot, trans = pose_errors(result.transform, T_gt)
    try:
        W = geometric_weights(corr.keysA, corr.keysB, T_gt, config.overlap_radius)
        aux = correspondence_aux_residual(corr.weighted_plan, W, corr.keysA, corr.keysB, T_gt)
    except GeocorrError:
        aux = None
    ok = rot < config.success_rotation_deg and trans < config.success_translation_m
    return PairOutcome(pair_id, q, c, dist, rot, trans, result.inlier_count,
                       result.match_count, result.residual_rms, aux, result.method, ok,
                       "ok", result.transform)


def _metric(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetricError:
        return None


def evaluate_sequence(scans, poses, config):
    """Evaluate retrieval and registration on one sequence.

    ``metrics`` maps each name in :data:`METRIC_NAMES` to a float, or to
    ``None`` when the metric is undefined for this sequence.
    """
    labels = label_pairs(poses, config.positive_radius, config.negative_radius,
                         config.exclusion_window)
    vocab, db = build_database(scans, config)
    metrics = dict.fromkeys(METRIC_NAMES)
    if labels.positives:
        metrics["ap_metric_1"] = _metric(ap_metric_1, db, labels)
        metrics["ap_metric_2"] = _metric(ap_metric_2, db, labels)
        records = top1_records(db, labels)
        metrics["max_f1"] = max_f1(records)[0] if records else None
        metrics["recall_at_1_pct"] = _metric(recall_at_k, db, labels, 1, config.exclusion_window)
        metrics["recall_at_5_pct"] = _metric(recall_at_k, db, labels, 5, config.exclusion_window)
        pr = pr_curve(records)
    else:
        pr = []
    pair_records = all_pair_records(db, labels)

    jobs = [(pid, q, c, d, scans[q], scans[c], relative_transform(poses[q], poses[c]), config)
            for pid, (q, c, d) in enumerate(registration_pairs(poses, labels))]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_register_one, jobs))
    else:
        outcomes = [_register_one(job) for job in jobs]
    outcomes.sort(key=lambda o: o.pair_id)

    if outcomes:
        summary = registration_summary(
            [(o.transform, relative_transform(poses[o.query], poses[o.candidate]))
             for o in outcomes],
            config.success_rotation_deg, config.success_translation_m,
            config.error_averaging)
        metrics["success_rate_pct"] = summary.success_rate
        metrics["rme_deg"] = summary.rme
        metrics["tme_m"] = summary.tme
    return SequenceReport(metrics, outcomes, pr, pair_records, vocab, db)
