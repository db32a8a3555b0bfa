"""Loop-closure and registration metrics.

Retrieval is scored with average precision over two record sets (top-1
candidate per query, and every labeled pair), max F1 and recall@k.
Registration is scored by success rate under rotation/translation
thresholds and by mean rotation/translation error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import PreconditionError, UndefinedMetricError
from .core_geometry import compose, invert
from .global_desc import query_candidates

SUCCESS_ROTATION_DEG = 5.0
SUCCESS_TRANSLATION_M = 2.0


@dataclass(frozen=True)
class PairLabels:
    positives: frozenset
    negatives: frozenset
    positive_radius: float = 4.0
    negative_radius: float = 10.0

    def candidates(self, query):
        pos = sorted(c for q, c in self.positives if q == query)
        neg = sorted(c for q, c in self.negatives if q == query)
        return pos, neg

    def queries(self):
        return sorted({q for q, _ in self.positives | self.negatives})


class DetectionRecord(NamedTuple):
    query: int
    candidate: int
    score: float
    is_true_positive: bool


def label_pairs(poses, positive_radius=4.0, negative_radius=10.0, exclusion_window=0):
    """Label (query, candidate) pairs with candidate <= query - exclusion_window.

    Distance is measured between pose translations; pairs between the two
    radii get no label.
    """
    if len(poses) == 0:
        raise PreconditionError("label_pairs needs at least one pose")
    if not 0 < positive_radius <= negative_radius:
        raise PreconditionError("need 0 < positive_radius <= negative_radius")
    xyz = np.array([p.translation for p in poses])
    pos, neg = set(), set()
    for q in range(len(xyz)):
        last = q - max(exclusion_window, 1)
        if last < 0:
            continue
        d = np.linalg.norm(xyz[:last + 1] - xyz[q], axis=1)
        pos.update((q, int(c)) for c in np.flatnonzero(d < positive_radius))
        neg.update((q, int(c)) for c in np.flatnonzero(d > negative_radius))
    return PairLabels(frozenset(pos), frozenset(neg), positive_radius, negative_radius)


def _ranked(records):
    return sorted(records, key=lambda r: (-r.score, r.query, r.candidate))


def average_precision(records):
    """Step-interpolated AP: sum over the descending sweep of dR * P."""
    ranked = _ranked(records)
    n_pos = sum(r.is_true_positive for r in ranked)
    if n_pos == 0:
        return 0.0
    tp = 0
    ap = 0.0
    for n, r in enumerate(ranked, 1):
        if r.is_true_positive:
            tp += 1
            ap += (1.0 / n_pos) * (tp / n)
    return ap


def pr_curve(records):
    ranked = _ranked(records)
    n_pos = sum(r.is_true_positive for r in ranked)
    out, tp = [], 0
    for n, r in enumerate(ranked, 1):
        tp += r.is_true_positive
        out.append((tp / n_pos if n_pos else 0.0, tp / n))
    return out


def top1_records(db, labels):
    sims = {}
    M = db.matrix
    pos_index = {i: row for row, i in enumerate(db.indices)}
    records = []
    for q in labels.queries():
        pos, neg = labels.candidates(q)
        cands = sorted(pos + neg)
        if not cands:
            continue
        s = M[[pos_index[c] for c in cands]] @ M[pos_index[q]]
        best = int(np.argmax(s))
        c = cands[best]
        records.append(DetectionRecord(q, c, float(s[best]), c in set(pos)))
    return records


def all_pair_records(db, labels):
    M = db.matrix
    pos_index = {i: row for row, i in enumerate(db.indices)}
    records = []
    for q, c in sorted(labels.positives):
        records.append(DetectionRecord(q, c, float(M[pos_index[q]] @ M[pos_index[c]]), True))
    for q, c in sorted(labels.negatives):
        records.append(DetectionRecord(q, c, float(M[pos_index[q]] @ M[pos_index[c]]), False))
    return records


def ap_metric_1(db, labels):
    records = top1_records(db, labels)
    if not records:
        raise UndefinedMetricError("no query has a labeled candidate")
    return average_precision(records)


def ap_metric_2(db, labels):
    records = all_pair_records(db, labels)
    if not records:
        raise UndefinedMetricError("no labeled pairs")
    return average_precision(records)


def max_f1(records):
    """Best F1 over thresholds at the record scores; ties go to the lower threshold."""
    if not records:
        raise UndefinedMetricError("max_f1 needs at least one record")
    scores = np.array([r.score for r in records], dtype=np.float64)
    truth = np.array([r.is_true_positive for r in records], dtype=bool)
    n_pos = truth.sum()
    best_f1, best_thr = 0.0, float(scores.min())
    for thr in np.unique(scores):
        pred = scores >= thr
        tp = np.count_nonzero(pred & truth)
        if tp == 0:
            continue
        p, r = tp / pred.sum(), tp / n_pos
        f1 = 2 * p * r / (p + r)
        if f1 > best_f1:
            best_f1, best_thr = f1, float(thr)
    return best_f1, best_thr


def recall_at_k(db, labels, k, exclusion_window=0):
    """Percent of queries with a positive whose top-k list holds a positive."""
    queries = sorted({q for q, _ in labels.positives})
    if not queries:
        raise UndefinedMetricError("no query has a positive candidate")
    hits = 0
    for q in queries:
        pos = {c for qq, c in labels.positives if qq == q}
        ranked = query_candidates(db, db.vector(q), q, k, exclusion_window)
        hits += any(c in pos for c, _ in ranked)
    return 100.0 * hits / len(queries)


def pose_errors(T_est, T_gt):
    """(rotation error in degrees, translation error in meters)."""
    E = compose(T_est, invert(T_gt))
    cos = np.clip((np.trace(E.rotation) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.degrees(np.arccos(cos))), float(np.linalg.norm(T_est.translation - T_gt.translation))


class RegistrationSummary(NamedTuple):
    success_rate: float
    rme: Optional[float]
    tme: Optional[float]


def registration_summary(results, rotation_threshold=SUCCESS_ROTATION_DEG,
                         translation_threshold=SUCCESS_TRANSLATION_M, averaging="successful"):
    """Success rate (%) and mean errors; ``averaging`` is ``successful`` or ``all``.

    ``results`` holds ``(T_est, T_gt)`` pairs, or ``None`` for ``T_est`` when
    registration failed outright (counted as unsuccessful).  Undefined means
    are reported as ``None``.
    """
    if not results:
        raise UndefinedMetricError("registration_summary needs at least one result")
    rate_hits, pool = 0, []
    for T_est, T_gt in results:
        if T_est is None:
            continue
        rot, trans = pose_errors(T_est, T_gt)
        good = rot < rotation_threshold and trans < translation_threshold
        rate_hits += good
        if good or averaging == "all":
            pool.append((rot, trans))
    rate = 100.0 * rate_hits / len(results)
    if not pool:
        return RegistrationSummary(rate, None, None)
    arr = np.array(pool)
    return RegistrationSummary(rate, float(arr[:, 0].mean()), float(arr[:, 1].mean()))
