"""Soft correspondence by unbalanced optimal transport with geometric weights.

The solver minimizes

    <K, Z> + lam * sum Z (log Z - 1)
           + rho * (KL(Z 1 | u) + KL(Z^T 1 | u)),      u = 1/N,

with the generalized KL ``sum p log(p/q) - p + q``, using alternating
diagonal scaling carried out entirely on log-scaling vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import as_square, check_positive, frozen
from .errors import PreconditionError, UndefinedResidualError

MASS_EPSILON = 1e-8


@dataclass(frozen=True)
class UotParams:
    lam: float = 0.003
    rho: float = 1.0
    max_iters: int = 500
    tolerance: float = 1e-6

    def __post_init__(self):
        check_positive(self.lam, "lam")
        check_positive(self.rho, "rho")
        check_positive(self.tolerance, "tolerance")
        if self.max_iters < 1:
            raise PreconditionError("max_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class TransportPlan:
    values: np.ndarray
    converged: bool = True
    iterations_used: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise PreconditionError("transport plan must be 2-D")
        if not np.all(np.isfinite(vals)) or (vals.size and vals.min() < 0):
            raise PreconditionError("transport plan entries must be finite and >= 0")
        object.__setattr__(self, "values", frozen(vals))

    @property
    def shape(self):
        return self.values.shape


class SoftProjection(NamedTuple):
    points: np.ndarray
    row_mass: np.ndarray
    valid: np.ndarray


def generalized_kl(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.broadcast_to(np.asarray(q, dtype=np.float64), p.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p / q), 0.0)
    return float(np.sum(plogp - p + q))


def uot_objective(Z, K, lam, rho):
    """Objective value of plan ``Z`` for cost ``K`` (``0 log 0 = 0``)."""
    Z = np.asarray(Z, dtype=np.float64)
    n = Z.shape[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(Z > 0, Z * (np.log(Z) - 1.0), 0.0)
    u = 1.0 / n
    return float(np.sum(K * Z) + lam * ent.sum()
                 + rho * (generalized_kl(Z.sum(axis=1), u)
                          + generalized_kl(Z.sum(axis=0), u)))


def _logsumexp(X, axis):
    # scipy's version costs ~40 us per call, which dominates tiny problems
    m = X.max(axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.log(np.exp(X - m).sum(axis=axis)) + np.squeeze(m, axis=axis)


def _scaling_loop(log_kernel, params, callback=None):
    n = log_kernel.shape[0]
    log_u = -np.log(n)
    power = params.rho / (params.rho + params.lam)
    log_a = np.zeros(n)
    log_b = np.zeros(log_kernel.shape[1])
    converged = False
    it = 0

    def update(lse):
        # rows/columns with an empty kernel keep a neutral scaling
        return np.where(np.isfinite(lse), power * (log_u - lse), 0.0)

    with np.errstate(divide="ignore"):
        for it in range(1, params.max_iters + 1):
            new_a = update(_logsumexp(log_kernel + log_b[None, :], 1))
            log_b = update(_logsumexp(log_kernel + new_a[:, None], 0))
            delta = np.max(np.abs(new_a - log_a), initial=0.0)
            log_a = new_a
            if callback is not None:
                callback(np.exp(log_a[:, None] + log_kernel + log_b[None, :]))
            if delta < params.tolerance:
                converged = True
                break
    Z = np.exp(log_a[:, None] + log_kernel + log_b[None, :])
    return Z, converged, it


def solve_uot(K, params=UotParams(), callback=None):
    """Entropic unbalanced OT plan between uniform marginals.

    ``callback``, if given, receives the plan after every sweep.  A plan
    that did not reach ``params.tolerance`` within ``max_iters`` is returned
    with ``converged=False``.
    """
    K = as_square(K, "cost matrix")
    if not np.all(np.isfinite(K)):
        raise PreconditionError("cost matrix contains non-finite entries")
    if K.size and K.min() < 0:
        raise PreconditionError("cost matrix must be nonnegative")
    Z, converged, it = _scaling_loop(-K / params.lam, params, callback)
    return TransportPlan(Z, converged, it)


def solve_weighted_uot(K, W, params=UotParams()):
    """Minimize the objective in the substituted variable ``Y = W * Z``.

    ``Y`` solves the plain problem restricted to the support of ``W``;
    the returned plan is ``Z = Y / W`` there and zero where ``W == 0``.
    """
    K = as_square(K, "cost matrix")
    W = np.asarray(W, dtype=np.float64)
    if W.shape != K.shape:
        raise PreconditionError(f"weight shape {W.shape} != cost shape {K.shape}")
    if not np.all(np.isfinite(K)) or (K.size and K.min() < 0):
        raise PreconditionError("cost matrix must be finite and nonnegative")
    with np.errstate(divide="ignore"):
        log_kernel = np.where(W > 0, -K / params.lam, -np.inf)
    Y, converged, it = _scaling_loop(log_kernel, params)
    with np.errstate(divide="ignore", invalid="ignore"):
        Z = np.where(W > 0, Y / W, 0.0)
    return TransportPlan(Z, converged, it)


def weighted_uot_objective(Z, K, W, lam, rho):
    return uot_objective(np.asarray(W) * np.asarray(Z), K, lam, rho)


def geometric_weights(keysA, keysB, T_gt, overlap_radius=0.5):
    """Overlap indicator under ``T_gt`` times the two non-ground factors.

    ``W_ij = [|T a_i - b_j| <= r] * (1 - gA_i) * (1 - gB_j)``.
    """
    if len(keysA) != len(keysB):
        raise PreconditionError(
            f"keypoint sets differ in size: {len(keysA)} vs {len(keysB)}")
    check_positive(overlap_radius, "overlap_radius")
    dist = cdist(T_gt.apply(keysA.positions), keysB.positions)
    P = (dist <= overlap_radius).astype(np.float64)
    return P * np.outer(1.0 - keysA.ground_prob, 1.0 - keysB.ground_prob)


def apply_weights(plan, W):
    W = np.asarray(W, dtype=np.float64)
    if W.shape != plan.shape:
        raise PreconditionError(f"weight shape {W.shape} != plan shape {plan.shape}")
    return TransportPlan(plan.values * W, plan.converged, plan.iterations_used)


def ground_weights(keysA, keysB):
    """Inference-time weights: the non-ground factors alone."""
    return np.outer(1.0 - keysA.ground_prob, 1.0 - keysB.ground_prob)


def soft_projection(plan, keysB, mass_epsilon=MASS_EPSILON):
    C = plan.values
    if C.shape[1] != len(keysB):
        raise PreconditionError("plan columns must match keysB")
    mass = C.sum(axis=1)
    valid = mass > mass_epsilon
    proj = np.full((C.shape[0], 3), np.nan)
    proj[valid] = (C[valid] @ keysB.positions) / mass[valid, None]
    return SoftProjection(proj, mass, valid)


def correspondence_aux_residual(plan, W, keysA, keysB, T_gt,
                                mass_epsilon=MASS_EPSILON):
    """Mean weighted distance between soft projections and aligned keypoints.

    Each row contributes ``|proj_i - T_gt a_i| * max_j W_ij``; rows with no
    plan mass or zero weight are skipped.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.shape != plan.shape or plan.shape[0] != len(keysA):
        raise PreconditionError("plan, weights and keypoints have inconsistent sizes")
    proj = soft_projection(plan, keysB, mass_epsilon)
    row_weight = W.max(axis=1) if W.size else np.zeros(0)
    use = proj.valid & (row_weight > 0)
    if not use.any():
        raise UndefinedResidualError("no rows with both plan mass and positive weight")
    err = np.linalg.norm(proj.points[use] - T_gt.apply(keysA.positions[use]), axis=1)
    return float(np.mean(err * row_weight[use]))
