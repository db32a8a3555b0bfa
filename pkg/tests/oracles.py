"""Independent reference computations used by several test modules."""

import numpy as np
from scipy.optimize import minimize


def uot_objective_direct(Z, K, lam, rho, W=None):
    """Objective written out term by term, no shared code with the package."""
    Y = Z if W is None else W * Z
    n = K.shape[0]
    u = 1.0 / n

    def kl(p):
        return np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0) / u), 0.0) - p + u)

    ent = np.sum(np.where(Y > 0, Y * (np.log(np.where(Y > 0, Y, 1.0)) - 1.0), 0.0))
    return float(np.sum(K * Y) + lam * ent + rho * (kl(Y.sum(1)) + kl(Y.sum(0))))


def minimize_uot(K, lam, rho, support=None):
    """Minimize over the entries in ``support`` (all by default) in log space."""
    n = K.shape[0]
    support = np.ones_like(K, bool) if support is None else support
    free = np.flatnonzero(support.ravel())

    def unpack(x):
        Z = np.zeros(n * n)
        Z[free] = np.exp(x)
        return Z.reshape(n, n)

    def f(x):
        return uot_objective_direct(unpack(x), K, lam, rho)

    def grad(x):
        Z = unpack(x)
        r = np.log(Z.sum(1) * n)
        c = np.log(Z.sum(0) * n)
        with np.errstate(divide="ignore"):
            g = K + lam * np.log(np.where(Z > 0, Z, 1.0)) + rho * (r[:, None] + c[None, :])
        return (g.ravel()[free]) * np.exp(x)

    x0 = np.full(len(free), np.log(1.0 / n ** 2))
    res = minimize(f, x0, jac=grad, method="BFGS", options={"gtol": 1e-13, "maxiter": 20000})
    return unpack(res.x), res.fun
