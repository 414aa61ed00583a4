"""
Gradients of squared pair-lag residuals and their Lipschitz constant.

For ``o = (i, j, l)`` the correlation is bilinear in the columns ``x_i`` and
``x_j``, so the gradient of ``(r_o - t_o)**2`` is nonzero only in those two
columns: column ``i`` receives ``x_j`` delayed by ``l`` and column ``j``
receives ``x_i`` advanced by ``l``, both scaled by ``2 (r_o - t_o)``.
"""

from __future__ import annotations

import numpy as np

from .correlation import LagPlan
from .sequences import PairLagIndex, ShiftSpec, as_matrix


def batched_gradients(plan: LagPlan, xs, out=None):
    """
    Residuals and gradients of ``f_o**2`` for every term of a plan.

    Parameters
    ----------
    plan : LagPlan
    xs : ndarray, shape (N, M) or (K, N, M)
        Evaluation point, shared or one per term.
    out : ndarray, shape (K, N, M), optional
        Buffer for the gradients.

    Returns
    -------
    res : ndarray, shape (K,)
        Signed residuals ``r_o - t_o``.
    grad : ndarray, shape (K, N, M)
    """
    xs = np.asarray(xs, dtype=float)
    k = len(plan)
    n, m = xs.shape[-2:]
    xi, xj = plan.columns(xs)
    xj_del = plan.delayed(xj)
    res = (xi * xj_del).sum(axis=1) - plan.index.target
    scale = 2.0 * res[:, None]
    if out is None:
        out = np.zeros((k, n, m))
    else:
        out[...] = 0.0
    rows = np.arange(k)
    out[rows, :, plan.index.i] = scale * xj_del
    # fancy-index add so i == j accumulates into one column
    out[rows, :, plan.index.j] += scale * plan.advanced(xi)
    return res, out


def grad_f_squared(x, o: PairLagIndex, mode="aperiodic") -> np.ndarray:
    """Gradient of the squared residual of one term, shape (N, M)."""
    x = as_matrix(x)
    n, m = x.shape
    o = PairLagIndex(*o)
    shift = ShiftSpec(n, [(o.l, o.l)], mode)
    plan = LagPlan.build(m, shift, order=[o])
    return batched_gradients(plan, x)[1][0]


def f_squared(x, o: PairLagIndex, mode="aperiodic") -> float:
    x = as_matrix(x)
    o = PairLagIndex(*o)
    shift = ShiftSpec(x.shape[0], [(o.l, o.l)], mode)
    plan = LagPlan.build(x.shape[1], shift, order=[o])
    return float(plan.residuals(x)[0] ** 2)


def lipschitz_constant(n_len: int, c: float = 1.0) -> float:
    """Gradient Lipschitz constant ``2 (N + 1) max(c, 1)**2`` used by the solver."""
    if c <= 0:
        raise ValueError("c must be positive")
    c_hat = max(float(c), 1.0)
    return 2.0 * (n_len + 1) * c_hat ** 2


def finite_difference_check(x, o: PairLagIndex, step: float = 1e-5, mode="aperiodic") -> float:
    """
    Compare the analytic gradient against central differences.

    Returns
    -------
    float
        Largest relative error over entries whose analytic magnitude exceeds
        1e-8 (0 if there are none).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.array(as_matrix(x), dtype=float)
    g = grad_f_squared(x, o, mode)
    num = np.empty_like(x)
    for idx in np.ndindex(*x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += step
        xm[idx] -= step
        num[idx] = (f_squared(xp, o, mode) - f_squared(xm, o, mode)) / (2 * step)
    keep = np.abs(g) > 1e-8
    if not keep.any():
        return 0.0
    return float(np.max(np.abs(num[keep] - g[keep]) / np.abs(g[keep])))

