"""
Aperiodic and periodic correlations, residuals and sidelobe metrics.

The correlation of columns ``i`` and ``j`` at lag ``l >= 0`` is

    aperiodic:  r = sum_{k >= l} x_i[k] * x_j[k - l]
    periodic:   r = sum_k       x_i[k] * x_j[(k - l) mod N]

Shift matrices are never formed; all products are shifted dot products.
"""

from __future__ import annotations

import numpy as np

from .sequences import (IndexArrays, Mode, PairLagIndex, ShiftSpec, as_matrix,
                        design_target, index_arrays)


def correlate(x, i: int, j: int, l: int, mode="aperiodic") -> float:
    """Correlation of columns ``i`` and ``j`` of `x` at lag `l`."""
    x = as_matrix(x)
    n = x.shape[0]
    if not 0 <= l <= n - 1:
        raise ValueError(f"lag {l} outside [0, {n - 1}]")
    xi, xj = x[:, i], x[:, j]
    if Mode.parse(mode) is Mode.PERIODIC:
        return float(xi @ np.roll(xj, l))
    return float(xi[l:] @ xj[:n - l])


def correlation_profile(x, mode="aperiodic") -> np.ndarray:
    """
    All correlations at every lag.

    Returns
    -------
    ndarray, shape (M, M, N)
        ``out[i, j, l]`` is the correlation of columns i and j at lag l.
    """
    x = as_matrix(x)
    n, m = x.shape
    out = np.empty((m, m, n))
    periodic = Mode.parse(mode) is Mode.PERIODIC
    for l in range(n):
        if periodic:
            out[:, :, l] = x.T @ np.roll(x, l, axis=0)
        else:
            out[:, :, l] = x[l:].T @ x[:n - l]
    return out


class LagPlan:
    """
    Precomputed gather tables for evaluating many pair-lag terms at once.

    For term ``o = (i, j, l)`` the plan stores where to read ``x_j`` delayed by
    ``l`` and ``x_i`` advanced by ``l``, with zero masks in aperiodic mode.
    """

    def __init__(self, n_len: int, index: IndexArrays, periodic: bool):
        self.n_len = n_len
        self.index = index
        self.periodic = periodic
        pos = np.arange(n_len)
        delay = pos[None, :] - index.l[:, None]
        advance = pos[None, :] + index.l[:, None]
        if periodic:
            self.delay_idx = delay % n_len
            self.advance_idx = advance % n_len
            self.delay_mask = self.advance_mask = None
        else:
            self.delay_mask = delay >= 0
            self.advance_mask = advance < n_len
            self.delay_idx = np.where(self.delay_mask, delay, 0)
            self.advance_idx = np.where(self.advance_mask, advance, 0)
        self._flatten()

    def _flatten(self):
        # row-major offsets so a gather is one np.take on the raveled array
        rows = np.arange(len(self.index))[:, None] * self.n_len
        self._delay_flat = rows + self.delay_idx
        self._advance_flat = rows + self.advance_idx

    def subset(self, rows: slice) -> "LagPlan":
        """Plan restricted to a contiguous block of terms."""
        sub = object.__new__(LagPlan)
        sub.n_len, sub.periodic = self.n_len, self.periodic
        sub.index = type(self.index)(*(a[rows] for a in self.index))
        for name in ("delay_idx", "advance_idx", "delay_mask", "advance_mask"):
            val = getattr(self, name)
            setattr(sub, name, None if val is None else val[rows])
        sub._flatten()
        return sub

    @classmethod
    def build(cls, m_count: int, shift: ShiftSpec, order=None) -> "LagPlan":
        return cls(shift.n_len, index_arrays(m_count, shift, order), shift.periodic)

    def __len__(self):
        return len(self.index)

    def columns(self, xs):
        """Columns ``x_i`` and ``x_j`` per term, each of shape (K, N)."""
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 2:
            xt = xs.T
            return xt[self.index.i], xt[self.index.j]
        k = np.arange(xs.shape[0])
        return xs[k, :, self.index.i], xs[k, :, self.index.j]

    def delayed(self, v):
        """Row ``k`` of `v` shifted right by ``l_k`` (zero fill or cyclic wrap)."""
        out = np.take(np.ascontiguousarray(v).ravel(), self._delay_flat)
        return out if self.periodic else out * self.delay_mask

    def advanced(self, v):
        """Row ``k`` of `v` shifted left by ``l_k`` (zero fill or cyclic wrap)."""
        out = np.take(np.ascontiguousarray(v).ravel(), self._advance_flat)
        return out if self.periodic else out * self.advance_mask

    def correlations(self, xs) -> np.ndarray:
        """
        Correlation of every term.

        Parameters
        ----------
        xs : ndarray, shape (N, M) or (K, N, M)
            One shared point, or one point per term.
        """
        xi, xj = self.columns(xs)
        return (xi * self.delayed(xj)).sum(axis=1)

    def residuals(self, xs) -> np.ndarray:
        """Signed residual ``r_o - target_o`` per term."""
        return self.correlations(xs) - self.index.target


def residual_f(x, o: PairLagIndex, mode="aperiodic") -> float:
    """Absolute deviation of one correlation from its design target."""
    x = as_matrix(x)
    o = PairLagIndex(*o)
    return abs(correlate(x, o.i, o.j, o.l, mode) - design_target(o, x.shape[0]))


def residual_vector(x, shift: ShiftSpec) -> np.ndarray:
    """``f_o(x)`` for every term of the index set, in lexicographic order."""
    x = as_matrix(x)
    return np.abs(LagPlan.build(x.shape[1], shift).residuals(x))


def objective_psl_form(x, shift: ShiftSpec) -> float:
    """Sum over sequence pairs of the largest residual over the lag set."""
    x = as_matrix(x)
    m = x.shape[1]
    f = residual_vector(x, shift).reshape(m, m, shift.n_lags)
    return float(f.max(axis=2).sum())


def lq_smoothed_objective(x, shift: ShiftSpec, q: float) -> float:
    """Sum over pairs of the lq norm of residuals over the lag set."""
    x = as_matrix(x)
    m = x.shape[1]
    f = residual_vector(x, shift).reshape(m, m, shift.n_lags)
    return float((np.sum(f ** q, axis=2) ** (1.0 / q)).sum())


def objective_smooth_F(x, weights, shift: ShiftSpec) -> float:
    """Weighted sum of squared residuals."""
    f = residual_vector(x, shift)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != f.shape:
        raise ValueError(f"expected {f.size} weights, got {weights.size}")
    return float(weights @ f ** 2)


def sidelobes(x, shift: ShiftSpec) -> np.ndarray:
    """Correlations over the index set with the mainlobe terms removed."""
    x = as_matrix(x)
    plan = LagPlan.build(x.shape[1], shift)
    return plan.correlations(x)[~plan.index.mainlobe]


def isl(x, shift: ShiftSpec) -> float:
    """Integrated sidelobe level over the lag set (one-sided)."""
    s = sidelobes(x, shift)
    return float(s @ s)


def psl(x, shift: ShiftSpec) -> float:
    """Peak sidelobe level over the lag set."""
    s = sidelobes(x, shift)
    return float(np.abs(s).max()) if s.size else 0.0


def _db(value, scale):
    return 10.0 * np.log10(value / scale) if value > 0 else -np.inf


def islr_db(x, shift: ShiftSpec) -> float:
    """ISL normalized by M N^2, in dB (-inf for zero ISL)."""
    n, m = as_matrix(x).shape
    return float(_db(isl(x, shift), m * n * n))


def pslr_db(x, shift: ShiftSpec) -> float:
    """PSL^2 normalized by M N^2, in dB (-inf for zero PSL)."""
    n, m = as_matrix(x).shape
    return float(_db(psl(x, shift) ** 2, m * n * n))


def pslr_from_psl(psl_value: float, n_len: int, m_count: int = 1) -> float:
    return float(_db(psl_value ** 2, m_count * n_len * n_len))


def in_band_level_db(x, shift: ShiftSpec) -> float:
    """Mean squared sidelobe over the lag set relative to N^2, in dB."""
    s = sidelobes(x, shift)
    n = as_matrix(x).shape[0]
    return float(_db(float(s @ s) / max(s.size, 1), n * n))


def metrics(x, shift: ShiftSpec) -> dict:
    """ISL, PSL and their normalized dB forms."""
    return {"isl": isl(x, shift), "psl": psl(x, shift),
            "islr_db": islr_db(x, shift), "pslr_db": pslr_db(x, shift)}
