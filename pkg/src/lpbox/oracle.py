"""
Exhaustive search for the minimum PSL or ISL over all binary sequence sets.

The walk visits the ``2^(NM-1)`` matrices with ``x[0, 0] = +1`` (negation
leaves every correlation unchanged) in Gray-code order, so consecutive
matrices differ in one entry and the correlation table is updated in
``O(M |L|)`` integer operations per step.
"""

from __future__ import annotations

import enum
from concurrent.futures import ProcessPoolExecutor
from typing import NamedTuple

import numba
import numpy as np

from .correlation import LagPlan
from .sequences import ConfigError, SequenceSet, ShiftSpec, as_matrix, validate_binary

MAX_BITS = 26


class Metric(str, enum.Enum):
    PSL = "psl"
    ISL = "isl"

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, Metric):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"metric: unknown metric {value!r}") from None


class OracleSizeError(ConfigError):
    """Instance too large for exhaustive search."""


class OracleResult(NamedTuple):
    value: int
    argmin: SequenceSet
    ties: int


def _check_size(n, m):
    if n * m > MAX_BITS:
        raise OracleSizeError(f"exhaustive search limited to N*M <= {MAX_BITS}, got {n * m}")


@numba.njit(cache=True)
def _full_table(x, lags, periodic):
    n, m = x.shape
    nl = lags.size
    c = np.zeros((m, m, nl), dtype=np.int64)
    for i in range(m):
        for j in range(m):
            for t in range(nl):
                l = lags[t]
                s = 0
                for k in range(n):
                    q = k - l
                    if q < 0:
                        if not periodic:
                            continue
                        q += n
                    s += x[k, i] * x[q, j]
                c[i, j, t] = s
    return c


@numba.njit(cache=True)
def _flip(x, c, a, p, lags, periodic):
    # negate x[p, a] and patch every correlation that contains it
    n, m = x.shape
    v = x[p, a]
    for t in range(lags.size):
        l = lags[t]
        q = p - l
        if q < 0 and periodic:
            q += n
        if q >= 0:
            for j in range(m):
                if j == a and l == 0:
                    continue
                c[a, j, t] -= 2 * v * x[q, j]
        q = p + l
        if q >= n and periodic:
            q -= n
        if q < n:
            for i in range(m):
                if i == a and l == 0:
                    continue
                c[i, a, t] -= 2 * x[q, i] * v
    x[p, a] = -v


@numba.njit(cache=True)
def _score(c, lags, metric):
    m = c.shape[0]
    best = 0
    for i in range(m):
        for j in range(m):
            for t in range(lags.size):
                if i == j and lags[t] == 0:
                    continue
                v = c[i, j, t]
                if metric == 0:
                    if abs(v) > best:
                        best = abs(v)
                else:
                    best += v * v
    return best


@numba.njit(cache=True)
def _code(x):
    # bit b (entry b = col * N + row) set where the entry is -1
    n, m = x.shape
    code = 0
    for col in range(m):
        for row in range(n):
            if x[row, col] < 0:
                code |= 1 << (col * n + row)
    return code


@numba.njit(cache=True)
def _search_block(n, m, lags, periodic, metric, prefix, n_low):
    """Scan all patterns of the low bits 1..n_low with the high bits fixed by `prefix`."""
    nb = n * m
    x = np.ones((n, m), dtype=np.int64)
    for b in range(n_low + 1, nb):
        if (prefix >> (b - n_low - 1)) & 1:
            x[b % n, b // n] = -1
    c = _full_table(x, lags, periodic)
    best = _score(c, lags, metric)
    best_code = _code(x)
    ties = 1
    total = 1 << n_low
    for g in range(1, total):
        # bit that changes between gray(g - 1) and gray(g)
        t = g
        bit = 0
        while (t & 1) == 0:
            t >>= 1
            bit += 1
        b = bit + 1
        _flip(x, c, b // n, b % n, lags, periodic)
        s = _score(c, lags, metric)
        if s < best:
            best = s
            best_code = _code(x)
            ties = 1
        elif s == best:
            ties += 1
            cd = _code(x)
            if cd < best_code:
                best_code = cd
    return best, best_code, ties


def _decode(code, n, m):
    x = np.ones((n, m))
    for b in range(n * m):
        if (code >> b) & 1:
            x[b % n, b // n] = -1.0
    return x


def _block_args(n, m, shift, metric, split_bits):
    n_free = n * m - 1
    split_bits = max(0, min(int(split_bits), n_free))
    n_low = n_free - split_bits
    lags = np.asarray(shift.lags, dtype=np.int64)
    return [(n, m, lags, shift.periodic, 0 if metric is Metric.PSL else 1, prefix, n_low)
            for prefix in range(1 << split_bits)]


def _run_block(args):
    return _search_block(*args)


def exhaustive_min(n: int, m: int, shift: ShiftSpec, metric="psl",
                   workers: int = 1, split_bits: int = 0) -> OracleResult:
    """
    Global minimum of PSL or ISL over all binary ``N x M`` matrices.

    Parameters
    ----------
    n, m : int
        Size, with ``N * M <= 26``.
    shift : ShiftSpec
    metric : {"psl", "isl"}
    workers : int
        Processes for the partitions; results are merged in partition order.
    split_bits : int
        Number of high bits used to partition the search.

    Returns
    -------
    OracleResult
        ``value``; the argmin with the smallest bit code (bit ``col*N + row``
        set where the entry is -1); ``ties``, the number of minimizers over the
        full space including negations.
    """
    _check_size(n, m)
    if shift.n_len != n:
        raise ConfigError(f"intervals: lag set built for N={shift.n_len}, not N={n}")
    metric = Metric.parse(metric)
    blocks = _block_args(n, m, shift, metric, split_bits)
    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_block, blocks))
    else:
        parts = [_run_block(b) for b in blocks]
    best = min(p[0] for p in parts)
    code = min(p[1] for p in parts if p[0] == best)
    ties = sum(p[2] for p in parts if p[0] == best)
    return OracleResult(int(best), SequenceSet(_decode(code, n, m)), 2 * int(ties))


def score(x, shift: ShiftSpec, metric="psl") -> int:
    """Integer PSL or ISL of a binary matrix."""
    if not validate_binary(x):
        raise ValueError("candidate must be binary")
    xi = as_matrix(x).astype(np.int64)
    lags = np.asarray(shift.lags, dtype=np.int64)
    c = _full_table(xi, lags, shift.periodic)
    return int(_score(c, lags, 0 if Metric.parse(metric) is Metric.PSL else 1))


def verify_candidate(x, shift: ShiftSpec, metric="psl") -> tuple:
    """
    Compare a binary candidate against the exhaustive optimum.

    Returns
    -------
    (value, optimum, gap) with ``gap = value - optimum >= 0``.
    """
    x = as_matrix(x)
    _check_size(*x.shape)
    value = score(x, shift, metric)
    best = exhaustive_min(x.shape[0], x.shape[1], shift, metric).value
    return value, best, value - best


def all_minimizers(n: int, m: int, shift: ShiftSpec, metric="psl", max_bits: int = 16):
    """
    Every minimizer by direct enumeration (no incremental updates).

    Intended for small instances; returns ``(value, array of shape (T, N, M))``.
    """
    if n * m > max_bits:
        raise OracleSizeError(f"direct enumeration limited to N*M <= {max_bits}")
    metric = Metric.parse(metric)
    codes = np.arange(1 << (n * m))
    bits = (codes[:, None] >> np.arange(n * m)) & 1
    xs = (1 - 2 * bits).reshape(-1, m, n).transpose(0, 2, 1).astype(float)
    plan = LagPlan.build(m, shift)
    side = ~plan.index.mainlobe
    vals = np.empty(len(xs), dtype=np.int64)
    for start in range(0, len(xs), 4096):
        chunk = xs[start:start + 4096]
        r = np.stack([plan.correlations(x) for x in chunk])[:, side]
        r = np.rint(r).astype(np.int64)
        vals[start:start + 4096] = np.abs(r).max(axis=1) if metric is Metric.PSL else (r * r).sum(axis=1)
    best = vals.min()
    return int(best), xs[vals == best]


def gray_walk(n: int, m: int, shift: ShiftSpec):
    """
    Yield ``(x, table)`` along the Gray-code walk with incremental updates.

    ``table[i, j, t]`` is the correlation of columns i, j at ``shift.lags[t]``.
    Copies are yielded, so callers may keep them.
    """
    lags = np.asarray(shift.lags, dtype=np.int64)
    x = np.ones((n, m), dtype=np.int64)
    c = _full_table(x, lags, shift.periodic)
    yield x.copy(), c.copy()
    for g in range(1, 1 << (n * m - 1)):
        b = (g & -g).bit_length()
        _flip(x, c, b // n, b % n, lags, shift.periodic)
        yield x.copy(), c.copy()


def full_table(x, shift: ShiftSpec) -> np.ndarray:
    """Correlation table recomputed from scratch, for comparison with `gray_walk`."""
    return _full_table(np.asarray(as_matrix(x), dtype=np.int64),
                       np.asarray(shift.lags, dtype=np.int64), shift.periodic)
