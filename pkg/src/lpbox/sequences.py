"""
Domain types for binary sequence set design.

A sequence set is an ``N x M`` real matrix whose columns are the sequences.
Lags are non-negative integers; the pair-lag index set enumerates every
``(i, j, l)`` with ``i, j`` in ``0..M-1`` and ``l`` in the configured lag set.
Indices are 0-based throughout the library (files use 1-based pair indices).
"""

from __future__ import annotations

import ast
import enum
import fractions
import re
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration (bad lag set, sizes or solver parameters)."""


class Mode(str, enum.Enum):
    APERIODIC = "aperiodic"
    PERIODIC = "periodic"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"mode: unknown correlation mode {value!r}") from None


@dataclass(frozen=True)
class SequenceSet:
    """
    Sequence set stored column-wise.

    Parameters
    ----------
    data : ndarray, shape (N, M)
        Real entries; a 1-D array is promoted to a single column.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ConfigError("sequence set must be a 2-D array")
        n, m = arr.shape
        if n < 2 or m < 1:
            raise ConfigError(f"sequence set needs N >= 2 and M >= 1, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n_len(self) -> int:
        return self.data.shape[0]

    @property
    def m_count(self) -> int:
        return self.data.shape[1]

    @property
    def binary(self) -> bool:
        return validate_binary(self)

    def __eq__(self, other):
        if not isinstance(other, SequenceSet):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.data.shape, self.data.tobytes()))


def as_matrix(x) -> np.ndarray:
    """Return the ``(N, M)`` float matrix behind a SequenceSet or array."""
    if isinstance(x, SequenceSet):
        return x.data
    arr = np.asarray(x, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


def validate_binary(x) -> bool:
    """True iff every entry is exactly +1 or -1."""
    arr = as_matrix(x)
    return bool(np.all((arr == 1.0) | (arr == -1.0)))


def _normalize_intervals(intervals, n_len):
    ranges = []
    for item in intervals:
        if np.ndim(item) == 0:
            a = b = int(item)
        else:
            a, b = (int(v) for v in item)
        if a > b:
            raise ConfigError(f"intervals: empty range [{a}, {b}]")
        if a < 0 or b > n_len - 1:
            raise ConfigError(f"intervals: range [{a}, {b}] outside [0, {n_len - 1}]")
        ranges.append((a, b))
    if not ranges:
        raise ConfigError("intervals: lag set is empty")
    ranges.sort()
    merged = [list(ranges[0])]
    for a, b in ranges[1:]:
        if a <= merged[-1][1] + 1:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return tuple((a, b) for a, b in merged)


@dataclass(frozen=True)
class ShiftSpec:
    """
    Correlation mode and lag set.

    Parameters
    ----------
    n_len : int
        Sequence length N.
    intervals : sequence of (a, b) or int
        Inclusive lag ranges; overlapping or adjacent ranges are merged.
    mode : Mode or str
        ``"aperiodic"`` or ``"periodic"``.
    """

    n_len: int
    intervals: tuple
    mode: Mode = Mode.APERIODIC
    lags: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_len) < 2:
            raise ConfigError(f"n: sequence length must be >= 2, got {self.n_len}")
        object.__setattr__(self, "n_len", int(self.n_len))
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        object.__setattr__(self, "intervals", _normalize_intervals(self.intervals, self.n_len))
        lags = np.concatenate([np.arange(a, b + 1) for a, b in self.intervals])
        lags.setflags(write=False)
        object.__setattr__(self, "lags", lags)

    @property
    def periodic(self) -> bool:
        return self.mode is Mode.PERIODIC

    @property
    def n_lags(self) -> int:
        return len(self.lags)

    @classmethod
    def from_expression(cls, n_len: int, expr: str, mode="aperiodic") -> "ShiftSpec":
        return cls(n_len, parse_intervals(expr, n_len), mode)

    def expression(self) -> str:
        return ",".join(f"{a}:{b}" for a, b in self.intervals)


class PairLagIndex(NamedTuple):
    i: int
    j: int
    l: int


def design_target(o: PairLagIndex, n_len: int) -> float:
    """Desired correlation value: N on the mainlobe (i == j, l == 0), else 0."""
    return float(n_len) if (o.i == o.j and o.l == 0) else 0.0


def enumerate_index_set(m_count: int, shift: ShiftSpec) -> list:
    """All ``(i, j, l)`` in lexicographic order, ``M**2 * |L|`` of them."""
    if m_count < 1:
        raise ConfigError("m: number of sequences must be >= 1")
    if shift.n_lags < 1:
        raise ConfigError("intervals: lag set is empty")
    return [PairLagIndex(i, j, int(l))
            for i in range(m_count) for j in range(m_count) for l in shift.lags]


class IndexArrays(NamedTuple):
    """Column form of the index set, aligned with `enumerate_index_set`."""
    i: np.ndarray
    j: np.ndarray
    l: np.ndarray
    target: np.ndarray
    mainlobe: np.ndarray

    def __len__(self):
        return len(self.i)


def index_arrays(m_count: int, shift: ShiftSpec, order: Sequence[PairLagIndex] | None = None) -> IndexArrays:
    """Integer arrays for the index set (or for an explicit ordering of it)."""
    if order is None:
        order = enumerate_index_set(m_count, shift)
    ii = np.array([o.i for o in order], dtype=np.intp)
    jj = np.array([o.j for o in order], dtype=np.intp)
    ll = np.array([o.l for o in order], dtype=np.intp)
    main = (ii == jj) & (ll == 0)
    target = np.where(main, float(shift.n_len), 0.0)
    return IndexArrays(ii, jj, ll, target, main)


# interval expressions such as "1:N-1" or "1:N/4,N/2:3N/4"

_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name,
            ast.Add, ast.Sub, ast.Mult, ast.Div, ast.FloorDiv, ast.USub, ast.UAdd)


def _eval_lag(text: str, n_len: int) -> int:
    src = re.sub(r"(\d)\s*([Nn(])", r"\1*\2", text.strip())
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError:
        raise ConfigError(f"intervals: cannot parse {text!r}") from None

    def ev(node):
        if not isinstance(node, _ALLOWED):
            raise ConfigError(f"intervals: unsupported token in {text!r}")
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, int):
                raise ConfigError(f"intervals: non-integer literal in {text!r}")
            return fractions.Fraction(node.value)
        if isinstance(node, ast.Name):
            if node.id not in ("N", "n"):
                raise ConfigError(f"intervals: unknown symbol {node.id!r}")
            return fractions.Fraction(n_len)
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if not isinstance(node.op, _ALLOWED):
            raise ConfigError(f"intervals: unsupported operator in {text!r}")
        a, b = ev(node.left), ev(node.right)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        if isinstance(node.op, ast.Mult):
            return a * b
        if b == 0:
            raise ConfigError(f"intervals: division by zero in {text!r}")
        return a / b if isinstance(node.op, ast.Div) else fractions.Fraction(a // b)

    return int(np.floor(ev(tree)))


def parse_intervals(expr: str, n_len: int) -> list:
    """
    Resolve an interval expression against a length.

    Ranges are comma separated, each ``a:b`` (inclusive) or a single lag.
    Bounds may use ``N`` with ``+ - * /``; fractional values are floored.

    >>> parse_intervals("1:N/4,N/2:3N/4", 512)
    [(1, 128), (256, 384)]
    """
    if not isinstance(expr, str) or not expr.strip():
        raise ConfigError("intervals: empty expression")
    out = []
    for part in expr.split(","):
        bounds = part.split(":")
        if len(bounds) == 1:
            v = _eval_lag(bounds[0], n_len)
            out.append((v, v))
        elif len(bounds) == 2:
            out.append((_eval_lag(bounds[0], n_len), _eval_lag(bounds[1], n_len)))
        else:
            raise ConfigError(f"intervals: malformed range {part!r}")
    return out
