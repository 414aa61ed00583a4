"""
Baseline sequences: LFSR m-sequences, seeded random binary sets and the
2 sqrt(N) peak-sidelobe benchmark.
"""

from __future__ import annotations

import numpy as np

from .sequences import ConfigError, SequenceSet

# primitive polynomials over GF(2), bit k = coefficient of x^k
PRIMITIVE_TAPS = {
    3: 0b1011,            # x^3 + x + 1
    4: 0b10011,           # x^4 + x + 1
    5: 0b100101,          # x^5 + x^2 + 1
    6: 0b1000011,         # x^6 + x + 1
    7: 0b10000011,        # x^7 + x + 1
    8: 0b100011101,       # x^8 + x^4 + x^3 + x^2 + 1
    9: 0b1000010001,      # x^9 + x^4 + 1
    10: 0b10000001001,    # x^10 + x^3 + 1
}


class NotPrimitiveError(ValueError):
    """The feedback polynomial does not generate a maximal-length sequence."""


def lfsr_bits(degree: int, taps: int, length: int) -> np.ndarray:
    """
    Output bits of a Fibonacci LFSR started from ``1, 0, ..., 0``.

    The recurrence is ``s[t + d] = sum_{k < d} c_k s[t + k] (mod 2)`` for the
    polynomial ``x^d + sum_k c_k x^k`` encoded in `taps`.
    """
    coeffs = [(taps >> k) & 1 for k in range(degree)]
    s = [1] + [0] * (degree - 1)
    while len(s) < length:
        t = len(s) - degree
        s.append(sum(c & s[t + k] for k, c in enumerate(coeffs)) & 1)
    return np.array(s[:length], dtype=np.int64)


def m_sequence(degree: int, taps: int | None = None) -> SequenceSet:
    """
    Maximal-length sequence of period ``2^degree - 1`` mapped 0 -> +1, 1 -> -1.

    Parameters
    ----------
    degree : int
    taps : int, optional
        Feedback polynomial as a bitmask including the ``x^degree`` term;
        defaults to the built-in table for degrees 3 to 10.

    Raises
    ------
    NotPrimitiveError
        The register state does not first return to its start after exactly
        ``2^degree - 1`` steps.
    """
    if degree < 2:
        raise ConfigError("degree: must be >= 2")
    if taps is None:
        if degree not in PRIMITIVE_TAPS:
            raise ConfigError(f"degree: no built-in polynomial for degree {degree}; pass taps")
        taps = PRIMITIVE_TAPS[degree]
    if taps >> degree != 1:
        raise ConfigError(f"taps: bitmask {taps:#b} is not a degree-{degree} polynomial")
    period = (1 << degree) - 1
    bits = lfsr_bits(degree, taps, period + degree)
    start = tuple(bits[:degree])
    first = next((t for t in range(1, period + 1) if tuple(bits[t:t + degree]) == start), None)
    if first != period:
        raise NotPrimitiveError(
            f"taps {taps:#b} give period {first if first else 'none'}, expected {period}")
    return SequenceSet(1.0 - 2.0 * bits[:period])


def benchmark_psl_2sqrtN(n: int) -> float:
    """Peak sidelobe level 2 sqrt(N) of the best structured sequence families."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 * np.sqrt(n)


def random_binary(n: int, m: int = 1, seed=None) -> SequenceSet:
    """Uniform +-1 matrix of shape (N, M) from a seeded generator."""
    rng = np.random.default_rng(seed)
    return SequenceSet(rng.integers(0, 2, size=(n, m)) * 2.0 - 1.0)
