"""
File formats: sequence files, correlation and trace CSVs, JSON configs.

Sequence files hold one sequence per line::

    # N=7 M=1
    +1 +1 +1 -1 -1 +1 -1

CSV pair indices ``i, j`` are 1-based; lags are 0-based.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .correlation import correlation_profile
from .sequences import ConfigError, SequenceSet, ShiftSpec, as_matrix, validate_binary

SCHEMA_VERSION = 1
TRACE_FIELDS = ("k", "objective", "isl", "psl", "R", "D", "lagrangian", "violation")


def _num(v) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 2 ** 53:
        return str(int(v))
    return repr(v)


def write_sequence_file(x, path) -> Path:
    x = as_matrix(x)
    if not validate_binary(x):
        raise ValueError("only binary sequence sets can be written")
    n, m = x.shape
    lines = [f"# N={n} M={m}"]
    lines += [" ".join("+1" if v > 0 else "-1" for v in x[:, j]) for j in range(m)]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_sequence_file(path) -> SequenceSet:
    """Parse a sequence file; malformed content raises `ConfigError`."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ConfigError(f"{path}: missing '# N=<n> M=<m>' header")
    try:
        head = dict(tok.split("=") for tok in lines[0].lstrip("#").split())
        n, m = int(head["N"]), int(head["M"])
    except (ValueError, KeyError):
        raise ConfigError(f"{path}: malformed header {lines[0]!r}") from None
    rows = lines[1:]
    if len(rows) != m:
        raise ConfigError(f"{path}: header says M={m} but found {len(rows)} sequences")
    cols = []
    for r in rows:
        toks = r.split()
        if len(toks) != n or any(t not in ("+1", "-1", "1") for t in toks):
            raise ConfigError(f"{path}: each sequence needs {n} entries of +1/-1")
        cols.append([1.0 if t != "-1" else -1.0 for t in toks])
    return SequenceSet(np.array(cols).T)


def correlation_rows(x, mode):
    """``(i, j, lag, corr, level_db)`` for every pair and lag, 1-based pairs."""
    x = as_matrix(x)
    n, m = x.shape
    prof = correlation_profile(x, mode)
    for i in range(m):
        for j in range(m):
            for l in range(n):
                r = prof[i, j, l]
                level = "" if r == 0 else repr(20.0 * math.log10(abs(r) / n))
                yield i + 1, j + 1, l, _num(r), level


def emit_correlation_csv(x, shift: ShiftSpec, path) -> Path:
    """Write every correlation at lags 0..N-1 with its level in dB relative to N."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "lag", "corr", "level_db"])
        w.writerows(correlation_rows(x, shift.mode))
    return path


def read_correlation_csv(path) -> dict:
    """Map ``(i, j, lag)`` (0-based pairs) to the correlation value."""
    out = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out[(int(row["i"]) - 1, int(row["j"]) - 1, int(row["lag"]))] = float(row["corr"])
    return out


def emit_trace(records, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for rec in records:
            w.writerow([rec.k] + [repr(float(getattr(rec, f))) for f in TRACE_FIELDS[1:]])
    return path


def read_trace(path) -> list:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def dump_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def load_config_file(path) -> dict:
    """
    Read a JSON experiment config.

    The file must carry ``"schema_version": 1``; solver settings go in a
    nested ``"solver"`` object.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    return data
