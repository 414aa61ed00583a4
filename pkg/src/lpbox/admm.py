"""
Consensus lp-box ADMM for binary sequence set design.

Every pair-lag term ``o`` owns a local copy ``Z_o`` of the design matrix and a
slack ``Zh_o``. The global variable is the stacked pair ``Xb = [X1; X2]``
where ``X1`` lives in the box and ``X2`` on the lp-sphere; their intersection
is the binary set. The constraint tying them together is

    Xb = A Z_o + sigma Zh_o,    A = [I; I],

and one iteration runs an averaged projection step for ``Xb``, a closed-form
majorized step for each ``(Z_o, Zh_o)``, and a dual ascent step for ``Lam_o``.
The per-term squared residuals are weighted by ``w_o = (f_o / max f)^(q-2)``
so the weighted sum of squares tracks the peak sidelobe.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .correlation import LagPlan, metrics
from .gradient import batched_gradients, lipschitz_constant
from .projections import project_box, project_lp_sphere
from .sequences import ConfigError, SequenceSet, ShiftSpec, enumerate_index_set

log = logging.getLogger(__name__)

RHO_RULES = ("auto", "fixed")
VARIANTS = ("lpbox", "boxonly")
WEIGHT_REFRESH = ("every_iter", "frozen")
INITIAL_WEIGHTS = ("computed", "uniform")
OUTPUTS = ("best", "last")
W_FLOOR = 1e-12


class DivergenceError(RuntimeError):
    """Non-finite values appeared in the solver state."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DescentViolation(AssertionError):
    """The augmented Lagrangian increased (or went negative) in a checked run."""


@dataclass(frozen=True)
class AdmmConfig:
    """
    Solver settings.

    Parameters
    ----------
    p : float
        Sphere exponent.
    q : int
        Max-smoothing exponent (> 2); weights are ``(f/max f)^(q-2)``.
    sigma : float
        Slack scale in the perturbed constraint.
    rho_rule : {"auto", "fixed"}
        ``auto`` sets ``rho_o = rho_scale * max(w_o, w_min) * L`` from the
        weights at initialization and keeps it for the run; ``fixed`` uses
        ``rho_scale`` for every term.
    rho_scale : float
        Multiplier for ``auto`` or the penalty value for ``fixed``.
    w_min : float
        Weight floor used only inside the ``auto`` penalty rule.
    max_iters, tol : int, float
        Stop when ``R + D <= tol`` or after `max_iters` iterations.
    seed : int
        Seeds the initial point and duals.
    variant : {"lpbox", "boxonly"}
        ``boxonly`` projects both copies onto the box.
    weight_refresh : {"every_iter", "frozen"}
    initial_weights : {"computed", "uniform"}
        Weights before the first iteration: from the initial residuals or 1.
    dual_init_scale : float
        Initial duals are uniform on ``[-s, s]``.
    output : {"best", "last"}
        ``best`` returns the binarized iterate (the start included) with the
        lowest max-form objective, ties broken by ISL then by earliest;
        ``last`` returns the sign of the final averaged point.
    check_descent : bool
        Raise `DescentViolation` when the Lagrangian increases by more than
        1e-8 relative or drops below -1e-8 (meaningful with frozen weights).
    """

    p: float = 2.0
    q: int = 4
    sigma: float = 1e-2
    rho_rule: str = "auto"
    rho_scale: float = 1e-3
    w_min: float = 1e-3
    max_iters: int = 500
    tol: float = 1e-3
    seed: int = 0
    variant: str = "lpbox"
    weight_refresh: str = "every_iter"
    initial_weights: str = "computed"
    dual_init_scale: float = 0.1
    output: str = "best"
    check_descent: bool = False

    def __post_init__(self):
        def bad(name, why):
            raise ConfigError(f"{name}: {why}")

        if not self.p > 0:
            bad("p", "must be > 0")
        if int(self.q) != self.q or self.q <= 2:
            bad("q", "must be an integer > 2")
        object.__setattr__(self, "q", int(self.q))
        if not self.sigma > 0:
            bad("sigma", "must be > 0")
        if self.rho_rule not in RHO_RULES:
            bad("rho_rule", f"must be one of {RHO_RULES}")
        if not self.rho_scale > 0:
            bad("rho_scale", "must be > 0")
        if not 0 < self.w_min <= 1:
            bad("w_min", "must be in (0, 1]")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            bad("max_iters", "must be an integer >= 1")
        object.__setattr__(self, "max_iters", int(self.max_iters))
        if not self.tol > 0:
            bad("tol", "must be > 0")
        if self.variant not in VARIANTS:
            bad("variant", f"must be one of {VARIANTS}")
        if self.weight_refresh not in WEIGHT_REFRESH:
            bad("weight_refresh", f"must be one of {WEIGHT_REFRESH}")
        if self.initial_weights not in INITIAL_WEIGHTS:
            bad("initial_weights", f"must be one of {INITIAL_WEIGHTS}")
        if self.output not in OUTPUTS:
            bad("output", f"must be one of {OUTPUTS}")
        if not self.dual_init_scale >= 0:
            bad("dual_init_scale", "must be >= 0")

    @classmethod
    def descent_checked(cls, **kw) -> "AdmmConfig":
        """Frozen uniform weights with ``rho = 8 w L``, the regime with guaranteed descent."""
        base = dict(rho_rule="auto", rho_scale=8.0, weight_refresh="frozen",
                    initial_weights="uniform", check_descent=True)
        base.update(kw)
        return cls(**base)

    @classmethod
    def from_dict(cls, d: dict) -> "AdmmConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown solver setting")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Problem:
    """Static data shared by all iterations of one solve."""

    n: int
    m: int
    shift: ShiftSpec
    config: AdmmConfig
    plan: LagPlan
    lipschitz: float

    @property
    def n_terms(self) -> int:
        return len(self.plan)


@dataclass
class AdmmState:
    """
    Iterate of the solver. Per-term arrays share the index-set order.

    Attributes
    ----------
    x_bar : ndarray, shape (2N, M)
    z : ndarray, shape (K, N, M)
    z_hat : ndarray, shape (K, 2N, M)
    lam : ndarray, shape (K, 2N, M)
    rho, w : ndarray, shape (K,)
    """

    problem: Problem
    x_bar: np.ndarray
    z: np.ndarray
    z_hat: np.ndarray
    lam: np.ndarray
    rho: np.ndarray
    w: np.ndarray
    rng: np.random.Generator
    iter: int = 0

    @property
    def x1(self):
        return self.x_bar[:self.problem.n]

    @property
    def x2(self):
        return self.x_bar[self.problem.n:]

    @property
    def x_avg(self):
        n = self.problem.n
        return 0.5 * (self.x_bar[:n] + self.x_bar[n:])

    def copy(self) -> "AdmmState":
        return AdmmState(self.problem, self.x_bar.copy(), self.z.copy(), self.z_hat.copy(),
                         self.lam.copy(), self.rho.copy(), self.w.copy(), self.rng, self.iter)


@dataclass
class IterationRecord:
    k: int
    objective: float
    isl: float
    psl: float
    R: float
    D: float
    lagrangian: float
    violation: float


@dataclass
class RunReport:
    """Outcome of one solve: trace, initial and final sequences, and metrics."""

    n: int
    m: int
    mode: str
    intervals: list
    config: dict
    records: list = field(default_factory=list)
    x_init: SequenceSet | None = None
    x_final: SequenceSet | None = None
    metrics_init: dict = field(default_factory=dict)
    metrics_final: dict = field(default_factory=dict)
    levels_init: list = field(default_factory=list)
    levels_final: list = field(default_factory=list)
    status: str = "running"
    selected_iter: int = 0

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        def seq(x):
            return None if x is None else x.data.astype(int).T.tolist()
        return {
            "n": self.n, "m": self.m, "mode": self.mode,
            "intervals": [list(r) for r in self.intervals],
            "config": self.config, "status": self.status,
            "iterations": self.iterations, "selected_iter": self.selected_iter,
            "metrics_init": self.metrics_init, "metrics_final": self.metrics_final,
            "levels_init": self.levels_init, "levels_final": self.levels_final,
            "x_init": seq(self.x_init), "x_final": seq(self.x_final),
            "records": [asdict(r) for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# building blocks

def make_problem(n: int, m: int, shift: ShiftSpec, config: AdmmConfig, order=None) -> Problem:
    if shift.n_len != n:
        raise ConfigError(f"intervals: lag set built for N={shift.n_len}, not N={n}")
    if order is not None and sorted(order) != enumerate_index_set(m, shift):
        raise ConfigError("order must be a permutation of the index set")
    plan = LagPlan.build(m, shift, order)
    return Problem(n, m, shift, config, plan, lipschitz_constant(n, 1.0))


def weights_from_residuals(f, q: int) -> np.ndarray:
    """
    Normalized max-smoothing weights ``(f / max f)^(q-2)``.

    All-zero residuals give unit weights. Results are floored at 1e-12 so
    every weight stays positive.
    """
    f = np.abs(np.asarray(f, dtype=float))
    top = f.max() if f.size else 0.0
    if top == 0:
        return np.ones_like(f)
    return np.maximum((f / top) ** (q - 2), W_FLOOR)


def compute_weights(state: AdmmState) -> np.ndarray:
    """Weights from the residuals of the current local copies."""
    return weights_from_residuals(state.problem.plan.residuals(state.z), state.problem.config.q)


def penalties(problem: Problem, w) -> np.ndarray:
    cfg = problem.config
    k = problem.n_terms
    if cfg.rho_rule == "fixed":
        return np.full(k, float(cfg.rho_scale))
    return cfg.rho_scale * problem.lipschitz * np.maximum(w, cfg.w_min)


def initialize(n: int, m: int, shift: ShiftSpec, config: AdmmConfig, order=None, x0=None) -> AdmmState:
    """
    Random binary start with all local copies in consensus.

    Parameters
    ----------
    x0 : array_like, optional
        Binary starting point; drawn from the seeded generator when omitted.
    """
    problem = make_problem(n, m, shift, config, order)
    rng = np.random.default_rng(config.seed)
    k = problem.n_terms
    if x0 is None:
        x0 = rng.integers(0, 2, size=(n, m)) * 2.0 - 1.0
    else:
        x0 = np.array(SequenceSet(x0).data)
    lam = config.dual_init_scale * rng.uniform(-1.0, 1.0, size=(k, 2 * n, m))
    x_bar = np.concatenate([x0, x0])
    # the iterate bound c covers the sphere copy; binary starts give c = 1
    problem.lipschitz = lipschitz_constant(n, max(1.0, float(np.abs(x0).max())))
    z = np.repeat(x0[None], k, axis=0)
    state = AdmmState(problem, x_bar, z, np.zeros((k, 2 * n, m)), lam,
                      np.ones(k), np.ones(k), rng)
    if config.initial_weights == "computed":
        state.w = compute_weights(state)
    state.rho = penalties(problem, state.w)
    return state


def _stack(z):
    return np.concatenate([z, z], axis=1)


def consensus_average(state: AdmmState) -> np.ndarray:
    """Penalty-weighted average of ``A Z_o + sigma Zh_o - Lam_o / rho_o``, shape (2N, M)."""
    n = state.problem.n
    t = state.problem.config.sigma * state.z_hat
    t[:, :n] += state.z
    t[:, n:] += state.z
    t *= state.rho[:, None, None]
    t -= state.lam
    # reduction over terms in index-set order
    return t.sum(axis=0) / state.rho.sum()


def x_update(state: AdmmState) -> np.ndarray:
    """
    Global step: box projection of the top block of the consensus average and
    sphere projection (box projection for ``boxonly``) of the bottom block.
    """
    pb = state.problem
    n = pb.n
    x_hat = consensus_average(state)
    x1 = project_box(x_hat[:n])
    if pb.config.variant == "boxonly":
        x2 = project_box(x_hat[n:])
    else:
        x2 = project_lp_sphere(x_hat[n:], pb.config.p, rng=state.rng)
    return np.concatenate([x1, x2])


def _z_block(pb: Problem, plan: LagPlan, x_bar, z, lam, rho, w):
    n = pb.n
    sigma = pb.config.sigma
    r = rho[:, None, None]
    y = np.empty_like(lam)
    np.subtract(x_bar[None, :n], z, out=y[:, :n])
    np.subtract(x_bar[None, n:], z, out=y[:, n:])
    y *= r
    y += lam
    y /= r + 1.0
    z_hat = y / sigma
    y = sigma * z_hat
    x_loc = 0.5 * (x_bar[None, :n] + x_bar[None, n:] - y[:, :n] - y[:, n:])
    _, g = batched_gradients(plan, x_loc)
    wl = w[:, None, None]
    z_new = x_loc + (lam[:, :n] + lam[:, n:] - wl * g) / (2.0 * r + wl * pb.lipschitz)
    return z_new, z_hat


def _row_blocks(k: int, threads: int):
    threads = max(1, min(int(threads), k))
    edges = np.linspace(0, k, threads + 1).astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def z_update(state: AdmmState, threads: int = 1, pool=None):
    """
    Local step for every term.

    The slack is ``Zh = (Lam + rho (Xb - A Z)) / ((rho + 1) sigma)``. The local
    point ``X_loc = A^T (Xb - sigma Zh) / 2`` anchors a quadratic upper bound of
    ``w f^2`` with curvature ``L``, and ``Z`` is its exact minimizer together
    with the dual and penalty terms:

        Z = X_loc + (A^T Lam - w grad f^2(X_loc)) / (2 rho + w L).

    Returns
    -------
    z, z_hat : ndarray
    """
    pb = state.problem
    if threads <= 1 and pool is None:
        return _z_block(pb, pb.plan, state.x_bar, state.z, state.lam, state.rho, state.w)
    blocks = _row_blocks(pb.n_terms, threads)
    z = np.empty_like(state.z)
    z_hat = np.empty_like(state.z_hat)

    def work(rows):
        z[rows], z_hat[rows] = _z_block(pb, pb.plan.subset(rows), state.x_bar,
                                        state.z[rows], state.lam[rows],
                                        state.rho[rows], state.w[rows])

    if pool is None:
        with ThreadPoolExecutor(max_workers=len(blocks)) as ex:
            list(ex.map(work, blocks))
    else:
        list(pool.map(work, blocks))
    return z, z_hat


def constraint_gap(state: AdmmState) -> np.ndarray:
    """``Xb - A Z_o - sigma Zh_o`` for every term, shape (K, 2N, M)."""
    n = state.problem.n
    out = state.x_bar[None] - state.problem.config.sigma * state.z_hat
    out[:, :n] -= state.z
    out[:, n:] -= state.z
    return out


def consensus_gap(state: AdmmState) -> float:
    """Largest ``||Xb - A Z_o||_F`` over terms, ignoring the slack."""
    d = state.x_bar[None] - _stack(state.z)
    return float(np.sqrt(np.sum(d ** 2, axis=(1, 2))).max())


def dual_update(state: AdmmState, gap=None) -> np.ndarray:
    """Dual ascent ``Lam_o + rho_o (Xb - A Z_o - sigma Zh_o)``."""
    if gap is None:
        gap = constraint_gap(state)
    return state.lam + state.rho[:, None, None] * gap


def residuals(state: AdmmState, prev) -> tuple:
    """
    Primal and dual residuals.

    ``R = sum_o ||X_avg - Z_o||^2`` with ``X_avg = (X1 + X2) / 2`` and
    ``D = sum_o ||Z_o - Z_o_prev||^2``.

    Parameters
    ----------
    prev : AdmmState or ndarray
        Previous state, or its local copies ``z``.
    """
    z_prev = prev.z if isinstance(prev, AdmmState) else prev
    R = float(np.sum((state.x_avg[None] - state.z) ** 2))
    D = float(np.sum((state.z - z_prev) ** 2))
    return R, D


def lagrangian(state: AdmmState, res_z=None, gap=None) -> float:
    """
    Smoothed augmented Lagrangian

        sum_o [ w_o f_o^2(Z_o) + sigma^2/2 ||Zh_o||^2 + <Lam_o, V_o> + rho_o/2 ||V_o||^2 ]

    with ``V_o = Xb - A Z_o - sigma Zh_o``.
    """
    pb = state.problem
    if res_z is None:
        res_z = pb.plan.residuals(state.z)
    v = constraint_gap(state) if gap is None else gap
    k = pb.n_terms
    s2 = pb.config.sigma ** 2
    terms = (state.w * res_z ** 2
             + 0.5 * s2 * np.sum(state.z_hat.reshape(k, -1) ** 2, axis=1)
             + np.sum((state.lam * v).reshape(k, -1), axis=1)
             + 0.5 * state.rho * np.sum(v.reshape(k, -1) ** 2, axis=1))
    return float(terms.sum())


def surrogate(state: AdmmState, o: int, z_o, x_loc=None) -> float:
    """
    Majorizing surrogate of the per-term Lagrangian in ``Z_o``.

    Uses the current ``Xb``, ``Zh_o``, ``Lam_o``; `x_loc` defaults to
    ``A^T (Xb - sigma Zh_o) / 2``.
    """
    pb = state.problem
    n = pb.n
    sigma = pb.config.sigma
    zh = state.z_hat[o]
    if x_loc is None:
        x_loc = 0.5 * (state.x1 + state.x2 - sigma * (zh[:n] + zh[n:]))
    sub = pb.plan.subset(slice(o, o + 1))
    res, g = batched_gradients(sub, x_loc)
    d = z_o - x_loc
    w = state.w[o]
    v = state.x_bar - np.concatenate([z_o, z_o]) - sigma * zh
    return float(w * (res[0] ** 2 + np.sum(g[0] * d) + 0.5 * pb.lipschitz * np.sum(d * d))
                 + 0.5 * sigma ** 2 * np.sum(zh * zh)
                 + np.sum(state.lam[o] * v) + 0.5 * state.rho[o] * np.sum(v * v))


def binarize(x) -> np.ndarray:
    """Entrywise sign with sign(0) = +1."""
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)


def _check_finite(state: AdmmState):
    for name in ("x_bar", "z", "z_hat", "lam"):
        if not np.all(np.isfinite(getattr(state, name))):
            return name
    return None


def step(state: AdmmState, threads: int = 1, pool=None) -> tuple:
    """
    One full iteration, in place.

    Returns
    -------
    z_prev : ndarray
        Local copies before the iteration.
    res_z : ndarray
        Signed residuals at the new local copies.
    gap : ndarray
        Constraint gap used in the dual step (still valid after it).
    """
    z_prev = state.z
    state.x_bar = x_update(state)
    state.z, state.z_hat = z_update(state, threads, pool)
    gap = constraint_gap(state)
    state.lam = dual_update(state, gap)
    state.iter += 1
    return z_prev, state.problem.plan.residuals(state.z), gap


def _levels(plan: LagPlan, x) -> list:
    return plan.correlations(x).tolist()


def solve(n: int, m: int, shift: ShiftSpec, config: AdmmConfig | None = None,
          threads: int = 1, order=None, x0=None) -> RunReport:
    """
    Run the ADMM loop and binarize the averaged design point.

    With ``config.output == "best"`` the returned sequence is the best
    binarized iterate seen, so it is never worse than the start.

    Parameters
    ----------
    n, m : int
        Sequence length and number of sequences.
    shift : ShiftSpec
    config : AdmmConfig
    threads : int
        Worker threads for the per-term updates; results do not depend on it.
    order : list of PairLagIndex, optional
        Processing order of the terms (a permutation of the index set).
    x0 : array_like, optional
        Binary starting point.

    Raises
    ------
    DivergenceError
        Non-finite state; ``err.report`` holds the records so far.
    DescentViolation
        Only with ``config.check_descent``.
    """
    config = config or AdmmConfig()
    state = initialize(n, m, shift, config, order, x0)
    pb = state.problem
    plan = pb.plan
    mainlobe = plan.index.mainlobe
    x_init = binarize(state.x_avg)
    report = RunReport(n, m, shift.mode.value, [list(r) for r in shift.intervals], config.to_dict())
    report.x_init = SequenceSet(x_init)
    report.metrics_init = metrics(x_init, shift)
    report.levels_init = _levels(plan, x_init)

    def rank(x):
        r = plan.correlations(x)
        side = r[~mainlobe]
        f = np.abs(r - plan.index.target).reshape(m, m, shift.n_lags)
        return (float(f.max(axis=2).sum()), float(side @ side)), side

    best_key, best_x = rank(x_init)[0], x_init

    # descent is checked along the trace; the random initial duals are not
    # yet tied to the local gradients, so the first step may increase it
    prev_lag = None
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for _ in range(config.max_iters):
            with np.errstate(all="ignore"):
                z_prev, res_z, gap = step(state, threads, pool)
            bad = _check_finite(state)
            if bad is not None:
                report.status = "diverged"
                raise DivergenceError(f"non-finite values in {bad} at iteration {state.iter}", report)
            R, D = residuals(state, z_prev)
            lag = lagrangian(state, res_z, gap)
            xa = state.x_avg
            xs = binarize(xa)
            key, side = rank(xs)
            if key < best_key:
                best_key, best_x, report.selected_iter = key, xs, state.iter
            f_relaxed = np.abs(plan.residuals(xa)).reshape(m, m, shift.n_lags)
            viol = np.sqrt(np.sum(gap.reshape(len(gap), -1) ** 2, axis=1))
            report.records.append(IterationRecord(
                k=state.iter, objective=float(f_relaxed.max(axis=2).sum()),
                isl=float(side @ side), psl=float(np.abs(side).max()) if side.size else 0.0,
                R=R, D=D, lagrangian=lag, violation=float(viol.max())))
            if config.check_descent and prev_lag is not None:
                if lag > prev_lag + 1e-8 * max(abs(prev_lag), 1.0) or lag < -1e-8:
                    report.status = "descent_violation"
                    raise DescentViolation(
                        f"Lagrangian {prev_lag:.12g} -> {lag:.12g} at iteration {state.iter}")
            prev_lag = lag
            if config.weight_refresh == "every_iter":
                state.w = weights_from_residuals(res_z, config.q)
            if R + D <= config.tol:
                report.status = "converged"
                break
        else:
            report.status = "max_iters"
    finally:
        if pool is not None:
            pool.shutdown()

    if config.output == "best":
        x_final = best_x
    else:
        x_final = binarize(state.x_avg)
        report.selected_iter = state.iter
    report.x_final = SequenceSet(x_final)
    report.metrics_final = metrics(x_final, shift)
    report.levels_final = _levels(plan, x_final)
    return report
