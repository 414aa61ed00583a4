import numpy as np
import pytest

from lpbox.correlation import (LagPlan, correlate, correlation_profile, in_band_level_db, isl,
                               islr_db, lq_smoothed_objective, objective_psl_form,
                               objective_smooth_F, psl, pslr_db, residual_f, residual_vector)
from lpbox.reference import m_sequence
from lpbox.sequences import ShiftSpec

BARKER7 = np.array([1, 1, 1, -1, -1, 1, -1], float)
BARKER13 = np.array([1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1], float)


def naive_corr(x, i, j, l, periodic):
    """Double loop straight from the definition."""
    n = x.shape[0]
    total = 0.0
    for k in range(n):
        q = k - l
        if q < 0:
            if not periodic:
                continue
            q += n
        total += x[k, i] * x[q, j]
    return total


def test_small_examples():
    x = np.array([1, 1, -1], float)
    assert correlate(x, 0, 0, 0) == 3
    assert correlate(x, 0, 0, 1) == 0
    assert correlate(x, 0, 0, 2) == -1
    assert correlate(x, 0, 0, 1, "periodic") == -1


def test_out_of_range_lag():
    with pytest.raises(ValueError):
        correlate(np.ones(3), 0, 0, 3)


def test_residual_examples():
    x = np.array([1, 1, -1], float)
    assert residual_f(x, (0, 0, 0)) == 0
    assert residual_f(x, (0, 0, 2)) == 1
    assert residual_f(np.array([2.0, 0, 0]), (0, 0, 0)) == 1


def test_psl_form_examples():
    assert objective_psl_form(BARKER7, ShiftSpec(7, [(1, 6)])) == 1
    assert objective_psl_form(np.ones(4), ShiftSpec(4, [(1, 3)])) == 3
    assert objective_psl_form(BARKER7, ShiftSpec(7, [0])) == 0


def test_smooth_objective_examples():
    x = np.array([1, 1, -1], float)
    s = ShiftSpec(3, [(0, 2)])
    assert objective_smooth_F(x, np.zeros(3), s) == 0
    assert objective_smooth_F(x, [0, 0, 1], s) == 1
    f = [residual_f(x, (0, 0, l)) for l in range(3)]
    assert objective_smooth_F(x, np.ones(3), s) == pytest.approx(sum(v * v for v in f))
    with pytest.raises(ValueError):
        objective_smooth_F(x, np.ones(2), s)


def test_isl_psl_examples():
    assert psl(BARKER13, ShiftSpec(13, [(1, 12)])) == 1
    assert isl(np.ones(4), ShiftSpec(4, [(1, 3)])) == 14
    x = m_sequence(3)
    assert psl(x, ShiftSpec(7, [(1, 6)], "periodic")) == 1


def test_mainlobe_excluded_from_metrics():
    x = np.ones(4)
    with_zero = ShiftSpec(4, [(0, 3)])
    assert isl(x, with_zero) == isl(x, ShiftSpec(4, [(1, 3)]))


def test_db_metrics():
    assert pslr_db(BARKER13, ShiftSpec(13, [(1, 12)])) == pytest.approx(10 * np.log10(1 / 169))
    # PSL = 2 sqrt(N) maps to 10 lg(4/N); PSL^2 = M N^2 maps to 0 dB
    from lpbox.correlation import pslr_from_psl
    assert pslr_from_psl(2 * np.sqrt(64), 64) == pytest.approx(10 * np.log10(4 / 64))
    assert pslr_from_psl(np.sqrt(2) * 10, 10, 2) == pytest.approx(0.0, abs=1e-12)


def test_zero_sidelobes_give_minus_inf():
    # periodic autocorrelation of [1,1,1,-1] is zero off the mainlobe
    x = np.array([1, 1, 1, -1], float)
    s = ShiftSpec(4, [(1, 3)], "periodic")
    assert islr_db(x, s) == -np.inf
    assert pslr_db(x, s) == -np.inf


def test_against_naive_loops():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 65))
        m = int(rng.integers(1, 3))
        x = rng.normal(size=(n, m))
        for periodic, mode in ((False, "aperiodic"), (True, "periodic")):
            prof = correlation_profile(x, mode)
            i, j = rng.integers(0, m, 2)
            l = int(rng.integers(0, n))
            ref = naive_corr(x, i, j, l, periodic)
            assert abs(prof[i, j, l] - ref) <= 1e-12 * max(1, abs(ref)) * n
            assert abs(correlate(x, i, j, l, mode) - ref) <= 1e-12 * max(1, abs(ref)) * n


def test_plan_matches_scalar():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(9, 2))
    for mode in ("aperiodic", "periodic"):
        s = ShiftSpec(9, [(0, 8)], mode)
        plan = LagPlan.build(2, s)
        r = plan.correlations(x)
        ref = [correlate(x, o[0], o[1], o[2], mode) for o in zip(plan.index.i, plan.index.j, plan.index.l)]
        np.testing.assert_allclose(r, ref, atol=1e-12)
        # per-term points give the same result when all points coincide
        xs = np.repeat(x[None], len(plan), axis=0)
        np.testing.assert_allclose(plan.correlations(xs), r, atol=1e-12)


def test_binary_energy_and_periodic_symmetry():
    rng = np.random.default_rng(2)
    x = rng.choice([-1.0, 1.0], size=(31, 3))
    ap = correlation_profile(x, "aperiodic")
    per = correlation_profile(x, "periodic")
    for i in range(3):
        assert ap[i, i, 0] == 31
        assert per[i, i, 0] == 31
        np.testing.assert_array_equal(per[i, i, 1:], per[i, i, 1:][::-1])


def test_in_band_level():
    x = np.ones(4)
    s = ShiftSpec(4, [(1, 3)])
    assert in_band_level_db(x, s) == pytest.approx(10 * np.log10(14 / 3 / 16))


def test_lq_bound_upper_bounds_and_tightens():
    rng = np.random.default_rng(3)
    s = ShiftSpec(20, [(0, 19)])
    for _ in range(20):
        x = rng.normal(size=(20, 2))
        top = objective_psl_form(x, s)
        vals = [lq_smoothed_objective(x, s, q) for q in (2, 4, 8, 16)]
        assert all(v >= top - 1e-9 for v in vals)
        assert all(a >= b - 1e-9 for a, b in zip(vals, vals[1:]))


def test_residual_vector_order():
    x = np.array([[1, -1], [1, 1], [-1, 1.0]])
    s = ShiftSpec(3, [(0, 1)])
    f = residual_vector(x, s)
    expected = [residual_f(x, (i, j, l)) for i in range(2) for j in range(2) for l in range(2)]
    np.testing.assert_allclose(f, expected)
