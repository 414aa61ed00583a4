import numpy as np
import pytest

from lpbox.projections import SingularProjectionError, lp_norm, project_box, project_lp_sphere


def test_box_examples():
    np.testing.assert_array_equal(project_box(np.array([[1.5], [-0.2], [-3]])), [[1], [-0.2], [-1]])
    x = np.array([[0.3], [-1.0]])
    np.testing.assert_array_equal(project_box(x), x)
    np.testing.assert_array_equal(project_box(np.zeros((1, 1))), [[0]])


def test_sphere_examples():
    np.testing.assert_allclose(project_lp_sphere(np.array([4.0, 0, 0, 0]), 2), [2, 0, 0, 0])
    np.testing.assert_allclose(project_lp_sphere(np.ones(4), 2), np.ones(4))
    rng = np.random.default_rng(0)
    b = rng.choice([-1.0, 1.0], size=(7, 3))
    for p in (0.5, 1, 2, 5):
        np.testing.assert_allclose(project_lp_sphere(b, p), b, rtol=1e-14)
        np.testing.assert_array_equal(project_box(b), b)


def test_sphere_zero_input():
    with pytest.raises(SingularProjectionError):
        project_lp_sphere(np.zeros((3, 1)))
    a = project_lp_sphere(np.zeros((3, 2)), rng=np.random.default_rng(5))
    b = project_lp_sphere(np.zeros((3, 2)), rng=np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(a)) <= {-1.0, 1.0}


def test_sphere_radius_is_nearest_point_for_p2():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(5, 2))
    y = project_lp_sphere(x, 2)
    # any other point on the sphere is at least as far
    for _ in range(200):
        u = rng.normal(size=x.shape)
        u *= np.sqrt(x.size) / np.linalg.norm(u)
        assert np.linalg.norm(x - y) <= np.linalg.norm(x - u) + 1e-12


def test_lp_norm():
    assert lp_norm(np.array([3.0, -4.0]), 2) == 5
    assert lp_norm(np.array([1.0, -2.0]), 1) == 3
