import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from convexlp.jets import Jet, p_mean, p_mean_values


def _fd_check(fn, jet_fn, x, h=1e-5):
    """Compare jet derivatives with central differences of the scalar function."""
    jet = jet_fn(x[None, :])
    n = x.size
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        grad[i] = (fn(x + e) - fn(x - e)) / (2 * h)
        for k in range(n):
            f = np.zeros(n)
            f[k] = h
            hess[i, k] = (fn(x + e + f) - fn(x + e - f) - fn(x - e + f) + fn(x - e - f)) / (4 * h * h)
    np.testing.assert_allclose(jet.grad[0], grad, atol=1e-7)
    np.testing.assert_allclose(jet.hess[0], hess, atol=1e-4)


def test_product_and_power_rules():
    x = np.array([0.3, -0.7, 1.1])

    def jet_fn(pts):
        X = Jet.coordinate(pts, 0)
        R2 = Jet.norm_squared(pts)
        return (X * R2).power(0.5) + R2.log()

    def fn(v):
        return np.sqrt(v[0] * (v @ v)) + np.log(v @ v)

    _fd_check(fn, jet_fn, np.abs(x))


def test_constant_has_zero_derivatives():
    c = Jet.constant(2.5, (4,), 3)
    assert np.all(c.value == 2.5)
    assert not c.grad.any() and not c.hess.any()


def test_p_mean_geometric_limit():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([2.0, 0.5, 3.0])
    np.testing.assert_allclose(p_mean_values(a, b, 1e-7, 0.3), p_mean_values(a, b, 0.0, 0.3), rtol=1e-6)


@given(
    st.floats(0.1, 10),
    st.floats(0.1, 10),
    st.one_of(st.just(0.0), st.floats(-2, -1e-3), st.floats(1e-3, 1)),
    st.floats(0.01, 0.99),
)
def test_p_mean_lies_between_arguments(a, b, p, lam):
    m = p_mean_values(a, b, p, lam)
    assert min(a, b) * (1 - 1e-12) <= m <= max(a, b) * (1 + 1e-12)


def test_p_mean_jet_matches_values():
    pts = np.array([[0.6, 0.8, 0.0], [0.0, 0.6, 0.8]])
    a = Jet.norm_squared(pts) + 1.0
    b = Jet.coordinate(pts, 1) + 2.0
    for p in (-0.5, 0.0, 0.5):
        np.testing.assert_allclose(p_mean(a, b, p, 0.4).value, p_mean_values(a.value, b.value, p, 0.4))


def test_contract_is_linear_combination():
    pts = np.array([[0.6, 0.8, 0.0]])
    stack = Jet.stack([Jet.coordinate(pts, 0), Jet.norm_squared(pts)], axis=-1)
    combo = stack.contract([2.0, -1.0])
    direct = Jet.coordinate(pts, 0) * 2.0 - Jet.norm_squared(pts)
    np.testing.assert_allclose(combo.hess, direct.hess)
    np.testing.assert_allclose(combo.grad, direct.grad)
