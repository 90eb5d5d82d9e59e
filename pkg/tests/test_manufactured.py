import math

import numpy as np
import pytest
from scipy.integrate import dblquad, quad
from scipy.special import gamma

from subdiffusion.manufactured import caputo_power, case, mesh_for_case, problem_from_case


def test_caputo_power_values():
    assert caputo_power(1.0, 0.5, 1) == pytest.approx(1 / gamma(1.5), rel=1e-14)
    assert caputo_power(1.0, 0.5, 1) == pytest.approx(1.128379, rel=1e-6)
    t = np.array([0.1, 0.5, 2.0])
    np.testing.assert_allclose(caputo_power(t, 0.3, 0.3), gamma(1.3), rtol=1e-14)
    assert np.all(caputo_power(t, 0.4, 0) == 0)
    with pytest.raises(ValueError):
        caputo_power(1.0, 0.5, -1.0)


def test_caputo_power_against_quadrature():
    t, alpha, p = 0.5, 0.3, 3
    # defining integral of (t - s)^-alpha u'(s) / Gamma(1 - alpha), u = s^3
    integral = quad(lambda s: p * s ** (p - 1), 0.0, t, weight="alg",
                    wvar=(0.0, -alpha), epsabs=1e-15, epsrel=1e-14)[0]
    ref = integral / gamma(1 - alpha)
    val = caputo_power(t, alpha, p)
    assert val == pytest.approx(gamma(4) / gamma(3.7) * 0.5 ** 2.7, rel=1e-14)
    assert abs(val - ref) <= 1e-9


def test_example_one_forcing_closed_form():
    alpha = 0.6
    mc = case(1, alpha)
    rng = np.random.default_rng(0)
    x = rng.uniform(0, math.pi, size=(20, 1))
    t = 0.7
    g = (6 / gamma(4 - alpha) * t ** (3 - alpha) * np.sin(x[:, 0])
         + (3 + np.sin(2 * t ** 3)) * t ** 3 * np.sin(x[:, 0]))
    np.testing.assert_allclose(mc.g(x, t), g, rtol=1e-13)


def test_example_three_laplacian():
    mc = case(3, 0.5)
    x = np.array([[0.3, 0.8]])
    t = 0.9
    T = t ** 3 + t ** 0.5
    expected = -2 * T * ((0.8 - 0.64) + (0.3 - 0.09))
    assert mc.laplacian(x, t)[0] == pytest.approx(expected, rel=1e-14)


def test_zero_at_initial_time_and_boundary():
    for cid in (1, 2, 3):
        mc = case(cid, 0.5)
        dim = 1 if mc.domain == "interval" else 2
        x = np.random.default_rng(1).uniform(0, mc.length, size=(10, dim))
        assert np.all(mc.u(x, 0.0) == 0)
    mc = case(1, 0.4)
    assert abs(mc.u(np.array([[0.0], [math.pi]]), 0.8)).max() < 1e-15
    mc = case(3, 0.4)
    edge = np.array([[0, 0.3], [1, 0.6], [0.2, 0], [0.9, 1.0]])
    assert np.all(mc.u(edge, 0.8) == 0)


@pytest.mark.parametrize("cid", [1, 2, 3])
def test_residual_identity(cid):
    rng = np.random.default_rng(cid)
    for _ in range(5):
        alpha = rng.uniform(0.05, 0.95)
        mc = case(cid, alpha)
        dim = 1 if mc.domain == "interval" else 2
        x = rng.uniform(0, mc.length, size=(8, dim))
        t = rng.uniform(0.01, 1.0)
        res = mc.caputo(x, t) - mc.a(mc.l_exact(t)) * mc.laplacian(x, t) - mc.g(x, t)
        assert np.max(np.abs(res)) <= 1e-11


def test_l_exact_matches_quadrature():
    t = 0.6
    mc = case(1, 0.5)
    assert mc.l_exact(t) == pytest.approx(2 * t ** 3, rel=1e-14)
    ref = quad(lambda s: mc.u(np.array([[s]]), t)[0], 0, math.pi, epsabs=1e-14)[0]
    assert abs(mc.l_exact(t) - ref) <= 1e-10
    mc = case(2, 0.5)
    assert mc.l_exact(t) == pytest.approx(2 * (t ** 3 + t ** 0.5), rel=1e-14)
    mc = case(3, 0.5)
    ref = dblquad(lambda y, x: mc.u(np.array([[x, y]]), t)[0], 0, 1, 0, 1,
                  epsabs=1e-14)[0]
    assert abs(mc.l_exact(t) - ref) <= 1e-10
    assert mc.l_exact(t) == pytest.approx((t ** 3 + t ** 0.5) / 36, rel=1e-14)


@pytest.mark.parametrize("cid", [1, 2, 3])
def test_derivatives_by_finite_differences(cid):
    mc = case(cid, 0.45)
    dim = 1 if mc.domain == "interval" else 2
    rng = np.random.default_rng(7)
    x = rng.uniform(0.1, 0.9, size=(6, dim)) * mc.length
    t, h = 0.8, 1e-5
    grad = mc.grad(x, t)
    lap = np.zeros(len(x))
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = h
        up, um, u0 = mc.u(x + e, t), mc.u(x - e, t), mc.u(x, t)
        np.testing.assert_allclose(grad[:, k], (up - um) / (2 * h), atol=1e-6)
        lap += (up - 2 * u0 + um) / h ** 2
    np.testing.assert_allclose(mc.laplacian(x, t), lap, atol=1e-4)


def test_diffusion_derivative():
    mc = case(1, 0.5)
    xi = np.linspace(-3, 3, 7)
    h = 1e-6
    np.testing.assert_allclose(mc.da(xi), (mc.a(xi + h) - mc.a(xi - h)) / (2 * h), atol=1e-8)


def test_forcing_modes():
    mc = case(2, 0.5, "reactive")
    x = np.array([[0.4], [1.3]])
    t = 0.5
    uex = mc.u(x, t)
    np.testing.assert_allclose(mc.f(x, t, uex), mc.g(x, t), rtol=1e-14)
    np.testing.assert_allclose(mc.f(x, t, uex + 1.0), mc.g(x, t) + 1.0, rtol=1e-13)
    np.testing.assert_array_equal(mc.df(x, t, uex), 1.0)
    pure = case(2, 0.5)
    assert pure.df is None
    np.testing.assert_array_equal(pure.f(x, t, uex + 5), pure.g(x, t))


@pytest.mark.parametrize("bad", [dict(id=4, alpha=0.5), dict(id=1, alpha=1.2),
                                 dict(id=1, alpha=0.5, forcing_mode="weird")])
def test_case_rejects_bad_arguments(bad):
    with pytest.raises(ValueError):
        case(**bad)


def test_problem_and_mesh_helpers():
    mc = case(3, 0.5)
    p = problem_from_case(mc)
    assert p.alpha == 0.5 and p.grad_u0 is None and p.df is None
    assert mesh_for_case(mc, 4).num_dofs == 9
    assert mesh_for_case(case(1, 0.5), 4).num_dofs == 3
