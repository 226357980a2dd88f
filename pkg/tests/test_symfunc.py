"""Unit checks for the symmetric-function layer: values, derivatives, duals.

Analytic gradients/Hessians are checked against centered finite differences
(independent oracle), algebraic structure (homogeneity, Euler, duality)
against direct evaluation.
"""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

from harnacklab import symfunc as sf
from harnacklab.errors import ConfigError, NonPositiveCurvature


def _fd_grad(f, kappa, step=1e-6):
    kappa = np.asarray(kappa, dtype=float)
    out = np.empty_like(kappa)
    for i in range(kappa.size):
        up, dn = kappa.copy(), kappa.copy()
        up[i] += step
        dn[i] -= step
        out[i] = (sf.eval_f(f, up) - sf.eval_f(f, dn)) / (2 * step)
    return out


def _fd_hess(f, kappa, step=1e-6):
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.size
    out = np.empty((n, n))
    for j in range(n):
        up, dn = kappa.copy(), kappa.copy()
        up[j] += step
        dn[j] -= step
        out[:, j] = (sf.grad_f(f, up) - sf.grad_f(f, dn)) / (2 * step)
    return out


ALL_BUILTINS = ("mean", "norm", "harmonic-mean")


def test_builtin_values():
    assert sf.eval_f(sf.mean(), np.array([1.0, 2.0, 3.0])) == 6.0
    assert sf.eval_f(sf.norm(), np.array([3.0, 4.0])) == 5.0
    npt.assert_allclose(sf.eval_f(sf.harmonic_mean(), np.ones(4)), 4.0, rtol=1e-14)
    npt.assert_allclose(sf.eval_f(sf.power_mean(3.0), np.array([1.0, 2.0])),
                        9.0 ** (1.0 / 3.0), rtol=1e-14)


def test_eval_broadcasts_over_leading_axes():
    rng = np.random.default_rng(3)
    kappa = rng.uniform(0.2, 5.0, size=(7, 4, 3))
    f = sf.norm()
    vals = sf.eval_f(f, kappa)
    assert vals.shape == (7, 4)
    npt.assert_allclose(vals, np.sqrt((kappa ** 2).sum(axis=-1)), rtol=1e-14)
    assert sf.grad_f(f, kappa).shape == (7, 4, 3)
    assert sf.hess_f(f, kappa).shape == (7, 4, 3, 3)


@pytest.mark.parametrize("name", ALL_BUILTINS)
@pytest.mark.parametrize("kappa", [(1.0, 2.0), (0.3, 0.3, 4.0), (2.0, 2.0, 2.0, 5.0)])
def test_gradient_matches_finite_differences(name, kappa):
    f = sf.builtin(name)
    kappa = np.array(kappa)
    npt.assert_allclose(sf.grad_f(f, kappa), _fd_grad(f, kappa), rtol=1e-5, atol=1e-10)


@pytest.mark.parametrize("name", ALL_BUILTINS)
@pytest.mark.parametrize("kappa", [(1.0, 2.0), (0.5, 1.5, 3.0)])
def test_hessian_matches_finite_differences(name, kappa):
    f = sf.builtin(name)
    kappa = np.array(kappa)
    hess = sf.hess_f(f, kappa)
    npt.assert_allclose(hess, hess.swapaxes(-1, -2), rtol=0, atol=1e-13)
    npt.assert_allclose(hess, _fd_hess(f, kappa), rtol=1e-5, atol=1e-8)


def test_power_mean_derivatives():
    f = sf.power_mean(3.0)
    kappa = np.array([1.0, 2.0])
    npt.assert_allclose(sf.grad_f(f, kappa), _fd_grad(f, kappa, step=1e-6), rtol=1e-6)
    npt.assert_allclose(sf.hess_f(f, kappa), _fd_hess(f, kappa), rtol=1e-5)


def test_mean_hessian_vanishes():
    npt.assert_array_equal(sf.hess_f(sf.mean(), np.array([1.0, 2.0, 3.0])),
                           np.zeros((3, 3)))


@given(st.integers(2, 5), st.floats(0.1, 10.0), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=60, deadline=None)
def test_homogeneity_euler_monotonicity(n, lam, seed):
    kappa = np.random.default_rng(seed).uniform(0.05, 20.0, size=n)
    for name in ALL_BUILTINS:
        f = sf.builtin(name)
        val = sf.eval_f(f, kappa)
        grad = sf.grad_f(f, kappa)
        assert val > 0
        assert np.all(grad > 0), f"{name} must be strictly monotone on the cone"
        # degree-one homogeneity and its Euler consequence
        npt.assert_allclose(sf.eval_f(f, lam * kappa), lam * val, rtol=1e-12)
        npt.assert_allclose(np.dot(kappa, grad), val, rtol=1e-12)


@given(st.integers(2, 4), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=40, deadline=None)
def test_duality_involution(n, seed):
    kappa = np.random.default_rng(seed).uniform(0.1, 10.0, size=n)
    for name in ALL_BUILTINS:
        f = sf.builtin(name)
        star = sf.dual_f(f)
        npt.assert_allclose(sf.eval_f(star, kappa), 1.0 / sf.eval_f(f, 1.0 / kappa),
                            rtol=1e-13)
        npt.assert_allclose(sf.eval_f(sf.dual_f(star), kappa), sf.eval_f(f, kappa),
                            rtol=1e-12)


def test_harmonic_mean_below_mean():
    rng = np.random.default_rng(11)
    kappa = rng.uniform(0.2, 8.0, size=(200, 3))
    hm = sf.eval_f(sf.harmonic_mean(), kappa)
    am = sf.eval_f(sf.mean(), kappa)
    assert np.all(hm <= am + 1e-12)


def test_cone_violation_raises():
    with pytest.raises(NonPositiveCurvature):
        sf.eval_f(sf.mean(), np.array([1.0, -1.0]))
    with pytest.raises(NonPositiveCurvature):
        sf.eval_f(sf.norm(), np.array([0.0, 2.0]))


def test_unknown_builtin_raises():
    with pytest.raises(ConfigError):
        sf.builtin("gauss")


# ---------------------------------------------------------------------------
# speed functions F = f^p (p > 0) and F = -f^p (p < 0, expanding)
# ---------------------------------------------------------------------------

def test_speed_function_basics():
    sp = sf.SpeedFunction(sf.mean(), 0.5)
    kappa = np.array([1.0, 3.0])
    npt.assert_allclose(sp.value(kappa), 2.0, rtol=1e-14)
    assert sp.contracting
    npt.assert_allclose(sp.delta_default, 1.0 / 3.0, rtol=1e-15)

    exp = sf.SpeedFunction(sf.mean(), -0.5)
    assert not exp.contracting
    assert exp.value(np.array([1.0, 1.0])) < 0
    npt.assert_allclose(exp.delta_default, -1.0, rtol=1e-15)

    with pytest.raises(ConfigError):
        sf.SpeedFunction(sf.mean(), 0.0)


@pytest.mark.parametrize("exponent", [0.5, 1.0, -0.5])
def test_scalar_derivs_match_finite_differences(exponent):
    """Each entry of (F, F', F'', F''') differentiates the one before it."""
    sp = sf.SpeedFunction(sf.mean(), exponent)
    for fval in (0.5, 2.0, 7.0):
        step = 1e-6 * fval
        derivs = sp.scalar_derivs(fval)
        up, dn = sp.scalar_derivs(fval + step), sp.scalar_derivs(fval - step)
        expected_value = fval ** exponent if exponent > 0 else -(fval ** exponent)
        npt.assert_allclose(derivs[0], expected_value, rtol=1e-13)
        assert derivs[1] > 0, "F must be strictly increasing in f for both signs"
        for k in range(3):
            fd = (up[k] - dn[k]) / (2 * step)
            npt.assert_allclose(derivs[k + 1], fd, rtol=1e-6)


# ---------------------------------------------------------------------------
# matrix routes: eigensystem, F^{ij}, second derivative forms
# ---------------------------------------------------------------------------

def _random_pair(rng, n, batch=()):
    """Strictly convex (g, h): SPD metric and SPD second fundamental form."""
    a = rng.normal(size=batch + (n, n))
    g = np.einsum("...ik,...jk->...ij", a, a) + n * np.eye(n)
    b = rng.normal(size=batch + (n, n))
    h = np.einsum("...ik,...jk->...ij", b, b) + 0.5 * np.eye(n)
    return g, h


def test_weingarten_eigensystem_reconstructs():
    rng = np.random.default_rng(5)
    g, h = _random_pair(rng, 3, batch=(40,))
    kappa, T = sf.weingarten_eigensystem(g, h)
    assert np.all(kappa > 0)
    # columns are g-orthonormal and diagonalize h
    npt.assert_allclose(np.einsum("nia,nij,njb->nab", T, g, T),
                        np.broadcast_to(np.eye(3), (40, 3, 3)), atol=1e-12)
    npt.assert_allclose(np.einsum("nia,nij,njb->nab", T, h, T),
                        kappa[:, None, :] * np.broadcast_to(np.eye(3), (40, 3, 3)),
                        atol=1e-11)
    # Weingarten eigenvalues agree with the generalized spectrum
    w = np.einsum("nij,njk->nik", np.linalg.inv(g), h)
    npt.assert_allclose(np.sort(np.linalg.eigvals(w).real, axis=1),
                        np.sort(kappa, axis=1), rtol=1e-10)


def test_dF_matrix_power_composition():
    """F = f^p has F^{ij} = p f^(p-1) f^{ij} (chain rule through the spectrum)."""
    rng = np.random.default_rng(9)
    g, h = _random_pair(rng, 3)
    base = sf.SpeedFunction(sf.norm(), 1.0)
    powered = sf.SpeedFunction(sf.norm(), 0.5)
    kappa, _ = sf.weingarten_eigensystem(g, h)
    fval = sf.eval_f(sf.norm(), kappa)
    npt.assert_allclose(sf.dF_matrix(powered, g, h),
                        0.5 * fval ** (-0.5) * sf.dF_matrix(base, g, h), rtol=1e-12)


def test_trace_dF_from_eigenvalues():
    rng = np.random.default_rng(13)
    g, h = _random_pair(rng, 4)
    sp = sf.SpeedFunction(sf.mean(), 0.5)
    kappa, _ = sf.weingarten_eigensystem(g, h)
    H = kappa.sum()
    # tr(F') = g_{ij} F^{ij} = sum of spectral derivatives for f = mean
    npt.assert_allclose(sf.trace_dF(sp, g, h), 4 * 0.5 * H ** (-0.5), rtol=1e-12)


def test_d2F_quadratic_frozen_example():
    # F = H^(1/2) at the unit-metric umbilic point h = 2g in two dimensions,
    # direction eta = identity: value is -1/8 (pure p(p-1) f^(p-2) term).
    sp = sf.SpeedFunction(sf.mean(), 0.5)
    val = sf.d2F_quadratic(sp, np.eye(2), 2.0 * np.eye(2), np.eye(2))
    npt.assert_allclose(val, -0.125, rtol=1e-13)


def test_d2F_quadratic_frame_invariant():
    """F^{ij,kl} η η is a scalar: any simultaneous change of basis leaves it fixed."""
    rng = np.random.default_rng(21)
    g, h = _random_pair(rng, 3, batch=(25,))
    eta = rng.normal(size=(25, 3, 3))
    eta = 0.5 * (eta + eta.swapaxes(1, 2))
    sp = sf.SpeedFunction(sf.norm(), 0.5)
    P = rng.normal(size=(25, 3, 3)) + 2.0 * np.eye(3)
    push = lambda M: np.einsum("nai,nab,nbj->nij", P, M, P)
    npt.assert_allclose(sf.d2F_quadratic(sp, push(g), push(h), push(eta)),
                        sf.d2F_quadratic(sp, g, h, eta), rtol=1e-8, atol=1e-12)


def test_d2F_quadratic_matches_finite_difference_of_dF():
    """d²F[η,η] is the second derivative of t -> F(g, h + t η)."""
    rng = np.random.default_rng(33)
    g, h = _random_pair(rng, 3)
    eta = rng.normal(size=(3, 3))
    eta = 0.5 * (eta + eta.T)
    sp = sf.SpeedFunction(sf.norm(), 0.5)

    def F_of(t):
        kap, _ = sf.weingarten_eigensystem(g, h + t * eta)
        return sp.value(kap)

    step = 1e-4
    fd = (F_of(step) - 2.0 * F_of(0.0) + F_of(-step)) / step ** 2
    npt.assert_allclose(sf.d2F_quadratic(sp, g, h, eta), fd, rtol=1e-5)


def test_d2F_bilinear_polarization():
    rng = np.random.default_rng(8)
    g, h = _random_pair(rng, 3)
    A = rng.normal(size=(3, 3)); A = 0.5 * (A + A.T)
    C = rng.normal(size=(3, 3)); C = 0.5 * (C + C.T)
    sp = sf.SpeedFunction(sf.mean(), 0.75)
    bAC = sf.d2F_bilinear(sp, g, h, A, C)
    npt.assert_allclose(bAC, sf.d2F_bilinear(sp, g, h, C, A), rtol=1e-12)
    quad = lambda M: sf.d2F_quadratic(sp, g, h, M)
    npt.assert_allclose(bAC, 0.25 * (quad(A + C) - quad(A - C)), rtol=1e-9, atol=1e-12)
    npt.assert_allclose(sf.d2F_bilinear(sp, g, h, 2.0 * A + C, C),
                        2.0 * bAC + quad(C), rtol=1e-9, atol=1e-12)


def test_repeated_eigenvalues_continuous():
    """The divided-difference Hessian route must not jump across coincidences."""
    sp = sf.SpeedFunction(sf.norm(), 0.5)
    T = np.eye(2)
    eta = np.array([[0.3, 1.1], [1.1, -0.4]])
    exact = sf.d2F_quadratic_from_eig(sp, np.array([2.0, 2.0]), T, eta)
    for gap in (1e-12, 1e-10, 1e-9):
        near = sf.d2F_quadratic_from_eig(sp, np.array([2.0, 2.0 + gap]), T, eta)
        npt.assert_allclose(near, exact, rtol=1e-6)


def test_dF_from_eig_matches_matrix_route():
    rng = np.random.default_rng(17)
    g, h = _random_pair(rng, 3, batch=(10,))
    sp = sf.SpeedFunction(sf.harmonic_mean(), 1.0)
    kappa, T = sf.weingarten_eigensystem(g, h)
    npt.assert_allclose(sf.dF_from_eig(sp, kappa, T), sf.dF_matrix(sp, g, h),
                        rtol=1e-11, atol=1e-13)
