"""Harnack monitors against closed-form round-sphere values, the correction
branch structure, and configuration guards."""

import numpy as np
import numpy.testing as npt
import pytest

from harnacklab import flow, geometry as geo, harnack as ha
from harnacklab import symfunc as sf
from harnacklab.errors import ConfigError, MissingTrajectory, WrongAmbient, WrongSpeed

SPHERE = geo.AmbientSpace(1, 2)
FLAT = geo.AmbientSpace(0, 2)
MEAN = lambda p: sf.SpeedFunction(sf.mean(), p)
NORM = lambda p: sf.SpeedFunction(sf.norm(), p)


# ---------------------------------------------------------------------------
# closed-form oracles on round spheres
# ---------------------------------------------------------------------------

def test_flat_contracting_sphere_oracle():
    """n = 2, F = H, delta = 1/2: Q = 4/r^3 + 1/(r t) on r(t) = sqrt(1 - 4t)."""
    sol = flow.sphere_ode_solution(FLAT, MEAN(1.0), 1.0)
    for t in (0.05, 0.1, 0.2):
        st = sol.state(t)
        rep = ha.evaluate_monitor(st, ha.HarnackConfig("euclidean-contracting", delta=0.5))
        r = np.sqrt(1.0 - 4.0 * t)
        npt.assert_allclose(rep.min_Q, 4.0 / r ** 3 + 1.0 / (r * t), rtol=1e-12)
    # the spot value quoted for t = 0.1
    rep = ha.evaluate_monitor(sol.state(0.1),
                              ha.HarnackConfig("euclidean-contracting", delta=0.5))
    npt.assert_allclose(rep.min_Q, 21.5166, atol=5e-5)


def test_flat_expanding_sphere_oracle():
    """F = -H^(-1/2), delta = -1: Q = 1/(sqrt(2) t) exactly for the unit sphere.

    The gradient term vanishes and beta = -1/(2n) F^3-type terms collapse so
    only the time-scaled part survives; the monitored floor decays to zero.
    """
    sol = flow.sphere_ode_solution(FLAT, MEAN(-0.5), 1.0)
    qs = {}
    for t in (1.0, 10.0, 100.0):
        rep = ha.evaluate_monitor(sol.state(t),
                                  ha.HarnackConfig("euclidean-expanding", delta=-1.0))
        npt.assert_allclose(rep.min_Q, 1.0 / (np.sqrt(2.0) * t), rtol=1e-10)
        qs[t] = rep.min_Q
        assert rep.min_Q > 0
    assert qs[100.0] <= 0.1 * qs[1.0]


def test_strong_Hp_umbilic_closed_form():
    """p = 1 in the sphere: Q = 4 cot^3 r + cot r / t."""
    sol = flow.sphere_ode_solution(SPHERE, MEAN(1.0), 0.8)
    for t in (0.05, 0.1, 0.15):    # extinction is at ~0.1807
        st = sol.state(t)
        rep = ha.evaluate_monitor(st, ha.HarnackConfig("strong-Hp"))
        cot = 1.0 / np.tan(sol.radius(t))
        npt.assert_allclose(rep.min_Q, 4.0 * cot ** 3 + cot / t, rtol=1e-12)
        assert rep.delta == 0.5


def test_chi_variant_offsets_on_umbilic_sphere():
    """Q1 - Q2 = c F tr(F') pointwise, and chi3 = chi2 + the zeta term."""
    sol = flow.sphere_ode_solution(SPHERE, MEAN(1.0), 0.8)
    st = sol.state(0.1)
    q1 = ha.evaluate_monitor(st, ha.HarnackConfig("chi1"))
    q2 = ha.evaluate_monitor(st, ha.HarnackConfig("chi2"))
    npt.assert_allclose(q1.Q, q2.Q + st.F * st.tr_dF, rtol=1e-12)
    assert q1.min_Q > 0 and q2.min_Q > 0
    q3 = ha.evaluate_monitor(st, ha.HarnackConfig("chi3"))
    npt.assert_allclose(q3.Q, q2.Q + np.asarray(q3.terms["zeta"]), rtol=1e-12)


def test_terms_decompose_Q_exactly():
    mk = geo.markers_from_radial(SPHERE, geo.cos_mode_radial(0.8, 0.05, 2), 32)
    traj = flow.run(flow.FlowConfig(SPHERE, MEAN(0.5), geo.AxisymmetricProfile(mk),
                                    t_end=0.01, dt=1e-3))
    st = traj.states[-1]
    for variant in ("chi1", "chi2", "chi3", "strong-Hp"):
        rep = ha.evaluate_monitor(st, ha.HarnackConfig(variant))
        total = sum(np.asarray(v) for v in rep.terms.values())
        npt.assert_allclose(total, rep.Q, rtol=1e-13, atol=1e-15)
        assert rep.argmin == int(np.argmin(rep.Q))


def test_trajectory_sourced_time_derivative():
    mk = geo.markers_from_radial(SPHERE, geo.cos_mode_radial(0.8, 0.05, 2), 32)
    dt = 5e-4
    traj = flow.run(flow.FlowConfig(SPHERE, MEAN(1.0), geo.AxisymmetricProfile(mk),
                                    t_end=0.01, dt=dt))
    st = traj.state_at(0.005)
    analytic = ha.evaluate_monitor(st, ha.HarnackConfig("chi1"))
    differenced = ha.evaluate_monitor(st, ha.HarnackConfig("chi1"), trajectory=traj,
                                      dt=dt, dtF_source="trajectory")
    npt.assert_allclose(differenced.Q, analytic.Q, rtol=1e-5)
    with pytest.raises(MissingTrajectory):
        ha.evaluate_monitor(st, ha.HarnackConfig("chi1"), dtF_source="trajectory")


# ---------------------------------------------------------------------------
# zeta correction and branch structure
# ---------------------------------------------------------------------------

def test_zeta_branch_threshold():
    npt.assert_allclose(ha.zeta_branch_threshold(2), 0.75, rtol=1e-15)
    npt.assert_allclose(ha.zeta_branch_threshold(3), 2.0 / 3.0, rtol=1e-15)


def test_zeta_general_values():
    # zeta = p (n - 1/(2p-1)) F^(2 - 1/p)
    p, n, F = 0.9, 2, 2.0
    A = p * (n - 1.0 / (2 * p - 1.0))
    npt.assert_allclose(ha.zeta_general(p, n, F), A * F ** (2 - 1 / p), rtol=1e-13)
    npt.assert_allclose(ha.zeta_general(p, n, F, order=1),
                        A * (2 - 1 / p) * F ** (1 - 1 / p), rtol=1e-13)
    step = 1e-6
    fd = (ha.zeta_general(p, n, F + step) - ha.zeta_general(p, n, F - step)) / (2 * step)
    npt.assert_allclose(ha.zeta_general(p, n, F, order=1), fd, rtol=1e-8)


def test_zeta_monitor_vanishes_outside_first_branch():
    assert ha.zeta_monitor(0.6, 2, 2.0) == 0.0       # below threshold 3/4
    assert ha.zeta_monitor(1.0, 2, 2.0) == 0.0       # p = 1 uses the plain branch
    assert ha.zeta_monitor(0.9, 2, 2.0) == ha.zeta_general(0.9, 2, 2.0)


def test_strong_correction_coefficients():
    # first branch: p/(2p-1); second branch: n p
    npt.assert_allclose(ha.strong_correction_coefficient(0.9, 2), 0.9 / 0.8, rtol=1e-15)
    npt.assert_allclose(ha.strong_correction_coefficient(0.6, 2), 1.2, rtol=1e-15)
    npt.assert_allclose(ha.strong_correction_coefficient(1.0, 2), 2.0, rtol=1e-15)
    # continuity is not expected across the threshold, but both sides are finite
    eps = 1e-9
    thr = ha.zeta_branch_threshold(2)
    assert np.isfinite(ha.strong_correction_coefficient(thr - eps, 2))
    assert np.isfinite(ha.strong_correction_coefficient(thr + eps, 2))


def test_strong_Hp_correction_term_matches_branch():
    sol = flow.sphere_ode_solution(SPHERE, MEAN(0.6), 0.8)
    st = sol.state(0.05)
    rep = ha.evaluate_monitor(st, ha.HarnackConfig("strong-Hp"))
    H = 2.0 / np.tan(sol.radius(0.05))
    expected = -ha.strong_correction_coefficient(0.6, 2) * H ** (2 * 0.6 - 1.0)
    npt.assert_allclose(rep.terms["correction"], expected, rtol=1e-12)


# ---------------------------------------------------------------------------
# configuration guards
# ---------------------------------------------------------------------------

def test_variant_and_ambient_guards():
    sol1 = flow.sphere_ode_solution(SPHERE, MEAN(1.0), 0.8)
    st1 = sol1.state(0.1)
    with pytest.raises(WrongAmbient):
        ha.evaluate_monitor(st1, ha.HarnackConfig("euclidean-contracting"))
    sol0 = flow.sphere_ode_solution(FLAT, MEAN(1.0), 1.0)
    st0 = sol0.state(0.1)
    with pytest.raises(ConfigError):
        ha.evaluate_monitor(st0, ha.HarnackConfig("euclidean-expanding"))
    with pytest.raises(ConfigError):
        ha.evaluate_monitor(st1, ha.HarnackConfig("no-such-variant"))


def test_mean_only_variants_reject_other_speeds():
    sol = flow.sphere_ode_solution(SPHERE, NORM(1.0), 0.8)
    st = sol.state(0.1)
    for variant in ("chi3", "strong-Hp"):
        with pytest.raises(WrongSpeed):
            ha.evaluate_monitor(st, ha.HarnackConfig(variant))


def test_delta_window_validation():
    st0 = flow.sphere_ode_solution(FLAT, MEAN(1.0), 1.0).state(0.1)
    with pytest.raises(ConfigError):
        # contracting window is delta >= p/(p+1) = 1/2
        ha.evaluate_monitor(st0, ha.HarnackConfig("euclidean-contracting", delta=0.3))
    exp = flow.sphere_ode_solution(FLAT, MEAN(-0.5), 1.0).state(1.0)
    with pytest.raises(ConfigError):
        # expanding window is delta <= -1
        ha.evaluate_monitor(exp, ha.HarnackConfig("euclidean-expanding", delta=-0.5))
    st1 = flow.sphere_ode_solution(SPHERE, MEAN(1.0), 0.8).state(0.1)
    with pytest.raises(ConfigError):
        ha.evaluate_monitor(st1, ha.HarnackConfig("chi1", delta=0.0))
    with pytest.raises(ConfigError):
        ha.evaluate_monitor(st1, ha.HarnackConfig("strong-Hp", delta=0.4))


def test_monitor_requires_positive_time():
    st = flow.sphere_ode_solution(SPHERE, MEAN(1.0), 0.8).state(0.0)
    with pytest.raises(ConfigError):
        ha.evaluate_monitor(st, ha.HarnackConfig("chi1"))
