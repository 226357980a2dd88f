"""Symmetric functions of principal curvatures and their spectral calculus.

A curvature function f is a smooth symmetric function on the positive cone
Γ₊ = {κ ∈ ℝⁿ : κᵢ > 0}, strictly monotone (∂f/∂κᵢ > 0) and homogeneous of
degree one.  The flow speed is F = f^α with α > 0 (contracting) or
F = −f^(−β) with 0 < β < 1 (expanding), so that Φ' > 0 in both modes.

Given a metric g (SPD) and a second fundamental form h (symmetric), the
Weingarten map g⁻¹h is self-adjoint with respect to g; its eigenvalues are
the principal curvatures κ and there is a g-orthonormal eigenbasis T with

    Tᵀ g T = 1,      T⁻¹ (g⁻¹ h) T = diag(κ).

In that basis the first derivative of the speed acts diagonally,

    F^{ij} = Σ_a Φ'_a(κ) T^i_a T^j_a,        tr(Ḟ) = g_{ij} F^{ij} = Σ_a Φ'_a,

and the second derivative, as a quadratic form on symmetric matrices η
(with η̂ = Tᵀ η T), is the classical two-part spectral formula

    F^{ij,kl} η_{ij} η_{kl} = Σ_{a,b} Φ''_{ab} η̂_{aa} η̂_{bb}
                              + Σ_{a≠b} (Φ'_a − Φ'_b)/(κ_a − κ_b) · η̂_{ab}²,

where the divided difference is replaced by its limit when κ_a → κ_b.
Bilinear values F^{ij,kl} A_{ij} C_{kl} are recovered by polarization.

All operations are vectorized over leading batch axes: g and h may be
(..., n, n) stacks and κ a (..., n) stack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, ConvexityLost, NonPositiveCurvature

# Two eigenvalues closer than this (relative to max |κ|) are treated as
# coincident and the divided difference is replaced by its analytic limit.
EIG_COINCIDENCE_RTOL = 1e-8


# ---------------------------------------------------------------------------
# curvature functions f(κ)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvatureFunction:
    """A symmetric, 1-homogeneous curvature function on Γ₊.

    Parameters
    ----------
    name : str
        Identifier used in configs and reports.
    value, gradient, hessian : callables
        Vectorized evaluations at κ of shape (..., n); value returns (...,),
        gradient (..., n) and hessian (..., n, n).
    convex, inverse_concave : bool
        Structural flags used by the monitors that need them (the Urbas-type
        inequality requires inverse concavity, curvature pinching convexity).
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    convex: bool = False
    inverse_concave: bool = False


def _power_mean_core(r: float):
    """f(κ) = (Σ κᵢ^r)^(1/r) with closed-form first and second derivatives."""

    def value(kappa):
        return np.sum(kappa ** r, axis=-1) ** (1.0 / r)

    def gradient(kappa):
        s = np.sum(kappa ** r, axis=-1)
        return s[..., None] ** (1.0 / r - 1.0) * kappa ** (r - 1.0)

    def hessian(kappa):
        s = np.sum(kappa ** r, axis=-1)[..., None, None]
        kr1 = kappa ** (r - 1.0)
        diag = s ** (1.0 / r - 1.0) * _diag_embed(kappa ** (r - 2.0))
        outer = s ** (1.0 / r - 2.0) * (kr1[..., :, None] * kr1[..., None, :])
        return (r - 1.0) * (diag - outer)

    return value, gradient, hessian


def _diag_embed(v):
    """Embed (..., n) vectors as (..., n, n) diagonal matrices."""
    out = np.zeros(v.shape + (v.shape[-1],), dtype=v.dtype)
    idx = np.arange(v.shape[-1])
    out[..., idx, idx] = v
    return out


def mean() -> CurvatureFunction:
    """Mean curvature f(κ) = Σ κᵢ (convex and inverse-concave)."""
    v, g, h = _power_mean_core(1.0)
    return CurvatureFunction("mean", v, g, h, convex=True, inverse_concave=True)


def norm() -> CurvatureFunction:
    """Euclidean norm f(κ) = |κ| (convex, not inverse-concave)."""
    v, g, h = _power_mean_core(2.0)
    return CurvatureFunction("norm", v, g, h, convex=True, inverse_concave=False)


def power_mean(r: float) -> CurvatureFunction:
    """f(κ) = (Σ κᵢ^r)^(1/r); convex for r ≥ 1."""
    if r == 0:
        raise ConfigError("power-mean exponent r must be nonzero")
    v, g, h = _power_mean_core(float(r))
    return CurvatureFunction(f"power-mean({r:g})", v, g, h,
                             convex=(r >= 1.0), inverse_concave=(r == 1.0))


def harmonic_mean() -> CurvatureFunction:
    """f(κ) = n² / Σ κᵢ⁻¹, normalized so f(1, …, 1) = n.

    Concave but inverse-concave: its dual 1/f(κ⁻¹) = Σ κᵢ / n² is linear.
    """

    def value(kappa):
        n = kappa.shape[-1]
        return n * n / np.sum(1.0 / kappa, axis=-1)

    def gradient(kappa):
        n = kappa.shape[-1]
        s = np.sum(1.0 / kappa, axis=-1)[..., None]
        return n * n / (s * s) * kappa ** -2.0

    def hessian(kappa):
        n = kappa.shape[-1]
        s = np.sum(1.0 / kappa, axis=-1)[..., None, None]
        k2 = kappa ** -2.0
        outer = k2[..., :, None] * k2[..., None, :]
        return n * n * (2.0 / s ** 3 * outer - 2.0 / s ** 2 * _diag_embed(kappa ** -3.0))

    return CurvatureFunction("harmonic-mean", value, gradient, hessian,
                             convex=False, inverse_concave=True)


def custom(name, value, gradient, hessian, convex=False, inverse_concave=False):
    """Wrap user-supplied callables as a CurvatureFunction."""
    return CurvatureFunction(name, value, gradient, hessian, convex, inverse_concave)


_BUILTINS = {"mean": mean, "norm": norm, "harmonic-mean": harmonic_mean}


def builtin(name: str) -> CurvatureFunction:
    """Look a curvature function up by config name.

    Accepts "mean", "norm", "harmonic-mean" and "power-mean(r)".
    """
    key = name.strip().lower()
    if key in _BUILTINS:
        return _BUILTINS[key]()
    if key.startswith("power-mean(") and key.endswith(")"):
        try:
            r = float(key[len("power-mean("):-1])
        except ValueError:
            raise ConfigError(f"cannot parse power-mean exponent in {name!r}") from None
        return power_mean(r)
    raise ConfigError(f"unknown curvature function {name!r}")


def _check_cone(kappa):
    kappa = np.asarray(kappa)
    if not np.issubdtype(kappa.dtype, np.floating):
        kappa = kappa.astype(float)
    if not np.all(np.isfinite(kappa)):
        raise NonPositiveCurvature("principal curvatures contain non-finite entries")
    if np.any(kappa <= 0.0):
        raise NonPositiveCurvature(
            f"principal curvatures leave the positive cone (min = {kappa.min():.6g})")
    return kappa


def eval_f(f: CurvatureFunction, kappa) -> np.ndarray:
    """Evaluate f on κ ∈ Γ₊; raises NonPositiveCurvature outside the cone."""
    return f.value(_check_cone(kappa))


def grad_f(f: CurvatureFunction, kappa) -> np.ndarray:
    """∂f/∂κᵢ, shape (..., n)."""
    return f.gradient(_check_cone(kappa))


def hess_f(f: CurvatureFunction, kappa) -> np.ndarray:
    """∂²f/∂κᵢ∂κⱼ, shape (..., n, n)."""
    return f.hessian(_check_cone(kappa))


def dual_f(f: CurvatureFunction) -> CurvatureFunction:
    """The dual function f̃(κ) = 1/f(κ⁻¹), with derivatives by the chain rule.

    The dual of the dual reproduces f, and f is inverse-concave exactly when
    f̃ is concave.
    """

    def value(kappa):
        return 1.0 / f.value(1.0 / kappa)

    def gradient(kappa):
        x = 1.0 / kappa
        fv = f.value(x)[..., None]
        return f.gradient(x) * x ** 2 / fv ** 2

    def hessian(kappa):
        x = 1.0 / kappa
        fv = f.value(x)[..., None, None]
        gr = f.gradient(x)
        gx2 = gr * x ** 2
        outer = gx2[..., :, None] * gx2[..., None, :]
        hx = f.hessian(x) * x[..., :, None] ** 2 * x[..., None, :] ** 2
        return 2.0 * outer / fv ** 3 - hx / fv ** 2 - 2.0 * _diag_embed(gr * x ** 3) / fv ** 2

    return CurvatureFunction(f.name + "-dual", value, gradient, hessian)


# ---------------------------------------------------------------------------
# flow speeds F = ±f^α
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeedFunction:
    """Flow speed F built from a curvature function by a power law.

    exponent > 0 gives the contracting speed F = f^exponent; a negative
    exponent −β with 0 < β < 1 gives the expanding speed F = −f^(−β).
    Either way ∂F/∂κᵢ > 0 on Γ₊.
    """

    f: CurvatureFunction
    exponent: float

    def __post_init__(self):
        a = self.exponent
        if not np.isfinite(a) or a == 0:
            raise ConfigError("speed exponent must be a nonzero real number")
        if a < 0 and not -1.0 < a:
            raise ConfigError(
                f"expanding speeds need exponent −β with 0 < β < 1, got {a:g}")

    @property
    def contracting(self) -> bool:
        return self.exponent > 0

    @property
    def sign(self) -> float:
        return 1.0 if self.exponent > 0 else -1.0

    @property
    def delta_default(self) -> float:
        """Harnack exponent δ = α/(α+1); equals β/(β−1) < 0 when expanding."""
        return self.exponent / (self.exponent + 1.0)

    def value(self, kappa):
        return self.sign * eval_f(self.f, kappa) ** self.exponent

    def dvalue(self, kappa):
        """Φ'_i = ∂F/∂κᵢ = |α| f^(α−1) ∂f/∂κᵢ (positive in both modes)."""
        kappa = _check_cone(kappa)
        a = self.exponent
        fv = self.f.value(kappa)[..., None]
        return abs(a) * fv ** (a - 1.0) * self.f.gradient(kappa)

    def d2value(self, kappa):
        """Φ''_{ij} = |α| f^(α−1) f_{ij} + |α|(α−1) f^(α−2) f_i f_j."""
        kappa = _check_cone(kappa)
        a = self.exponent
        fv = self.f.value(kappa)[..., None, None]
        gr = self.f.gradient(kappa)
        outer = gr[..., :, None] * gr[..., None, :]
        return abs(a) * fv ** (a - 1.0) * self.f.hessian(kappa) \
            + abs(a) * (a - 1.0) * fv ** (a - 2.0) * outer

    def scalar_derivs(self, fval):
        """(F, F', F'', F''') as functions of the scalar f-value.

        Used by the mean-curvature specializations where F = F(H).
        """
        a, s = self.exponent, self.sign
        fval = np.asarray(fval)
        if not np.issubdtype(fval.dtype, np.floating):
            fval = fval.astype(float)
        return (s * fval ** a,
                abs(a) * fval ** (a - 1.0),
                abs(a) * (a - 1.0) * fval ** (a - 2.0),
                abs(a) * (a - 1.0) * (a - 2.0) * fval ** (a - 3.0))


def _as_speed(F) -> SpeedFunction:
    if isinstance(F, SpeedFunction):
        return F
    if isinstance(F, CurvatureFunction):
        return SpeedFunction(F, 1.0)
    raise ConfigError(f"expected a SpeedFunction or CurvatureFunction, got {type(F)!r}")


# ---------------------------------------------------------------------------
# spectral calculus of F on (g, h) pairs
# ---------------------------------------------------------------------------

def weingarten_eigensystem(g, h):
    """Principal curvatures and a g-orthonormal eigenbasis of g⁻¹h.

    Returns (κ, T) with κ ascending, Tᵀ g T = 1 and (g⁻¹h) T = T diag(κ).
    Computed through the Cholesky factor g = LLᵀ so that the symmetric
    eigenproblem is solved for L⁻¹ h L⁻ᵀ.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    L = np.linalg.cholesky(g)
    A = np.linalg.solve(L, h)
    A = np.linalg.solve(L, np.swapaxes(A, -1, -2))
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    kappa, U = np.linalg.eigh(A)
    T = np.linalg.solve(np.swapaxes(L, -1, -2), U)
    return kappa, T


def _check_convex(kappa):
    if not np.all(np.isfinite(kappa)):
        raise ConvexityLost("Weingarten eigenvalues contain non-finite entries")
    if np.any(kappa <= 0.0):
        raise ConvexityLost(
            f"Weingarten map has a nonpositive eigenvalue (min = {kappa.min():.6g})")


def dF_matrix(F, g, h) -> np.ndarray:
    """First derivative F^{ij} = Σ_a Φ'_a T^i_a T^j_a (contravariant, SPD)."""
    speed = _as_speed(F)
    kappa, T = weingarten_eigensystem(g, h)
    _check_convex(kappa)
    return dF_from_eig(speed, kappa, T)


def dF_from_eig(speed, kappa, T):
    phi = speed.dvalue(kappa)
    return np.einsum("...ia,...a,...ja->...ij", T, phi, T)


def trace_dF(F, g, h) -> np.ndarray:
    """tr(Ḟ) = g_{ij} F^{ij} = Σ_a Φ'_a(κ)."""
    speed = _as_speed(F)
    kappa, _ = weingarten_eigensystem(g, h)
    _check_convex(kappa)
    return np.sum(speed.dvalue(kappa), axis=-1)


def _divided_differences(kappa, phi, hess):
    """(Φ'_a − Φ'_b)/(κ_a − κ_b) with the analytic limit at coincidence."""
    dk = kappa[..., :, None] - kappa[..., None, :]
    dphi = phi[..., :, None] - phi[..., None, :]
    scale = np.max(np.abs(kappa), axis=-1)[..., None, None]
    near = np.abs(dk) <= EIG_COINCIDENCE_RTOL * scale
    hd = np.einsum("...aa->...a", hess)
    limit = 0.5 * (hd[..., :, None] + hd[..., None, :]) - hess
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = np.where(near, limit, dphi / np.where(near, 1.0, dk))
    return dd


def d2F_quadratic_from_eig(speed, kappa, T, eta):
    etahat = np.einsum("...ia,...ij,...jb->...ab", T, eta, T)
    phi = speed.dvalue(kappa)
    hess = speed.d2value(kappa)
    ed = np.einsum("...aa->...a", etahat)
    quad = np.einsum("...ab,...a,...b->...", hess, ed, ed)
    dd = _divided_differences(kappa, phi, hess)
    off = etahat ** 2
    idx = np.arange(kappa.shape[-1])
    off = off.copy()
    off[..., idx, idx] = 0.0
    return quad + np.einsum("...ab,...ab->...", dd, off)


def d2F_quadratic(F, g, h, eta) -> np.ndarray:
    """Second-derivative quadratic form F^{ij,kl} η_{ij} η_{kl}.

    η must be symmetric with the same covariant index placement as h.
    """
    speed = _as_speed(F)
    kappa, T = weingarten_eigensystem(g, h)
    _check_convex(kappa)
    return d2F_quadratic_from_eig(speed, kappa, T, np.asarray(eta, dtype=float))


def d2F_bilinear_from_eig(speed, kappa, T, A, C):
    """F^{ij,kl} A_{ij} C_{kl} by polarization of the quadratic form."""
    qp = d2F_quadratic_from_eig(speed, kappa, T, A + C)
    qm = d2F_quadratic_from_eig(speed, kappa, T, A - C)
    return 0.25 * (qp - qm)


def d2F_bilinear(F, g, h, A, C) -> np.ndarray:
    speed = _as_speed(F)
    kappa, T = weingarten_eigensystem(g, h)
    _check_convex(kappa)
    return d2F_bilinear_from_eig(speed, kappa, T,
                                 np.asarray(A, dtype=float), np.asarray(C, dtype=float))
