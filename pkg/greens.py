"""
Green's functions built from Weyl solutions, the Krein-type comparison
identities, and fractional powers of the free Dirichlet resolvent.
"""
import os
import math
import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from dotenv import load_dotenv
from scipy.integrate import quad

from errors import DomainError, NearEigenvalueError
from potential import Potential
from settings import Tolerances, resolve
from solutions import (BoundaryCondition, Geometry, SpectralParameter, jost_solution, left_solution,
                       reduced_wronskian, right_solution)

load_dotenv()
# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
# exp(-EXP_CUTOFF) is below the smallest subnormal double
EXP_CUTOFF = 745.0


@dataclass(frozen=True)
class GreenEvaluation:
    z: SpectralParameter
    x: float
    xp: float
    value: complex
    geometry: Geometry
    bcs: Tuple[float, ...]


# -- free kernels -------------------------------------------------------

def _scaled_sin(w, t):
    """sin(wt)·e^{iwt}"""
    return np.expm1(2j * w * t) / 2j


def _scaled_cos(w, t):
    """cos(wt)·e^{iwt}"""
    return (np.exp(2j * w * t) + 1.0) / 2.0


def _free_left(alpha: BoundaryCondition, w, x):
    return alpha.cos * _scaled_sin(w, x) / w - alpha.sin * _scaled_cos(w, x)


def _free_right(beta: BoundaryCondition, w, R, x):
    return beta.cos * _scaled_sin(w, R - x) / w + beta.sin * _scaled_cos(w, R - x)


def free_denominator(geometry: Geometry, alpha, beta, w, tol: Optional[Tolerances] = None) -> complex:
    """Scaled W(ψ_R, ψ_0) of the free solutions, checked against the near-eigenvalue threshold."""
    tol = resolve(tol)
    a = BoundaryCondition.of(alpha)
    if geometry.is_halfline:
        terms = (a.cos, 1j * w * a.sin)
    else:
        b = BoundaryCondition.of(beta)
        R = geometry.R
        s = _scaled_sin(w, R)
        terms = (a.cos * b.cos * s / w, -math.sin(a.angle - b.angle) * _scaled_cos(w, R), a.sin * b.sin * w * s)
    den = complex(sum(terms))
    scale = max(max(abs(t) for t in terms), 1e-300)
    if abs(den) < tol.near_eigenvalue * scale:
        raise NearEigenvalueError(f"z={complex(w) ** 2:.6g} is within threshold of an eigenvalue of the free operator", den)
    return den


def free_green(geometry: Geometry, alpha, beta, sp, x, xp, tol: Optional[Tolerances] = None) -> np.ndarray:
    """G⁰(z, x, x') for Robin angles, vectorized over x and xp."""
    sp = SpectralParameter.of(sp)
    w = sp.w
    a = BoundaryCondition.of(alpha)
    den = free_denominator(geometry, a, beta, w, tol)
    x, xp = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xp, dtype=float))
    lo, hi = np.minimum(x, xp), np.maximum(x, xp)
    spread = np.exp(1j * w * (hi - lo))
    if geometry.is_halfline:
        return _free_left(a, w, lo) * spread / den
    b = BoundaryCondition.of(beta)
    return _free_left(a, w, lo) * _free_right(b, w, geometry.R, hi) * spread / den


# -- perturbed kernels --------------------------------------------------

def _check_wronskian(reduced: complex, terms, tol: Tolerances, what: str):
    scale = max(max(abs(t) for t in terms), 1e-300)
    if abs(reduced) < tol.near_eigenvalue * scale:
        raise NearEigenvalueError(f"{what}: Wronskian {reduced:.3e} below threshold, z is near an eigenvalue", reduced)


def green_finite(pot: Potential, alpha, beta, R: float, sp, x: float, xp: float,
                 tol: Optional[Tolerances] = None) -> complex:
    tol = resolve(tol)
    sp = SpectralParameter.of(sp)
    if not (0 <= x <= R and 0 <= xp <= R):
        raise DomainError(f"points ({x}, {xp}) outside [0, {R}]")
    lo, hi = min(x, xp), max(x, xp)
    left = left_solution(pot, alpha, [sp.z], [lo, hi], tol)
    right = right_solution(pot, beta, R, [sp.z], [hi], tol)
    reduced = complex(reduced_wronskian(left, right, -1, 0)[0])
    pa, dpa, pb, dpb = left.phi[-1, 0], left.dphi[-1, 0], right.phi[0, 0], right.dphi[0, 0]
    _check_wronskian(reduced, (pa * dpb, dpa * pb, 2 * sp.w * pa * pb), tol, "green_finite")
    return complex(-left.phi[0, 0] * pb * np.exp(1j * sp.w * (hi - lo)) / reduced)


def green_halfline(pot: Potential, alpha, sp, x: float, xp: float, tol: Optional[Tolerances] = None) -> complex:
    tol = resolve(tol)
    sp = SpectralParameter.of(sp)
    if x < 0 or xp < 0:
        raise DomainError(f"points ({x}, {xp}) outside [0, ∞)")
    if sp.z.imag == 0 and sp.z.real > 0:
        raise DomainError("half-line Green's function needs Im z != 0 or z below the spectrum")
    lo, hi = min(x, xp), max(x, xp)
    left = left_solution(pot, alpha, [sp.z], [lo, hi], tol)
    jost, _ = jost_solution(pot, [sp.z], [hi], tol=tol)
    reduced = complex(reduced_wronskian(left, jost, -1, 0)[0])
    pa, dpa, pb, dpb = left.phi[-1, 0], left.dphi[-1, 0], jost.phi[0, 0], jost.dphi[0, 0]
    _check_wronskian(reduced, (pa * dpb, dpa * pb, 2 * sp.w * pa * pb), tol, "green_halfline")
    return complex(-left.phi[0, 0] * pb * np.exp(1j * sp.w * (hi - lo)) / reduced)


def green_kernel(pot: Potential, geometry: Geometry, alpha, beta, sp, x: float, xp: float,
                 tol: Optional[Tolerances] = None) -> GreenEvaluation:
    sp = SpectralParameter.of(sp)
    if geometry.is_halfline:
        value = green_halfline(pot, alpha, sp, x, xp, tol)
        bcs = (BoundaryCondition.of(alpha).angle,)
    else:
        value = green_finite(pot, alpha, beta, geometry.R, sp, x, xp, tol)
        bcs = (BoundaryCondition.of(alpha).angle, BoundaryCondition.of(beta).angle)
    return GreenEvaluation(sp, x, xp, value, geometry, bcs)


def _interval_vs_halfline(pot: Potential, alpha, beta, R: float, sp: SpectralParameter, x: float, xp: float,
                          tol: Tolerances) -> Tuple[complex, complex]:
    b = BoundaryCondition.of(beta)
    w = sp.w
    left = left_solution(pot, alpha, [sp.z], sorted({x, xp, R}), tol)
    jost, _ = jost_solution(pot, [sp.z], [R], tol=tol)
    rows = {float(v): i for i, v in enumerate(left.xs)}
    phi_x, phi_xp = left.phi[rows[float(x)], 0], left.phi[rows[float(xp)], 0]
    p0, dp0 = left.phi[-1, 0], left.dphi[-1, 0]
    pj, dpj = jost.phi[0, 0], jost.dphi[0, 0]
    n_plus = b.sin * (dpj + 1j * w * pj) + b.cos * pj
    n_zero = b.sin * (dp0 - 1j * w * p0) + b.cos * p0
    _check_wronskian(n_zero, (b.sin * dp0, b.sin * w * p0, b.cos * p0), tol, "krein_residual (interval operator)")
    reduced = complex(reduced_wronskian(left, jost, -1, 0)[0])
    correction = n_plus * phi_x * phi_xp * np.exp(1j * w * (2 * R - x - xp)) / (n_zero * reduced)
    lhs = green_finite(pot, alpha, b, R, sp, x, xp, tol)
    rhs = green_halfline(pot, alpha, sp, x, xp, tol) + correction
    return lhs, complex(rhs)


def _two_halfline_angles(pot: Potential, alpha, alpha_tilde, sp: SpectralParameter, x: float, xp: float,
                         tol: Tolerances) -> Tuple[complex, complex]:
    a = BoundaryCondition.of(alpha)
    at = BoundaryCondition.of(alpha_tilde)
    w = sp.w
    jost, _ = jost_solution(pot, [sp.z], sorted({0.0, x, xp}), tol=tol)
    rows = {float(v): i for i, v in enumerate(jost.xs)}
    p0, dp0 = jost.phi[0, 0], jost.dphi[0, 0]
    lhs = green_halfline(pot, at, sp, x, xp, tol)
    base = green_halfline(pot, a, sp, x, xp, tol)
    shift = math.sin(at.angle - a.angle)
    if shift == 0.0:
        return lhs, base
    reduced = -(a.sin * (dp0 + 1j * w * p0) + a.cos * p0)
    jost_tilde = at.sin * (dp0 + 1j * w * p0) + at.cos * p0
    _check_wronskian(jost_tilde, (at.sin * dp0, at.sin * w * p0, at.cos * p0), tol, "krein_residual (angle α̃)")
    phi_x, phi_xp = jost.phi[rows[float(x)], 0], jost.phi[rows[float(xp)], 0]
    correction = shift * phi_x * phi_xp * np.exp(1j * w * (x + xp)) / (reduced * jost_tilde)
    return lhs, complex(base + correction)


def krein_residual(pot: Potential, alpha, sp, x: float, xp: float, beta=None, R: Optional[float] = None,
                   alpha_tilde=None, tol: Optional[Tolerances] = None) -> float:
    """|LHS - RHS| of the interval/half-line comparison (beta and R given)
    or of the two-angle half-line comparison (alpha_tilde given)."""
    tol = resolve(tol)
    sp = SpectralParameter.of(sp)
    if alpha_tilde is not None:
        lhs, rhs = _two_halfline_angles(pot, alpha, alpha_tilde, sp, x, xp, tol)
    elif beta is not None and R is not None:
        if not (0 <= x <= R and 0 <= xp <= R):
            raise DomainError(f"points ({x}, {xp}) outside [0, {R}]")
        lhs, rhs = _interval_vs_halfline(pot, alpha, beta, R, sp, x, xp, tol)
    else:
        raise DomainError("krein_residual needs either (beta, R) or alpha_tilde")
    residual = abs(lhs - rhs)
    logger.debug(f"[Greens] Krein residual {residual:.3e} at z={sp.z}, ({x}, {xp})")
    return float(residual)


# -- fractional powers --------------------------------------------------

def bessel_k0(t: float, tol: Optional[Tolerances] = None) -> float:
    """K₀(t) = ∫₀^∞ exp(-t·cosh u) du, series below t = 1e-3."""
    tol = resolve(tol)
    if t < 0:
        raise DomainError(f"K0 needs a nonnegative argument, got {t}")
    if t == 0:
        return math.inf
    if t < 1e-3:
        q = t * t / 4.0
        return -(math.log(t / 2.0) + EULER_GAMMA) * (1.0 + q) + q
    if t >= EXP_CUTOFF:
        return 0.0
    upper = math.acosh(EXP_CUTOFF / t)
    value, _ = quad(lambda u: math.exp(-t * math.cosh(u)), 0.0, upper,
                    epsabs=tol.quad_epsabs * 1e-3, epsrel=tol.quad_epsrel, limit=200)
    return float(value)


def _dirichlet_real(R: Optional[float], kappa, lo: float, hi: float):
    """Free Dirichlet kernel at z = -κ², overflow-free."""
    kappa = np.asarray(kappa, dtype=float)
    decay = np.exp(-kappa * (hi - lo)) * (-np.expm1(-2.0 * kappa * lo)) / (2.0 * kappa)
    if R is None:
        return decay
    return decay * (-np.expm1(-2.0 * kappa * (R - hi))) / (-np.expm1(-2.0 * kappa * R))


def frac_power_kernel(geometry: Geometry, E: float, q: float, x: float, xp: float, general: bool = False,
                      tol: Optional[Tolerances] = None) -> float:
    """Kernel of (H⁰ + E)^{-q} for the free Dirichlet operator, 0 < q <= 1."""
    tol = resolve(tol)
    if not E > 0:
        raise DomainError(f"E must be positive, got {E}")
    if not (0 < q <= 1):
        raise DomainError(f"q must lie in (0, 1], got {q}")
    R = None if geometry.is_halfline else geometry.R
    if x < 0 or xp < 0 or (R is not None and (x > R or xp > R)):
        raise DomainError(f"points ({x}, {xp}) outside the geometry")
    lo, hi = min(x, xp), max(x, xp)
    if lo == 0.0 or (R is not None and hi == R):
        return 0.0
    if q == 1:
        return float(_dirichlet_real(R, math.sqrt(E), lo, hi))
    if lo == hi and q <= 0.5:
        return math.inf
    if q == 0.5 and not general:
        root = math.sqrt(E)
        if R is None:
            return (bessel_k0(root * (hi - lo), tol) - bessel_k0(root * (hi + lo), tol)) / math.pi

        gap = root * (hi - lo)
        if gap >= EXP_CUTOFF:
            return 0.0
        upper = math.acosh(max(EXP_CUTOFF / gap, 1.0))

        def integrand(t):
            # s = √E·cosh t removes the 1/√(s² - E) endpoint singularity
            s = root * math.cosh(t)
            return float(_dirichlet_real(R, s, lo, hi)) * s

        value, _ = quad(integrand, 0.0, upper, epsabs=tol.quad_epsabs, epsrel=tol.quad_epsrel, limit=200)
        return 2.0 * value / math.pi

    power = 1.0 / (1.0 - q)

    def general_integrand(tau):
        with np.errstate(over="ignore"):
            kappa = np.sqrt(E + np.float64(tau) ** power)
        if not np.isfinite(kappa):
            return 0.0
        return float(_dirichlet_real(R, kappa, lo, hi))

    value, _ = quad(general_integrand, 0.0, math.inf, epsabs=tol.quad_epsabs, epsrel=tol.quad_epsrel, limit=400)
    return math.sin(math.pi * q) / math.pi * power * value
