"""
Weyl and Jost solutions of -ψ'' + Vψ = zψ.

Solutions are propagated in scaled form ψ = φ·exp(s·i·w·(x - x_ref)):
s = -1 for the left Weyl solution (x_ref = 0), s = +1 for the right Weyl
solution (x_ref = R) and for the Jost solution (x_ref = 0). The scaled
function satisfies φ'' = -2·s·i·w·φ' + V·φ, which is free of the
exponential growth of ψ in the direction of integration. Where V vanishes
the propagation is done exactly.

Every batched routine integrates a whole vector of spectral parameters at
once with scipy's DOP853, restarting at the potential's breakpoints.
"""
import os
import math
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from dotenv import load_dotenv
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from errors import BranchError, DomainError, IntegrationError, TailError
from potential import Potential, l1_tail
from settings import Tolerances, resolve

load_dotenv()
# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)


def branch_root(z) -> np.ndarray:
    """w = z^{1/2} with Im w >= 0, elementwise."""
    zc = np.asarray(z, dtype=complex)
    w = np.sqrt(zc)
    return np.where(w.imag < 0, -w, w)


@dataclass(frozen=True)
class SpectralParameter:
    z: complex
    w: complex

    @classmethod
    def of(cls, z: Union[complex, "SpectralParameter"]) -> "SpectralParameter":
        if isinstance(z, SpectralParameter):
            return z
        z = complex(z)
        if z == 0:
            raise BranchError("z = 0 is excluded: the free solutions divide by z^(1/2)")
        return cls(z, complex(branch_root(z)))


@dataclass(frozen=True)
class BoundaryCondition:
    """sin(angle)·ψ'(endpoint) + cos(angle)·ψ(endpoint) = 0; angle 0 is Dirichlet."""

    angle: float

    def __post_init__(self):
        if not (0.0 <= self.angle < math.pi):
            raise DomainError(f"boundary angle must lie in [0, π), got {self.angle}")

    @classmethod
    def of(cls, angle: Union[float, "BoundaryCondition"]) -> "BoundaryCondition":
        return angle if isinstance(angle, BoundaryCondition) else cls(float(angle))

    @property
    def sin(self) -> float:
        return math.sin(self.angle)

    @property
    def cos(self) -> float:
        return math.cos(self.angle)


DIRICHLET = BoundaryCondition(0.0)


@dataclass(frozen=True)
class Geometry:
    kind: str
    R: Optional[float] = None
    cutoff: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("interval", "halfline"):
            raise DomainError(f"unknown geometry '{self.kind}'")
        if self.kind == "interval" and not (self.R is not None and self.R > 0):
            raise DomainError(f"interval geometry needs R > 0, got {self.R}")

    @classmethod
    def interval(cls, R: float) -> "Geometry":
        return cls("interval", R=float(R))

    @classmethod
    def halfline(cls, cutoff: Optional[float] = None) -> "Geometry":
        return cls("halfline", cutoff=cutoff)

    @property
    def is_halfline(self) -> bool:
        return self.kind == "halfline"

    def describe(self) -> dict:
        return {"geometry": self.kind, "R": self.R} if not self.is_halfline else {"geometry": self.kind}


@dataclass(frozen=True)
class SolutionSample:
    x: float
    psi: complex
    dpsi: complex


@dataclass(frozen=True, eq=False)
class ScaledSolution:
    """Batched solution data: rows follow xs, columns follow w."""

    xs: np.ndarray
    w: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    sign: int
    x_ref: float

    def _factor(self) -> np.ndarray:
        return np.exp(self.sign * 1j * np.outer(self.xs - self.x_ref, np.ones_like(self.w)) * self.w)

    def psi(self) -> np.ndarray:
        return self.phi * self._factor()

    def dpsi(self) -> np.ndarray:
        return (self.dphi + self.sign * 1j * self.w * self.phi) * self._factor()

    def samples(self, column: int = 0) -> List[SolutionSample]:
        psi, dpsi = self.psi()[:, column], self.dpsi()[:, column]
        return [SolutionSample(float(x), complex(p), complex(d)) for x, p, d in zip(self.xs, psi, dpsi)]


def reduced_wronskian(a: ScaledSolution, b: ScaledSolution, row_a: int = -1, row_b: int = 0) -> np.ndarray:
    """W(ψ_a, ψ_b) with the common exponential factor removed.

    For the pairs used here (opposite scaling signs) the factor is
    exp(-i·w·(s_a·x_ref_a + s_b·x_ref_b)) and does not depend on x.
    """
    pa, dpa = a.phi[row_a], a.dphi[row_a]
    pb, dpb = b.phi[row_b], b.dphi[row_b]
    return pa * dpb - dpa * pb + (b.sign - a.sign) * 1j * a.w * pa * pb


def _propagate(pot: Potential, w: np.ndarray, x_start: float, x_stop: float, phi0: np.ndarray,
               dphi0: np.ndarray, sign: int, xs_out: np.ndarray, tol: Tolerances) -> Tuple[np.ndarray, np.ndarray]:
    m = w.size
    phi_out = np.zeros((xs_out.size, m), dtype=complex)
    dphi_out = np.zeros((xs_out.size, m), dtype=complex)
    lo, hi = min(x_start, x_stop), max(x_start, x_stop)
    end = pot.support_end
    cuts = [b for b in pot.breakpoints if lo < b < hi]
    if lo < end < hi:
        cuts.append(end)
    nodes = sorted({lo, hi, *cuts})
    if x_start > x_stop:
        nodes = nodes[::-1]
    a2 = -2j * sign * w
    phi = np.array(phi0, dtype=complex)
    dphi = np.array(dphi0, dtype=complex)
    if len(nodes) == 1:
        hit = np.isclose(xs_out, x_start, rtol=0.0, atol=1e-14)
        phi_out[hit], dphi_out[hit] = phi, dphi
        return phi_out, dphi_out

    def rhs(x, y):
        p, dp = y[:m], y[m:]
        return np.concatenate([dp, a2 * dp + pot(x) * p])

    for a, b in zip(nodes[:-1], nodes[1:]):
        seg = (xs_out >= min(a, b)) & (xs_out <= max(a, b))
        if pot.is_zero or min(a, b) >= end:
            for j in np.flatnonzero(seg):
                growth = np.exp(a2 * (xs_out[j] - a))
                phi_out[j] = phi + dphi * np.expm1(a2 * (xs_out[j] - a)) / a2
                dphi_out[j] = dphi * growth
            phi = phi + dphi * np.expm1(a2 * (b - a)) / a2
            dphi = dphi * np.exp(a2 * (b - a))
            continue
        idx = np.flatnonzero(seg)
        ascending = np.unique(np.append(xs_out[idx], b))
        t_eval = ascending if b > a else ascending[::-1]
        sol = solve_ivp(rhs, (a, b), np.concatenate([phi, dphi]), method="DOP853", t_eval=t_eval,
                        rtol=tol.ode_rtol, atol=tol.ode_atol)
        if sol.status != 0 or sol.y.shape[1] != t_eval.size:
            last = float(sol.t[-1]) if sol.t.size else float(a)
            raise IntegrationError(f"ODE integration failed on [{a:.6g}, {b:.6g}]: {sol.message}", last)
        cols = np.searchsorted(ascending, xs_out[idx])
        if b < a:
            cols = ascending.size - 1 - cols
        phi_out[idx] = sol.y[:m, cols].T
        dphi_out[idx] = sol.y[m:, cols].T
        phi, dphi = sol.y[:m, -1].copy(), sol.y[m:, -1].copy()
    return phi_out, dphi_out


def _as_grid(xs: Sequence[float]) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(xs, dtype=float))
    if arr.size == 0:
        raise DomainError("solution grid must be nonempty")
    if np.any(np.diff(arr) < 0) or arr[0] < 0:
        raise DomainError("solution grid must be ascending and nonnegative")
    return arr


def _as_roots(zs) -> np.ndarray:
    zc = np.atleast_1d(np.asarray(zs, dtype=complex))
    if np.any(zc == 0):
        raise BranchError("z = 0 is excluded: the free solutions divide by z^(1/2)")
    return branch_root(zc)


def left_solution(pot: Potential, alpha: Union[float, BoundaryCondition], zs, xs,
                  tol: Optional[Tolerances] = None) -> ScaledSolution:
    """ψ_{0,α} for every z in zs, sampled on xs."""
    tol = resolve(tol)
    bc = BoundaryCondition.of(alpha)
    w = _as_roots(zs)
    xs = _as_grid(xs)
    phi0 = np.full(w.size, -bc.sin, dtype=complex)
    dphi0 = bc.cos - 1j * w * bc.sin
    phi, dphi = _propagate(pot, w, 0.0, float(xs[-1]), phi0, dphi0, -1, xs, tol)
    return ScaledSolution(xs, w, phi, dphi, -1, 0.0)


def right_solution(pot: Potential, beta: Union[float, BoundaryCondition], R: float, zs, xs,
                   tol: Optional[Tolerances] = None) -> ScaledSolution:
    """ψ_{R,β} for every z in zs, sampled on xs ⊂ [0, R]."""
    tol = resolve(tol)
    bc = BoundaryCondition.of(beta)
    w = _as_roots(zs)
    xs = _as_grid(xs)
    if xs[-1] > R * (1 + 1e-14):
        raise DomainError(f"right Weyl solution sampled beyond R={R}")
    phi0 = np.full(w.size, bc.sin, dtype=complex)
    dphi0 = -bc.cos - 1j * w * bc.sin
    phi, dphi = _propagate(pot, w, float(R), float(xs[0]), phi0, dphi0, 1, xs, tol)
    return ScaledSolution(xs, w, phi, dphi, 1, float(R))


def jost_cutoff(pot: Potential, tail_tol: Optional[float] = None, tol: Optional[Tolerances] = None) -> float:
    """Smallest convenient X with ∫_X^∞ |V| <= tail_tol."""
    tol = resolve(tol)
    tail_tol = tol.tail_tol if tail_tol is None else tail_tol
    if tail_tol <= 0:
        raise DomainError(f"tail tolerance must be positive, got {tail_tol}")
    if pot.is_zero:
        return 0.0
    end = pot.support_end
    if math.isfinite(end):
        return end
    if pot.kind == "grid-sampled" and pot.cutoff is None:
        raise TailError("grid-sampled potential needs a support_hint before a Jost cutoff can be chosen")
    if l1_tail(pot, 0.0, tol) <= tail_tol:
        return 0.0
    hi = 1.0
    while l1_tail(pot, hi, tol) > tail_tol:
        hi *= 2.0
        if hi > 1e6:
            raise TailError(f"tail tolerance {tail_tol:g} not reached before x=1e6")
    cut = brentq(lambda x: l1_tail(pot, x, tol) - tail_tol, 0.0, hi, xtol=1e-10)
    return float(cut) * (1 + 1e-12) + 1e-12


def jost_solution(pot: Potential, zs, xs, tail_tol: Optional[float] = None,
                  tol: Optional[Tolerances] = None) -> Tuple[ScaledSolution, float]:
    """ψ₊ for every z in zs; returns the solution and the cutoff used."""
    tol = resolve(tol)
    w = _as_roots(zs)
    xs = _as_grid(xs)
    if np.any(w.imag < 0):
        raise BranchError("Jost solutions need Im z^(1/2) >= 0")
    cutoff = jost_cutoff(pot, tail_tol, tol)
    phi = np.ones((xs.size, w.size), dtype=complex)
    dphi = np.zeros((xs.size, w.size), dtype=complex)
    inside = xs < cutoff
    if np.any(inside):
        p, dp = _propagate(pot, w, cutoff, float(xs[0]), np.ones(w.size, complex), np.zeros(w.size, complex),
                           1, xs[inside], tol)
        phi[inside], dphi[inside] = p, dp
    logger.debug(f"[Solver] Jost solution for {w.size} parameters, cutoff X={cutoff:.6g}")
    return ScaledSolution(xs, w, phi, dphi, 1, 0.0), cutoff


def free_solution(which: str, bc: Optional[Union[float, BoundaryCondition]], R: Optional[float],
                  sp: Union[complex, SpectralParameter], x: float) -> SolutionSample:
    sp = SpectralParameter.of(sp)
    w = sp.w
    if which == "jost":
        e = np.exp(1j * w * x)
        return SolutionSample(x, complex(e), complex(1j * w * e))
    b = BoundaryCondition.of(bc)
    if which == "left":
        psi = b.cos * np.sin(w * x) / w - b.sin * np.cos(w * x)
        dpsi = b.cos * np.cos(w * x) + b.sin * w * np.sin(w * x)
    elif which == "right":
        if R is None:
            raise DomainError("right free solution needs R")
        t = w * (R - x)
        psi = b.cos * np.sin(t) / w + b.sin * np.cos(t)
        dpsi = -b.cos * np.cos(t) + b.sin * w * np.sin(t)
    else:
        raise DomainError(f"unknown solution '{which}', expected left|right|jost")
    return SolutionSample(x, complex(psi), complex(dpsi))


def solve_weyl_left(pot: Potential, alpha, sp, xs, tol: Optional[Tolerances] = None) -> List[SolutionSample]:
    sp = SpectralParameter.of(sp)
    return left_solution(pot, alpha, [sp.z], xs, tol).samples()


def solve_weyl_right(pot: Potential, beta, R: float, sp, xs, tol: Optional[Tolerances] = None) -> List[SolutionSample]:
    sp = SpectralParameter.of(sp)
    return right_solution(pot, beta, R, [sp.z], xs, tol).samples()


def solve_jost(pot: Potential, sp, xs, tail_tol: Optional[float] = None,
               tol: Optional[Tolerances] = None) -> Tuple[List[SolutionSample], float]:
    sp = SpectralParameter.of(sp)
    if sp.w.imag <= 0 and sp.z.imag <= 0:
        raise BranchError("Jost solutions need Im z^(1/2) > 0 or z = λ + iε with ε > 0")
    sol, cutoff = jost_solution(pot, [sp.z], xs, tail_tol, tol)
    return sol.samples(), cutoff


def wronskian(a: SolutionSample, b: SolutionSample) -> complex:
    if not math.isclose(a.x, b.x, rel_tol=0.0, abs_tol=1e-14):
        raise DomainError(f"Wronskian of samples at different points {a.x} and {b.x}")
    return a.psi * b.dpsi - a.dpsi * b.psi
