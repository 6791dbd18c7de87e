"""
Spectral shift functions ξ(λ; H, H⁰).

On a finite interval ξ is the difference of two eigenvalue counting
functions, each computed from a Prüfer angle. On the half-line ξ is π⁻¹
times the continuously unwrapped argument of the Jost function at λ + iε,
extrapolated to ε → 0. Both routes normalize ξ to vanish at an anchor
below an explicit lower bound of both operators.
"""
import os
import math
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numdifftools as nd
import numpy as np
import pandas as pd
from dotenv import load_dotenv
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from determinants import finite_determinants, jost_function
from errors import AccuracyError, DomainError, GridRefinementError, IntegrationError, TailError
from potential import Potential
from settings import Tolerances, resolve
from solutions import BoundaryCondition, Geometry, jost_solution
from utils import read_json, write_csv, write_json

load_dotenv()
# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)

METHODS = ("counting", "phase")
GAUSS_ORDER = 8
# relative offset of the counting grid points either side of an eigenvalue
FLANK = 1e-6


@dataclass(frozen=True, eq=False)
class SpectralShiftGrid:
    lambdas: np.ndarray
    values: np.ndarray
    method: str
    geometry: Geometry
    bcs: Tuple[float, ...]
    epsilon: Optional[float] = None
    anchor: float = -1.0
    label: str = "xi"

    def __post_init__(self):
        lambdas = np.asarray(self.lambdas, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if self.method not in METHODS:
            raise DomainError(f"unknown method '{self.method}'")
        if lambdas.shape != values.shape or lambdas.ndim != 1 or lambdas.size == 0:
            raise DomainError("λ grid and values must be nonempty 1-d arrays of equal length")
        if np.any(np.diff(lambdas) <= 0):
            raise DomainError("λ grid must be strictly increasing")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "values", values)

    def value_at(self, lam):
        """ξ(λ): right-continuous steps for counting grids, linear for phase grids, 0 below the grid."""
        lam = np.asarray(lam, dtype=float)
        if self.method == "counting":
            idx = np.searchsorted(self.lambdas, lam, side="right") - 1
            out = np.where(idx >= 0, self.values[np.clip(idx, 0, None)], 0.0)
        else:
            out = np.interp(lam, self.lambdas, self.values, left=0.0, right=self.values[-1])
        return float(out) if out.ndim == 0 else out

    def integrate(self, func: Callable, lo: Optional[float] = None, hi: Optional[float] = None,
                  breakpoints: Sequence[float] = (), order: int = GAUSS_ORDER):
        """∫_lo^hi ξ(λ)·func(λ) dλ over the grid range, exact per cell for the piecewise ξ."""
        lo = self.lambdas[0] if lo is None else max(lo, self.lambdas[0])
        hi = self.lambdas[-1] if hi is None else min(hi, self.lambdas[-1])
        if not lo < hi:
            return 0.0
        inner = [p for p in (*self.lambdas, *breakpoints) if lo < p < hi]
        edges = np.unique(np.array([lo, hi, *inner], dtype=float))
        a, b = edges[:-1], edges[1:]
        t, wt = np.polynomial.legendre.leggauss(order)
        half = (b - a) / 2.0
        nodes = ((a + b) / 2.0)[:, None] + half[:, None] * t[None, :]
        weights = half[:, None] * wt[None, :]
        if self.method == "counting":
            xi = np.asarray(self.value_at(a))[:, None]
        else:
            xi = np.asarray(self.value_at(nodes))
        return np.sum(weights * xi * func(nodes))

    def tail_level(self) -> float:
        """max |ξ| over the last tenth of the grid."""
        start = int(0.9 * self.lambdas.size)
        return float(np.max(np.abs(self.values[start:])))

    def combined(self, other: "SpectralShiftGrid", sign: float = 1.0, label: Optional[str] = None) -> "SpectralShiftGrid":
        if not np.array_equal(self.lambdas, other.lambdas):
            raise DomainError("spectral shift grids live on different λ grids")
        return SpectralShiftGrid(self.lambdas, self.values + sign * other.values, self.method, self.geometry,
                                 self.bcs, self.epsilon, min(self.anchor, other.anchor), label or self.label)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"lambda": self.lambdas, "xi": self.values})

    def metadata(self) -> dict:
        return {
            "label": self.label,
            "method": self.method,
            **self.geometry.describe(),
            "bcs": list(self.bcs),
            "epsilon": self.epsilon,
            "anchor": self.anchor,
            "points": int(self.lambdas.size),
        }

    def write(self, path: str) -> Tuple[str, str]:
        """CSV (lambda, xi) plus a JSON metadata sidecar next to it."""
        sidecar = os.path.splitext(path)[0] + ".json"
        write_csv(self.to_frame(), path)
        write_json(self.metadata(), sidecar)
        return path, sidecar

    @classmethod
    def from_files(cls, path: str) -> "SpectralShiftGrid":
        meta = read_json(os.path.splitext(path)[0] + ".json")
        frame = pd.read_csv(path, float_precision="round_trip")
        geometry = Geometry(meta["geometry"], R=meta.get("R"))
        return cls(frame["lambda"].to_numpy(), frame["xi"].to_numpy(), meta["method"], geometry,
                   tuple(meta["bcs"]), meta.get("epsilon"), meta["anchor"], meta.get("label", "xi"))


# -- lower bounds and grids ----------------------------------------------

def _boundary_strengths(geometry: Geometry, alpha, beta) -> List[float]:
    """Negative parts of the boundary terms cot α·|ψ(0)|² and -cot β·|ψ(R)|² of the quadratic form."""
    a = BoundaryCondition.of(alpha)
    strengths = [a.cos / a.sin] if 0 < a.angle < math.pi / 2 else []
    if not geometry.is_halfline and beta is not None:
        b = BoundaryCondition.of(beta)
        if math.pi / 2 < b.angle < math.pi:
            strengths.append(-b.cos / b.sin)
    return strengths


def spectral_lower_bound(pot: Potential, geometry: Geometry, alpha, beta=None) -> float:
    """Explicit lower bound of H: each boundary term is absorbed by half the kinetic energy."""
    length = math.inf if geometry.is_halfline else geometry.R
    bound = -pot.negative_sup()
    for kappa in _boundary_strengths(geometry, alpha, beta):
        ell = min(1.0 / (4.0 * kappa), length)
        bound -= 2.0 * kappa / ell
    return bound


def normalization_anchor(pots: Sequence[Potential], geometry: Geometry, alpha, beta=None) -> float:
    return min(spectral_lower_bound(p, geometry, alpha, beta) for p in pots) - 1.0


def default_lambda_grid(anchor: float, lambda_max: float, coarse: bool = False) -> np.ndarray:
    """Nonuniform λ grid from the anchor to lambda_max, dense just above 0."""
    pieces = []
    if anchor < 0:
        pieces.append(np.linspace(anchor, 0.0, math.ceil(-anchor / 0.05) + 1))
    bands = ((0.0, 50.0, 0.05), (50.0, math.inf, 0.25)) if coarse else \
        ((0.0, 1.0, 1e-3), (1.0, 10.0, 0.01), (10.0, 50.0, 0.05), (50.0, math.inf, 0.25))
    for lo, hi, step in bands:
        if lo >= lambda_max:
            break
        hi = min(hi, lambda_max)
        pieces.append(np.linspace(lo, hi, math.ceil((hi - lo) / step - 1e-9) + 1))
    return np.unique(np.concatenate(pieces))


def _as_lambda_grid(lambdas) -> np.ndarray:
    grid = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("λ grid must be nonempty and strictly increasing")
    return grid


# -- Prüfer counting -----------------------------------------------------

def _theta_left(alpha, k: np.ndarray) -> np.ndarray:
    a = BoundaryCondition.of(alpha)
    return np.mod(np.pi - np.arctan2(k * a.sin, a.cos), np.pi)


def _theta_right(beta, k: np.ndarray) -> np.ndarray:
    b = BoundaryCondition.of(beta)
    return np.pi - np.arctan2(k * b.sin, b.cos)


def _prufer_flow(pot: Optional[Potential], lam: np.ndarray, k: np.ndarray, theta0: np.ndarray, a: float, b: float,
                 xs_out: np.ndarray, tol: Tolerances) -> Tuple[np.ndarray, np.ndarray]:
    def rhs(x, th):
        s2 = np.sin(th) ** 2
        v = 0.0 if pot is None else pot(x)
        return k * (1.0 - s2) + (lam - v) / k * s2

    t_eval = np.unique(np.append(xs_out, b))
    sol = solve_ivp(rhs, (a, b), theta0, method="DOP853", t_eval=t_eval, rtol=tol.ode_rtol,
                    atol=max(tol.ode_atol, 1e-12))
    if sol.status != 0 or sol.y.shape[1] != t_eval.size:
        last = float(sol.t[-1]) if sol.t.size else float(a)
        raise IntegrationError(f"Prüfer integration failed on [{a:.6g}, {b:.6g}]: {sol.message}", last)
    cols = np.searchsorted(t_eval, xs_out)
    return sol.y[:, cols].T, sol.y[:, -1].copy()


def prufer_angles(pot: Potential, alpha, lambdas, rs, tol: Optional[Tolerances] = None) -> np.ndarray:
    """Prüfer angle θ(r; λ) of the α-solution, rows following rs, columns following lambdas.

    ψ = ρ·sin θ, ψ' = k·ρ·cos θ with k = max(λ, 1)^{1/2}; θ'(x) = k·cos²θ + (λ - V)/k·sin²θ.
    """
    tol = resolve(tol)
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    rs = np.atleast_1d(np.asarray(rs, dtype=float))
    if rs.size == 0 or rs[0] < 0 or np.any(np.diff(rs) < 0):
        raise DomainError("Prüfer output points must be nonempty, ascending and nonnegative")
    k = np.sqrt(np.maximum(lam, 1.0))
    theta = _theta_left(alpha, k)
    out = np.empty((rs.size, lam.size))
    out[rs == 0.0] = theta
    R = float(rs[-1])
    end = pot.support_end
    nodes = {0.0, R, *(b for b in pot.breakpoints if 0 < b < R)}
    if 0 < end < R:
        nodes.add(end)
    nodes = sorted(nodes)
    for a, b in zip(nodes[:-1], nodes[1:]):
        seg = (rs > a) & (rs <= b)
        xs_seg = rs[seg]
        if pot.is_zero or a >= end:
            # V = 0: θ advances linearly once k² = λ
            fast = lam >= 1.0
            vals = np.empty((xs_seg.size, lam.size))
            new = theta.copy()
            vals[:, fast] = theta[fast] + np.outer(xs_seg - a, k[fast])
            new[fast] = theta[fast] + k[fast] * (b - a)
            slow = ~fast
            if np.any(slow):
                vals[:, slow], new[slow] = _prufer_flow(None, lam[slow], k[slow], theta[slow], a, b, xs_seg, tol)
        else:
            vals, new = _prufer_flow(pot, lam, k, theta, a, b, xs_seg, tol)
        out[seg] = vals
        theta = new
    return out


def _counts(theta_R: np.ndarray, beta, lam: np.ndarray) -> np.ndarray:
    k = np.sqrt(np.maximum(lam, 1.0))
    return np.maximum(0, np.floor((theta_R - _theta_right(beta, k)) / np.pi).astype(int) + 1)


def count_states_at(pot: Potential, alpha, beta, rs, lambdas, tol: Optional[Tolerances] = None) -> np.ndarray:
    """N(λ; H_(0,r)) for every r in rs (rows) and λ in lambdas (columns), from one Prüfer solve."""
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    rs = np.atleast_1d(np.asarray(rs, dtype=float))
    if np.any(rs <= 0):
        raise DomainError("interval lengths must be positive")
    thetas = prufer_angles(pot, alpha, lam, rs, tol)
    return np.vstack([_counts(row, beta, lam) for row in thetas])


def count_states_batch(pot: Potential, alpha, beta, R: float, lambdas, tol: Optional[Tolerances] = None) -> np.ndarray:
    return count_states_at(pot, alpha, beta, [R], lambdas, tol)[0]


def count_states(pot: Potential, alpha, beta, R: float, lam: float, tol: Optional[Tolerances] = None) -> int:
    """Number of eigenvalues ≤ λ of H on (0, R) with angles α, β."""
    if R <= 0:
        raise DomainError(f"R must be positive, got {R}")
    return int(count_states_batch(pot, alpha, beta, R, [lam], tol)[0])


def locate_eigenvalues(pot: Potential, alpha, beta, R: float, lo: float, hi: float,
                       tol: Optional[Tolerances] = None, xtol: float = 1e-12) -> np.ndarray:
    """Eigenvalues of H on (0, R) in (lo, hi], by Illinois regula falsi on the Prüfer angle."""
    tol = resolve(tol)
    n_lo, n_hi = count_states_batch(pot, alpha, beta, R, [lo, hi], tol)
    if n_hi <= n_lo:
        return np.empty(0)
    targets = np.arange(n_lo, n_hi) * np.pi

    def excess(lams, tgt):
        theta = prufer_angles(pot, alpha, lams, [R], tol)[0]
        return theta - _theta_right(beta, np.sqrt(np.maximum(lams, 1.0))) - tgt

    m = targets.size
    a, b = np.full(m, float(lo)), np.full(m, float(hi))
    fa, fb = excess(a, targets), excess(b, targets)
    side = np.zeros(m, dtype=int)
    roots = np.empty(m)
    active = np.arange(m)
    for _ in range(200):
        if active.size == 0:
            break
        aa, bb, ffa, ffb = a[active], b[active], fa[active], fb[active]
        x = bb - ffb * (bb - aa) / (ffb - ffa)
        off = ~((x > aa) & (x < bb))
        x[off] = 0.5 * (aa[off] + bb[off])
        fx = excess(x, targets[active])
        right = fx >= 0
        prev = side[active]
        fa[active] = np.where(right, np.where(prev == 1, ffa / 2.0, ffa), fx)
        fb[active] = np.where(right, fx, np.where(prev == -1, ffb / 2.0, ffb))
        a[active] = np.where(right, aa, x)
        b[active] = np.where(right, x, bb)
        side[active] = np.where(right, 1, -1)
        small = np.abs(fx) <= 1e-13 * (1.0 + targets[active])
        narrow = (b[active] - a[active]) <= xtol * (1.0 + np.abs(b[active]))
        done = small | narrow
        roots[active[done]] = np.where(small[done], x[done], b[active][done])
        active = active[~done]
    if active.size:
        raise AccuracyError(f"{active.size} eigenvalues on (0, {R}) did not converge", float(np.max(b[active] - a[active])))
    logger.debug(f"[SSF] Located {m} eigenvalues in ({lo:.6g}, {hi:.6g}] on (0, {R})")
    return np.sort(roots)


def counting_grid(pots: Sequence[Potential], alpha, beta, R: float, lambda_max: Optional[float] = None,
                  lambdas=None, tol: Optional[Tolerances] = None) -> np.ndarray:
    """λ grid that brackets every eigenvalue of every operator in pots.

    Counts at an eigenvalue itself depend on solver noise, so the jump is carried by
    two flank points FLANK·(1 + |E|) either side of it instead.
    """
    tol = resolve(tol)
    lambda_max = tol.lambda_max if lambda_max is None else lambda_max
    geometry = Geometry.interval(R)
    anchor = normalization_anchor(pots, geometry, alpha, beta)
    base = default_lambda_grid(anchor, lambda_max, coarse=True) if lambdas is None else _as_lambda_grid(lambdas)
    lo, hi = min(anchor, base[0]), base[-1]
    found = [locate_eigenvalues(p, alpha, beta, R, lo, hi, tol) for p in pots]
    eig = np.concatenate(found) if found else np.empty(0)
    delta = FLANK * (1.0 + np.abs(eig))
    if eig.size:
        nearest = np.min(np.abs(base[:, None] - eig[None, :]) / delta[None, :], axis=1)
        keep = nearest >= 1.0
        keep[[0, -1]] = True
        base = base[keep]
    grid = np.unique(np.concatenate([base, eig - delta, eig + delta]))
    return grid[(grid >= base[0]) & (grid <= hi)]


# -- ξ on intervals ------------------------------------------------------

def xi_finite(pot: Potential, alpha, beta, R: float, lambdas=None, reference: Optional[Potential] = None,
              lambda_max: Optional[float] = None, tol: Optional[Tolerances] = None) -> SpectralShiftGrid:
    """ξ(λ) = N(λ; H_ref) - N(λ; H) on (0, R); H_ref is the free operator unless reference is given."""
    tol = resolve(tol)
    ref = reference if reference is not None else Potential.zero()
    geometry = Geometry.interval(R)
    bcs = (BoundaryCondition.of(alpha).angle, BoundaryCondition.of(beta).angle)
    anchor = normalization_anchor([pot, ref], geometry, alpha, beta)
    if lambdas is None:
        grid = counting_grid([pot, ref], alpha, beta, R, lambda_max, tol=tol)
    else:
        grid = _as_lambda_grid(lambdas)
    if pot.is_zero and ref.is_zero:
        return SpectralShiftGrid(grid, np.zeros(grid.size), "counting", geometry, bcs, None, anchor)
    points = np.append(grid, anchor)
    counts = count_states_batch(pot, alpha, beta, R, points, tol)
    ref_counts = count_states_batch(ref, alpha, beta, R, points, tol)
    if counts[-1] or ref_counts[-1]:
        raise AccuracyError(f"eigenvalue found below the anchor {anchor:.6g}")
    values = (ref_counts - counts)[:-1].astype(float)
    logger.debug(f"[SSF] Counting ξ on (0, {R}) at {grid.size} points, range [{values.min():g}, {values.max():g}]")
    return SpectralShiftGrid(grid, values, "counting", geometry, bcs, None, anchor)


# -- ξ on the half-line --------------------------------------------------

def unwrapped_phases(evaluators: Sequence[Callable], lambdas: np.ndarray, scale: float,
                  tol: Tolerances) -> Tuple[np.ndarray, np.ndarray]:
    """Unwrapped π⁻¹·arg F(λ + iε) for each F, on one jointly refined grid, Richardson-extrapolated in ε."""
    p = len(evaluators)

    def sample(lams):
        eps = scale * (1.0 + np.abs(lams))
        zs = np.concatenate([lams + 1j * eps, lams + 0.5j * eps])
        vals = np.stack([np.asarray(F(zs)) for F in evaluators]).reshape(p, 2, lams.size)
        if not np.all(np.isfinite(vals)) or np.any(vals == 0):
            raise AccuracyError("determinant vanished or overflowed on the λ + iε grid")
        return vals

    lams = np.asarray(lambdas, dtype=float)
    vals = sample(lams)
    for depth in range(tol.max_refine_depth + 1):
        steps = np.angle(vals[..., 1:] / vals[..., :-1])
        bad = np.any(np.abs(steps) >= tol.phase_jump_limit, axis=(0, 1))
        if not np.any(bad):
            break
        if depth == tol.max_refine_depth:
            worst = float(lams[:-1][bad][0])
            raise GridRefinementError(f"phase jump ≥ {tol.phase_jump_limit:.3g} persists near λ={worst:.6g}", depth)
        mids = 0.5 * (lams[:-1][bad] + lams[1:][bad])
        lams = np.concatenate([lams, mids])
        vals = np.concatenate([vals, sample(mids)], axis=-1)
        order = np.argsort(lams)
        lams, vals = lams[order], vals[..., order]
        logger.debug(f"[SSF] Refinement depth {depth + 1}: inserted {mids.size} points")
    steps = np.angle(vals[..., 1:] / vals[..., :-1])
    phases = np.concatenate([np.zeros((p, 2, 1)), np.cumsum(steps, axis=-1)], axis=-1)
    xi = (2.0 * phases[:, 1] - phases[:, 0]) / np.pi
    return lams, xi


def _jost_ratio(pot: Potential, ref: Potential, alpha, tail_tol, tol: Tolerances) -> Callable:
    def evaluate(zs):
        value = jost_function(pot, alpha, zs, tail_tol, tol)
        if not ref.is_zero:
            value = value / jost_function(ref, alpha, zs, tail_tol, tol)
        return value
    return evaluate


def _phase_grid(lambdas, anchor: float, lambda_max: float) -> Tuple[np.ndarray, float]:
    grid = default_lambda_grid(anchor, lambda_max) if lambdas is None else _as_lambda_grid(lambdas)
    first = float(grid[0])
    work = grid if first <= anchor else np.concatenate([[anchor], grid])
    return work, first


def xi_halfline_phase(pot: Potential, alpha, lambdas=None, epsilon: Optional[float] = None,
                      reference: Optional[Potential] = None, lambda_max: Optional[float] = None,
                      tail_tol: Optional[float] = None, tol: Optional[Tolerances] = None) -> SpectralShiftGrid:
    """ξ(λ) = π⁻¹·arg det(λ + i0) on the half-line, unwrapped from the anchor; epsilon scales ε = epsilon·(1 + |λ|)."""
    tol = resolve(tol)
    scale = tol.epsilon_scale if epsilon is None else epsilon
    if not scale > 0:
        raise DomainError(f"ε scale must be positive, got {scale}")
    ref = reference if reference is not None else Potential.zero()
    geometry = Geometry.halfline()
    bcs = (BoundaryCondition.of(alpha).angle,)
    anchor = normalization_anchor([pot, ref], geometry, alpha)
    work, first = _phase_grid(lambdas, anchor, tol.lambda_max if lambda_max is None else lambda_max)
    if pot.is_zero and ref.is_zero:
        grid = work[work >= first]
        return SpectralShiftGrid(grid, np.zeros(grid.size), "phase", geometry, bcs, scale, anchor)
    lams, xi = unwrapped_phases([_jost_ratio(pot, ref, alpha, tail_tol, tol)], work, scale, tol)
    keep = lams >= first
    logger.info(f"[SSF] Phase ξ on {keep.sum()} points (anchor {anchor:.4g}, ε scale {scale:g})")
    return SpectralShiftGrid(lams[keep], xi[0][keep], "phase", geometry, bcs, scale, anchor)


def xi_sign_split(pot: Potential, geometry: Geometry, alpha, beta=None, lambdas=None,
                  lambda_max: Optional[float] = None, tol: Optional[Tolerances] = None) -> Tuple[SpectralShiftGrid, SpectralShiftGrid]:
    """(ξ₊, ξ₋) with ξ₊ = ξ(H⁰ + V₊, H⁰) and ξ₋ = -ξ(H, H⁰ + V₊), so that ξ = ξ₊ - ξ₋."""
    tol = resolve(tol)
    plus = pot.positive_part()
    zero = Potential.zero()
    if not geometry.is_halfline:
        R = geometry.R
        if lambdas is None:
            lambdas = counting_grid([pot, plus, zero], alpha, beta, R, lambda_max, tol=tol)
        xi_plus = xi_finite(plus, alpha, beta, R, lambdas, tol=tol)
        xi_rest = xi_finite(pot, alpha, beta, R, lambdas, reference=plus, tol=tol)
        anchor = min(xi_plus.anchor, xi_rest.anchor)
        xi_minus = SpectralShiftGrid(xi_rest.lambdas, -xi_rest.values, "counting", geometry, xi_rest.bcs, None,
                                     anchor, "xi_minus")
        return (SpectralShiftGrid(xi_plus.lambdas, xi_plus.values, "counting", geometry, xi_plus.bcs, None,
                                  anchor, "xi_plus"), xi_minus)
    scale = tol.epsilon_scale
    bcs = (BoundaryCondition.of(alpha).angle,)
    anchor = normalization_anchor([pot, plus], geometry, alpha)
    work, first = _phase_grid(lambdas, anchor, tol.lambda_max if lambda_max is None else lambda_max)
    if pot.is_zero:
        grid = work[work >= first]
        zeros = np.zeros(grid.size)
        return (SpectralShiftGrid(grid, zeros, "phase", geometry, bcs, scale, anchor, "xi_plus"),
                SpectralShiftGrid(grid, zeros.copy(), "phase", geometry, bcs, scale, anchor, "xi_minus"))
    lams, xi = unwrapped_phases([_jost_ratio(plus, zero, alpha, None, tol), _jost_ratio(pot, plus, alpha, None, tol)],
                             work, scale, tol)
    keep = lams >= first
    return (SpectralShiftGrid(lams[keep], xi[0][keep], "phase", geometry, bcs, scale, anchor, "xi_plus"),
            SpectralShiftGrid(lams[keep], -xi[1][keep], "phase", geometry, bcs, scale, anchor, "xi_minus"))


def halfline_eigenvalues(pot: Potential, alpha, n_points: int = 400, tol: Optional[Tolerances] = None) -> np.ndarray:
    """Negative eigenvalues of the half-line operator: zeros of the real Jost numerator on λ < 0."""
    tol = resolve(tol)
    geometry = Geometry.halfline()
    lo = spectral_lower_bound(pot, geometry, alpha) - 1.0
    a = BoundaryCondition.of(alpha)

    def numerator(lams):
        jost, _ = jost_solution(pot, np.asarray(lams, dtype=complex), [0.0], tol=tol)
        p, dp = jost.phi[0], jost.dphi[0]
        return (a.sin * (dp + 1j * jost.w * p) + a.cos * p).real

    kappas = np.linspace(math.sqrt(-lo), 1e-3, n_points)
    lams = -kappas ** 2
    values = numerator(lams)
    roots = []
    for j in np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0):
        roots.append(brentq(lambda lam: float(numerator([lam])[0]), lams[j], lams[j + 1], xtol=1e-13))
    logger.info(f"[SSF] Half-line operator has {len(roots)} detected eigenvalues below 0")
    return np.array(sorted(roots))


# -- trace formula -------------------------------------------------------

def _born_tail(pot: Potential, z: complex, n: int, lambda_max: float, tol: Tolerances) -> complex:
    c = pot.integral(tol) / (2.0 * math.pi)
    if c == 0.0:
        return 0.0j

    def part(fn):
        value, _ = quad(lambda lam: fn(c / math.sqrt(lam) / (lam - z) ** (n + 1)), lambda_max, math.inf,
                        epsabs=tol.quad_epsabs, epsrel=tol.quad_epsrel, limit=200)
        return value

    return complex(part(lambda v: v.real), part(lambda v: v.imag))


def trace_formula_sides(pot: Potential, alpha, z: complex, xi: SpectralShiftGrid, n: int, beta=None,
                        R: Optional[float] = None, step: float = 0.25,
                        tol: Optional[Tolerances] = None) -> Tuple[complex, complex, float]:
    """(d/dz)ⁿ ln det(z) and n!·∫ξ(λ)dλ/(λ - z)^{n+1}; also returns a bound on the neglected tail."""
    tol = resolve(tol)
    z = complex(z)
    if n < 1:
        raise DomainError(f"power n must be at least 1, got {n}")
    if (R is None) != xi.geometry.is_halfline:
        raise DomainError("ξ grid geometry does not match the requested operator")
    if pot.is_zero:
        return 0j, 0j, 0.0
    nonzero = np.flatnonzero(xi.values)
    lo = float(xi.lambdas[max(nonzero[0] - 1, 0)]) if nonzero.size else float(xi.lambdas[-1])
    if z.imag == 0 and z.real >= lo:
        raise DomainError(f"real z={z.real:g} must lie below the support of ξ (starts near {lo:.4g})")
    lambda_max = float(xi.lambdas[-1])
    born_level = abs(pot.integral(tol)) / (2.0 * math.pi * math.sqrt(lambda_max))
    level = xi.tail_level() if xi.method == "phase" else born_level
    if level >= tol.xi_tail_level:
        raise TailError(f"|ξ| ≈ {level:.3g} at λ_max={lambda_max:g} is above the tail level {tol.xi_tail_level:g}")

    def det_at(t):
        zs = [z + float(t)]
        if R is None:
            return jost_function(pot, alpha, zs, tol=tol)[0]
        return finite_determinants(pot, alpha, beta, R, zs, tol=tol)[0]

    base = det_at(0.0)
    gen = nd.MaxStepGenerator(base_step=step, step_ratio=2.0, num_steps=10)
    real_part = nd.Derivative(lambda t: float(np.log(det_at(t) / base).real), step=gen, method="central", n=n)
    imag_part = nd.Derivative(lambda t: float(np.log(det_at(t) / base).imag), step=gen, method="central", n=n)
    lhs = complex(float(real_part(0.0)), float(imag_part(0.0)))

    factor = math.factorial(n)
    grid_part = xi.integrate(lambda lam: 1.0 / (lam - z) ** (n + 1), lo=lo)
    rhs = factor * (complex(grid_part) + _born_tail(pot, z, n, lambda_max, tol))
    tail_bound, _ = quad(lambda lam: level / abs(lam - z) ** (n + 1), lambda_max, math.inf)
    logger.debug(f"[SSF] Trace formula n={n} at z={z}: lhs={lhs}, rhs={rhs}")
    return lhs, rhs, factor * tail_bound


def trace_formula_residual(pot: Potential, alpha, z: complex, xi: SpectralShiftGrid, n: int, beta=None,
                           R: Optional[float] = None, tol: Optional[Tolerances] = None) -> float:
    lhs, rhs, _ = trace_formula_sides(pot, alpha, z, xi, n, beta, R, tol=tol)
    return float(abs(lhs - rhs))
