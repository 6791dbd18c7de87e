"""
Dirichlet splitting of (0, R2) at R1: ξ of the decoupled operator is the
sum of the piece ξs, and the full ξ differs from it by the phase of a
rank-one correction.
"""
import os
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from dotenv import load_dotenv
from scipy.linalg import solve

from determinants import nystrom_nodes
from errors import DomainError
from greens import free_green
from potential import Potential, factorize
from settings import Tolerances, resolve
from solutions import DIRICHLET, Geometry, SpectralParameter
from ssf import (SpectralShiftGrid, counting_grid, default_lambda_grid, normalization_anchor, unwrapped_phases,
                 xi_finite)

load_dotenv()
# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitGeometry:
    R1: float
    R2: float

    def __post_init__(self):
        if not (0 < self.R1 < self.R2):
            raise DomainError(f"split needs 0 < R1 < R2, got R1={self.R1}, R2={self.R2}")

    @property
    def outer_length(self) -> float:
        return self.R2 - self.R1

    def pieces(self, pot: Potential):
        """V on (0, R1) and V on (R1, R2) translated to (0, R2 - R1)."""
        return pot.truncated(self.R1), pot.shifted(self.R1).truncated(self.outer_length)

    def describe(self) -> dict:
        return {"R1": self.R1, "R2": self.R2}


def split_grid(pot: Potential, split: SplitGeometry, lambda_max: Optional[float] = None,
               lambdas=None, tol: Optional[Tolerances] = None) -> np.ndarray:
    """λ grid holding every eigenvalue of the full, piece and free operators."""
    inner, outer = split.pieces(pot)
    zero = Potential.zero()
    grids = [
        counting_grid([pot.truncated(split.R2), zero], DIRICHLET, DIRICHLET, split.R2, lambda_max, lambdas, tol),
        counting_grid([inner, zero], DIRICHLET, DIRICHLET, split.R1, lambda_max, lambdas, tol),
        counting_grid([outer, zero], DIRICHLET, DIRICHLET, split.outer_length, lambda_max, lambdas, tol),
    ]
    grid = np.unique(np.concatenate(grids))
    if lambdas is not None:
        lo, hi = float(np.min(lambdas)), float(np.max(lambdas))
        grid = grid[(grid >= lo) & (grid <= hi)]
    return grid


def xi_direct_sum(pot: Potential, split: SplitGeometry, lambdas=None, lambda_max: Optional[float] = None,
                  tol: Optional[Tolerances] = None) -> SpectralShiftGrid:
    """ξ of the operator decoupled at R1: the sum of the two Dirichlet piece ξs."""
    tol = resolve(tol)
    grid = split_grid(pot, split, lambda_max, tol=tol) if lambdas is None else np.asarray(lambdas, dtype=float)
    inner, outer = split.pieces(pot)
    first = xi_finite(inner, DIRICHLET, DIRICHLET, split.R1, grid, tol=tol)
    second = xi_finite(outer, DIRICHLET, DIRICHLET, split.outer_length, grid, tol=tol)
    return SpectralShiftGrid(grid, first.values + second.values, "counting", Geometry.interval(split.R2),
                             (0.0, 0.0), None, min(first.anchor, second.anchor), "xi_direct_sum")


def xi_split_correction(pot: Potential, split: SplitGeometry, lambdas=None, lambda_max: Optional[float] = None,
                        tol: Optional[Tolerances] = None) -> SpectralShiftGrid:
    """ξ on (0, R2) minus the decoupled ξ, by exact subtraction of counting functions."""
    tol = resolve(tol)
    grid = split_grid(pot, split, lambda_max, tol=tol) if lambdas is None else np.asarray(lambdas, dtype=float)
    full = xi_finite(pot.truncated(split.R2), DIRICHLET, DIRICHLET, split.R2, grid, tol=tol)
    direct = xi_direct_sum(pot, split, grid, tol=tol)
    correction = full.combined(direct, -1.0, "split_correction")
    stray = np.abs(correction.values) > 1
    if np.any(stray):
        logger.warning(f"[Split] correction leaves {{0, ±1}} at {int(stray.sum())} points, "
                       f"first at λ={grid[stray][0]:.6g}")
    return correction


def _rank_one_ratio(pot: Potential, split: SplitGeometry, n: int, tol: Tolerances) -> Callable:
    """z ↦ S(z) = det(full)/det(decoupled) = 1 + bᵀ(I + M_dec)⁻¹a / G⁰(R1, R1)."""
    R1 = split.R1
    geometry = Geometry.interval(split.R2)
    xs, ws, _ = nystrom_nodes(geometry, pot, n, extra_edges=(R1,), tol=tol)
    fac = factorize(pot)
    root = np.sqrt(ws)
    u, v = np.asarray(fac.u(xs)), np.asarray(fac.v(xs))
    eye = np.eye(xs.size)

    def evaluate(zs):
        out = np.empty(len(zs), dtype=complex)
        for idx, z in enumerate(zs):
            sp = SpectralParameter.of(z)
            green = free_green(geometry, DIRICHLET, DIRICHLET, sp, xs[:, None], xs[None, :], tol)
            g = free_green(geometry, DIRICHLET, DIRICHLET, sp, xs, R1, tol)
            c = complex(free_green(geometry, DIRICHLET, DIRICHLET, sp, R1, R1, tol))
            decoupled = green - np.outer(g, g) / c
            matrix = (root * u)[:, None] * decoupled * (v * root)[None, :]
            a, b = root * u * g, root * v * g
            out[idx] = 1.0 + b @ solve(eye + matrix, a) / c
        return out

    return evaluate


def split_correction_phase(pot: Potential, split: SplitGeometry, lambdas=None, n: int = 200,
                           lambda_max: float = 20.0, tol: Optional[Tolerances] = None) -> SpectralShiftGrid:
    """π⁻¹·arg S(λ + i0), unwrapped from the anchor; a smoothed image of xi_split_correction."""
    tol = resolve(tol)
    full = pot.truncated(split.R2)
    geometry = Geometry.interval(split.R2)
    anchor = normalization_anchor([full], geometry, DIRICHLET, DIRICHLET)
    grid = default_lambda_grid(anchor, lambda_max, coarse=True) if lambdas is None else np.asarray(lambdas, dtype=float)
    if full.is_zero:
        return SpectralShiftGrid(grid, np.zeros(grid.size), "phase", geometry, (0.0, 0.0), tol.epsilon_scale,
                                 anchor, "split_correction_phase")
    first = float(grid[0])
    work = grid if first <= anchor else np.concatenate([[anchor], grid])
    lams, xi = unwrapped_phases([_rank_one_ratio(full, split, n, tol)], work, tol.epsilon_scale, tol)
    keep = lams >= first
    logger.info(f"[Split] S-route phase on {keep.sum()} points with {n} Nyström nodes")
    return SpectralShiftGrid(lams[keep], xi[0][keep], "phase", geometry, (0.0, 0.0), tol.epsilon_scale, anchor,
                             "split_correction_phase")


def decoupled_free_green(split: SplitGeometry, sp, x: float, xp: float, tol: Optional[Tolerances] = None) -> complex:
    """Free Dirichlet kernel of (0, R1) ⊕ (R1, R2), built piece by piece."""
    R1 = split.R1
    if x < R1 and xp < R1:
        return complex(free_green(Geometry.interval(R1), DIRICHLET, DIRICHLET, sp, x, xp, tol))
    if x > R1 and xp > R1:
        return complex(free_green(Geometry.interval(split.outer_length), DIRICHLET, DIRICHLET, sp,
                                  x - R1, xp - R1, tol))
    return 0j


def krein_split_residual(split: SplitGeometry, sp, x: float, xp: float, tol: Optional[Tolerances] = None) -> float:
    """|G_dec - (G - G(·, R1)G(R1, ·)/G(R1, R1))| for the free Dirichlet kernels on (0, R2)."""
    tol = resolve(tol)
    sp = SpectralParameter.of(sp)
    R1 = split.R1
    if not (0 <= x <= split.R2 and 0 <= xp <= split.R2):
        raise DomainError(f"points ({x}, {xp}) outside [0, {split.R2}]")
    geometry = Geometry.interval(split.R2)

    def g(a, b):
        return complex(free_green(geometry, DIRICHLET, DIRICHLET, sp, a, b, tol))

    formula = g(x, xp) - g(x, R1) * g(R1, xp) / g(R1, R1)
    return float(abs(decoupled_free_green(split, sp, x, xp, tol) - formula))
