"""
Birman-Schwinger determinants det(I + u(H⁰ - z)⁻¹v).

Two independent routes are provided: quotients of Wronskians built from the
scaled Weyl/Jost solutions, and a Nyström discretization of the kernel on
composite Gauss-Legendre panels.
"""
import os
import math
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv
from scipy.linalg import lu_factor, svdvals

from errors import ConditioningError, DomainError
from greens import free_denominator, free_green
from potential import Potential, factorize
from settings import Tolerances, resolve
from solutions import (BoundaryCondition, Geometry, SpectralParameter, jost_cutoff, jost_solution, left_solution,
                       right_solution)

load_dotenv()
# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)

METHODS = ("wronskian", "nystrom")
MIN_NODES = 16


@dataclass(frozen=True)
class DeterminantValue:
    z: SpectralParameter
    value: complex
    method: str
    geometry: Geometry
    bcs: Tuple[float, ...]
    node_count: Optional[int] = None

    def as_row(self) -> dict:
        return {
            "z_re": self.z.z.real, "z_im": self.z.z.imag,
            "det_re": self.value.real, "det_im": self.value.imag,
            "abs": abs(self.value), "arg": math.atan2(self.value.imag, self.value.real),
            "method": self.method, "nodes": self.node_count,
        }


def _bcs(alpha, beta=None) -> Tuple[float, ...]:
    if beta is None:
        return (BoundaryCondition.of(alpha).angle,)
    return (BoundaryCondition.of(alpha).angle, BoundaryCondition.of(beta).angle)


# -- Wronskian route -----------------------------------------------------

def jost_function(pot: Potential, alpha, zs, tail_tol: Optional[float] = None,
                  tol: Optional[Tolerances] = None) -> np.ndarray:
    """Half-line determinants for every z in zs (batched)."""
    tol = resolve(tol)
    a = BoundaryCondition.of(alpha)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    if pot.is_zero:
        return np.ones(zs.size, dtype=complex)
    jost, _ = jost_solution(pot, zs, [0.0], tail_tol, tol)
    w = jost.w
    p, dp = jost.phi[0], jost.dphi[0]
    numerator = a.sin * (dp + 1j * w * p) + a.cos * p
    denominator = np.array([free_denominator(Geometry.halfline(), a, None, wk, tol) for wk in w])
    return numerator / denominator


def finite_determinants(pot: Potential, alpha, beta, R: float, zs, variant: str = "R",
                        tol: Optional[Tolerances] = None) -> np.ndarray:
    """Interval determinants for every z in zs, numerator evaluated at x = R or x = 0."""
    tol = resolve(tol)
    if R <= 0:
        raise DomainError(f"interval length must be positive, got {R}")
    a, b = BoundaryCondition.of(alpha), BoundaryCondition.of(beta)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    geometry = Geometry.interval(R)
    if pot.is_zero:
        return np.ones(zs.size, dtype=complex)
    if variant == "R":
        left = left_solution(pot, a, zs, [R], tol)
        w, p, dp = left.w, left.phi[0], left.dphi[0]
        numerator = b.sin * (dp - 1j * w * p) + b.cos * p
    elif variant == "0":
        right = right_solution(pot, b, R, zs, [0.0], tol)
        w, p, dp = right.w, right.phi[0], right.dphi[0]
        numerator = a.cos * p + a.sin * (dp + 1j * w * p)
    else:
        raise DomainError(f"unknown variant '{variant}', expected R|0")
    denominator = np.array([free_denominator(geometry, a, b, wk, tol) for wk in w])
    return numerator / denominator


def det_wronskian_finite(pot: Potential, alpha, beta, R: float, sp, variant: str = "R",
                         tol: Optional[Tolerances] = None) -> DeterminantValue:
    sp = SpectralParameter.of(sp)
    value = complex(finite_determinants(pot, alpha, beta, R, [sp.z], variant, tol)[0])
    return DeterminantValue(sp, value, "wronskian", Geometry.interval(R), _bcs(alpha, beta))


def det_wronskian_halfline(pot: Potential, alpha, sp, tail_tol: Optional[float] = None,
                           tol: Optional[Tolerances] = None) -> DeterminantValue:
    sp = SpectralParameter.of(sp)
    if sp.z.imag == 0 and sp.z.real > 0:
        raise DomainError(f"z={sp.z.real:g} lies on the continuous spectrum, use λ + iε")
    value = complex(jost_function(pot, alpha, [sp.z], tail_tol, tol)[0])
    return DeterminantValue(sp, value, "wronskian", Geometry.halfline(), _bcs(alpha))


# -- Nyström route -------------------------------------------------------

def _panel_edges(geometry: Geometry, pot: Potential, length: float, extra_edges: Sequence[float]) -> np.ndarray:
    edges = {0.0, length}
    edges.update(b for b in pot.breakpoints if 0 < b < length)
    edges.update(e for e in extra_edges if 0 < e < length)
    if geometry.is_halfline:
        edge = 1.0
        while edge < length:
            edges.add(edge)
            edge *= 2.0
    return np.array(sorted(edges))


def nystrom_nodes(geometry: Geometry, pot: Potential, n: int, extra_edges: Sequence[float] = (),
                  tol: Optional[Tolerances] = None, halved: bool = False) -> Tuple[np.ndarray, np.ndarray, float]:
    """Composite Gauss-Legendre nodes and weights on [0, L], L = end of the relevant support.

    Every panel gets an even node count; `halved` gives the same panels with half
    the nodes each.
    """
    tol = resolve(tol)
    if n < MIN_NODES:
        raise DomainError(f"node count must be at least {MIN_NODES}, got {n}")
    end = pot.support_end
    if geometry.is_halfline:
        cutoff = geometry.cutoff if geometry.cutoff is not None else jost_cutoff(pot, tol.nystrom_tail_tol, tol)
        length = min(cutoff, end)
    else:
        length = min(geometry.R, end)
    if not length > 0:
        raise DomainError("Nyström domain is empty")
    edges = _panel_edges(geometry, pot, length, extra_edges)
    widths = np.diff(edges)
    if geometry.is_halfline:
        counts = np.full(widths.size, max(4, math.ceil(n / widths.size)))
    else:
        counts = np.maximum(4, np.rint(n * widths / length).astype(int))
    counts = 2 * ((counts + 1) // 2)
    if halved:
        counts = counts // 2
    xs, ws = [], []
    for a, h, k in zip(edges[:-1], widths, counts):
        t, wt = np.polynomial.legendre.leggauss(int(k))
        xs.append(a + h * (t + 1.0) / 2.0)
        ws.append(wt * h / 2.0)
    return np.concatenate(xs), np.concatenate(ws), float(length)


def lu_determinant(matrix: np.ndarray) -> complex:
    """det via LU with partial pivoting; raises on a vanishing pivot."""
    lu, piv = lu_factor(matrix, check_finite=True)
    diag = np.diag(lu)
    scale = np.max(np.abs(diag))
    if scale == 0 or np.min(np.abs(diag)) < 1e-14 * scale:
        raise ConditioningError(f"LU pivot ratio {np.min(np.abs(diag)) / max(scale, 1e-300):.2e} below 1e-14")
    swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
    return complex(np.prod(diag) * (-1) ** swaps)


def birman_schwinger_matrix(geometry: Geometry, pot: Potential, alpha, beta, sp, n: int,
                            extra_edges: Sequence[float] = (), tol: Optional[Tolerances] = None,
                            halved: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Symmetrized Nyström matrix of u(H⁰ - z)⁻¹v; returns (M, nodes).

    Panel edges sit on the support edges and any extra_edges, so the kernel is
    smooth on every panel away from the diagonal.
    """
    tol = resolve(tol)
    sp = SpectralParameter.of(sp)
    xs, ws, _ = nystrom_nodes(geometry, pot, n, extra_edges, tol, halved)
    fac = factorize(pot)
    green = free_green(geometry, alpha, beta, sp, xs[:, None], xs[None, :], tol)
    root = np.sqrt(ws)
    u, v = np.asarray(fac.u(xs)), np.asarray(fac.v(xs))
    matrix = (root * u)[:, None] * green * (v * root)[None, :]
    return matrix, xs


def det_nystrom(geometry: Geometry, pot: Potential, alpha, beta, sp, n: int,
                tol: Optional[Tolerances] = None) -> DeterminantValue:
    sp = SpectralParameter.of(sp)
    bcs = _bcs(alpha) if geometry.is_halfline else _bcs(alpha, beta)
    if n < MIN_NODES:
        raise DomainError(f"node count must be at least {MIN_NODES}, got {n}")
    if geometry.is_halfline and sp.z.imag == 0 and sp.z.real > 0:
        raise DomainError(f"z={sp.z.real:g} lies on the continuous spectrum, use λ + iε")
    if pot.is_zero:
        return DeterminantValue(sp, 1.0 + 0.0j, "nystrom", geometry, bcs, n)
    matrix, xs = birman_schwinger_matrix(geometry, pot, alpha, beta, sp, n, tol=tol)
    fine = lu_determinant(np.eye(xs.size) + matrix)
    matrix, half = birman_schwinger_matrix(geometry, pot, alpha, beta, sp, n, tol=tol, halved=True)
    coarse = lu_determinant(np.eye(half.size) + matrix)
    # the diagonal kink of G⁰ leaves an O(h²) error; one Richardson step removes it
    value = (4.0 * fine - coarse) / 3.0
    logger.debug(f"[Det] Nyström det at z={sp.z} with {xs.size} nodes: {value} (unextrapolated {fine})")
    return DeterminantValue(sp, value, "nystrom", geometry, bcs, int(xs.size))


def trace_norm_bs(geometry: Geometry, pot: Potential, alpha, beta, sp, n: int,
                  tol: Optional[Tolerances] = None) -> float:
    """Trace norm of the discretized v(H⁰ - z)⁻¹v."""
    tol = resolve(tol)
    sp = SpectralParameter.of(sp)
    if pot.is_zero:
        return 0.0
    xs, ws, _ = nystrom_nodes(geometry, pot, n, tol=tol)
    v = np.asarray(factorize(pot).v(xs)) * np.sqrt(ws)
    green = free_green(geometry, alpha, beta, sp, xs[:, None], xs[None, :], tol)
    return float(np.sum(svdvals(v[:, None] * green * v[None, :])))
