"""
The invariant suite behind `ssf-lab check`. Every check returns
(passed, detail); checks that do not apply to a configuration are left out
of the table, the rest are reported in the order of CHECKS.
"""
import os
import math
import logging
import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from dotenv import load_dotenv
from joblib import Parallel, delayed

from config import ExperimentConfig
from convergence import outside_mass, rank_one_gap, weighted_integral, cesaro_mean
from decomposition import SplitGeometry, krein_split_residual, xi_split_correction
from determinants import det_nystrom, det_wronskian_finite, det_wronskian_halfline, finite_determinants, jost_function
from greens import frac_power_kernel, green_kernel, krein_residual
from potential import Potential, factorize, truncate_and_split
from settings import Tolerances
from solutions import DIRICHLET, BoundaryCondition, Geometry, free_solution, solve_weyl_left, solve_weyl_right, wronskian
from ssf import (count_states, counting_grid, halfline_eigenvalues, normalization_anchor, spectral_lower_bound,
                 trace_formula_sides, xi_finite, xi_halfline_phase, xi_sign_split)

load_dotenv()
# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)

CHECK_COLUMNS = ["name", "passed", "detail"]
CHECK_Z = 1.0 + 1.0j
FREE_Z = (-1.0 + 0.0j, -4.0 + 0.0j, 2.0 + 0.5j)
TRACE_LIMITS = {1: 1e-3, 2: 5e-3}


class NotApplicable(Exception):
    """Raised by a check that has nothing to verify for this configuration."""


@dataclass
class CheckContext:
    cfg: ExperimentConfig
    pot: Potential
    tol: Tolerances

    @property
    def R(self) -> float:
        return self.cfg.R[0] if self.cfg.R else 10.0

    @property
    def R_large(self) -> float:
        return self.cfg.R[-1] if self.cfg.R else 40.0

    def require_halfline(self):
        if not self.cfg.halfline:
            raise NotApplicable("half-line disabled")


def _verdict(ok: bool, detail: str) -> Tuple[bool, str]:
    return bool(ok), detail


def check_factorization(ctx: CheckContext):
    xs = np.linspace(0.0, min(ctx.pot.support_end, 2.0 * ctx.R), 201)
    fac = factorize(ctx.pot)
    values = np.asarray(ctx.pot(xs))
    gap = float(np.max(np.abs(np.asarray(fac.u(xs)) * np.asarray(fac.v(xs)) - values)))
    limit = 4.0 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(values))))
    return _verdict(gap <= limit, f"max |u·v - V| = {gap:.3g}")


def check_truncation(ctx: CheckContext):
    truncated, _, _ = truncate_and_split(ctx.pot, ctx.R)
    again = truncated.truncated(2.0 * ctx.R)
    xs = np.linspace(0.0, 3.0 * ctx.R, 301)
    gap = float(np.max(np.abs(np.asarray(again(xs)) - np.asarray(truncated(xs)))))
    return _verdict(gap == 0.0, f"max difference {gap:.3g}")


def check_l1_tail(ctx: CheckContext):
    ladder = np.linspace(0.0, 2.0 * ctx.R, 12)
    tails = [ctx.pot.l1_tail(a, ctx.tol) for a in ladder]
    rises = [b - a for a, b in zip(tails[:-1], tails[1:]) if b > a + 1e-12]
    return _verdict(not rises, f"tail {tails[0]:.6g} → {tails[-1]:.6g}, {len(rises)} increases")


def check_wronskian_constancy(ctx: CheckContext):
    xs = np.linspace(0.0, ctx.R, 21)
    left = solve_weyl_left(ctx.pot, ctx.cfg.alpha, CHECK_Z, xs, ctx.tol)
    right = solve_weyl_right(ctx.pot, ctx.cfg.beta, ctx.R, CHECK_Z, xs, ctx.tol)
    values = np.array([wronskian(a, b) for a, b in zip(left, right)])
    drift = float(np.max(np.abs(values - values[0])) / abs(values[0]))
    return _verdict(drift <= 1e-8, f"relative drift {drift:.3g} at z={CHECK_Z}")


def check_boundary_data(ctx: CheckContext):
    a, b = BoundaryCondition.of(ctx.cfg.alpha), BoundaryCondition.of(ctx.cfg.beta)
    left = solve_weyl_left(ctx.pot, a, CHECK_Z, [0.0], ctx.tol)[0]
    right = solve_weyl_right(ctx.pot, b, ctx.R, CHECK_Z, [ctx.R], ctx.tol)[0]
    gaps = [abs(a.sin * left.dpsi + a.cos * left.psi), abs(b.sin * right.dpsi + b.cos * right.psi)]
    return _verdict(max(gaps) <= 1e-12, f"residuals {gaps[0]:.3g} at 0, {gaps[1]:.3g} at R")


def check_free_reduction(ctx: CheckContext):
    zero = Potential.zero()
    xs = np.linspace(0.0, ctx.R, 11)
    worst = 0.0
    for z in FREE_Z:
        pairs = [(solve_weyl_left(zero, ctx.cfg.alpha, z, xs, ctx.tol), "left", ctx.cfg.alpha),
                 (solve_weyl_right(zero, ctx.cfg.beta, ctx.R, z, xs, ctx.tol), "right", ctx.cfg.beta)]
        for samples, which, angle in pairs:
            for s in samples:
                ref = free_solution(which, angle, ctx.R, z, s.x)
                scale = max(abs(ref.psi), abs(ref.dpsi), 1e-300)
                worst = max(worst, abs(s.psi - ref.psi) / scale, abs(s.dpsi - ref.dpsi) / scale)
    return _verdict(worst <= 1e-9, f"max relative deviation {worst:.3g}")


def check_green_symmetry(ctx: CheckContext):
    geometry = Geometry.interval(ctx.R)
    points = [(0.1, 0.7), (0.3, 0.9), (0.25, 0.5), (0.05, 0.95), (0.6, 0.8)]
    worst = 0.0
    for s, t in points:
        x, xp = s * ctx.R, t * ctx.R
        g = green_kernel(ctx.pot, geometry, ctx.cfg.alpha, ctx.cfg.beta, CHECK_Z, x, xp, ctx.tol).value
        h = green_kernel(ctx.pot, geometry, ctx.cfg.alpha, ctx.cfg.beta, CHECK_Z, xp, x, ctx.tol).value
        worst = max(worst, abs(g - h) / max(abs(g), 1e-300))
    return _verdict(worst <= 1e-8, f"max relative asymmetry {worst:.3g}")


def check_kernel_dominance(ctx: CheckContext):
    interval, halfline = Geometry.interval(ctx.R), Geometry.halfline()
    grid = (np.arange(10) + 0.5) * ctx.R / 10.0
    violations, worst = 0, -math.inf
    for q in (0.5, 1.0):
        for x in grid:
            for xp in grid:
                inner = frac_power_kernel(interval, 1.0, q, x, xp, tol=ctx.tol)
                outer = frac_power_kernel(halfline, 1.0, q, x, xp, tol=ctx.tol)
                if math.isinf(inner) and math.isinf(outer):
                    continue
                worst = max(worst, inner - outer)
                violations += inner > outer + 1e-10
    return _verdict(violations == 0, f"{violations} violations, max excess {worst:.3g}")


def check_krein(ctx: CheckContext):
    worst = 0.0
    for s, t in [(0.2, 0.4), (0.5, 0.5), (0.3, 0.8)]:
        worst = max(worst, krein_residual(ctx.pot, ctx.cfg.alpha, CHECK_Z, s * ctx.R, t * ctx.R, ctx.cfg.beta,
                                          ctx.R, tol=ctx.tol))
    return _verdict(worst <= 1e-7, f"max residual {worst:.3g}")


def check_jost_pais(ctx: CheckContext):
    n = ctx.cfg.nystrom_nodes
    geometries = [Geometry.interval(ctx.R)] + ([Geometry.halfline()] if ctx.cfg.halfline else [])
    worst, cases = 0.0, 0
    for geometry in geometries:
        for z in ctx.cfg.z_values:
            if geometry.is_halfline and z.imag == 0 and z.real > 0:
                continue
            if geometry.is_halfline:
                exact = det_wronskian_halfline(ctx.pot, ctx.cfg.alpha, z, tol=ctx.tol).value
            else:
                exact = det_wronskian_finite(ctx.pot, ctx.cfg.alpha, ctx.cfg.beta, ctx.R, z, tol=ctx.tol).value
            approx = det_nystrom(geometry, ctx.pot, ctx.cfg.alpha, ctx.cfg.beta, z, n, ctx.tol).value
            worst = max(worst, abs(approx - exact) / abs(exact))
            cases += 1
    return _verdict(worst <= 1e-5, f"max relative gap {worst:.3g} over {cases} cases, n={n}")


def check_infinite_volume_det(ctx: CheckContext):
    ctx.require_halfline()
    if len(ctx.cfg.R) < 2:
        raise NotApplicable("needs at least two R values")
    limit = complex(jost_function(ctx.pot, ctx.cfg.alpha, [-1.0], tol=ctx.tol)[0])
    gaps = [abs(complex(finite_determinants(ctx.pot, ctx.cfg.alpha, ctx.cfg.beta, R, [-1.0], tol=ctx.tol)[0]) - limit)
            for R in ctx.cfg.R]
    ok = all(b < a or a == b == 0.0 for a, b in zip(gaps[:-1], gaps[1:]))
    return _verdict(ok, "gaps " + ", ".join(f"{g:.3g}" for g in gaps))


def check_rank_one_gap(ctx: CheckContext):
    worst = rank_one_gap(50, 1000, ctx.cfg.seed)
    return _verdict(worst <= 1e-12, f"max violation {worst:.3g} over 1000 trials")


def check_normalization(ctx: CheckContext):
    zero = Potential.zero()
    geometry = Geometry.interval(ctx.R)
    anchor = normalization_anchor([ctx.pot, zero], geometry, ctx.cfg.alpha, ctx.cfg.beta)
    bound = min(spectral_lower_bound(p, geometry, ctx.cfg.alpha, ctx.cfg.beta) for p in (ctx.pot, zero))
    counts = [count_states(p, ctx.cfg.alpha, ctx.cfg.beta, ctx.R, anchor, ctx.tol) for p in (ctx.pot, zero)]
    ok = anchor <= bound and counts == [0, 0]
    detail = f"anchor {anchor:.6g} ≤ bound {bound:.6g}, counts at anchor {counts}"
    if ctx.cfg.halfline:
        start = normalization_anchor([ctx.pot, zero], Geometry.halfline(), ctx.cfg.alpha)
        xi = xi_halfline_phase(ctx.pot, ctx.cfg.alpha, lambdas=[start, 0.0], tol=ctx.tol)
        ok = ok and xi.values[0] == 0.0
        detail += f", half-line ξ(anchor) = {xi.values[0]:g}"
    return _verdict(ok, detail)


def check_sign_definite(ctx: CheckContext):
    geometry = Geometry.interval(ctx.R)
    plus, minus = xi_sign_split(ctx.pot, geometry, ctx.cfg.alpha, ctx.cfg.beta, lambda_max=ctx.cfg.lambda_max,
                                tol=ctx.tol)
    lows = [float(plus.values.min()), float(minus.values.min())]
    ok = min(lows) >= 0.0
    detail = f"min ξ₊ = {lows[0]:g}, min ξ₋ = {lows[1]:g}"
    if ctx.pot.is_nonnegative or ctx.pot.is_nonpositive:
        xi = xi_finite(ctx.pot, ctx.cfg.alpha, ctx.cfg.beta, ctx.R, lambda_max=ctx.cfg.lambda_max, tol=ctx.tol)
        signed = xi.values if ctx.pot.is_nonnegative else -xi.values
        ok = ok and bool(np.all(signed >= 0))
        detail += f", ξ range [{xi.values.min():g}, {xi.values.max():g}]"
    return _verdict(ok, detail)


def check_chain_rule(ctx: CheckContext):
    a, b, R = ctx.cfg.alpha, ctx.cfg.beta, ctx.R
    plus = ctx.pot.positive_part()
    grid = counting_grid([ctx.pot, plus, Potential.zero()], a, b, R, ctx.cfg.lambda_max, tol=ctx.tol)
    whole = xi_finite(ctx.pot, a, b, R, grid, tol=ctx.tol)
    first = xi_finite(plus, a, b, R, grid, tol=ctx.tol)
    second = xi_finite(ctx.pot, a, b, R, grid, reference=plus, tol=ctx.tol)
    gap = float(np.max(np.abs(whole.values - first.values - second.values)))
    return _verdict(gap == 0.0, f"max |ξ - ξ₁ - ξ₂| = {gap:g} on {grid.size} points")


def _away_from(lams: np.ndarray, eigenvalues: np.ndarray, distance: float) -> np.ndarray:
    if eigenvalues.size == 0:
        return lams
    return lams[np.min(np.abs(lams[:, None] - eigenvalues[None, :]), axis=1) >= distance]


def check_integer_consistency(ctx: CheckContext):
    ctx.require_halfline()
    xi = xi_halfline_phase(ctx.pot, ctx.cfg.alpha, lambda_max=ctx.cfg.lambda_max, tol=ctx.tol)
    eig = halfline_eigenvalues(ctx.pot, ctx.cfg.alpha, tol=ctx.tol)
    lams = _away_from(xi.lambdas[xi.lambdas < -1e-3], eig, 1e-3)
    values = np.asarray(xi.value_at(lams))
    gap = float(np.max(np.abs(values - np.round(values)))) if lams.size else 0.0
    return _verdict(gap <= 1e-2, f"max distance to integers {gap:.3g} at {lams.size} points")


def check_counting_vs_phase(ctx: CheckContext):
    ctx.require_halfline()
    geometry = Geometry.halfline()
    anchor = normalization_anchor([ctx.pot, Potential.zero()], geometry, ctx.cfg.alpha)
    eig = halfline_eigenvalues(ctx.pot, ctx.cfg.alpha, tol=ctx.tol)
    lams = _away_from(np.linspace(anchor + 1e-2, -1e-2, 50), eig, 1e-2)
    if lams.size == 0:
        raise NotApplicable("no sample points left below 0")
    phase = xi_halfline_phase(ctx.pot, ctx.cfg.alpha, lambdas=lams, tol=ctx.tol)
    counted = xi_finite(ctx.pot, ctx.cfg.alpha, DIRICHLET, ctx.R_large, lams, tol=ctx.tol)
    agree = int(np.sum(counted.values == np.round(np.asarray(phase.value_at(lams)))))
    return _verdict(agree == lams.size, f"{agree}/{lams.size} points agree at R={ctx.R_large:g}")


def check_split_linearity(ctx: CheckContext):
    a, b, R = ctx.cfg.alpha, ctx.cfg.beta, ctx.R
    grid = counting_grid([ctx.pot, ctx.pot.positive_part(), Potential.zero()], a, b, R, ctx.cfg.lambda_max,
                         tol=ctx.tol)
    xi = xi_finite(ctx.pot, a, b, R, grid, tol=ctx.tol)
    plus, minus = xi_sign_split(ctx.pot, Geometry.interval(R), a, b, grid, tol=ctx.tol)
    worst = 0.0
    for f in ctx.cfg.build_test_functions():
        whole = weighted_integral(xi, f, ctx.tol)
        worst = max(worst, abs(whole - weighted_integral(plus, f, ctx.tol) + weighted_integral(minus, f, ctx.tol)))
    return _verdict(worst <= 1e-10, f"max |∫ξf - ∫ξ₊f + ∫ξ₋f| = {worst:.3g}")


def check_tightness(ctx: CheckContext):
    if not ctx.cfg.R:
        raise NotApplicable("no R values")
    worst = 0.0
    for R in ctx.cfg.R:
        geometry = Geometry.interval(R)
        plus, minus = xi_sign_split(ctx.pot, geometry, ctx.cfg.alpha, ctx.cfg.beta, lambda_max=ctx.cfg.lambda_max,
                                    tol=ctx.tol)
        lo = plus.anchor - 1.0
        hi = min(150.0, 0.75 * ctx.cfg.lambda_max)
        worst = max(worst, outside_mass(plus, lo, hi), outside_mass(minus, lo, hi))
    return _verdict(worst <= 1e-2, f"max outside mass {worst:.3g} over {len(ctx.cfg.R)} R values")


def check_trace_formula(ctx: CheckContext):
    ctx.require_halfline()
    z = complex(ctx.cfg.trace["z"])
    xi = xi_halfline_phase(ctx.pot, ctx.cfg.alpha, lambda_max=ctx.cfg.lambda_max, tol=ctx.tol)
    parts, ok = [], True
    for n in ctx.cfg.trace["powers"]:
        lhs, rhs, _ = trace_formula_sides(ctx.pot, ctx.cfg.alpha, z, xi, n, tol=ctx.tol)
        rel = abs(lhs - rhs) / abs(rhs) if rhs != 0 else abs(lhs)
        ok = ok and rel <= TRACE_LIMITS.get(n, 5e-3)
        parts.append(f"n={n}: {rel:.3g}")
    return _verdict(ok, "relative residuals " + ", ".join(parts))


def _split(ctx: CheckContext) -> SplitGeometry:
    if ctx.cfg.split is None:
        raise NotApplicable("no split configured")
    return SplitGeometry(ctx.cfg.split["R1"], ctx.cfg.split["R2"])


def check_split_identity(ctx: CheckContext):
    correction = xi_split_correction(ctx.pot, _split(ctx), lambda_max=ctx.cfg.lambda_max, tol=ctx.tol)
    values = correction.values
    ok = bool(np.all(values == np.round(values)) and np.all(np.abs(values) <= 1))
    return _verdict(ok, f"correction range [{values.min():g}, {values.max():g}] on {values.size} points")


def check_krein_split(ctx: CheckContext):
    split = _split(ctx)
    R1, R2 = split.R1, split.R2
    triples = [(0.3 * R1, 0.6 * R1, -1.0), (0.5 * R1, R1 + 0.5 * split.outer_length, -2.0),
               (R1 + 0.2 * split.outer_length, R1 + 0.7 * split.outer_length, 1.0 + 1.0j),
               (0.9 * R1, 0.1 * R2, 2.0 + 0.5j), (0.4 * R1, R2 - 0.1 * split.outer_length, -0.5 + 0.2j)]
    worst = max(krein_split_residual(split, z, x, xp, ctx.tol) for x, xp, z in triples)
    return _verdict(worst <= 1e-7, f"max residual {worst:.3g} at {len(triples)} points")


def check_cesaro(ctx: CheckContext):
    ctx.require_halfline()
    if ctx.cfg.cesaro is None:
        raise NotApplicable("no Cesàro block")
    lam, R, m = ctx.cfg.cesaro["lambda"], ctx.cfg.cesaro["R"], ctx.cfg.cesaro["m"]
    mean = cesaro_mean(ctx.pot, ctx.cfg.alpha, ctx.cfg.beta, lam, R, m, tol=ctx.tol)
    xi = xi_halfline_phase(ctx.pot, ctx.cfg.alpha, lambdas=[lam], tol=ctx.tol)
    gap = abs(mean - float(xi.values[-1]))
    return _verdict(gap <= 0.1, f"mean {mean:.4g} vs ξ(λ={lam:g}) = {float(xi.values[-1]):.4g}")


CHECKS: List[Tuple[str, Callable[[CheckContext], Tuple[bool, str]]]] = [
    ("potential.factorization", check_factorization),
    ("potential.truncation_idempotent", check_truncation),
    ("potential.l1_tail_monotone", check_l1_tail),
    ("solutions.wronskian_constancy", check_wronskian_constancy),
    ("solutions.boundary_data", check_boundary_data),
    ("solutions.free_reduction", check_free_reduction),
    ("greens.symmetry", check_green_symmetry),
    ("greens.kernel_dominance", check_kernel_dominance),
    ("greens.krein_residual", check_krein),
    ("determinants.jost_pais", check_jost_pais),
    ("determinants.infinite_volume", check_infinite_volume_det),
    ("determinants.rank_one_gap", check_rank_one_gap),
    ("ssf.normalization", check_normalization),
    ("ssf.sign_definite", check_sign_definite),
    ("ssf.chain_rule", check_chain_rule),
    ("ssf.integer_consistency", check_integer_consistency),
    ("ssf.counting_vs_phase", check_counting_vs_phase),
    ("convergence.split_linearity", check_split_linearity),
    ("convergence.tightness", check_tightness),
    ("ssf.trace_formula", check_trace_formula),
    ("decomposition.identity", check_split_identity),
    ("decomposition.krein_split", check_krein_split),
    ("convergence.cesaro", check_cesaro),
]


def run_checks(cfg: ExperimentConfig, threads: Optional[int] = None,
               names: Optional[List[str]] = None) -> Tuple[List[Dict[str, object]], List[Dict[str, str]]]:
    """Run the suite in parallel; rows come back in CHECKS order whatever the completion order."""
    ctx = CheckContext(cfg, cfg.build_potential(), cfg.tol)
    selected = [(name, fn) for name, fn in CHECKS if names is None or name in names]
    stats = {"passed": 0, "failed": 0, "skipped": 0}
    stats_lock = threading.Lock()

    def run_one(name: str, fn):
        try:
            passed, detail = fn(ctx)
            outcome, error = ("passed" if passed else "failed"), None
        except NotApplicable as e:
            logger.info(f"[Engine] Check {name} skipped: {e}")
            passed, detail, outcome, error = None, str(e), "skipped", None
        except Exception as e:
            logger.error(f"[Engine] Check {name} raised {type(e).__name__}: {e}")
            passed, detail, outcome = False, f"{type(e).__name__}: {e}", "failed"
            error = {"task": f"check:{name}", "error": detail}
        with stats_lock:
            stats[outcome] += 1
        return name, passed, detail, error

    results = Parallel(n_jobs=cfg.threads if threads is None else threads, prefer="threads")(
        delayed(run_one)(name, fn) for name, fn in selected)
    rows, errors = [], []
    for name, passed, detail, error in results:
        if passed is None:
            continue
        rows.append({"name": name, "passed": passed, "detail": detail})
        if error is not None:
            errors.append(error)
    logger.info(f"[Engine] Checks: {stats['passed']} passed, {stats['failed']} failed, {stats['skipped']} skipped")
    return rows, errors
