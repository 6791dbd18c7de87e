"""
Infinite-volume checks: weighted integrals of ξ_R against test functions,
interval masses, distribution functions of the sign-split parts, the R-scan
comparing interval data with the half-line reference, Cesàro means and the
finite-dimensional rank-one trace-norm estimate.
"""
import os
import math
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from joblib import Parallel, delayed
from scipy.integrate import quad
from scipy.linalg import qr, svdvals
from scipy.special import erf, expit

from determinants import finite_determinants, jost_function
from errors import DomainError, ExclusionZoneError, SignSplitError, TailError
from potential import Potential
from settings import DEFAULT_THREADS, Tolerances, resolve
from solutions import Geometry
from ssf import (SpectralShiftGrid, count_states_at, default_lambda_grid, halfline_eigenvalues, normalization_anchor,
                 xi_finite, xi_halfline_phase, xi_sign_split)

load_dotenv()
# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)

TEST_FUNCTION_KINDS = ("constant", "rational", "gaussian", "sigmoid", "indicator", "mollified-indicator", "tent")
COMPACT_KINDS = ("indicator", "tent")
# allowed negative noise in ξ± before the sign split counts as violated
SIGN_FLOOR = {"counting": 1e-9, "phase": 1e-4}


@dataclass(frozen=True)
class TestFunction:
    """Bounded test function f(λ); fold_weight multiplies it by (1 + λ²)."""

    __test__ = False

    kind: str
    params: Dict[str, float] = field(default_factory=dict)
    fold_weight: bool = False
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in TEST_FUNCTION_KINDS:
            raise DomainError(f"unknown test function '{self.kind}', expected one of {TEST_FUNCTION_KINDS}")
        if self.kind in ("indicator", "mollified-indicator", "tent"):
            E1, E2 = self.params.get("E1"), self.params.get("E2")
            if E1 is None or E2 is None or not (math.isfinite(E1) and math.isfinite(E2) and E1 < E2):
                raise DomainError(f"{self.kind} needs finite endpoints E1 < E2, got {E1}, {E2}")
        if self.kind == "mollified-indicator" and self.params.get("width", 1e-2) <= 0:
            raise DomainError("mollifier width must be positive")
        if self.fold_weight and self.kind not in COMPACT_KINDS:
            raise DomainError("fold_weight needs a compactly supported test function")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        extra = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        tag = f"{self.kind}({extra})" if extra else self.kind
        return f"{tag}*w" if self.fold_weight else tag

    @property
    def support(self) -> Optional[Tuple[float, float]]:
        if self.kind in COMPACT_KINDS:
            return self.params["E1"], self.params["E2"]
        return None

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        p = self.params
        if self.kind == "indicator":
            return p["E1"], p["E2"]
        if self.kind == "tent":
            return p["E1"], 0.5 * (p["E1"] + p["E2"]), p["E2"]
        return ()

    @property
    def sup_abs(self) -> float:
        if self.kind == "constant":
            return abs(self.params.get("value", 1.0))
        if self.fold_weight:
            E1, E2 = self.support
            return 1.0 + max(E1 * E1, E2 * E2)
        return 1.0

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        p = self.params
        if self.kind == "constant":
            out = np.full(lam.shape, p.get("value", 1.0))
        elif self.kind == "rational":
            out = 1.0 / (1.0 + ((lam - p.get("center", 0.0)) / p.get("scale", 1.0)) ** 2)
        elif self.kind == "gaussian":
            out = np.exp(-((lam - p.get("center", 0.0)) / p.get("width", 1.0)) ** 2)
        elif self.kind == "sigmoid":
            out = expit((lam - p.get("center", 0.0)) / p.get("width", 1.0))
        elif self.kind == "indicator":
            out = ((lam >= p["E1"]) & (lam <= p["E2"])).astype(float)
        elif self.kind == "mollified-indicator":
            width = p.get("width", 1e-2)
            out = 0.5 * (erf((lam - p["E1"]) / width) - erf((lam - p["E2"]) / width))
        else:
            mid, half = 0.5 * (p["E1"] + p["E2"]), 0.5 * (p["E2"] - p["E1"])
            out = np.maximum(0.0, 1.0 - np.abs(lam - mid) / half)
        if self.fold_weight:
            out = out * (1.0 + lam * lam)
        return out

    def describe(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "fold_weight": self.fold_weight, "label": self.label}


# -- grid quadrature -----------------------------------------------------

def _check_normalized(xi: SpectralShiftGrid):
    if xi.lambdas[0] > xi.anchor and xi.values[0] != 0.0:
        raise TailError(f"grid starts at {xi.lambdas[0]:.4g} above the anchor {xi.anchor:.4g} with ξ = {xi.values[0]:g}")


def weighted_integral_bounded(xi: SpectralShiftGrid, f: TestFunction,
                              tol: Optional[Tolerances] = None) -> Tuple[float, float]:
    """(∫ ξ(λ)·f(λ)/(1 + λ²) dλ, certified bound on the part beyond the grid)."""
    tol = resolve(tol)
    _check_normalized(xi)
    lambda_max = float(xi.lambdas[-1])
    support = f.support
    if support is not None:
        if support[1] > lambda_max:
            raise TailError(f"test function support ends at {support[1]:g} beyond the grid end {lambda_max:g}")
        bound = 0.0
    else:
        bound = xi.tail_level() * f.sup_abs * (math.pi / 2.0 - math.atan(lambda_max))
        if bound > tol.weighted_tail_tol:
            raise TailError(f"weighted tail bound {bound:.3g} exceeds {tol.weighted_tail_tol:g}")
    value = xi.integrate(lambda lam: f(lam) / (1.0 + lam * lam), breakpoints=f.breakpoints)
    return float(np.real(value)), bound


def weighted_integral(xi: SpectralShiftGrid, f: TestFunction, tol: Optional[Tolerances] = None) -> float:
    return weighted_integral_bounded(xi, f, tol)[0]


def moment_integral(xi: SpectralShiftGrid, a: complex, z: complex, n: int, tol: Optional[Tolerances] = None) -> complex:
    """∫ ξ(λ) dλ / ((λ - a)(λ - z)ⁿ).

    A real a or z must lie below xi.anchor, where ξ vanishes; DomainError otherwise.
    """
    tol = resolve(tol)
    if n < 1:
        raise DomainError(f"power n must be at least 1, got {n}")
    a, z = complex(a), complex(z)
    _check_normalized(xi)
    for p in (a, z):
        if p.imag == 0 and p.real >= xi.anchor:
            raise DomainError(f"real point {p.real:g} must lie below the anchor {xi.anchor:g}")
    lambda_max = float(xi.lambdas[-1])
    bound, _ = quad(lambda lam: 1.0 / (abs(lam - a) * abs(lam - z) ** n), lambda_max, math.inf)
    if xi.tail_level() * bound > tol.weighted_tail_tol:
        raise TailError(f"moment tail bound {xi.tail_level() * bound:.3g} exceeds {tol.weighted_tail_tol:g}")
    return complex(xi.integrate(lambda lam: 1.0 / ((lam - a) * (lam - z) ** n)))


def interval_mass(xi: SpectralShiftGrid, E1: float, E2: float) -> float:
    """∫_{E1}^{E2} ξ(λ) dλ."""
    if not E1 < E2:
        raise DomainError(f"interval needs E1 < E2, got [{E1}, {E2}]")
    if E1 < xi.lambdas[0] or E2 > xi.lambdas[-1]:
        raise DomainError(f"[{E1}, {E2}] is not inside the grid [{xi.lambdas[0]:g}, {xi.lambdas[-1]:g}]")
    return float(np.real(xi.integrate(lambda lam: np.ones_like(lam), lo=E1, hi=E2)))


def _check_sign(xi_pm: SpectralShiftGrid):
    floor = SIGN_FLOOR[xi_pm.method]
    worst = float(np.min(xi_pm.values))
    if worst < -floor:
        raise SignSplitError(f"{xi_pm.label} takes the negative value {worst:.3g}")


def distribution_function(xi_pm: SpectralShiftGrid, lam: float) -> float:
    """σ(λ) = ∫_(-∞, λ) ξ±(μ) dμ/(μ² + 1) for a nonnegative sign-split part."""
    _check_sign(xi_pm)
    _check_normalized(xi_pm)
    if lam <= xi_pm.lambdas[0]:
        return 0.0
    value = xi_pm.integrate(lambda mu: 1.0 / (1.0 + mu * mu), hi=lam)
    return max(float(np.real(value)), 0.0)


def distribution_ladder(xi_pm: SpectralShiftGrid, lams: Sequence[float]) -> np.ndarray:
    return np.array([distribution_function(xi_pm, lam) for lam in lams])


def outside_mass(xi_pm: SpectralShiftGrid, a: float, b: float) -> float:
    """Mass of ξ±(λ)/(1 + λ²) outside [a, b], including the certified tail beyond the grid."""
    if not a < b:
        raise DomainError(f"window needs a < b, got [{a}, {b}]")
    _check_sign(xi_pm)
    _check_normalized(xi_pm)
    weight = lambda mu: 1.0 / (1.0 + mu * mu)
    below = xi_pm.integrate(weight, hi=a)
    above = xi_pm.integrate(weight, lo=b)
    lambda_max = float(xi_pm.lambdas[-1])
    tail = xi_pm.tail_level() * (math.pi / 2.0 - math.atan(max(lambda_max, b)))
    return float(np.real(below + above)) + tail


# -- scan ---------------------------------------------------------------

SCAN_COLUMNS = ["R", "quantity", "value", "reference", "error"]


@dataclass
class ScanReport:
    R_values: List[float]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    references: Dict[str, float] = field(default_factory=dict)
    monotone: Dict[str, bool] = field(default_factory=dict)
    reference_spread: Dict[str, float] = field(default_factory=dict)
    errors: List[Dict[str, Any]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def quantities(self) -> List[str]:
        seen = []
        for row in self.rows:
            if row["quantity"] not in seen:
                seen.append(row["quantity"])
        return seen

    def error_sequence(self, quantity: str) -> List[float]:
        return [row["error"] for row in self.rows if row["quantity"] == quantity]

    def value_sequence(self, quantity: str) -> List[float]:
        return [row["value"] for row in self.rows if row["quantity"] == quantity]

    def final_error(self, quantity: str) -> float:
        seq = self.error_sequence(quantity)
        if not seq:
            raise KeyError(quantity)
        return seq[-1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=SCAN_COLUMNS)

    def to_dict(self) -> dict:
        return {
            "R_values": list(self.R_values),
            "references": dict(self.references),
            "monotone": dict(self.monotone),
            "reference_spread": dict(self.reference_spread),
            "rows": list(self.rows),
            "errors": list(self.errors),
            "metadata": dict(self.metadata),
        }


# the reference runs at EPSILON_SCALE / REFERENCE_TIGHTENING on the default grid with every cell halved
REFERENCE_TIGHTENING = 4.0


def _tight_reference(pot: Potential, alpha, tol: Tolerances) -> SpectralShiftGrid:
    anchor = normalization_anchor([pot, Potential.zero()], Geometry.halfline(), alpha)
    grid = default_lambda_grid(anchor, tol.lambda_max)
    dense = np.sort(np.concatenate([grid, 0.5 * (grid[:-1] + grid[1:])]))
    return xi_halfline_phase(pot, alpha, lambdas=dense, epsilon=tol.epsilon_scale / REFERENCE_TIGHTENING, tol=tol)


def _references(pot: Potential, alpha, fs, masses, ladder, z_ref: complex, tol: Tolerances) -> Dict[str, Any]:
    """Half-line reference values, plus their spread against the reference at the configured ε and grid."""
    xi_inf = _tight_reference(pot, alpha, tol)
    xi_plain = xi_halfline_phase(pot, alpha, tol=tol)
    plus, minus = xi_sign_split(pot, Geometry.halfline(), alpha, tol=tol)
    refs: Dict[str, Any] = {"xi": xi_inf, "det": complex(jost_function(pot, alpha, [z_ref], tol=tol)[0])}
    spread: Dict[str, float] = {}
    for f in fs:
        key = f"weighted:{f.label}"
        refs[key] = weighted_integral(xi_inf, f, tol)
        spread[key] = abs(refs[key] - weighted_integral(xi_plain, f, tol))
    for E1, E2 in masses:
        key = f"mass:[{E1:g},{E2:g}]"
        refs[key] = interval_mass(xi_inf, E1, E2)
        spread[key] = abs(refs[key] - interval_mass(xi_plain, E1, E2))
    refs["spread"] = spread
    for lam, s_plus, s_minus in zip(ladder, distribution_ladder(plus, ladder), distribution_ladder(minus, ladder)):
        refs[f"sigma_plus({lam:.6g})"] = float(s_plus)
        refs[f"sigma_minus({lam:.6g})"] = float(s_minus)
    return refs


def _scan_one(pot: Potential, alpha, beta, R: float, fs, masses, window, ladder, outside, z_ref: complex,
              refs: Dict[str, Any], tol: Tolerances) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
    rows: List[Dict[str, Any]] = []
    errors: List[Dict[str, Any]] = []

    def record(quantity: str, value: float, reference: Optional[float]):
        error = abs(value - reference) if reference is not None else abs(value)
        rows.append({"R": R, "quantity": quantity, "value": value, "reference": reference, "error": error})

    def attempt(task: str, fn):
        try:
            fn()
        except Exception as e:
            logger.error(f"[Scan] R={R:g} task {task} failed: {e}")
            errors.append({"R": R, "task": task, "error": f"{type(e).__name__}: {e}"})

    state: Dict[str, SpectralShiftGrid] = {}

    def finite_xi():
        state["xi"] = xi_finite(pot, alpha, beta, R, tol=tol)

    attempt("xi", finite_xi)
    if "xi" in state:
        xi_R = state["xi"]
        for f in fs:
            key = f"weighted:{f.label}"
            attempt(key, lambda f=f, key=key: record(key, weighted_integral(xi_R, f, tol), refs[key]))
        for E1, E2 in masses:
            key = f"mass:[{E1:g},{E2:g}]"
            attempt(key, lambda E1=E1, E2=E2, key=key: record(key, interval_mass(xi_R, E1, E2), refs[key]))

        def sup_gap():
            window_points = np.linspace(window[0], window[1], 401)
            gap = np.max(np.abs(xi_R.value_at(window_points) - refs["xi"].value_at(window_points)))
            record("sup_gap", float(gap), None)

        attempt("sup_gap", sup_gap)

    def det_gap():
        value = complex(finite_determinants(pot, alpha, beta, R, [z_ref], tol=tol)[0])
        record("det_gap", abs(value - refs["det"]), None)

    attempt("det_gap", det_gap)

    def split():
        plus, minus = xi_sign_split(pot, Geometry.interval(R), alpha, beta, tol=tol)
        for tag, part in (("plus", plus), ("minus", minus)):
            for lam, s in zip(ladder, distribution_ladder(part, ladder)):
                key = f"sigma_{tag}({lam:.6g})"
                record(key, float(s), refs[key])
            record(f"outside_{tag}", outside_mass(part, *outside), None)

    attempt("sign_split", split)
    logger.info(f"[Scan] R={R:g}: {len(rows)} quantities, {len(errors)} failures")
    return rows, errors


def scan_infinite_volume(pot: Potential, alpha, beta, fs: Sequence[TestFunction], R_list: Sequence[float],
                         lambda_window: Tuple[float, float] = (0.5, 4.0),
                         masses: Sequence[Tuple[float, float]] = ((-1.0, 0.0), (0.0, 2.0)),
                         ladder: Optional[Sequence[float]] = None, outside: Tuple[float, float] = (-10.0, 150.0),
                         z_ref: complex = -1.0 + 0.0j, threads: Optional[int] = None,
                         tol: Optional[Tolerances] = None) -> ScanReport:
    """Compare interval data at each R with the half-line reference; per-R jobs run in parallel."""
    tol = resolve(tol)
    R_values = [float(R) for R in R_list]
    if not R_values or any(R <= 0 for R in R_values) or any(b <= a for a, b in zip(R_values[:-1], R_values[1:])):
        raise DomainError(f"R list must be positive and strictly increasing, got {R_values}")
    ladder = list(np.linspace(-1.0, 10.0, 20)) if ladder is None else [float(x) for x in ladder]
    refs = _references(pot, alpha, fs, masses, ladder, complex(z_ref), tol)
    threads = DEFAULT_THREADS if threads is None else threads
    stats = {"done": 0, "failed": 0}
    lock = threading.Lock()

    def job(R):
        rows, errors = _scan_one(pot, alpha, beta, R, fs, masses, lambda_window, ladder, outside, complex(z_ref),
                                 refs, tol)
        with lock:
            stats["done"] += 1
            stats["failed"] += len(errors)
        return rows, errors

    results = Parallel(n_jobs=threads, prefer="threads")(delayed(job)(R) for R in R_values)
    report = ScanReport(R_values)
    for rows, errors in results:
        report.rows.extend(rows)
        report.errors.extend(errors)
    report.references = {k: v for k, v in refs.items() if isinstance(v, float)}
    report.references["det_re"] = refs["det"].real
    report.references["det_im"] = refs["det"].imag
    report.reference_spread = dict(refs["spread"])
    for quantity in report.quantities():
        # a step counts as a decrease up to the reference's own spread
        slack = report.reference_spread.get(quantity, 0.0)
        seq = report.error_sequence(quantity)
        report.monotone[quantity] = len(seq) == len(R_values) and all(b <= a + slack for a, b in zip(seq[:-1], seq[1:]))
    report.metadata = {
        "potential": pot.describe(),
        "alpha": alpha, "beta": beta,
        "lambda_window": list(lambda_window), "outside_window": list(outside),
        "z_ref": complex(z_ref),
        "test_functions": [f.describe() for f in fs],
        "tolerances": "empirical",
        "reference_epsilon_scale": tol.epsilon_scale / REFERENCE_TIGHTENING,
        "tasks_failed": stats["failed"],
    }
    logger.info(f"[Scan] Finished {stats['done']} R values with {stats['failed']} failed tasks")
    return report


# -- Cesàro means --------------------------------------------------------

def cesaro_mean(pot: Potential, alpha, beta, lam: float, R: float, m: int, exclusion: float = 1e-3,
                tol: Optional[Tolerances] = None) -> float:
    """Midpoint-rule (1/R)∫₀^R ξ(λ; H_r, H⁰_r) dr with r_j = (j - 1/2)·R/m."""
    tol = resolve(tol)
    if R <= 0 or m < 1:
        raise DomainError(f"need R > 0 and m >= 1, got R={R}, m={m}")
    if abs(lam) < exclusion:
        raise ExclusionZoneError(f"λ={lam:g} is within {exclusion:g} of the threshold 0")
    if lam < 0:
        eig = halfline_eigenvalues(pot, alpha, tol=tol)
        near = eig[np.abs(eig - lam) < exclusion]
        if near.size:
            raise ExclusionZoneError(f"λ={lam:g} is within {exclusion:g} of the half-line eigenvalue {near[0]:.8g}")
    rs = (np.arange(1, m + 1) - 0.5) * R / m
    counts = count_states_at(pot, alpha, beta, rs, [lam], tol)[:, 0]
    free = count_states_at(Potential.zero(), alpha, beta, rs, [lam], tol)[:, 0]
    return float(np.mean(free - counts))


# -- rank-one estimate ---------------------------------------------------

def rank_one_gap(dim: int, trials: int, seed: Optional[int] = None) -> float:
    """max over random trials of ‖f⊗g - P f⊗P g‖₁ - (‖(I-P)f‖‖g‖ + ‖Pf‖‖(I-P)g‖)."""
    if dim < 2:
        raise DomainError(f"dimension must be at least 2, got {dim}")
    if trials < 1:
        raise DomainError(f"need at least one trial, got {trials}")
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(trials):
        f, g = rng.standard_normal(dim), rng.standard_normal(dim)
        n = int(rng.integers(0, dim + 1))
        pf, pg = f.copy(), g.copy()
        pf[n:], pg[n:] = 0.0, 0.0
        # f gᵀ - Pf (Pg)ᵀ = A Bᵀ has rank <= 2
        qa, ra = qr(np.column_stack([f, -pf]), mode="economic")
        qb, rb = qr(np.column_stack([g, pg]), mode="economic")
        trace_norm = float(np.sum(svdvals(ra @ rb.T)))
        bound = np.linalg.norm(f - pf) * np.linalg.norm(g) + np.linalg.norm(pf) * np.linalg.norm(g - pg)
        worst = max(worst, trace_norm - bound)
    return float(worst)
