"""
Potential models on [0, ∞): closed-form kinds and grid-sampled data.

A Potential is immutable. Truncation to (0, R), translation and the sign
split V = V₊ − V₋ all return new Potential objects, so the solvers never
need to know how a potential was derived.
"""
import os
import math
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from scipy.integrate import quad
from scipy.special import erfc

from errors import AccuracyError, ConfigError, DomainError, TailError
from settings import Tolerances, resolve

load_dotenv()
# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)

KINDS = ("zero", "square-well", "exponential", "gaussian-bump", "grid-sampled")
INTERPOLATIONS = ("linear", "constant")
PARTS = ("full", "positive", "negative")

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class Potential:
    kind: str
    params: Dict[str, float] = field(default_factory=dict)
    grid_x: Optional[np.ndarray] = None
    grid_v: Optional[np.ndarray] = None
    interpolation: str = "linear"
    support_hint: Optional[float] = None
    offset: float = 0.0
    cutoff: Optional[float] = None
    part: str = "full"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"Unknown potential kind '{self.kind}', expected one of {KINDS}")
        if self.interpolation not in INTERPOLATIONS:
            raise DomainError(f"Unknown interpolation '{self.interpolation}'")
        if self.part not in PARTS:
            raise DomainError(f"Unknown part '{self.part}'")
        if self.kind == "grid-sampled":
            xs, vs = self.grid_x, self.grid_v
            if xs is None or vs is None or len(xs) < 2 or len(xs) != len(vs):
                raise DomainError("grid-sampled potential needs matching abscissae and values (at least two)")
            if np.any(np.diff(xs) <= 0):
                raise DomainError("grid abscissae must be strictly increasing")
            if xs[0] < 0 or not np.all(np.isfinite(vs)):
                raise DomainError("grid must start at x >= 0 and carry finite values")

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls) -> "Potential":
        return cls("zero")

    @classmethod
    def square_well(cls, depth: float, width: float) -> "Potential":
        if width <= 0:
            raise DomainError(f"square-well width must be positive, got {width}")
        return cls("square-well", {"depth": float(depth), "width": float(width)})

    @classmethod
    def exponential(cls, amplitude: float, rate: float) -> "Potential":
        if rate <= 0:
            raise DomainError(f"exponential rate must be positive, got {rate}")
        return cls("exponential", {"amplitude": float(amplitude), "rate": float(rate)})

    @classmethod
    def gaussian_bump(cls, height: float, center: float, width: float) -> "Potential":
        if width <= 0:
            raise DomainError(f"gaussian-bump width must be positive, got {width}")
        return cls("gaussian-bump", {"height": float(height), "center": float(center), "width": float(width)})

    @classmethod
    def grid_sampled(cls, xs, vs, interpolation: str = "linear", support_hint: Optional[float] = None) -> "Potential":
        xs = np.asarray(xs, dtype=float).copy()
        vs = np.asarray(vs, dtype=float).copy()
        xs.setflags(write=False)
        vs.setflags(write=False)
        return cls("grid-sampled", grid_x=xs, grid_v=vs, interpolation=interpolation,
                   support_hint=None if support_hint is None else float(support_hint))

    # -- evaluation -----------------------------------------------------

    def _base(self, y: np.ndarray) -> np.ndarray:
        p = self.params
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "square-well":
            return np.where(y <= p["width"], p["depth"], 0.0)
        if self.kind == "exponential":
            return p["amplitude"] * np.exp(-p["rate"] * y)
        if self.kind == "gaussian-bump":
            return p["height"] * np.exp(-0.5 * ((y - p["center"]) / p["width"]) ** 2)
        xs, vs = self.grid_x, self.grid_v
        if self.interpolation == "linear":
            out = np.interp(y, xs, vs)
        else:
            idx = np.clip(np.searchsorted(xs, y, side="right") - 1, 0, len(xs) - 1)
            out = vs[idx]
        if self.support_hint is not None:
            out = np.where(y > self.support_hint, 0.0, out)
        return out

    def __call__(self, x: ArrayLike) -> ArrayLike:
        arr = np.asarray(x, dtype=float)
        v = self._base(arr + self.offset)
        if self.cutoff is not None:
            v = np.where(arr > self.cutoff, 0.0, v)
        if self.part == "positive":
            v = np.maximum(v, 0.0)
        elif self.part == "negative":
            v = np.maximum(-v, 0.0)
        return float(v) if v.ndim == 0 else v

    # -- derived potentials ---------------------------------------------

    def truncated(self, R: float) -> "Potential":
        cut = R if self.cutoff is None else min(self.cutoff, R)
        return replace(self, cutoff=float(cut))

    def shifted(self, a: float) -> "Potential":
        """V(x + a): the piece of this potential that starts at x = a, moved to the origin."""
        if a < 0:
            raise DomainError(f"shift must be nonnegative, got {a}")
        cut = None
        if self.cutoff is not None:
            cut = self.cutoff - a
            if cut <= 0:
                return Potential.zero()
        return replace(self, offset=self.offset + float(a), cutoff=cut)

    def positive_part(self) -> "Potential":
        if self.part == "full":
            return replace(self, part="positive")
        return self

    def negative_part(self) -> "Potential":
        if self.part == "full":
            return replace(self, part="negative")
        return Potential.zero()

    # -- metadata -------------------------------------------------------

    def _base_sign(self) -> int:
        p = self.params
        if self.kind == "zero":
            return 0
        if self.kind == "square-well":
            return int(np.sign(p["depth"]))
        if self.kind == "exponential":
            return int(np.sign(p["amplitude"]))
        if self.kind == "gaussian-bump":
            return int(np.sign(p["height"]))
        if np.all(self.grid_v >= 0):
            return 1 if np.any(self.grid_v > 0) else 0
        if np.all(self.grid_v <= 0):
            return -1
        return 2  # mixed

    def _sign(self) -> int:
        base = self._base_sign()
        if self.part == "positive":
            return 0 if base in (0, -1) else 1
        if self.part == "negative":
            return 0 if base in (0, 1) else 1
        return base

    @property
    def support_end(self) -> float:
        """Point beyond which V vanishes identically (inf for infinite support)."""
        if self._sign() == 0:
            return 0.0
        if self.kind == "square-well":
            end = max(self.params["width"] - self.offset, 0.0)
        elif self.kind == "grid-sampled" and self.support_hint is not None:
            end = max(self.support_hint - self.offset, 0.0)
        else:
            end = math.inf
        if self.cutoff is not None:
            end = min(end, self.cutoff)
        return end

    @property
    def is_zero(self) -> bool:
        return self._sign() == 0 or self.support_end <= 0.0

    @property
    def is_nonnegative(self) -> bool:
        return self._sign() in (0, 1)

    @property
    def is_nonpositive(self) -> bool:
        return self._sign() in (0, -1)

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        """Abscissae where V (or its derivative) jumps, in this potential's own coordinates."""
        if self.is_zero:
            return ()
        pts = []
        if self.kind == "square-well":
            pts.append(self.params["width"])
        elif self.kind == "grid-sampled":
            if self.interpolation == "constant":
                pts.extend(self.grid_x[1:].tolist())
            else:
                pts.extend([self.grid_x[0], self.grid_x[-1]])
            if self.support_hint is not None:
                pts.append(self.support_hint)
        own = [b - self.offset for b in pts]
        if self.cutoff is not None:
            own = [b for b in own if b < self.cutoff] + [self.cutoff]
        return tuple(sorted({float(b) for b in own if b > 0.0}))

    def negative_sup(self) -> float:
        """Upper bound for sup V₋, used by the operator lower bounds."""
        if self.part != "full" or self.is_zero:
            return 0.0
        p = self.params
        if self.kind == "square-well":
            return max(-p["depth"], 0.0)
        if self.kind == "exponential":
            return max(-p["amplitude"], 0.0) * math.exp(-p["rate"] * self.offset)
        if self.kind == "gaussian-bump":
            return max(-p["height"], 0.0)
        if self.kind == "grid-sampled":
            return max(-float(np.min(self.grid_v)), 0.0)
        return 0.0

    def describe(self) -> Dict[str, object]:
        info: Dict[str, object] = {"kind": self.kind, **self.params}
        if self.kind == "grid-sampled":
            info.update({"points": int(len(self.grid_x)), "interpolation": self.interpolation,
                         "support_hint": self.support_hint})
        if self.offset:
            info["offset"] = self.offset
        if self.cutoff is not None:
            info["cutoff"] = self.cutoff
        if self.part != "full":
            info["part"] = self.part
        return info

    # -- integrals ------------------------------------------------------

    def _closed_l1(self, lo: float, hi: float) -> float:
        p = self.params
        if self.kind == "zero":
            return 0.0
        if self.kind == "square-well":
            return abs(p["depth"]) * max(0.0, min(hi, p["width"]) - lo)
        if self.kind == "exponential":
            r = p["rate"]
            upper = 0.0 if math.isinf(hi) else math.exp(-r * hi)
            return abs(p["amplitude"]) / r * (math.exp(-r * lo) - upper)
        s = p["width"] * math.sqrt(2.0)
        t_hi = 0.0 if math.isinf(hi) else erfc((hi - p["center"]) / s)
        return abs(p["height"]) * p["width"] * math.sqrt(math.pi / 2.0) * (erfc((lo - p["center"]) / s) - t_hi)

    def l1_tail(self, a: float, tol: Optional[Tolerances] = None) -> float:
        return l1_tail(self, a, tol)

    def integral(self, tol: Optional[Tolerances] = None) -> float:
        """Signed ∫₀^∞ V dx."""
        if self.is_zero:
            return 0.0
        if self.is_nonnegative:
            return l1_tail(self, 0.0, tol)
        if self.is_nonpositive:
            return -l1_tail(self, 0.0, tol)
        return _grid_quad(self, 0.0, lambda x: self(x), resolve(tol))


@dataclass(frozen=True)
class Factorization:
    """V = u·v with v = |V|^{1/2} and u = sgn(V)·v, sgn(0) := +1."""

    potential: Potential

    def v(self, x: ArrayLike) -> ArrayLike:
        return np.sqrt(np.abs(self.potential(x)))

    def u(self, x: ArrayLike) -> ArrayLike:
        vals = np.asarray(self.potential(x))
        out = np.where(vals < 0, -1.0, 1.0) * np.sqrt(np.abs(vals))
        return float(out) if out.ndim == 0 else out


def evaluate(pot: Potential, x: float) -> float:
    if x < 0:
        raise DomainError(f"potential evaluated at negative x={x}")
    return float(pot(x))


def factorize(pot: Potential) -> Factorization:
    return Factorization(pot)


def truncate_and_split(pot: Potential, R: float) -> Tuple[Potential, Potential, Potential]:
    if not R > 0:
        raise DomainError(f"truncation length must be positive, got {R}")
    return pot.truncated(R), pot.positive_part(), pot.negative_part()


def _grid_quad(pot: Potential, a: float, integrand, tol: Tolerances) -> float:
    end = pot.support_end
    if math.isinf(end):
        if pot.cutoff is not None:
            end = pot.cutoff
        elif abs(pot.grid_v[-1]) == 0.0:
            end = max(pot.grid_x[-1] - pot.offset, 0.0)
        else:
            raise TailError("grid-sampled potential has a nonzero last sample and no support_hint; its tail is unknown")
    if end <= a:
        return 0.0
    inner = [b for b in (np.asarray(pot.grid_x) - pot.offset) if a < b < end]
    limit = max(200, 4 * len(inner) + 50)
    value, abserr = quad(integrand, a, end, points=inner or None, limit=limit,
                         epsabs=tol.quad_epsabs, epsrel=tol.quad_epsrel)
    if abserr > 1e3 * max(tol.quad_epsabs, tol.quad_epsrel * abs(value)):
        raise AccuracyError(f"quadrature of grid potential over [{a}, {end}] did not converge", abserr)
    return float(value)


def l1_tail(pot: Potential, a: float, tol: Optional[Tolerances] = None) -> float:
    """∫_a^∞ |V(x)| dx, in closed form where the kind allows it."""
    if a < 0:
        raise DomainError(f"l1_tail lower limit must be nonnegative, got {a}")
    if pot.is_zero or a >= pot.support_end:
        return 0.0
    if pot.kind == "grid-sampled":
        return _grid_quad(pot, a, lambda x: abs(pot(x)), resolve(tol))
    lo = a + pot.offset
    hi = math.inf if pot.cutoff is None else pot.cutoff + pot.offset
    if hi <= lo:
        return 0.0
    return pot._closed_l1(lo, hi)


def load_grid_csv(path: str, interpolation: str = "linear", support_hint: Optional[float] = None) -> Potential:
    """Two-column (x, V(x)) CSV, header optional, x strictly increasing."""
    try:
        frame = pd.read_csv(path, header=None, comment="#", skip_blank_lines=True, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigError(f"cannot read grid CSV {path}: {e}", field="potential.csv")
    if frame.shape[1] < 2:
        raise ConfigError(f"grid CSV {path} needs two columns", field="potential.csv")
    first_row = 1
    if pd.to_numeric(frame.iloc[0, :2], errors="coerce").isna().any():
        frame = frame.iloc[1:]
        first_row = 2
    values = frame.iloc[:, :2].apply(pd.to_numeric, errors="coerce")
    bad = values.isna().any(axis=1).to_numpy()
    if bad.any():
        raise ConfigError("non-numeric entry in grid CSV", field="potential.csv", row=first_row + int(np.argmax(bad)))
    xs = values.iloc[:, 0].to_numpy(dtype=float)
    vs = values.iloc[:, 1].to_numpy(dtype=float)
    steps = np.diff(xs)
    if np.any(steps <= 0):
        row = first_row + int(np.argmax(steps <= 0)) + 1
        raise ConfigError("grid abscissae must be strictly increasing", field="potential.csv", row=row)
    if xs[0] < 0:
        raise ConfigError("grid abscissae must be nonnegative", field="potential.csv", row=first_row)
    logger.info(f"[Config] Loaded {len(xs)} grid samples from {path}")
    return Potential.grid_sampled(xs, vs, interpolation=interpolation, support_hint=support_hint)
