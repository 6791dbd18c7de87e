"""
Experiment configuration: a JSON document validated in full before any
computation starts. See README.md for the schema.
"""
import os
import json
import math
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv

from convergence import TEST_FUNCTION_KINDS, TestFunction
from errors import ConfigError, DomainError
from potential import KINDS, Potential, load_grid_csv
from settings import DEFAULT_THREADS, DEFAULT_TOLERANCES, Tolerances
from utils import write_json

load_dotenv()
# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = (
    "name", "potential", "alpha", "beta", "R", "halfline", "z", "lambda_grid", "test_functions",
    "lambda_window", "masses", "split", "nystrom_nodes", "tolerances", "output_dir", "seed", "threads",
    "trace", "cesaro",
)
POTENTIAL_PARAMS = {
    "zero": (),
    "square-well": ("depth", "width"),
    "exponential": ("amplitude", "rate"),
    "gaussian-bump": ("height", "center", "width"),
    "grid-sampled": (),
}
GRID_KEYS = ("csv", "x", "v", "interpolation", "support_hint")
LAMBDA_GRID_KEYS = ("lambda_max", "points")
TRACE_KEYS = ("z", "powers")
CESARO_KEYS = ("lambda", "R", "m")
TOLERANCE_FIELDS = tuple(f.name for f in fields(Tolerances))
DEFAULT_Z = ((-1.0, 0.0), (-5.0, 0.0), (1.0, 1.0))


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    potential: Dict[str, Any]
    alpha: float = 0.0
    beta: float = 0.0
    R: Tuple[float, ...] = ()
    halfline: bool = True
    z: Tuple[Tuple[float, float], ...] = DEFAULT_Z
    lambda_grid: Dict[str, Any] = field(default_factory=dict)
    test_functions: Tuple[Dict[str, Any], ...] = ({"kind": "constant"},)
    lambda_window: Tuple[float, float] = (0.5, 4.0)
    masses: Tuple[Tuple[float, float], ...] = ((-1.0, 0.0), (0.0, 2.0))
    split: Optional[Dict[str, float]] = None
    nystrom_nodes: int = 400
    tolerances: Dict[str, float] = field(default_factory=dict)
    output_dir: str = "out"
    seed: int = 0
    threads: int = DEFAULT_THREADS
    trace: Dict[str, Any] = field(default_factory=lambda: {"z": -5.0, "powers": [1, 2]})
    cesaro: Optional[Dict[str, float]] = None
    base_dir: str = "."

    @property
    def tol(self) -> Tolerances:
        return DEFAULT_TOLERANCES.updated(**self.tolerances)

    @property
    def lambda_max(self) -> float:
        return float(self.lambda_grid.get("lambda_max", self.tol.lambda_max))

    @property
    def lambdas(self) -> Optional[List[float]]:
        return self.lambda_grid.get("points")

    @property
    def z_values(self) -> List[complex]:
        return [complex(re, im) for re, im in self.z]

    def build_potential(self) -> Potential:
        return build_potential(self.potential, self.base_dir)

    def build_test_functions(self) -> List[TestFunction]:
        return [TestFunction(spec["kind"], dict(spec.get("params", {})), bool(spec.get("fold_weight", False)),
                             spec.get("name")) for spec in self.test_functions]

    def resolved(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("base_dir")
        data["tolerances"] = asdict(self.tol)
        return data


def build_potential(spec: Dict[str, Any], base_dir: str = ".") -> Potential:
    kind = spec.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown kind '{kind}', expected one of {KINDS}", field="potential.kind")
    allowed = ("kind",) + (GRID_KEYS if kind == "grid-sampled" else POTENTIAL_PARAMS[kind])
    unknown = sorted(set(spec) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", field="potential")
    try:
        if kind == "zero":
            return Potential.zero()
        if kind == "grid-sampled":
            interpolation = spec.get("interpolation", "linear")
            hint = spec.get("support_hint")
            if "csv" in spec:
                path = spec["csv"] if os.path.isabs(spec["csv"]) else os.path.join(base_dir, spec["csv"])
                return load_grid_csv(path, interpolation, hint)
            if "x" not in spec or "v" not in spec:
                raise ConfigError("grid-sampled needs either 'csv' or both 'x' and 'v'", field="potential")
            return Potential.grid_sampled(spec["x"], spec["v"], interpolation, hint)
        missing = [p for p in POTENTIAL_PARAMS[kind] if p not in spec]
        if missing:
            raise ConfigError(f"missing parameters {missing}", field="potential")
        args = [float(spec[p]) for p in POTENTIAL_PARAMS[kind]]
        return {"square-well": Potential.square_well, "exponential": Potential.exponential,
                "gaussian-bump": Potential.gaussian_bump}[kind](*args)
    except DomainError as e:
        raise ConfigError(str(e), field="potential") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid parameter value ({e})", field="potential") from e


def _number(data: Dict[str, Any], key: str, default: float) -> float:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"expected a finite number, got {value!r}", field=key)
    return float(value)


def _angle(data: Dict[str, Any], key: str) -> float:
    value = _number(data, key, 0.0)
    if not (0.0 <= value < math.pi):
        raise ConfigError(f"angle must lie in [0, π), got {value}", field=key)
    return value


def _pairs(value, key: str) -> Tuple[Tuple[float, float], ...]:
    try:
        pairs = tuple((float(a), float(b)) for a, b in value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"expected a list of [a, b] pairs ({e})", field=key) from e
    return pairs


def _check_keys(block: Dict[str, Any], allowed, key: str):
    if not isinstance(block, dict):
        raise ConfigError("expected an object", field=key)
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", field=key)


def parse_config(data: Dict[str, Any], base_dir: str = ".") -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(data) - set(TOP_LEVEL_KEYS))
    if unknown:
        raise ConfigError(f"unknown keys {unknown}; allowed keys are {list(TOP_LEVEL_KEYS)}")
    if "potential" not in data:
        raise ConfigError("missing potential block", field="potential")
    if not isinstance(data["potential"], dict):
        raise ConfigError("expected an object", field="potential")
    potential = dict(data["potential"])
    build_potential(potential, base_dir)

    alpha, beta = _angle(data, "alpha"), _angle(data, "beta")
    R = data.get("R", [])
    if not isinstance(R, list) or any(isinstance(r, bool) or not isinstance(r, (int, float)) for r in R):
        raise ConfigError("expected a list of numbers", field="R")
    R = tuple(float(r) for r in R)
    if any(r <= 0 for r in R) or any(b <= a for a, b in zip(R[:-1], R[1:])):
        raise ConfigError(f"R values must be positive and strictly increasing, got {list(R)}", field="R")
    halfline = bool(data.get("halfline", True))
    if not R and not halfline:
        raise ConfigError("need at least one R or halfline=true", field="R")

    z_raw = data.get("z", [list(p) for p in DEFAULT_Z])
    try:
        z = tuple((float(p), 0.0) if isinstance(p, (int, float)) else tuple(float(c) for c in p) for p in z_raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"expected numbers or [re, im] pairs ({e})", field="z") from e
    if any(len(p) != 2 for p in z) or any(p == (0.0, 0.0) for p in z):
        raise ConfigError("z entries must be numbers or [re, im] pairs, and z = 0 is excluded", field="z")

    lambda_grid = dict(data.get("lambda_grid", {}))
    _check_keys(lambda_grid, LAMBDA_GRID_KEYS, "lambda_grid")
    if "lambda_max" in lambda_grid and not _number(lambda_grid, "lambda_max", 0.0) > 0:
        raise ConfigError("must be positive", field="lambda_grid.lambda_max")
    points = lambda_grid.get("points")
    if points is not None and (len(points) == 0 or any(b <= a for a, b in zip(points[:-1], points[1:]))):
        raise ConfigError("points must be a nonempty strictly increasing list", field="lambda_grid.points")

    tests = tuple(dict(spec) for spec in data.get("test_functions", [{"kind": "constant"}]))
    for i, spec in enumerate(tests):
        key = f"test_functions[{i}]"
        _check_keys(spec, ("kind", "params", "fold_weight", "name"), key)
        if spec.get("kind") not in TEST_FUNCTION_KINDS:
            raise ConfigError(f"unknown kind {spec.get('kind')!r}", field=key)
        try:
            TestFunction(spec["kind"], dict(spec.get("params", {})), bool(spec.get("fold_weight", False)))
        except DomainError as e:
            raise ConfigError(str(e), field=key) from e

    window = _pairs([data.get("lambda_window", [0.5, 4.0])], "lambda_window")[0]
    masses = _pairs(data.get("masses", [[-1.0, 0.0], [0.0, 2.0]]), "masses")
    for key, (a, b) in [("lambda_window", window)] + [("masses", m) for m in masses]:
        if not a < b:
            raise ConfigError(f"interval [{a}, {b}] must have a < b", field=key)

    split = data.get("split")
    if split is not None:
        _check_keys(split, ("R1", "R2"), "split")
        R1, R2 = _number(split, "R1", 0.0), _number(split, "R2", 0.0)
        if not (0 < R1 < R2):
            raise ConfigError(f"need 0 < R1 < R2, got R1={R1}, R2={R2}", field="split")
        split = {"R1": R1, "R2": R2}

    nodes = data.get("nystrom_nodes", 400)
    if not isinstance(nodes, int) or nodes < 16:
        raise ConfigError(f"must be an integer >= 16, got {nodes!r}", field="nystrom_nodes")

    tolerances = dict(data.get("tolerances", {}))
    _check_keys(tolerances, TOLERANCE_FIELDS, "tolerances")
    for key, value in tolerances.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
            raise ConfigError(f"must be a positive number, got {value!r}", field=f"tolerances.{key}")
    if "max_refine_depth" in tolerances:
        tolerances["max_refine_depth"] = int(tolerances["max_refine_depth"])

    seed = data.get("seed", 0)
    threads = data.get("threads", DEFAULT_THREADS)
    if not isinstance(seed, int):
        raise ConfigError(f"must be an integer, got {seed!r}", field="seed")
    if not isinstance(threads, int) or threads < 1:
        raise ConfigError(f"must be a positive integer, got {threads!r}", field="threads")

    trace = dict(data.get("trace", {"z": -5.0, "powers": [1, 2]}))
    _check_keys(trace, TRACE_KEYS, "trace")
    trace["z"] = _number(trace, "z", -5.0)
    trace.setdefault("powers", [1, 2])
    if any(not isinstance(n, int) or n < 1 for n in trace["powers"]):
        raise ConfigError("powers must be positive integers", field="trace.powers")

    cesaro = data.get("cesaro")
    if cesaro is not None:
        _check_keys(cesaro, CESARO_KEYS, "cesaro")
        cesaro = {"lambda": _number(cesaro, "lambda", 2.0), "R": _number(cesaro, "R", 40.0),
                  "m": int(cesaro.get("m", 80))}
        if cesaro["R"] <= 0 or cesaro["m"] < 1:
            raise ConfigError("need R > 0 and m >= 1", field="cesaro")

    return ExperimentConfig(
        name=str(data.get("name", "experiment")), potential=potential, alpha=alpha, beta=beta, R=R,
        halfline=halfline, z=z, lambda_grid=lambda_grid, test_functions=tests, lambda_window=window,
        masses=masses, split=split, nystrom_nodes=nodes, tolerances=tolerances,
        output_dir=str(data.get("output_dir", "out")), seed=seed, threads=threads, trace=trace,
        cesaro=cesaro, base_dir=base_dir,
    )


def load_config(path: str, output_dir: Optional[str] = None, echo: bool = True) -> ExperimentConfig:
    """Read and validate an experiment file; the resolved config is echoed into the output directory."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}") from e
    if isinstance(data, dict) and output_dir is not None:
        data["output_dir"] = output_dir
    cfg = parse_config(data, os.path.dirname(os.path.abspath(path)))
    logger.info(f"[Config] Loaded experiment '{cfg.name}' from {path}")
    if echo:
        write_json(cfg.resolved(), os.path.join(cfg.output_dir, "resolved_config.json"))
    return cfg
