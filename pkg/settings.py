import json
import math
import os
import logging
from dataclasses import dataclass, replace
from typing import Dict, Any, Optional
from dotenv import load_dotenv

load_dotenv()
# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)

SETTINGS_FILE = os.getenv("SSF_LAB_SETTINGS", "settings.json")

# keys whose values must be strictly positive floats
POSITIVE_KEYS = [
    "ODE_RTOL", "ODE_ATOL", "QUAD_EPSABS", "QUAD_EPSREL", "TAIL_TOL", "NYSTROM_TAIL_TOL",
    "EPSILON_SCALE", "NEAR_EIGENVALUE_THRESHOLD", "PHASE_JUMP_LIMIT", "XI_TAIL_LEVEL",
    "WEIGHTED_TAIL_TOL", "LAMBDA_MAX",
]
INTEGER_KEYS = ["MAX_REFINE_DEPTH", "THREADS"]


def default_settings() -> Dict[str, Any]:
    return {
        "ODE_RTOL": float(os.getenv("SSF_LAB_ODE_RTOL", 1e-11)),
        "ODE_ATOL": float(os.getenv("SSF_LAB_ODE_ATOL", 1e-13)),
        "QUAD_EPSABS": float(os.getenv("SSF_LAB_QUAD_EPSABS", 1e-12)),
        "QUAD_EPSREL": float(os.getenv("SSF_LAB_QUAD_EPSREL", 1e-10)),
        "TAIL_TOL": float(os.getenv("SSF_LAB_TAIL_TOL", 1e-10)),
        "NYSTROM_TAIL_TOL": float(os.getenv("SSF_LAB_NYSTROM_TAIL_TOL", 1e-8)),
        "EPSILON_SCALE": float(os.getenv("SSF_LAB_EPSILON_SCALE", 1e-4)),
        "NEAR_EIGENVALUE_THRESHOLD": float(os.getenv("SSF_LAB_NEAR_EIGENVALUE_THRESHOLD", 1e-12)),
        "PHASE_JUMP_LIMIT": float(os.getenv("SSF_LAB_PHASE_JUMP_LIMIT", math.pi / 2)),
        "MAX_REFINE_DEPTH": int(os.getenv("SSF_LAB_MAX_REFINE_DEPTH", 12)),
        "XI_TAIL_LEVEL": float(os.getenv("SSF_LAB_XI_TAIL_LEVEL", 0.02)),
        "WEIGHTED_TAIL_TOL": float(os.getenv("SSF_LAB_WEIGHTED_TAIL_TOL", 1e-2)),
        "LAMBDA_MAX": float(os.getenv("SSF_LAB_LAMBDA_MAX", 200.0)),
        "THREADS": int(os.getenv("SSF_LAB_THREADS", 1)),
    }


def validate_settings(settings: Dict[str, Any], defaults: Dict[str, Any]) -> Dict[str, Any]:
    """Coerce every known key, falling back to its default with a warning when invalid."""
    resolved = dict(settings)
    for key, value in defaults.items():
        if key not in resolved:
            logger.warning(f"Missing {key} in settings, using default: {value}")
            resolved[key] = value
            continue
        try:
            if key in INTEGER_KEYS:
                resolved[key] = int(resolved[key])
                if resolved[key] <= 0:
                    logger.warning(f"Invalid {key} value {resolved[key]}, using default: {value}")
                    resolved[key] = value
            else:
                resolved[key] = float(resolved[key])
                if key in POSITIVE_KEYS and not resolved[key] > 0:
                    logger.warning(f"Invalid {key} value {resolved[key]}, using default: {value}")
                    resolved[key] = value
        except (ValueError, TypeError):
            logger.warning(f"Invalid {key} value {resolved[key]} in settings, using default: {value}")
            resolved[key] = value
    return resolved


def load_settings(path: Optional[str] = None) -> Dict[str, Any]:
    path = path or SETTINGS_FILE
    defaults = default_settings()
    try:
        if not os.path.exists(path):
            logger.info(f"{path} not found, using default settings")
            return defaults

        with open(path, "r", encoding="utf-8") as f:
            settings = json.load(f)

        settings = validate_settings(settings, defaults)
        logger.info(f"Successfully loaded settings from {path}")
        return settings

    except json.JSONDecodeError as e:
        logger.error(f"Error decoding {path}: {e}, using default settings")
        return defaults
    except Exception as e:
        logger.error(f"Error loading {path}: {e}, using default settings")
        return defaults


@dataclass(frozen=True)
class Tolerances:
    ode_rtol: float = 1e-11
    ode_atol: float = 1e-13
    quad_epsabs: float = 1e-12
    quad_epsrel: float = 1e-10
    tail_tol: float = 1e-10
    nystrom_tail_tol: float = 1e-8
    epsilon_scale: float = 1e-4
    near_eigenvalue: float = 1e-12
    phase_jump_limit: float = math.pi / 2
    max_refine_depth: int = 12
    xi_tail_level: float = 0.02
    weighted_tail_tol: float = 1e-2
    lambda_max: float = 200.0

    @classmethod
    def from_settings(cls, settings: Dict[str, Any]) -> "Tolerances":
        return cls(
            ode_rtol=settings["ODE_RTOL"],
            ode_atol=settings["ODE_ATOL"],
            quad_epsabs=settings["QUAD_EPSABS"],
            quad_epsrel=settings["QUAD_EPSREL"],
            tail_tol=settings["TAIL_TOL"],
            nystrom_tail_tol=settings["NYSTROM_TAIL_TOL"],
            epsilon_scale=settings["EPSILON_SCALE"],
            near_eigenvalue=settings["NEAR_EIGENVALUE_THRESHOLD"],
            phase_jump_limit=settings["PHASE_JUMP_LIMIT"],
            max_refine_depth=int(settings["MAX_REFINE_DEPTH"]),
            xi_tail_level=settings["XI_TAIL_LEVEL"],
            weighted_tail_tol=settings["WEIGHTED_TAIL_TOL"],
            lambda_max=settings["LAMBDA_MAX"],
        )

    def updated(self, **changes) -> "Tolerances":
        return replace(self, **changes)


SETTINGS = load_settings()
DEFAULT_TOLERANCES = Tolerances.from_settings(SETTINGS)
DEFAULT_THREADS = int(SETTINGS.get("THREADS", 1))


def resolve(tol: Optional[Tolerances]) -> Tolerances:
    return DEFAULT_TOLERANCES if tol is None else tol
