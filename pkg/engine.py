import os
import logging
import threading
from typing import Any, Callable, Dict, List, Optional, Tuple

from dotenv import load_dotenv
from joblib import Parallel, delayed

from checks import CHECK_COLUMNS, run_checks
from config import ExperimentConfig
from convergence import SCAN_COLUMNS, scan_infinite_volume
from decomposition import (SplitGeometry, krein_split_residual, split_correction_phase, xi_direct_sum,
                           xi_split_correction)
from determinants import det_nystrom, det_wronskian_finite, det_wronskian_halfline
from errors import ConfigError
from solutions import Geometry
from ssf import SpectralShiftGrid, halfline_eigenvalues, xi_finite, xi_halfline_phase
from utils import emit_report, format_float, write_json

load_dotenv()
# Configure logging
logging.basicConfig(level=logging.INFO, filename=os.getenv("SSF_LAB_LOG_FILE", "ssf_lab.log"), filemode="a", format="%(asctime)s - %(levelname)s - %(message)s", encoding="utf-8")
logger = logging.getLogger(__name__)

COMMANDS = ("det", "xi", "scan", "check", "decompose")
DET_COLUMNS = ["geometry", "R", "z_re", "z_im", "method", "det_re", "det_im", "abs", "arg", "nodes"]
KREIN_COLUMNS = ["x", "xp", "z_re", "z_im", "residual"]


class ExperimentEngine:
    """Runs one command of an experiment: independent tasks in parallel, outputs written afterwards in task order."""

    def __init__(self, cfg: ExperimentConfig, threads: Optional[int] = None):
        logger.info(f"[Engine] Initializing ExperimentEngine for '{cfg.name}'...")
        self.cfg = cfg
        self.threads = cfg.threads if threads is None else threads
        self.pot = cfg.build_potential()
        self.tol = cfg.tol
        self.errors: List[Dict[str, Any]] = []
        self.stats_lock = threading.Lock()
        self.stats = {"tasks_run": 0, "tasks_failed": 0, "files_written": 0}

    def get_stats(self) -> Dict[str, int]:
        with self.stats_lock:
            return self.stats.copy()

    def path(self, name: str) -> str:
        return os.path.join(self.cfg.output_dir, name)

    def geometries(self) -> List[Geometry]:
        return [Geometry.interval(R) for R in self.cfg.R] + ([Geometry.halfline()] if self.cfg.halfline else [])

    # -- task plumbing ---------------------------------------------------

    def run_tasks(self, tasks: List[Tuple[str, Callable[[], Any]]]) -> List[Optional[Any]]:
        """Results in task order; a failed task yields None and an entry in self.errors."""

        def attempt(name: str, fn):
            try:
                result = fn()
                failure = None
            except Exception as e:
                logger.error(f"[Engine] Task {name} failed: {type(e).__name__}: {e}")
                result, failure = None, {"task": name, "error": f"{type(e).__name__}: {e}"}
            with self.stats_lock:
                self.stats["tasks_run"] += 1
                self.stats["tasks_failed"] += failure is not None
            return result, failure

        outcomes = Parallel(n_jobs=self.threads, prefer="threads")(delayed(attempt)(name, fn) for name, fn in tasks)
        results = []
        for result, failure in outcomes:
            if failure is not None:
                self.errors.append(failure)
            results.append(result)
        return results

    def emit(self, report: Any, format: str, name: str, columns: Optional[List[str]] = None):
        emit_report(report, format, self.path(name), columns)
        with self.stats_lock:
            self.stats["files_written"] += 1

    def write_grid(self, xi: SpectralShiftGrid, name: str) -> Dict[str, str]:
        csv_path, meta_path = xi.write(self.path(name))
        with self.stats_lock:
            self.stats["files_written"] += 2
        return {"label": xi.label, "csv": os.path.basename(csv_path), "metadata": os.path.basename(meta_path)}

    # -- commands --------------------------------------------------------

    def run_det(self):
        cfg, pot = self.cfg, self.pot
        tasks = []
        for geometry in self.geometries():
            for z in cfg.z_values:
                tag = "halfline" if geometry.is_halfline else f"R={format_float(geometry.R)}"
                if geometry.is_halfline:
                    wronskian = lambda z=z: det_wronskian_halfline(pot, cfg.alpha, z, tol=self.tol)
                else:
                    wronskian = lambda z=z, R=geometry.R: det_wronskian_finite(pot, cfg.alpha, cfg.beta, R, z,
                                                                               tol=self.tol)
                nystrom = lambda z=z, g=geometry: det_nystrom(g, pot, cfg.alpha, cfg.beta, z, cfg.nystrom_nodes,
                                                              self.tol)
                tasks.append((f"det:{tag}:z={z}:wronskian", wronskian))
                tasks.append((f"det:{tag}:z={z}:nystrom", nystrom))
        rows = []
        for value in self.run_tasks(tasks):
            if value is not None:
                rows.append({"geometry": value.geometry.kind, "R": value.geometry.R, **value.as_row()})
        self.emit(rows, "csv", "det.csv", DET_COLUMNS)
        self.emit(rows, "json", "det.json")
        logger.info(f"[Engine] det: {len(rows)} of {len(tasks)} determinants computed")

    def run_xi(self):
        cfg, pot = self.cfg, self.pot
        tasks = [(f"xi:R={format_float(R)}",
                  lambda R=R: xi_finite(pot, cfg.alpha, cfg.beta, R, cfg.lambdas, lambda_max=cfg.lambda_max,
                                        tol=self.tol))
                 for R in cfg.R]
        names = [f"xi_R{R:g}.csv" for R in cfg.R]
        if cfg.halfline:
            tasks.append(("xi:halfline", lambda: xi_halfline_phase(pot, cfg.alpha, cfg.lambdas,
                                                                   lambda_max=cfg.lambda_max, tol=self.tol)))
            names.append("xi_halfline.csv")
            tasks.append(("xi:halfline_eigenvalues", lambda: halfline_eigenvalues(pot, cfg.alpha, tol=self.tol)))
        results = self.run_tasks(tasks)
        grids = [self.write_grid(xi, name) for xi, name in zip(results, names) if xi is not None]
        summary: Dict[str, Any] = {"grids": grids}
        if cfg.halfline and results[-1] is not None:
            summary["halfline_eigenvalues"] = list(results[-1])
        self.emit(summary, "json", "xi_summary.json")

    def run_scan(self):
        cfg = self.cfg
        if not cfg.R:
            raise ConfigError("scan needs a nonempty R list", field="R")
        if not cfg.halfline:
            raise ConfigError("scan compares against the half-line and needs halfline=true", field="halfline")
        fs = cfg.build_test_functions()
        reports = self.run_tasks([("scan", lambda: scan_infinite_volume(
            self.pot, cfg.alpha, cfg.beta, fs, cfg.R, cfg.lambda_window, cfg.masses, threads=self.threads,
            tol=self.tol))])
        report = reports[0]
        if report is None:
            return
        self.errors.extend({"task": f"scan:R={e['R']:g}:{e['task']}", "error": e["error"]} for e in report.errors)
        self.emit(report, "json", "scan.json")
        self.emit(report, "csv", "scan.csv", SCAN_COLUMNS)

    def run_check(self):
        rows, errors = run_checks(self.cfg, self.threads)
        self.errors.extend(errors)
        self.emit(rows, "csv", "checks.csv", CHECK_COLUMNS)
        failed = [row["name"] for row in rows if not row["passed"]]
        recorded = {e["task"] for e in errors}
        self.errors.extend({"task": f"check:{name}", "error": "check failed"} for name in failed
                           if f"check:{name}" not in recorded)

    def run_decompose(self):
        cfg, pot = self.cfg, self.pot
        if cfg.split is None:
            raise ConfigError("decompose needs a split block with R1 and R2", field="split")
        split = SplitGeometry(cfg.split["R1"], cfg.split["R2"])
        samples = [(0.5 * split.R1, 0.5 * split.R1, -1.0), (0.25 * split.R1, split.R1 + 0.5 * split.outer_length, -1.0),
                   (split.R1 + 0.3 * split.outer_length, split.R1 + 0.6 * split.outer_length, 1.0 + 1.0j)]
        tasks = [
            ("decompose:direct_sum", lambda: xi_direct_sum(pot, split, cfg.lambdas, cfg.lambda_max, self.tol)),
            ("decompose:correction", lambda: xi_split_correction(pot, split, cfg.lambdas, cfg.lambda_max, self.tol)),
            ("decompose:correction_phase", lambda: split_correction_phase(pot, split, n=cfg.nystrom_nodes,
                                                                         tol=self.tol)),
            ("decompose:krein_split", lambda: [
                {"x": x, "xp": xp, "z_re": complex(z).real, "z_im": complex(z).imag,
                 "residual": krein_split_residual(split, z, x, xp, self.tol)} for x, xp, z in samples]),
        ]
        direct, correction, phase, krein = self.run_tasks(tasks)
        grids = [self.write_grid(xi, name) for xi, name in
                 [(direct, "xi_direct_sum.csv"), (correction, "split_correction.csv"),
                  (phase, "split_correction_phase.csv")] if xi is not None]
        if krein is not None:
            self.emit(krein, "csv", "krein_split.csv", KREIN_COLUMNS)
        self.emit({"split": split.describe(), "grids": grids}, "json", "decompose_summary.json")

    def run(self, cmd: str) -> int:
        if cmd not in COMMANDS:
            raise ConfigError(f"unknown command '{cmd}', expected one of {COMMANDS}")
        logger.info(f"[Engine] Running '{cmd}' with {self.threads} threads into {self.cfg.output_dir}")
        getattr(self, f"run_{cmd}")()
        self.emit(self.errors, "json", "errors.json")
        stats = self.get_stats()
        logger.info(f"[Engine] '{cmd}' finished: {stats['tasks_run']} tasks, {len(self.errors)} failures, "
                    f"{stats['files_written']} files")
        return 1 if self.errors else 0


def run_command(cmd: str, cfg: ExperimentConfig, threads: Optional[int] = None) -> int:
    """Exit status of one command: 0 when every task succeeded, 1 otherwise."""
    return ExperimentEngine(cfg, threads).run(cmd)
