"""Convergence studies: run a reference, run the tests, tabulate errors.

Every study output is deterministic for identical inputs: error tables are
written with fixed formatting, rows in ascending nx order, and timings go
to the manifest only (never into the CSV files).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from .metrics import ErrorReport, max_error_over_time, observed_order
from .problems import ProblemSpec
from .stepping import StepperConfig, Trajectory, run_simulation

ERROR_COLUMNS = (
    "err_theta_l2", "err_theta_h1", "err_phi_l2", "err_phi_h1",
    "err_u_l2", "err_dtu_l2", "err_dtu_V",
)
ERRORS_HEADER = ("nx", "h", "nt", "k") + ERROR_COLUMNS

_REPORT_FIELDS = ("theta_l2", "theta_h1", "phi_l2", "phi_h1", "u_l2", "dtu_l2", "dtu_strain")


def nt_rule(rule: str, nx: int) -> int:
    """Named step-count rules: nx^2/2 ('half-square') or nx^2/4 ('quarter-square')."""
    if rule == "half-square":
        return max(nx * nx // 2, 1)
    if rule == "quarter-square":
        return max(nx * nx // 4, 1)
    raise ValueError(f"unknown nt rule {rule!r}")


@dataclass
class StudyConfig:
    """One convergence study: test grids against a fixed reference run."""

    nx_list: list[int]
    nt_list: list[int]
    scheme: str
    ref_scheme: str
    ref_nx: int
    ref_nt: int
    picard_tol: float = 1e-8
    picard_max_iter: int = 50
    solver_rel_tol: float = 1e-10

    def __post_init__(self):
        if len(self.nx_list) != len(self.nt_list) or not self.nx_list:
            raise ValueError("nx and nt lists must be nonempty and of equal length")
        if sorted(self.nx_list) != list(self.nx_list):
            raise ValueError("nx list must be ascending")
        for nx, nt in zip(self.nx_list, self.nt_list):
            if self.ref_nx % nx:
                raise ValueError(f"reference nx={self.ref_nx} not divisible by test nx={nx}")
            if self.ref_nt % nt:
                raise ValueError(f"reference nt={self.ref_nt} not divisible by test nt={nt}")

    def stepper(self, scheme: str) -> StepperConfig:
        return StepperConfig(
            scheme=scheme,
            picard_tol=self.picard_tol,
            picard_max_iter=self.picard_max_iter,
            solver_rel_tol=self.solver_rel_tol,
        )

    def reference_stride(self) -> int:
        strides = [self.ref_nt // nt for nt in self.nt_list]
        return math.gcd(*strides) if len(strides) > 1 else strides[0]


@dataclass
class StudyResult:
    config: StudyConfig
    reference: Trajectory
    runs: list[Trajectory]
    reports: list[ErrorReport]
    wall_seconds: dict[str, float] = field(default_factory=dict)


def run_reference(spec: ProblemSpec, study: StudyConfig) -> Trajectory:
    return run_simulation(
        spec, study.ref_nx, study.ref_nt,
        study.stepper(study.ref_scheme),
        stride=study.reference_stride(),
    )


def run_study(spec: ProblemSpec, study: StudyConfig,
              reference: Trajectory | None = None) -> StudyResult:
    """Run the reference (once) and every test configuration, collect errors."""
    walls: dict[str, float] = {}
    if reference is None:
        tic = time.perf_counter()
        reference = run_reference(spec, study)
        walls["reference"] = time.perf_counter() - tic

    runs, reports = [], []
    for nx, nt in zip(study.nx_list, study.nt_list):
        tic = time.perf_counter()
        traj = run_simulation(spec, nx, nt, study.stepper(study.scheme), stride=1)
        walls[f"nx={nx}"] = time.perf_counter() - tic
        runs.append(traj)
        reports.append(max_error_over_time(traj, reference))
    return StudyResult(config=study, reference=reference, runs=runs,
                       reports=reports, wall_seconds=walls)


def _fmt(x: float) -> str:
    return format(float(x), ".12e")


def errors_rows(result: StudyResult) -> list[dict]:
    rows = []
    for traj, rep in zip(result.runs, result.reports):
        row = {
            "nx": traj.nx, "h": 1.0 / traj.nx, "nt": traj.nt, "k": traj.k,
        }
        for col, attr in zip(ERROR_COLUMNS, _REPORT_FIELDS):
            row[col] = getattr(rep, attr)
        rows.append(row)
    return rows


def write_errors_csv(path, rows: list[dict]) -> None:
    lines = [",".join(ERRORS_HEADER)]
    for row in rows:
        lines.append(",".join(
            [str(row["nx"]), _fmt(row["h"]), str(row["nt"]), _fmt(row["k"])]
            + [_fmt(row[c]) for c in ERROR_COLUMNS]
        ))
    Path(path).write_text("\n".join(lines) + "\n")


def orders_rows(rows: list[dict]) -> list[dict]:
    """Pairwise observed orders between consecutive error rows."""
    out = []
    for a, b in zip(rows, rows[1:]):
        entry = {"nx_from": a["nx"], "nx_to": b["nx"]}
        for col in ERROR_COLUMNS:
            if a[col] > 0.0 and b[col] > 0.0:
                entry[col] = observed_order([a[col], b[col]], [a["h"], b["h"]])[0]
            else:
                entry[col] = float("nan")
        out.append(entry)
    return out


def write_orders_csv(path, orders: list[dict]) -> None:
    header = ["nx_from", "nx_to"] + [c.replace("err_", "order_") for c in ERROR_COLUMNS]
    lines = [",".join(header)]
    for entry in orders:
        lines.append(",".join(
            [str(entry["nx_from"]), str(entry["nx_to"])]
            + [format(entry[c], ".4f") for c in ERROR_COLUMNS]
        ))
    Path(path).write_text("\n".join(lines) + "\n")


def format_table(rows: list[dict]) -> str:
    cols = list(ERRORS_HEADER)
    widths = {c: max(len(c), 13) for c in cols}
    head = "  ".join(c.rjust(widths[c]) for c in cols)
    body = []
    for row in rows:
        cells = [str(row["nx"]).rjust(widths["nx"]), f"{row['h']:.5f}".rjust(widths["h"]),
                 str(row["nt"]).rjust(widths["nt"]), f"{row['k']:.6f}".rjust(widths["k"])]
        cells += [f"{row[c]:.6e}".rjust(widths[c]) for c in ERROR_COLUMNS]
        body.append("  ".join(cells))
    return "\n".join([head] + body)


COMPARE_FIELDS = ("theta_l2", "phi_l2", "u_l2", "dtu_l2")


def comparison_rows(semi: StudyResult, ie: StudyResult) -> list[dict]:
    """Side-by-side errors of the two schemes plus semi/ie ratios."""
    rows = []
    for rep_s, rep_i, traj in zip(semi.reports, ie.reports, semi.runs):
        row = {"nx": traj.nx, "h": 1.0 / traj.nx}
        for f in COMPARE_FIELDS:
            es, ei = getattr(rep_s, f), getattr(rep_i, f)
            row[f"semi_{f}"] = es
            row[f"ie_{f}"] = ei
            row[f"ratio_{f}"] = es / ei if ei > 0.0 else float("nan")
        rows.append(row)
    return rows


def write_compare_csv(path, rows: list[dict]) -> None:
    header = ["nx", "h"]
    for f in COMPARE_FIELDS:
        header += [f"semi_{f}", f"ie_{f}", f"ratio_{f}"]
    lines = [",".join(header)]
    for row in rows:
        cells = [str(row["nx"]), _fmt(row["h"])]
        for f in COMPARE_FIELDS:
            cells += [_fmt(row[f"semi_{f}"]), _fmt(row[f"ie_{f}"]), _fmt(row[f"ratio_{f}"])]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_manifest(path, entries: dict) -> None:
    """Key = value dump of every parameter and tolerance that shaped a run."""
    lines = [f"{key} = {value}" for key, value in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")
