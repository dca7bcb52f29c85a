"""Command-line front end: run, converge, compare, validate.

Exit codes: 0 success, 1 simulation/solver failure, 2 usage or
configuration errors (bad flags, divisibility violations).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import harness
from .plots import write_svg_plot
from .problems import (
    AssumptionError,
    ProblemSpec,
    load_problem_config,
    make_preset,
    validate_assumptions,
)
from .sparse_linalg import SolverError
from .stepping import StepperConfig, dump_trajectory, run_simulation

QUADRATURE = "edge-midpoint-3pt"


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def int_list(text: str) -> list[int]:
    return [positive_int(tok) for tok in text.split(",") if tok]


def _add_problem_flags(p: argparse.ArgumentParser):
    p.add_argument("--problem", choices=["p1", "p2", "heat", "elastic"],
                   help="benchmark preset")
    p.add_argument("--config", help="INI problem config (ignored fields when --problem is set)")
    p.add_argument("--gamma", type=float, help="viscosity scale for p2 / custom problems")


def _add_tolerance_flags(p: argparse.ArgumentParser):
    p.add_argument("--picard-tol", type=float, default=1e-8)
    p.add_argument("--picard-max-iter", type=positive_int, default=50)
    p.add_argument("--solver-tol", type=float, default=1e-10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="joulefem",
        description="Coupled temperature/potential/displacement simulations "
                    "on the unit square with convergence studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one simulation and dump its trajectory")
    _add_problem_flags(run)
    run.add_argument("--nx", type=positive_int, required=True)
    run.add_argument("--nt", type=positive_int, required=True)
    run.add_argument("--scheme", choices=["semi", "ie"], default="semi")
    run.add_argument("--stride", type=positive_int, help="snapshot stride (default: every step)")
    run.add_argument("--out", required=True)
    _add_tolerance_flags(run)

    conv = sub.add_parser("converge", help="run a convergence study against a reference")
    _add_problem_flags(conv)
    conv.add_argument("--scheme", choices=["semi", "ie"], default="semi")
    conv.add_argument("--nx", type=int_list, help="comma-separated test grids, e.g. 4,8,16")
    conv.add_argument("--nt", type=int_list, help="explicit step counts matching --nx")
    conv.add_argument("--nt-rule", choices=["half-square", "quarter-square"],
                      help="derive nt from nx (nx^2/2 or nx^2/4)")
    conv.add_argument("--ref-scheme", choices=["semi", "ie"])
    conv.add_argument("--ref-nx", type=positive_int)
    conv.add_argument("--ref-nt", type=positive_int)
    conv.add_argument("--full", action="store_true",
                      help="full-scale study (multi-hour) instead of desk scale")
    conv.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    conv.add_argument("--out", required=True)
    _add_tolerance_flags(conv)

    comp = sub.add_parser("compare", help="run both schemes against one reference")
    _add_problem_flags(comp)
    comp.add_argument("--nx", type=int_list, required=True)
    comp.add_argument("--nt", type=int_list)
    comp.add_argument("--nt-rule", choices=["half-square", "quarter-square"],
                      default="half-square")
    comp.add_argument("--ref-scheme", choices=["semi", "ie"], required=True)
    comp.add_argument("--ref-nx", type=positive_int, required=True)
    comp.add_argument("--ref-nt", type=positive_int, required=True)
    comp.add_argument("--out", required=True)
    _add_tolerance_flags(comp)

    val = sub.add_parser("validate", help="check model requirements of a problem")
    _add_problem_flags(val)

    return parser


def _build_spec(args) -> ProblemSpec:
    if args.problem:
        return make_preset(args.problem, args.gamma)
    if args.config:
        return load_problem_config(args.config, args.gamma)
    raise ValueError("either --problem or --config is required")


def _material_manifest(spec: ProblemSpec) -> dict:
    mat = spec.material
    return {
        "viscosity_voigt": np.asarray(mat.A).tolist(),
        "elasticity_voigt": np.asarray(mat.B).tolist(),
        "thermal_expansion": np.asarray(mat.M).tolist(),
        "conductivity": mat.sigma.name,
        "conductivity_bounds": (mat.sigma.sigma_min, mat.sigma.sigma_max),
        "rho": mat.rho, "c": mat.c, "k_thermal": mat.k, "theta_ref": mat.theta_ref,
        "t_final": spec.t_final,
        "quadrature": QUADRATURE,
    }


def cmd_run(args) -> int:
    spec = _build_spec(args)
    config = StepperConfig(scheme=args.scheme, picard_tol=args.picard_tol,
                           picard_max_iter=args.picard_max_iter,
                           solver_rel_tol=args.solver_tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tic = time.perf_counter()
    traj = run_simulation(spec, args.nx, args.nt, config, stride=args.stride)
    wall = time.perf_counter() - tic
    dump_trajectory(traj, out / "snapshots")
    manifest = {
        "command": "run", "problem": spec.name, "scheme": args.scheme,
        "nx": args.nx, "nt": args.nt, "k": traj.k, "stride": traj.stride,
        "picard_tol": args.picard_tol, "picard_max_iter": args.picard_max_iter,
        "solver_rel_tol": args.solver_tol,
        **_material_manifest(spec),
        "picard_sweeps_total": traj.picard_total,
        "wall_s": f"{wall:.3f}",
    }
    harness.write_manifest(out / "manifest.txt", manifest)
    print(f"wrote {len(traj.snapshots)} snapshots to {out / 'snapshots'} "
          f"(k = {traj.k:g}, wall {wall:.2f} s)")
    return 0


_STUDY_DEFAULTS = {
    # problem -> (nx list, nt rule, ref scheme, ref nx, ref nt)
    "p1": ([4, 8, 16], "half-square", "ie", 32, 512),
    "p2": ([4, 8, 16], "quarter-square", "semi", 32, 256),
}
_STUDY_FULL = {
    "p1": ([4, 8, 16, 32, 64], "half-square", "ie", 128, 8192),
    "p2": ([4, 8, 16, 32], "quarter-square", "semi", 64, 1024),
}
_GENERIC_STUDY = ([4, 8, 16], "half-square", "ie", 32, 512)


def _study_from_args(args) -> tuple[ProblemSpec, harness.StudyConfig]:
    spec = _build_spec(args)
    table = _STUDY_FULL if getattr(args, "full", False) else _STUDY_DEFAULTS
    nx_d, rule_d, rscheme_d, rnx_d, rnt_d = table.get(args.problem, _GENERIC_STUDY)
    nx_list = args.nx or nx_d
    if args.nt:
        if len(args.nt) != len(nx_list):
            raise ValueError("--nt list must match --nx list")
        nt_list = args.nt
    else:
        rule = getattr(args, "nt_rule", None) or rule_d
        nt_list = [harness.nt_rule(rule, nx) for nx in nx_list]
    study = harness.StudyConfig(
        nx_list=nx_list,
        nt_list=nt_list,
        scheme=getattr(args, "scheme", "semi"),
        ref_scheme=args.ref_scheme or rscheme_d,
        ref_nx=args.ref_nx or rnx_d,
        ref_nt=args.ref_nt or rnt_d,
        picard_tol=args.picard_tol,
        picard_max_iter=args.picard_max_iter,
        solver_rel_tol=args.solver_tol,
    )
    return spec, study


def _study_manifest(spec, study, command) -> dict:
    return {
        "command": command, "problem": spec.name,
        "nx_list": study.nx_list, "nt_list": study.nt_list,
        "ref_scheme": study.ref_scheme, "ref_nx": study.ref_nx, "ref_nt": study.ref_nt,
        "picard_tol": study.picard_tol, "picard_max_iter": study.picard_max_iter,
        "solver_rel_tol": study.solver_rel_tol,
        **_material_manifest(spec),
    }


def cmd_converge(args) -> int:
    spec, study = _study_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = harness.run_study(spec, study)
    rows = harness.errors_rows(result)
    harness.write_errors_csv(out / "errors.csv", rows)
    harness.write_orders_csv(out / "orders.csv", harness.orders_rows(rows))
    manifest = _study_manifest(spec, study, "converge")
    manifest["scheme"] = study.scheme
    manifest.update({f"wall_s[{k}]": f"{v:.3f}" for k, v in result.wall_seconds.items()})
    harness.write_manifest(out / "manifest.txt", manifest)
    if args.plot:
        series = {
            "theta L2": ([r["h"] for r in rows], [r["err_theta_l2"] for r in rows]),
            "phi L2": ([r["h"] for r in rows], [r["err_phi_l2"] for r in rows]),
            "u L2": ([r["h"] for r in rows], [r["err_u_l2"] for r in rows]),
            "dtu L2": ([r["h"] for r in rows], [r["err_dtu_l2"] for r in rows]),
        }
        write_svg_plot(series, out / "plots" / "convergence.svg",
                       title=f"{spec.name} ({study.scheme} vs {study.ref_scheme} "
                             f"nx={study.ref_nx})")
    print(harness.format_table(rows))
    return 0


def cmd_compare(args) -> int:
    spec, study_semi = _study_from_args(args)
    study_semi.scheme = "semi"
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reference = harness.run_reference(spec, study_semi)
    result_semi = harness.run_study(spec, study_semi, reference=reference)
    study_ie = harness.StudyConfig(
        nx_list=study_semi.nx_list, nt_list=study_semi.nt_list, scheme="ie",
        ref_scheme=study_semi.ref_scheme, ref_nx=study_semi.ref_nx,
        ref_nt=study_semi.ref_nt, picard_tol=study_semi.picard_tol,
        picard_max_iter=study_semi.picard_max_iter,
        solver_rel_tol=study_semi.solver_rel_tol,
    )
    result_ie = harness.run_study(spec, study_ie, reference=reference)
    rows = harness.comparison_rows(result_semi, result_ie)
    harness.write_compare_csv(out / "compare.csv", rows)
    manifest = _study_manifest(spec, study_semi, "compare")
    harness.write_manifest(out / "manifest.txt", manifest)
    for row in rows:
        print(f"nx={row['nx']}:")
        for f in harness.COMPARE_FIELDS:
            print(f"  {f:10s} semi {row[f'semi_{f}']:.6e}  "
                  f"ie {row[f'ie_{f}']:.6e}  ratio {row[f'ratio_{f}']:.3f}")
    return 0


def cmd_validate(args) -> int:
    spec = _build_spec(args)
    report = validate_assumptions(spec)
    print(report)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run, "converge": cmd_converge,
        "compare": cmd_compare, "validate": cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except (AssumptionError, SolverError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
