"""Command-line interface.

Subcommands: prescribe-gaussian, prescribe-geodesic, prescribe-pair,
check-feasibility, make-example, uniformize, verify.  Every run writes
``report.json`` (and ``fields.csv`` with --dump-fields) into --out.
Exit codes: 0 pass, 1 input error, 2 verification failure.  The env var
CURVFORGE_LOG (off|info|debug) controls verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .elliptic import assemble
from .errors import CurvforgeError
from .fields import evaluate_expression, read_field_csv
from .mesh import conformal_rescale, load_mesh
from .monotone import IterationConfig
from .prescribe import (FLAT_GEODESIC, FLAT_UNIT, CONSTANT_K, ModelForm,
                        certify_model, check_necessary_negative_chi,
                        construct_example_pair, prescribe_gaussian,
                        prescribe_geodesic, prescribe_pair_chi0,
                        uniformize_chi0)
from .report import base_report, dump_report, field_summary, mesh_summary
from .verify import (VerificationReport, gauss_bonnet_residual,
                     maximum_principle_probe, GAUSS_BONNET_TOL)

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_INPUT_ERROR = 1
EXIT_VERIFICATION_FAILURE = 2

_MODEL_ALIASES = {
    "flat-geodesic": FLAT_GEODESIC, FLAT_GEODESIC: FLAT_GEODESIC,
    "flat-unit": FLAT_UNIT, FLAT_UNIT: FLAT_UNIT,
    "const-K": CONSTANT_K, "const-k": CONSTANT_K, CONSTANT_K: CONSTANT_K,
}


def _configure_logging():
    level_name = os.environ.get("CURVFORGE_LOG", "off").lower()
    level = {"off": logging.ERROR, "info": logging.INFO,
             "debug": logging.DEBUG}.get(level_name, logging.ERROR)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="curvforge %(levelname)s %(name)s: %(message)s")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="curvforge",
        description="Prescribe Gaussian/geodesic curvatures on triangulated "
                    "surfaces with boundary and verify the result.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True, solver=True):
        p.add_argument("--mesh", required=True, help="OFF or OBJ file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--dump-fields", action="store_true",
                       help="also write per-vertex fields.csv")
        p.add_argument("--export-matrices", action="store_true",
                       help="write assembled operators as MatrixMarket files")
        if model:
            p.add_argument("--model", default="auto",
                           help="auto (chi=0 uniformization) or one of "
                                "flat-geodesic, flat-unit, const-K")
        if solver:
            p.add_argument("--tol", type=float, default=1e-10)
            p.add_argument("--max-iters", type=int, default=2000)

    p = sub.add_parser("prescribe-gaussian",
                       help="realize a Gaussian curvature field")
    common(p)
    p.add_argument("--K", required=True, help="expression in x,y,z or CSV path")
    p.add_argument("--kappa", type=float, default=1.0)

    p = sub.add_parser("prescribe-geodesic",
                       help="realize a geodesic curvature field")
    common(p)
    p.add_argument("--sigma", required=True,
                   help="expression in x,y,z or CSV path")
    p.add_argument("--A", type=float, default=1.0)

    p = sub.add_parser("prescribe-pair",
                       help="realize K < 0 and sigma > 0 together (chi = 0)")
    common(p)
    p.add_argument("--K", required=True)
    p.add_argument("--sigma", required=True)
    p.add_argument("--kappa", type=float, default=1.0)

    p = sub.add_parser("check-feasibility",
                       help="necessary conditions for chi < 0 prescription")
    common(p, model=False, solver=False)
    p.add_argument("--K", required=True)
    p.add_argument("--sigma", default=None)

    p = sub.add_parser("make-example",
                       help="construct a sign-patterned realizable pair")
    common(p, solver=False)
    p.add_argument("--case", required=True, help="1..8 or chi0")

    p = sub.add_parser("uniformize",
                       help="compute the chi = 0 flat model factor")
    common(p, model=False, solver=False)

    p = sub.add_parser("verify",
                       help="Gauss-Bonnet and maximum-principle checks")
    common(p, solver=False)
    return parser


def _load_field(spec, mesh, name):
    if spec is None:
        return None
    if os.path.exists(spec) or spec.lower().endswith(".csv"):
        return read_field_csv(spec, mesh).values
    try:
        return evaluate_expression(spec, mesh).values
    except CurvforgeError:
        logger.error("could not parse --%s as an expression "
                     "(pass a CSV path for tabulated data)", name)
        raise


def _resolve_model(args, mesh, metric):
    """Returns (metric_for_model, model, u_model or None)."""
    spec = getattr(args, "model", "auto")
    if spec == "auto":
        if mesh.euler_characteristic() == 0:
            u_model, model, info = uniformize_chi0(mesh, metric)
            logger.info("uniformized chi=0 mesh: defect %.3e -> %.3e",
                        info["total_abs_defect_before"],
                        info["total_abs_defect_after"])
            return conformal_rescale(mesh, metric, u_model), model, u_model
        raise CurvforgeError(
            "model 'auto' only uniformizes chi = 0 meshes; declare --model "
            "flat-unit or const-K for chi != 0")
    kind = _MODEL_ALIASES.get(spec)
    if kind is None:
        raise CurvforgeError("unknown model %r" % spec)
    model = certify_model(mesh, metric, ModelForm.declare(kind, mesh))
    return metric, model, None


def _write_fields_csv(path, mesh, columns):
    names = sorted(columns)
    with open(path, "w") as fh:
        fh.write("vertex_index," + ",".join(names) + "\n")
        data = np.column_stack([columns[n] for n in names])
        for i in range(mesh.vertex_count):
            fh.write("%d,%s\n" % (i, ",".join(repr(float(v))
                                              for v in data[i])))
    return path


def _iteration_config(args):
    return IterationConfig(tol=args.tol, max_iters=args.max_iters)


def _emit(args, report, mesh, fields):
    os.makedirs(args.out, exist_ok=True)
    dump_report(report, os.path.join(args.out, "report.json"))
    if getattr(args, "dump_fields", False) and fields:
        _write_fields_csv(os.path.join(args.out, "fields.csv"), mesh, fields)


def _prescription_payload(report, result, model, u_model):
    report["model"] = {
        "kind": model.kind,
        "gaussian_constant": model.gaussian_constant,
        "geodesic_constant": model.geodesic_constant,
        "certified": model.certified,
        "certification": model.certification,
        "uniformized": u_model is not None,
    }
    report["metric_scale"] = result.metric_scale
    report["thresholds"] = result.thresholds
    report["solver"] = result.trace_summary
    report["fields"] = {
        "u": field_summary(result.u),
        "realized_K": field_summary(result.realized_gaussian),
        "realized_sigma": field_summary(result.realized_geodesic),
    }
    report["verification"] = result.report.to_dict()
    report["passed"] = result.report.passed


def run(args):
    mesh, metric = load_mesh(args.mesh)
    report = base_report(args.command, seed=getattr(args, "seed", None))
    report["mesh"] = mesh_summary(mesh, metric)
    report["mesh"]["path"] = args.mesh
    fields = {}

    if getattr(args, "export_matrices", False):
        paths = assemble(mesh, metric).export_matrixmarket(args.out)
        report["exported_matrices"] = paths

    if args.command == "verify":
        vrep = VerificationReport(
            gauss_bonnet_residual=gauss_bonnet_residual(mesh, metric))
        vrep.add("gauss_bonnet", vrep.gauss_bonnet_residual, GAUSS_BONNET_TOL)
        rng = np.random.default_rng(args.seed)
        u_rand = 0.2 * rng.standard_normal(mesh.vertex_count)
        vrep.add("gauss_bonnet_conformal",
                 gauss_bonnet_residual(mesh, conformal_rescale(mesh, metric,
                                                               u_rand)),
                 GAUSS_BONNET_TOL)
        ops = assemble(mesh, metric)
        probe = maximum_principle_probe(ops, trials=20, seed=args.seed)
        vrep.maxprin_applicable = probe.maxprin_applicable
        vrep.checks.extend(probe.checks)
        if args.model != "auto":
            _, model, _ = _resolve_model(args, mesh, metric)
            report["model"] = {"kind": model.kind,
                               "certified": model.certified,
                               "certification": model.certification}
        report["verification"] = vrep.to_dict()
        report["passed"] = vrep.passed
        _emit(args, report, mesh, fields)
        return EXIT_PASS if vrep.passed else EXIT_VERIFICATION_FAILURE

    if args.command == "uniformize":
        u_model, model, info = uniformize_chi0(mesh, metric)
        rescaled = conformal_rescale(mesh, metric, u_model)
        vrep = VerificationReport(
            gauss_bonnet_residual=gauss_bonnet_residual(mesh, rescaled))
        vrep.add("gauss_bonnet_rescaled", vrep.gauss_bonnet_residual,
                 GAUSS_BONNET_TOL)
        report["uniformization"] = info
        report["model"] = {"kind": model.kind, "certified": model.certified,
                           "certification": model.certification}
        report["fields"] = {"u_model": field_summary(u_model)}
        report["verification"] = vrep.to_dict()
        report["passed"] = vrep.passed
        fields["u_model"] = u_model
        _emit(args, report, mesh, fields)
        return EXIT_PASS if vrep.passed else EXIT_VERIFICATION_FAILURE

    if args.command == "check-feasibility":
        K = _load_field(args.K, mesh, "K")
        sigma = _load_field(args.sigma, mesh, "sigma")
        feas = check_necessary_negative_chi(mesh, metric, K, sigma)
        report["feasibility"] = feas.to_dict()
        report["passed"] = feas.verdict == "pass"
        fields["w"] = feas.w_field
        fields["K"] = K
        _emit(args, report, mesh, fields)
        return EXIT_PASS if feas.verdict == "pass" \
            else EXIT_VERIFICATION_FAILURE

    model_metric, model, u_model = _resolve_model(args, mesh, metric)

    if args.command == "make-example":
        pair = construct_example_pair(mesh, model_metric, model, args.case)
        result = pair.result
        report["case"] = pair.case
        report["constants"] = pair.constants
        _prescription_payload(report, result, model, u_model)
    elif args.command == "prescribe-gaussian":
        K = _load_field(args.K, mesh, "K")
        result = prescribe_gaussian(mesh, model_metric, model, K,
                                    kappa=args.kappa,
                                    config=_iteration_config(args))
        _prescription_payload(report, result, model, u_model)
    elif args.command == "prescribe-geodesic":
        sigma = _load_field(args.sigma, mesh, "sigma")
        result = prescribe_geodesic(mesh, model_metric, model, sigma,
                                    A=args.A, config=_iteration_config(args))
        _prescription_payload(report, result, model, u_model)
    elif args.command == "prescribe-pair":
        K = _load_field(args.K, mesh, "K")
        sigma = _load_field(args.sigma, mesh, "sigma")
        result = prescribe_pair_chi0(mesh, model_metric, model, K, sigma,
                                     kappa=args.kappa,
                                     config=_iteration_config(args))
        _prescription_payload(report, result, model, u_model)
    else:  # pragma: no cover
        raise CurvforgeError("unhandled command %r" % args.command)

    fields["u"] = result.u
    fields["realized_K"] = result.realized_gaussian
    fields["realized_sigma"] = result.realized_geodesic
    if u_model is not None:
        fields["u_model"] = u_model
    _emit(args, report, mesh, fields)
    return EXIT_PASS if report["passed"] else EXIT_VERIFICATION_FAILURE


def main(argv=None):
    _configure_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except CurvforgeError as exc:
        print("curvforge: error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT_ERROR
    except OSError as exc:
        print("curvforge: i/o error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
