"""Command-line entry point: ``plateau <subcommand> ...``.

Exit codes: 0 when every verdict passes, 1 when a verdict fails or a
computation cannot complete, 2 on malformed or structurally invalid input.
PLATEAU_THREADS caps the BLAS/OpenMP worker count; it is applied before
numpy is first imported.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


def _apply_thread_cap() -> None:
    n = os.environ.get("PLATEAU_THREADS")
    if n and n.strip().isdigit() and int(n) > 0:
        for var in _THREAD_VARS:
            os.environ[var] = n.strip()


# ------------------------------------------------------------------ parsing
def _vec3(text: str):
    try:
        parts = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    return parts


def _floats(text: str):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_range(text: str):
    """'1..8' or '1,2,4' -> list of ints."""
    try:
        if ".." in text:
            a, b = text.split("..")
            out = list(range(int(a), int(b) + 1))
        else:
            out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b or a,b,c, got {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("n values must be positive integers")
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable report on stdout")
    common.add_argument("--timings", action="store_true", help="include wall-clock timings in the JSON report")
    tol = common.add_argument_group("tolerance overrides")
    tol.add_argument("--tol-geom", type=float, help="geometric tolerance (default 1e-8 x bounding-box diameter)")
    tol.add_argument("--tol-compat", type=float, help="compatibility tolerance (default 1e-9)")
    tol.add_argument("--tol-stat", type=float, help="first-variation tolerance (default 1e-6 x area)")
    tol.add_argument("--tol-eig", type=float, help="eigenvalue tolerance (default 1e-8 x |Q|)")
    tol.add_argument("--tol-angle", type=float, help="angle tolerance in radians (default 1e-6, relaxed 1e-2)")
    tol.add_argument("--tol-flat", type=float, help="flatness tolerance (default 1e-6)")
    tol.add_argument("--tol-slope", type=float, help="log-log slope tolerance (default 1e-12 analytic, 5e-2 mesh)")

    p = _Parser(prog="plateau", description="Minimal Plateau surfaces: validation, variations, stability and classification.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", parents=[common], help="structural report of a mesh file")
    s.add_argument("mesh")

    s = sub.add_parser("measure", parents=[common], help="areas in balls, growth constant, curvature")
    s.add_argument("mesh")
    s.add_argument("--center", type=_vec3, default=[0.0, 0.0, 0.0])
    s.add_argument("--radii", type=_floats, default=[1.0])

    s = sub.add_parser("field", parents=[common], help="compatibility check, lift and restriction of fields")
    s.add_argument("op", choices=["check", "lift", "restrict"])
    s.add_argument("mesh")
    s.add_argument("field")
    s.add_argument("--out", help="write the resulting field here")
    s.add_argument("--relative", action="store_true", help="scale tol_compat by max|f|")

    s = sub.add_parser("spectrum", parents=[common], help="smallest eigenvalues of the constrained second variation")
    s.add_argument("mesh")
    s.add_argument("-k", type=int, default=6)

    s = sub.add_parser("bernstein", parents=[common], help="logarithmic cutoff test")
    s.add_argument("mesh")
    s.add_argument("--center", type=_vec3, default=[0.0, 0.0, 0.0])
    s.add_argument("--n", type=_int_range, default=list(range(1, 9)))
    s.add_argument("--analytic-cone", action="store_true")

    s = sub.add_parser("relax", parents=[common], help="area-gradient descent toward a minimal complex")
    s.add_argument("mesh")
    s.add_argument("--steps", type=int, default=500)
    s.add_argument("--dt", type=float, default=None, help="step size (default 0.1 x mean edge^2)")
    s.add_argument("--slide-axis", choices=["x", "y", "z"], help="let boundary vertices on the extreme planes normal to this axis slide")
    s.add_argument("--keep-radius", type=float, help="with --slide-axis: vertices this far from the axis stay pinned")
    s.add_argument("--out", help="write the relaxed mesh here")

    s = sub.add_parser("classify", parents=[common], help="flat classification")
    s.add_argument("mesh")
    s.add_argument("--relaxed", action="store_true", help="use relaxed angle tolerance (1e-2 rad)")
    s.add_argument("--emit-network", metavar="OUT", help="write the planar network of a NetworkTimesR input")

    s = sub.add_parser("multi", parents=[common], help="weighted multiple-junction surfaces")
    s.add_argument("op", choices=["check", "spectrum", "bernstein"])
    s.add_argument("file")
    s.add_argument("-k", type=int, default=6)
    s.add_argument("--center", type=_vec3, default=[0.0, 0.0, 0.0])
    s.add_argument("--n", type=_int_range, default=list(range(1, 9)))
    s.add_argument("--analytic-cone", action="store_true")
    s.add_argument("--alpha", type=float, help="angle from nu^1 to W_1 in degrees (default: first non-degenerate grid angle)")

    s = sub.add_parser("golden", parents=[common], help="write reference meshes")
    s.add_argument("name", nargs="?", help="corpus id (omit with --all)")
    s.add_argument("--all", action="store_true")
    s.add_argument("--resolution", type=float, default=0.1)
    s.add_argument("--out", help="output file (single name) or directory (--all)")
    return p


# ----------------------------------------------------------------- commands
def _tol(rep, args, name, default, module):
    val = getattr(args, name.replace("-", "_"))
    return rep.tolerance(name, default if val is None else val, module, val is not None)


def cmd_validate(args, rep):
    from .complex import assign_signs, structural_report
    from .fileio import load_complex

    rep.add_input(args.mesh)
    c = load_complex(args.mesh, tol_geom=args.tol_geom)
    rep.tolerance("tol_geom", c.tol_geom, "complex", args.tol_geom is not None)
    s = assign_signs(c)
    sr = structural_report(c, s)
    rep.details["structure"] = sr
    for k in ("vertices", "triangles", "patches", "junction_curves", "t_points", "boundary_loops"):
        rep.add(k, sr[k], "complex")
    rep.add("local_models", sr["local_models"], "complex")
    # an unrelaxed seed is structurally valid even though its sheets are not balanced
    rep.add("sign_normal_residual", s.max_residual, "complex", c.tol_geom)
    rep.check("structure_valid", True, "complex", None, True)


def cmd_measure(args, rep):
    from .fileio import load_complex
    from .geometry import measure
    from .variation import stationarity

    rep.add_input(args.mesh)
    c = load_complex(args.mesh, tol_geom=args.tol_geom)
    rep.tolerance("tol_geom", c.tol_geom, "complex", args.tol_geom is not None)
    m = measure(c, args.center, args.radii)
    st = stationarity(c, args.tol_stat)
    rep.tolerance("tol_stat", st.tol, "variation", args.tol_stat is not None)
    for r, a in zip(m["radii"], m["areas"]):
        rep.add(f"area_B{r:g}", a, "geometry")
    rep.add("C_fit", m["C_fit"], "geometry")
    rep.add("total_area", m["total_area"], "geometry")
    rep.add("max_abs_H", m["max_abs_H"], "geometry")
    rep.add("max_A2", m["max_A2"], "geometry")
    rep.add("max_conormal_sum", m["stationarity_residual"], "geometry")
    rep.add("first_variation_residual", st.residual, "variation", st.tol)
    rep.details["measure"] = m


def cmd_field(args, rep):
    from .fileio import load_complex, load_field_payload, save_json
    from .funcspace import (
        TOL_COMPAT,
        ScalarField,
        VectorField,
        check_compatible,
        field_from_payload,
        field_to_payload,
        lift_to_vector_field,
        restrict_normal_component,
    )
    from .errors import ParseError

    rep.add_input(args.mesh)
    rep.add_input(args.field)
    c = load_complex(args.mesh, tol_geom=args.tol_geom)
    f = field_from_payload(c, load_field_payload(args.field))
    tol = _tol(rep, args, "tol_compat", TOL_COMPAT, "funcspace")
    if args.op == "check":
        if not isinstance(f, ScalarField):
            raise ParseError("field check expects a scalar field ('values')")
        cr = check_compatible(f, tol=tol, relative=args.relative)
        rep.check("junction_residual", cr.junction_residual, "funcspace", cr.tol, cr.junction_residual <= cr.tol)
        rep.check("t_point_residual", cr.t_residual, "funcspace", cr.tol, cr.t_residual <= cr.tol)
        rep.add("boundary_residual", cr.boundary_residual, "funcspace")
        rep.check("compatible", cr.compatible, "funcspace", cr.tol, cr.compatible)
        return
    if args.op == "lift":
        if not isinstance(f, ScalarField):
            raise ParseError("field lift expects a scalar field ('values')")
        V = lift_to_vector_field(f, tol=tol)
        back = restrict_normal_component(V)
        err = float(abs(back.values - f.values).max(initial=0.0))
        rep.check("roundtrip_error", err, "funcspace", 1e-10, err <= 1e-10)
        out = field_to_payload(V)
    else:
        if not isinstance(f, VectorField):
            raise ParseError("field restrict expects a vector field ('vectors')")
        g = restrict_normal_component(f)
        cr = check_compatible(g, tol=tol, relative=True)
        rep.check("restricted_compatible", cr.compatible, "funcspace", cr.tol, cr.compatible)
        out = field_to_payload(g)
    if args.out:
        save_json(out, args.out)
        rep.details["written"] = args.out
    else:
        rep.details["field"] = out


def cmd_spectrum(args, rep):
    from .fileio import load_complex
    from .variation import TOL_EIG_REL, assemble_second_variation, stability_spectrum

    rep.add_input(args.mesh)
    c = load_complex(args.mesh, tol_geom=args.tol_geom)
    form = assemble_second_variation(c)
    tol = args.tol_eig if args.tol_eig is not None else TOL_EIG_REL * form.spectral_norm
    rep.tolerance("tol_eig", tol, "variation", args.tol_eig is not None)
    sp = stability_spectrum(form, k=args.k, tol_eig=tol)
    rep.add("constrained_dimension", sp.dimension, "variation")
    rep.add("method", sp.method, "variation")
    rep.add("Q_norm", form.spectral_norm, "variation")
    for i, w in enumerate(sp.eigenvalues, 1):
        rep.add(f"lambda_{i}", float(w), "variation")
    rep.check("stable", float(sp.eigenvalues[0]), "variation", tol, sp.stable)


def cmd_bernstein(args, rep):
    from .cutoff import bernstein_test
    from .fileio import load_complex

    rep.add_input(args.mesh)
    c = load_complex(args.mesh, tol_geom=args.tol_geom)
    if not args.analytic_cone:
        from .variation import TOL_STAT_REL

        _tol(rep, args, "tol_stat", TOL_STAT_REL * float(c.tri_areas.sum()), "variation")
    br = bernstein_test(c, p0=args.center, n_list=args.n, analytic_cone=args.analytic_cone, tol_stat=args.tol_stat)
    tol = _tol(rep, args, "tol_slope", 1e-12 if args.analytic_cone else 5e-2, "cutoff")
    for n, lhs, rhs, rn in zip(br.n, br.lhs, br.rhs, br.rhs_times_n):
        rep.add(f"n={n}", {"lhs": lhs, "rhs": rhs, "rhs_times_n": rn}, "cutoff")
    if br.link_length is not None:
        rep.add("link_length", br.link_length, "cutoff")
    rep.add("regions", br.regions, "regions")
    rep.check("loglog_slope", br.slope, "cutoff", tol, abs(br.slope + 1.0) <= tol)
    rep.details["bernstein"] = br.as_dict()


def cmd_relax(args, rep):
    import numpy as np

    from .corpus import slab_sliding
    from .fileio import load_complex, save_complex
    from .relax import relax_to_minimal

    rep.add_input(args.mesh)
    c = load_complex(args.mesh, tol_geom=args.tol_geom)
    sliding = None
    if args.slide_axis:
        sliding = slab_sliding(c, "xyz".index(args.slide_axis), args.keep_radius)
    res = relax_to_minimal(c, steps=args.steps, step_size=args.dt, sliding=sliding)
    from .variation import stationarity

    before = stationarity(c, args.tol_stat)
    after = stationarity(res.complex, args.tol_stat)
    rep.tolerance("tol_stat", after.tol, "variation", args.tol_stat is not None)
    rep.add("steps", res.steps, "relax")
    rep.add("area_initial", res.area_history[0], "relax")
    rep.add("area_final", res.area_history[-1], "relax")
    for k in ("max_abs_H", "max_conormal_sum", "max_junction_angle_error_deg"):
        rep.add(f"{k}_initial", res.initial[k], "relax")
        rep.add(f"{k}_final", res.final[k], "relax")
    rep.add("first_variation_initial", before.residual, "variation")
    rep.check("first_variation_final", after.residual, "variation", before.residual, after.residual <= before.residual)
    rep.add("stationary", after.stationary, "variation", after.tol)
    if args.out:
        save_complex(res.complex, args.out)
        rep.details["written"] = args.out
    rep.details["area_history_tail"] = [float(a) for a in np.asarray(res.area_history)[-5:]]


def cmd_classify(args, rep):
    from .classify import TOL_ANGLE_EXACT, TOL_ANGLE_RELAXED, TOL_FLAT, classify_flat
    from .fileio import load_complex, save_json

    rep.add_input(args.mesh)
    c = load_complex(args.mesh, tol_geom=args.tol_geom)
    ta = _tol(rep, args, "tol_angle", TOL_ANGLE_RELAXED if args.relaxed else TOL_ANGLE_EXACT, "classify")
    tf = _tol(rep, args, "tol_flat", TOL_FLAT, "classify")
    res = classify_flat(c, tol_angle=ta, tol_flat=tf)
    rep.add("tag", res.tag, "classify")
    if res.flatness is not None:
        fl = res.flatness
        rep.check("flat", max(fl.max_A2, fl.max_turning, fl.max_plane_offset), "classify", tf, fl.flat)
    rep.details["classification"] = res.as_dict()
    if args.emit_network:
        if res.tag != "NetworkTimesR":
            rep.check("network_emitted", False, "classify", None, False)
        else:
            save_json(res.payload["network"], args.emit_network)
            rep.details["written"] = args.emit_network


def cmd_multi(args, rep):
    import math

    from .fileio import load_multi
    from .multijunction import (
        appendix_bernstein_test,
        check_equilibrium_angles,
        weighted_stability_form,
        weighted_stationarity,
    )
    from .variation import TOL_EIG_REL, stability_spectrum

    rep.add_input(args.file)
    m = load_multi(args.file)
    rep.add("sheets", m.q, "multijunction")
    rep.add("theta", m.theta.tolist(), "multijunction")
    if args.op == "check":
        st = weighted_stationarity(m, args.tol_stat)
        rep.tolerance("tol_stat", st["tol"], "multijunction", args.tol_stat is not None)
        rep.check("first_variation_residual", st["residual"], "multijunction", st["tol"], st["stationary"])
        rep.add("max_weighted_conormal_sum", st["max_weighted_conormal_sum"], "multijunction")
        rep.add("max_abs_H", st["max_abs_H"], "multijunction")
        ta = _tol(rep, args, "tol_angle", 1e-6, "multijunction")
        eq = check_equilibrium_angles(m, ta)
        rep.check("equilibrium_angles", math.degrees(eq.max_deviation), "multijunction", math.degrees(ta), eq.equilibrium)
        rep.details["equilibrium"] = eq.as_dict()
    elif args.op == "spectrum":
        form = weighted_stability_form(m)
        tol = args.tol_eig if args.tol_eig is not None else TOL_EIG_REL * form.spectral_norm
        rep.tolerance("tol_eig", tol, "variation", args.tol_eig is not None)
        sp = stability_spectrum(form, k=args.k, tol_eig=tol)
        rep.add("constrained_dimension", sp.dimension, "multijunction")
        for i, w in enumerate(sp.eigenvalues, 1):
            rep.add(f"lambda_{i}", float(w), "multijunction")
        rep.check("stable", float(sp.eigenvalues[0]), "multijunction", tol, sp.stable)
    else:
        tol = _tol(rep, args, "tol_slope", 1e-12 if args.analytic_cone else 5e-2, "multijunction")
        br = appendix_bernstein_test(m, args.center, args.n, analytic=args.analytic_cone, alpha_deg=args.alpha, tol_stat=args.tol_stat)
        for n, lhs, rhs, rn in zip(br.n, br.lhs, br.rhs, br.rhs_times_n):
            rep.add(f"n={n}", {"lhs": lhs, "rhs": rhs, "rhs_times_n": rn}, "multijunction")
        rep.add("alpha_deg", br.alpha_deg, "multijunction")
        rep.check("loglog_slope", br.slope, "multijunction", tol, abs(br.slope + 1.0) <= tol)
        rep.details["bernstein"] = br.as_dict()


def cmd_golden(args, rep):
    from pathlib import Path

    from .corpus import GOLDEN_NAMES, generate_golden
    from .errors import ParseError

    if args.all:
        names = list(GOLDEN_NAMES)
        outdir = Path(args.out or "golden")
        targets = [(n, outdir / f"{n}.json") for n in names]
    else:
        if not args.name:
            raise ParseError("give a corpus id or --all")
        targets = [(args.name, args.out)]
    for name, path in targets:
        out = generate_golden(name, args.resolution, path)
        rep.add(f"wrote {name}", str(out), "corpus")


COMMANDS = {
    "validate": cmd_validate,
    "measure": cmd_measure,
    "field": cmd_field,
    "spectrum": cmd_spectrum,
    "bernstein": cmd_bernstein,
    "relax": cmd_relax,
    "classify": cmd_classify,
    "multi": cmd_multi,
    "golden": cmd_golden,
}


def run(argv=None):
    """Parse, execute and return ``(exit_code, report)``."""
    _apply_thread_cap()
    from .errors import PlateauError, StructuralError, UnknownCorpusError
    from .report import RunReport

    args = build_parser().parse_args(argv)
    label = args.command + (f" {args.op}" if getattr(args, "op", None) else "")
    rep = RunReport(label)
    try:
        COMMANDS[args.command](args, rep)
        code = EXIT_OK if rep.all_pass else EXIT_FAIL
    except (StructuralError, UnknownCorpusError) as exc:
        rep.error, rep.error_kind = str(exc), type(exc).__name__
        code = EXIT_INPUT
    except PlateauError as exc:
        rep.error, rep.error_kind = str(exc), type(exc).__name__
        code = EXIT_FAIL
    except (OSError, ValueError, KeyError, IndexError, TypeError) as exc:
        rep.error, rep.error_kind = str(exc), type(exc).__name__
        code = EXIT_INPUT
    rep.stop_clock()
    return code, rep, args


def main(argv=None) -> int:
    try:
        code, rep, args = run(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT
    out = rep.to_json(timings=args.timings) if args.json else rep.to_text()
    print(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
