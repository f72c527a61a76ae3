"""Command-line front end: remesh, synth, morph, encode, decode, metro, rd.

Machine-readable JSON lines go to standard output; human prose goes to
standard error.  Exit codes: 0 success, 2 parse/validation failure, 3 genus
mismatch, 4 pierce abort, 5 incompatible hierarchies.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import coding, hierarchy, metrics, report
from .errors import (
    BwrError,
    GenusMismatchError,
    IncompatibleHierarchyError,
    PierceMissError,
)
from .mesh import load_mesh, save_mesh
from .subdivision import DirectionConfig

EXIT_VALIDATION = 2
EXIT_GENUS = 3
EXIT_PIERCE = 4
EXIT_INCOMPATIBLE = 5


def _emit(obj):
    print(json.dumps(obj, sort_keys=True), flush=True)


def _prose(msg):
    print(msg, file=sys.stderr, flush=True)


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("BWR_THREADS", "1")))
    except ValueError:
        return 1


def _parse_bpv(text: str) -> float:
    value = float(text)
    if math.isnan(value) or value < 0:
        raise argparse.ArgumentTypeError(f"bpv must be >= 0 or inf, got {text}")
    return value


def _config_from_args(args) -> DirectionConfig:
    base = DirectionConfig()
    return DirectionConfig(
        eps_s=args.eps_s if args.eps_s is not None else base.eps_s,
        theta_crease_deg=(
            args.theta_crease if args.theta_crease is not None else base.theta_crease_deg
        ),
        theta_tilt_deg=(
            args.theta_tilt if args.theta_tilt is not None else base.theta_tilt_deg
        ),
        fold_floor_deg=(
            args.fold_floor if args.fold_floor is not None else base.fold_floor_deg
        ),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bwr",
        description="Backward wavelet remeshing: semi-regular multiresolution "
        "meshes, progressive coding, and surface-distance reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("remesh", help="remesh a reference surface over a base mesh")
    p.add_argument("--base", help="base mesh file (default: six axis-extrema vertices)")
    p.add_argument("--ref", required=True, help="reference mesh file")
    p.add_argument("--levels", type=int, required=True, help="subdivision levels J")
    p.add_argument("--out", required=True, help="output hierarchy file")
    p.add_argument("--snap", action="store_true", help="snap base vertices onto the reference")
    p.add_argument("--mode", choices=("accelerated", "full-search"), default="accelerated")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--eps-s", type=float, default=None, help="flat-stencil threshold")
    p.add_argument("--theta-crease", type=float, default=None, help="crease angle (deg)")
    p.add_argument("--theta-tilt", type=float, default=None, help="tilt angle (deg)")
    p.add_argument("--fold-floor", type=float, default=None, help="dihedral floor (deg)")

    p = sub.add_parser("synth", help="synthesize a mesh from a hierarchy")
    p.add_argument("--hier", required=True)
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--coef-from", help="take coefficients from another hierarchy")
    p.add_argument("--out", required=True)

    p = sub.add_parser("morph", help="blend topology-identical hierarchies")
    p.add_argument("--hiers", nargs="+", required=True)
    p.add_argument("--weights", nargs="+", type=float, required=True)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("encode", help="encode a hierarchy into a progressive bitstream")
    p.add_argument("--hier", required=True)
    p.add_argument("--delta", type=float, default=None, help="quantization step")
    p.add_argument("--out", required=True)

    p = sub.add_parser("decode", help="decode a bitstream at a bpv budget")
    p.add_argument("--stream", required=True)
    p.add_argument("--bpv", type=_parse_bpv, default=float("inf"))
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--ref", help="reference mesh for PSNR reporting")
    p.add_argument("--out", required=True)

    p = sub.add_parser("metro", help="surface distance between two meshes")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--seed", type=int, default=metrics.DEFAULT_SEED)
    p.add_argument("--pooling", choices=("symmetric", "max-directional"), default="symmetric")

    p = sub.add_parser("rd", help="rate-distortion table, CSV, and figure")
    p.add_argument("--stream", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--levels", nargs="+", type=int, required=True)
    p.add_argument("--grid", nargs="+", type=_parse_bpv, required=True, help="bpv grid")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-fig", default=None, help="PNG path (default: CSV path with .png)")
    return parser


# -- subcommand bodies ----------------------------------------------------------------


def cmd_remesh(args) -> int:
    reference = load_mesh(args.ref)
    if args.base:
        base = load_mesh(args.base)
        if args.snap:
            base = hierarchy.snap_base(base, reference)
    else:
        base = hierarchy.octahedron_base(reference)
    config = _config_from_args(args)
    threads = args.threads if args.threads is not None else _default_threads()
    hier = hierarchy.bwr_remesh(
        base, reference, args.levels, config=config, mode=args.mode, threads=threads
    )
    hierarchy.save_hierarchy(hier, args.out)
    for s in hier.stats:
        _emit(
            {
                "level": s.level,
                "new_vertices": s.new_vertices,
                "butterfly": s.butterfly,
                "fallback": s.fallback,
                "retried": s.retried,
                "seconds": round(s.seconds, 6),
            }
        )
    for w in hier.fold_warnings:
        _prose(f"warning: {w}")
    _prose(
        f"remeshed {args.ref} over {base.n_vertices}-vertex base at J={args.levels}; "
        f"wrote {args.out}"
    )
    return 0


def cmd_synth(args) -> int:
    hier = hierarchy.load_hierarchy(args.hier)
    override = None
    if args.coef_from:
        other = hierarchy.load_hierarchy(args.coef_from)
        if not np.array_equal(other.base.faces, hier.base.faces):
            raise IncompatibleHierarchyError(
                "coefficient donor differs in base connectivity"
            )
        override = other.coefficients
    level = hier.levels if args.level is None else args.level
    mesh = hierarchy.synthesize(hier, level, coefficient_override=override)
    save_mesh(mesh, args.out)
    _emit({"level": level, "vertices": mesh.n_vertices, "faces": mesh.n_faces})
    _prose(f"synthesized level {level} into {args.out}")
    return 0


def cmd_morph(args) -> int:
    if len(args.hiers) != len(args.weights):
        raise ValueError("need one weight per hierarchy")
    hiers = [hierarchy.load_hierarchy(h) for h in args.hiers]
    mesh = hierarchy.morph(hiers, args.weights, args.level)
    save_mesh(mesh, args.out)
    _emit(
        {
            "level": args.level,
            "weights": args.weights,
            "vertices": mesh.n_vertices,
            "faces": mesh.n_faces,
        }
    )
    _prose(f"morphed {len(hiers)} hierarchies into {args.out}")
    return 0


def cmd_encode(args) -> int:
    hier = hierarchy.load_hierarchy(args.hier)
    stream = coding.encode_hierarchy(hier, delta=args.delta)
    coding.save_bitstream(stream, args.out)
    _emit(
        {
            "levels": stream.levels,
            "payload_bits": stream.payload_bits,
            "planes": stream.nplanes,
            "delta": stream.delta,
            "image": [stream.height, stream.width],
        }
    )
    _prose(f"encoded {args.hier} into {args.out}")
    return 0


def cmd_decode(args) -> int:
    stream = coding.load_bitstream(args.stream)
    reference = load_mesh(args.ref) if args.ref else None
    mesh, achieved, rep = coding.reconstruct_at_bpv(
        stream, args.bpv, args.level, reference
    )
    save_mesh(mesh, args.out)
    line = {
        "level": args.level,
        "bpv_target": args.bpv,
        "bpv_achieved": achieved,
        "vertices": mesh.n_vertices,
    }
    if rep is not None:
        line["psnr_db"] = rep.psnr_db
        line["l2_error"] = rep.l2_error
    _emit(line)
    _prose(f"decoded {args.stream} at {args.bpv} bpv into {args.out}")
    return 0


def cmd_metro(args) -> int:
    a = load_mesh(args.a)
    b = load_mesh(args.b)
    rep = metrics.surface_distance(
        a, b, density=args.density, seed=args.seed, pooling=args.pooling
    )
    row = rep.row()
    row["psnr_db"] = rep.psnr_db
    _emit({k: (None if v is None else v) for k, v in row.items()})
    _prose(
        f"forward rms {rep.rms_fwd:.6g}, backward rms {rep.rms_bwd:.6g}, "
        f"hausdorff {rep.hausdorff:.6g}"
    )
    return 0


def cmd_rd(args) -> int:
    stream = coding.load_bitstream(args.stream)
    reference = load_mesh(args.ref)
    rows, path = metrics.rd_curve(stream, reference, args.levels, args.grid)
    with open(args.out_csv, "w") as fh:
        fh.write(metrics.format_csv(rows))
    fig_path = args.out_fig or os.path.splitext(args.out_csv)[0] + ".png"
    report.render_rd_figure(rows, fig_path)
    for r in rows:
        _emit(r)
    for p in path:
        _emit({"recommended": True, **p})
    _prose(f"wrote {args.out_csv} and {fig_path}")
    return 0


_COMMANDS = {
    "remesh": cmd_remesh,
    "synth": cmd_synth,
    "morph": cmd_morph,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "metro": cmd_metro,
    "rd": cmd_rd,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except GenusMismatchError as exc:
        _prose(f"error: {exc}")
        return EXIT_GENUS
    except PierceMissError as exc:
        _prose(f"error: {exc}")
        return EXIT_PIERCE
    except IncompatibleHierarchyError as exc:
        _prose(f"error: {exc}")
        return EXIT_INCOMPATIBLE
    except (BwrError, ValueError, OSError) as exc:
        _prose(f"error: {exc}")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
