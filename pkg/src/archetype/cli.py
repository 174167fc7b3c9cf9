"""Command line entry point: ``archetype {unmix,evaluate,synth,info}``.

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from archetype import __version__
from archetype.core import DataError, l2_normalize
from archetype.edaa import SolverConfig
from archetype.ensemble import DEFAULT_GAMMA_SET, EnsembleConfig, EnsembleError, run_ensemble
from archetype.fileio import (
    build_report,
    read_endmembers_csv,
    read_image,
    read_matrix,
    read_npy,
    write_npy,
    write_outputs,
)
from archetype.metrics import evaluate
from archetype.synth import SynthSpec, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

log = logging.getLogger("archetype")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="archetype", description="Blind hyperspectral unmixing by entropic descent archetypal analysis.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("unmix", help="estimate endmembers and abundances")
    p.add_argument("--input", required=True, help=".npy (L,N) or (H,W,L), or ENVI .hdr")
    p.add_argument("--endmembers", required=True, type=int, help="number of endmembers p")
    p.add_argument("--runs", type=int, default=50, help="ensemble size M (default 50)")
    p.add_argument("--outer", type=int, default=100, help="outer iterations T (default 100)")
    p.add_argument("--inner", type=int, default=5, help="inner iterations K1 = K2 (default 5)")
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--gamma-set", type=_float_list, default=list(DEFAULT_GAMMA_SET), help="comma-separated step factors")
    p.add_argument("--fit-slack", type=float, default=1.05, help="l1 fit threshold factor (default 1.05)")
    p.add_argument("--workers", type=int, default=None, help="worker threads (default: $ARCHETYPE_THREADS, 0 = all cores)")
    p.add_argument("--no-normalize", action="store_true", help="skip per-pixel l2 normalization")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--json", action="store_true", help="print the report as JSON")

    p = sub.add_parser("evaluate", help="score an unmix output against ground truth")
    p.add_argument("--est", required=True, help="directory written by unmix")
    p.add_argument("--gt-endmembers", required=True, help="L x p matrix (.npy or .csv)")
    p.add_argument("--gt-abundances", required=True, help="p x N matrix (.npy) or (H,W,p) cube")
    p.add_argument("--names", default=None, help="comma-separated endmember names")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("synth", help="generate a synthetic linear-mixing cube")
    p.add_argument("--bands", type=int, default=20)
    p.add_argument("--pixels", type=int, default=500)
    p.add_argument("--endmembers", type=int, default=3)
    p.add_argument("--snr", type=float, default=None, help="noise level in dB (noiseless if omitted)")
    p.add_argument("--alpha", type=float, default=1.0, help="Dirichlet concentration")
    p.add_argument("--pure-pixels", action="store_true", help="make the first p pixels pure")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)

    p = sub.add_parser("info", help="describe an input cube")
    p.add_argument("--input", required=True)
    p.add_argument("--json", action="store_true")
    return parser


def _cmd_unmix(args) -> int:
    image = read_image(args.input)
    x = l2_normalize(image) if not args.no_normalize else image
    if x.zero_pixels:
        log.warning("%d all-zero pixels left unnormalized", len(x.zero_pixels))
    config = EnsembleConfig(
        solver=SolverConfig(p=args.endmembers, T=args.outer, K1=args.inner, K2=args.inner),
        runs=args.runs,
        base_seed=args.seed,
        gamma_set=tuple(args.gamma_set),
        fit_slack=args.fit_slack,
    )
    result, selection = run_ensemble(x, config, workers=args.workers)
    report = build_report(args.input, x, config, selection, normalize=not args.no_normalize)
    write_outputs(args.output, result, report, spatial=image.spatial)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        chosen = selection.per_run[selection.selected]
        print(f"runs={config.runs} candidates={len(selection.candidate_set)} failures={len(selection.failures)}")
        print(
            f"selected run {chosen.index}: seed={chosen.seed} gamma={chosen.gamma:g} "
            f"fit_l1={chosen.fit_l1:.6g} coherence={chosen.coherence:.6g}"
        )
        print(f"outputs written to {args.output}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    est_dir = Path(args.est)
    est_e = read_endmembers_csv(est_dir / "endmembers.csv")
    est_a = read_npy(est_dir / "abundances.npy")
    gt_e = read_matrix(args.gt_endmembers)
    gt_a = read_matrix(args.gt_abundances)
    if gt_a.ndim == 3:
        gt_a = gt_a.reshape(-1, gt_a.shape[2]).T
    names = args.names.split(",") if args.names else None
    res = evaluate(gt_e, gt_a, est_e, est_a, names=names)
    if args.json:
        print(json.dumps(res.to_dict(), indent=2))
    else:
        print(res.format_table())
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        bands=args.bands,
        pixels=args.pixels,
        endmembers=args.endmembers,
        snr_db=args.snr,
        dirichlet_alpha=args.alpha,
        pure_pixels=args.pure_pixels,
        seed=args.seed,
    )
    image, E, A = generate(spec)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_npy(out / "cube.npy", image.data)
    write_npy(out / "gt_endmembers.npy", E)
    write_npy(out / "gt_abundances.npy", A)
    print(f"wrote cube.npy ({spec.bands}x{spec.pixels}), gt_endmembers.npy, gt_abundances.npy to {out}")
    return EXIT_OK


def _cmd_info(args) -> int:
    image = read_image(args.input)
    norms = np.linalg.norm(image.data, axis=0)
    info = {
        "path": str(args.input),
        "bands": image.bands,
        "pixels": image.pixels,
        "height": image.spatial[0] if image.spatial else None,
        "width": image.spatial[1] if image.spatial else None,
        "wavelength_min": min(image.wavelengths) if image.wavelengths else None,
        "wavelength_max": max(image.wavelengths) if image.wavelengths else None,
        "min": float(image.data.min()),
        "max": float(image.data.max()),
        "zero_pixels": int(np.count_nonzero(norms == 0)),
    }
    if args.json:
        print(json.dumps(info, indent=2))
    else:
        print(" ".join(f"{k}={v}" for k, v in info.items() if v is not None and k != "path"))
    return EXIT_OK


_COMMANDS = {"unmix": _cmd_unmix, "evaluate": _cmd_evaluate, "synth": _cmd_synth, "info": _cmd_info}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (DataError, EnsembleError, OSError, ValueError) as exc:
        print(f"archetype {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
