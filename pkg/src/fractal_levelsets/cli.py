"""Command-line interface: ``fll <subcommand> ...``.

Exit codes: 0 success, 1 input error, 2 acceptance-gate failure
(``experiment --check``).
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import experiments as ex
from .boxdim import spectrum, write_counts_csv, write_fits_csv
from .descriptors import build_function, build_sampler, load_descriptor, write_trace
from .holder import AuxiliaryFunction, ComposedFunction, holder_certify, phi_eval
from .ifs import GridSpec, attractor_levels, moran_dimension

# experiment flag -> config field
_OVERRIDES = {
    "system": "system_ref", "alpha": "alpha", "epsilon": "epsilon", "seed": "seed",
    "values": "num_level_values", "percentile": "percentile", "base": "base_override",
    "h_holder": "h_holder",
}


class InputError(Exception):
    pass


def _parse_real(text: str):
    """Exact rational when the literal allows it (``0.5``, ``1/6``), else float."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        try:
            return float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a real number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default=None, help="directory for reports and CSVs")

    ap = argparse.ArgumentParser(prog="fll", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("dim", parents=[common], help="similarity dimension of an IFS")
    p.add_argument("--ifs", required=True)

    p = sub.add_parser("phi", parents=[common], help="evaluate the auxiliary function")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--x", type=_parse_real, required=True)
    p.add_argument("--depth", type=int, default=20)

    p = sub.add_parser("certify", parents=[common], help="sampled Hölder certificate")
    p.add_argument("--fn", required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--pairs", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("levelsets", parents=[common], help="level-set dimension spectrum")
    p.add_argument("--fn", required=True)
    p.add_argument("--ifs", required=True)
    p.add_argument("--kmin", type=int, default=2)
    p.add_argument("--kmax", type=int, default=5)
    p.add_argument("--values", type=int, default=20)
    p.add_argument("--base", type=int, default=None)
    p.add_argument("--percentile", type=float, default=10.0)

    p = sub.add_parser("slices", parents=[common], help="slice dimension survey")
    p.add_argument("--ifs", required=True)
    p.add_argument("--directions", type=int, default=20)
    p.add_argument("--offsets", type=int, default=20)
    p.add_argument("--kmin", type=int, default=0)
    p.add_argument("--kmax", type=int, default=5)
    p.add_argument("--base", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("experiment", parents=[common], help="main level-set experiment")
    p.add_argument("--config", default=None)
    p.add_argument("--check", action="store_true")
    p.add_argument("--tol", type=float, default=0.15)
    p.add_argument("--system", default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--kmin", type=int, default=None)
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--values", type=int, default=None)
    p.add_argument("--percentile", type=float, default=None)
    p.add_argument("--base", type=int, default=None)
    p.add_argument("--h-holder", dest="h_holder", type=float, default=None)

    p = sub.add_parser("audit", parents=[common], help="upper-bound audit of a saved report")
    p.add_argument("--report", required=True)
    return ap


def _out_dir(args, default: str) -> Path:
    return Path(args.output_dir or default)


def _dump(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _cmd_dim(args) -> int:
    system = ex.resolve_system(args.ifs)
    s = moran_dimension(system)
    if args.output_dir:
        _dump(Path(args.output_dir) / "dim.json", {"ifs": args.ifs, "s": s})
    print(repr(s))
    return 0


def _cmd_phi(args) -> int:
    aux = AuxiliaryFunction(args.n, args.m)
    value, err = phi_eval(aux, args.x, args.depth)
    if args.output_dir:
        _dump(Path(args.output_dir) / "phi.json",
              {"n": args.n, "m": args.m, "x": str(args.x), "depth": args.depth,
               "value": value, "error_bound": err})
    print(repr(value) if err == 0 else f"{value!r} +/- {err:.3g}")
    return 0


def _cmd_certify(args) -> int:
    desc = load_descriptor(args.fn)
    fn = build_function(desc)
    sampler = build_sampler(desc, fn, lambda ref: ex.resolve_system(ref, Path(args.fn).parent))
    cert = holder_certify(fn, sampler, args.c, args.alpha, args.pairs, args.seed)
    out = _out_dir(args, "out/certify")
    _dump(out / "certificate.json", {
        "constant": cert.constant, "exponent": cert.exponent, "pairs": cert.sample_count,
        "seed": cert.seed, "max_ratio": cert.max_ratio, "passed": cert.passed,
        "worst_pair": [list(p) for p in cert.worst_pair]})
    rng = np.random.default_rng(args.seed)
    x, _ = sampler(rng, sampler.diameter, 1000)
    write_trace(out / "trace.csv", x, fn(x))
    print(f"max_ratio={cert.max_ratio!r} constant={cert.constant!r} "
          f"{'PASS' if cert.passed else 'FAIL'}")
    return 0


def _cmd_levelsets(args) -> int:
    desc = load_descriptor(args.fn)
    fn = build_function(desc)
    system = ex.resolve_system(args.ifs)
    if not hasattr(fn, "holder"):
        raise InputError("function has no Hölder data for the thickening rule")
    base = args.base or (fn.aux.nm if isinstance(fn, ComposedFunction) else 6)
    if args.kmax < args.kmin + 2:
        raise InputError("need kmax >= kmin + 2")
    levels = range(args.kmin, args.kmax + 1)
    spec = GridSpec.for_system(system, base)
    covers = attractor_levels(system, spec, levels)
    vals = np.asarray(fn(covers[args.kmax].centers()))
    rs = ex.central_values(float(vals.min()), float(vals.max()), args.values)
    est = spectrum(fn, system, spec, levels, rs, fn.holder, args.percentile,
                   args.kmin, args.kmax, covers=covers)
    out = _out_dir(args, "out/levelsets")
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "spectrum.json", est.to_dict())
    write_counts_csv(out / "counts.csv", est.counts)
    write_fits_csv(out / "fits.csv", est.level_values, est.fits)
    ex.write_loglog(out / "loglog.csv",
                    {"r=%.17g" % r: list(zip(f.levels, f.counts)) for r, f in zip(est.level_values, est.fits)})
    print(f"median={est.median!r} p{est.percentile:g}={est.essential_inf_estimate!r} "
          f"values={len(est.dims)} excluded={len(est.excluded)}")
    return 0


def _cmd_slices(args) -> int:
    system = ex.resolve_system(args.ifs)
    rep = ex.run_slice_survey(system, args.directions, args.offsets, (args.kmin, args.kmax),
                              args.seed, args.base)
    out = _out_dir(args, "out/slices")
    _dump(out / "report.json", rep.to_dict())
    print(f"global_median={rep.global_median!r} predicted={rep.predicted!r} skipped={len(rep.skipped)}")
    return 0


def _experiment_config(args) -> tuple[ex.ExperimentConfig, Path | None]:
    data, base_dir = {}, None
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {args.config}")
        data = ex.ExperimentConfig.load(path).to_dict()
        base_dir = path.parent
    for flag, name in _OVERRIDES.items():
        v = getattr(args, flag)
        if v is not None:
            data[name] = v
    if args.kmin is not None or args.kmax is not None:
        lv = list(data.get("levels", ex.ExperimentConfig().levels))
        if args.kmin is not None:
            lv[0] = args.kmin
        if args.kmax is not None:
            lv[1] = args.kmax
        data["levels"] = lv
    return ex.ExperimentConfig.from_dict(data), base_dir


def _cmd_experiment(args) -> int:
    config, base_dir = _experiment_config(args)
    rep = ex.run_main(config, base_dir)
    path = ex.write_report(rep, _out_dir(args, "out/experiment"))
    dev = abs(rep.median - rep.predicted)
    print(f"median={rep.median!r} predicted={rep.predicted!r} (n,m)=({rep.n},{rep.m}) "
          f"violations={len(rep.upper_bound_violations)} report={path}")
    if args.check and not dev <= args.tol:
        print(f"CHECK FAILED: |median - predicted| = {dev:.4g} > {args.tol}", file=sys.stderr)
        return 2
    return 0


def _cmd_audit(args) -> int:
    path = Path(args.report)
    if not path.exists():
        raise FileNotFoundError(f"report not found: {args.report}")
    data = json.loads(path.read_text())
    if data.get("kind") != "main":
        raise InputError("audit needs a main experiment report")
    audit = ex.run_upper_bound_audit(data)
    if args.output_dir:
        _dump(Path(args.output_dir) / "audit.json", audit.to_dict())
    print(f"s_fit={audit.s_fit!r} bound={audit.bound!r} violations={len(audit.violations)}")
    return 0


COMMANDS = {"dim": _cmd_dim, "phi": _cmd_phi, "certify": _cmd_certify, "levelsets": _cmd_levelsets,
            "slices": _cmd_slices, "experiment": _cmd_experiment, "audit": _cmd_audit}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return COMMANDS[args.cmd](args)
    except (ValueError, KeyError, TypeError, FileNotFoundError, InputError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
