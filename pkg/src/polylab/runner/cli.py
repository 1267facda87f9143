"""Command-line entry point ``polylab``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from ..environment import DistributionError, WeightDistribution, generate, read_csv, write_csv
from ..errors import EstimationError
from ..estimators.exponents import ExponentEstimate, check_relation
from ..lattice import Box
from ..lpp import first_passage, geodesic, last_passage, write_geodesic_csv
from ..polymer import PolymerParams, free_energy, log_partition, write_field_csv
from ..sampler import sample_paths, write_samples_csv
from .config import ConfigError, load_config
from .experiment import EXIT_CONFIG, run_experiment
from .report import MissingArtifactError, emit_report


def parse_dist(text: str) -> WeightDistribution:
    """``kind:name=value,...``, e.g. ``exponential:rate=1`` or ``bernoulli:p=0.5,a=0,b=1``."""
    kind, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        params[key.strip()] = float(val)
    return WeightDistribution.from_dict({"kind": kind.strip(), **params})


def dist_dict(text: str) -> dict:
    return parse_dist(text).to_dict()


def parse_number(text: str):
    """Exact Fraction for ``a/b`` or integers, float otherwise."""
    if "/" in text:
        return Fraction(text)
    try:
        return int(text)
    except ValueError:
        return float(text)


def _env_from_args(args):
    if args.env:
        return read_csv(args.env)
    if not (args.dist and args.corner):
        raise ConfigError(["need --env or both --dist and --corner"])
    return generate(parse_dist(args.dist), Box(tuple(args.corner)), args.seed,
                    tuple(args.origin) if args.origin else None)


def _add_env_args(p):
    p.add_argument("--env", help="environment CSV snapshot")
    p.add_argument("--dist", help="distribution, e.g. exponential:rate=1")
    p.add_argument("--corner", type=int, nargs="+", help="box corner (box is 0..corner)")
    p.add_argument("--origin", type=int, nargs="+")
    p.add_argument("--seed", type=int, default=0)


def cmd_generate(args):
    env = _env_from_args(args)
    write_csv(env, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_free_energy(args):
    env = _env_from_args(args)
    field = log_partition(env, PolymerParams(args.beta), args.source)
    target = tuple(args.target) if args.target else env.upper
    print("%.17g" % free_energy(field, target))
    if args.out:
        write_field_csv(field, args.out)
    return 0


def cmd_sample_paths(args):
    env = _env_from_args(args)
    field = log_partition(env, PolymerParams(args.beta), target=args.endpoint)
    samples = sample_paths(field, env, tuple(args.endpoint), args.count, args.sample_seed)
    write_samples_csv(samples, args.out)
    print(f"wrote {args.count} paths to {args.out}")
    return 0


def cmd_lpp(args):
    env = _env_from_args(args)
    target = tuple(args.target) if args.target else env.upper
    field = (first_passage if args.first_passage else last_passage)(env, None, target)
    print("%.17g" % field.at(target))
    if args.out:
        write_geodesic_csv(geodesic(field, env, target), args.out)
    return 0


def _overrides(args) -> dict:
    out = {}
    mapping = {"model": "model", "dim": "dimension", "beta": "beta", "sizes": "sizes",
               "replicates": "replicates", "seed": "master_seed", "out": "output_dir",
               "workers": "workers", "max_cells": "max_cells"}
    for attr, key in mapping.items():
        val = getattr(args, attr, None)
        if val is not None:
            out[key] = val
    if getattr(args, "dist", None):
        out["distribution"] = dist_dict(args.dist)
    return out


def _finish_run(result, args) -> int:
    print(f"wrote {len(result.manifest['files'])} files to {result.output_dir}")
    if getattr(args, "report", True):
        print(f"report: {emit_report(result.output_dir, svg=getattr(args, 'svg', False))}")
    return result.exit_code


def cmd_run(args):
    cfg = load_config(args.config, _overrides(args))
    return _finish_run(run_experiment(cfg), args)


def cmd_estimate(args):
    base = json.loads(Path(args.config).read_text()) if args.config else {}
    opts = dict(base.get("estimators", {}).get(args.which, {}))
    if args.which == "xi" and args.q is not None:
        opts["q"] = args.q
    if args.window is not None and args.which in ("chi", "xi"):
        opts["window"] = args.window
    if args.n is not None and args.which in ("shape", "kappa"):
        opts["n"] = args.n
    base["estimators"] = {args.which: opts}
    cfg = load_config(base, _overrides(args))
    result = run_experiment(cfg)
    with (result.output_dir / "summary.csv").open() as fh:
        sys.stdout.write(fh.read())
    return _finish_run(result, args)


def _estimate_arg(value, ci):
    if ci is None:
        return value
    lo, hi = ci
    return ExponentEstimate("given", float(value), (lo, hi), None, "given")


def cmd_check_relation(args):
    chi = _estimate_arg(parse_number(args.chi), args.chi_ci)
    xi = _estimate_arg(parse_number(args.xi), args.xi_ci)
    kappa = _estimate_arg(parse_number(args.kappa), args.kappa_ci)
    rep = check_relation(chi, xi, kappa, seed=args.seed)
    print(f"residual {rep.residual}")
    print(rep.line())
    return 0


def cmd_report(args):
    print(emit_report(args.run_dir, svg=args.svg))
    return 0


def _add_experiment_flags(p):
    p.add_argument("--model", choices=["polymer", "lpp"])
    p.add_argument("--dist", help="distribution, e.g. exponential:rate=1")
    p.add_argument("--dim", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--sizes", type=int, nargs="+")
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)
    p.add_argument("--max-cells", type=int, dest="max_cells")
    p.add_argument("--svg", action="store_true", help="also render SVG figures")
    p.add_argument("--no-report", dest="report", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polylab", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw an environment and write its CSV snapshot")
    _add_env_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("free-energy", help="F(source, target) via the log-domain sweep")
    _add_env_args(p)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--source", type=int, nargs="+")
    p.add_argument("--target", type=int, nargs="+")
    p.add_argument("--out", help="write the log Z field CSV")
    p.set_defaults(func=cmd_free_energy)

    p = sub.add_parser("sample-paths", help="exact samples from the polymer measure")
    _add_env_args(p)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--endpoint", type=int, nargs="+", required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--sample-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample_paths)

    p = sub.add_parser("lpp", help="last- (or first-) passage value and geodesic")
    _add_env_args(p)
    p.add_argument("--target", type=int, nargs="+")
    p.add_argument("--first-passage", action="store_true")
    p.add_argument("--out", help="write the geodesic CSV")
    p.set_defaults(func=cmd_lpp)

    p = sub.add_parser("estimate", help="run a single estimator")
    p.add_argument("which", choices=["chi", "xi", "kappa", "shape"])
    p.add_argument("--config", help="base config; flags override it")
    p.add_argument("--q", type=float)
    p.add_argument("--window", type=int, nargs=2)
    p.add_argument("--n", type=int, help="size used by shape/kappa")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("check-relation", help="compare chi with kappa*xi - (kappa - 1)")
    p.add_argument("chi")
    p.add_argument("xi")
    p.add_argument("kappa")
    for name in ("chi", "xi", "kappa"):
        p.add_argument(f"--{name}-ci", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check_relation)

    p = sub.add_parser("run", help="run a full experiment config")
    p.add_argument("config")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="write report.md and plot data for a run directory")
    p.add_argument("run_dir")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except DistributionError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EstimationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
