"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
A ``--config`` file holds one ``key = value`` per line with the same names
as the long flags (dashes or underscores); flags given on the command line
win, and ``STOCHGEO_SEED`` is consulted last for the seed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .caps import cap_volume, economic_cover, wet_part
from .errors import NumericError
from .experiments import (
    angle_measure_experiment,
    efron_stein_experiment,
    expectation_experiment,
    floating_containment_experiment,
    hatvs_variance_experiment,
    strong_law_trajectory,
    variance_experiment,
)
from .hull import convex_hull, polytope_from_dict, polytope_volume, surface_area
from .intrinsic import exact_intrinsic, kubota_intrinsic, steiner_fit_oracle
from .sampling import BodySpec, RngStream, uniform_body
from .tables import ExperimentConfig, format_value

log = logging.getLogger("stochgeo")

SEED_ENV = "STOCHGEO_SEED"


class UsageError(Exception):
    """Bad flag, config key or input file (exit code 2)."""


# ----------------------------------------------------------- value parsing

def parse_int_grid(text: str) -> tuple:
    """'128..8192x2' (geometric, ratio 2) or a comma list '100,200,400'."""
    text = text.strip()
    if ".." in text:
        lo, rest = text.split("..", 1)
        hi, _, ratio = rest.partition("x")
        lo, hi = int(lo), int(hi)
        ratio = int(ratio) if ratio else 2
        if lo < 1 or hi < lo or ratio < 2:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        out, n = [], lo
        while n <= hi:
            out.append(n)
            n *= ratio
        return tuple(out)
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def parse_float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def read_config(path: str) -> dict:
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from None
    for i, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"--config: line {i} is not 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


# -------------------------------------------------------------- the parser

def _add_seed(p):
    p.add_argument("--seed", type=int, default=None, help="RNG seed, unsigned 64-bit integer (default: $STOCHGEO_SEED, else 0)")


def _add_body(p):
    p.add_argument("--dim", type=int, default=None, help="ambient dimension d (integer, 2..8)")
    p.add_argument("--axes", type=parse_float_list, default=None, help="ellipsoid semi-axes a_1,...,a_d (length units); omit for the unit ball")


def _add_common(p):
    p.add_argument("--config", default=None, help="flat key = value file; flags override it")
    p.add_argument("--threads", type=int, default=None, help="worker threads (count; default all cores; results do not depend on it)")
    p.add_argument("--out", default=None, help="output path (CSV; a .json sidecar is written next to it)")


def _polycase(p):
    p.add_argument("--evaluator", choices=("exact", "kubota"), default="exact", help="V_s evaluator for hulls")
    p.add_argument("--kubota-n", type=int, default=None, help="Haar frames per level for the kubota evaluator (count; default pilot-sized)")
    p.add_argument("--common-frames", type=parse_bool, default=True, help="share Haar frames across replications of a level (true/false)")
    p.add_argument("--angle-samples", type=int, default=4000, help="Gaussian directions per external angle in normal dimension >= 3 (count)")
    p.add_argument("--hull-method", choices=("qhull", "incremental"), default="qhull", help="convex hull backend")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="stochgeo", description="Random polytopes, intrinsic volumes and cap geometry of the unit ball.")
    top.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = top.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("sample", help="uniform points in a ball or ellipsoid")
    _add_body(p)
    p.add_argument("--n", type=int, required=False, default=None, help="number of points (count)")
    _add_seed(p)
    _add_common(p)

    p = sub.add_parser("hull", help="convex hull of a point file, written as polytope JSON")
    p.add_argument("--in", dest="input", default=None, help="points as CSV (one point per row) or polytope JSON")
    p.add_argument("--method", choices=("qhull", "incremental"), default="qhull", help="convex hull backend")
    _add_common(p)

    p = sub.add_parser("intrinsic", help="intrinsic volume V_s of a polytope")
    p.add_argument("--in", dest="input", default=None, help="polytope JSON ({dim, vertices, facets?}) or point CSV")
    p.add_argument("--s", type=int, default=None, help="index s of V_s (integer, 0..d; 0 only with steiner-fit)")
    p.add_argument("--method", choices=("external-angle", "kubota", "steiner-fit"), default="external-angle", help="evaluation route")
    p.add_argument("--frames", type=int, default=10_000, help="Haar frames for kubota (count)")
    p.add_argument("--angle-samples", type=int, default=20_000, help="directions per external angle in normal dimension >= 3 (count)")
    p.add_argument("--samples", type=int, default=200_000, help="hit-or-miss points for steiner-fit (count)")
    p.add_argument("--radii", type=parse_float_list, default=None, help="Minkowski radii for steiner-fit (length units; default 0.05..0.4)")
    _add_seed(p)
    _add_common(p)

    p = sub.add_parser("capvol", help="volume of the height-t cap of B^d")
    p.add_argument("--dim", type=int, default=None, help="dimension d (integer, 1..8)")
    p.add_argument("--t", type=float, default=None, help="cap height (length units, 0..2)")
    _add_common(p)

    p = sub.add_parser("wetpart", help="floating radius and wet-part volume of B^d")
    p.add_argument("--dim", type=int, default=None, help="dimension d (integer, 1..8)")
    p.add_argument("--t", type=float, default=None, help="cap-volume parameter (volume units, 0 < t <= kappa_d/2)")
    _add_common(p)

    p = sub.add_parser("capcover", help="economic cap cover of the wet part of B^d")
    p.add_argument("--dim", type=int, default=None, help="dimension d (integer, 2..8)")
    p.add_argument("--t", type=float, default=None, help="volume parameter for the unit-volume body (fraction of kappa_d, 0..0.5)")
    p.add_argument("--beta", type=float, default=8.0, help="cap enlargement factor (dimensionless)")
    p.add_argument("--samples", type=int, default=10_000, help="wet-part points for the coverage check (count)")
    _add_seed(p)
    _add_common(p)

    p = sub.add_parser("experiment", help="replicated Monte Carlo experiments")
    esub = p.add_subparsers(dest="experiment", metavar="experiment", required=True)
    for name, desc in (
        ("variance", "sample variance of V_s(K_n) versus n"),
        ("expectation", "mean gap V_s(K) - E V_s(K_n) versus n"),
        ("efron-stein", "Efron-Stein bound next to the sample variance"),
        ("floating", "frequency that the floating body escapes K_n"),
    ):
        q = esub.add_parser(name, help=desc)
        _add_body(q)
        q.add_argument("--s", type=int, default=None, help="index s of V_s (integer, 1..d; default d)")
        q.add_argument("--n", type=parse_int_grid, default=(128, 256, 512, 1024, 2048, 4096, 8192), help="sample sizes: 'lo..hixratio' or a comma list (points)")
        q.add_argument("--reps", type=int, default=500, help="replications per n (count)")
        _add_seed(q)
        _polycase(q)
        if name == "efron-stein":
            q.add_argument("--extra-points", type=int, default=64, help="candidate (n+1)-st points per replication (count)")
        if name == "floating":
            q.add_argument("--c", type=float, default=10.0, help="floating-body constant c in (c log n / n) (dimensionless)")
        _add_common(q)

    q = esub.add_parser("strong-law", help="one nested trajectory with checkpoints n_k = k^power")
    _add_body(q)
    q.add_argument("--s", type=int, default=None, help="index s of V_s (integer, 1..d; default d)")
    q.add_argument("--n-max", type=int, default=100_000, help="largest sample size (points)")
    q.add_argument("--power", type=int, default=4, help="checkpoint exponent (integer)")
    q.add_argument("--trajectory", type=int, default=0, help="trajectory index, selects an independent stream (integer)")
    _add_seed(q)
    _polycase(q)
    _add_common(q)

    q = esub.add_parser("angle-measure", help="Haar measure of subspaces within angle alpha of a direction")
    q.add_argument("--dim", type=int, default=None, help="dimension d (integer)")
    q.add_argument("--s", type=int, default=None, help="subspace dimension (integer, 1..d-1)")
    q.add_argument("--alpha", type=parse_float_list, default=(0.05, 0.075, 0.1, 0.15, 0.2, 0.3), help="angles (radians, in (0, 0.5])")
    q.add_argument("--samples", type=int, default=100_000, help="Haar frames per angle (count)")
    _add_seed(q)
    _add_common(q)

    q = esub.add_parser("hatvs", help="variance of V-hat_s(Z) versus cap height")
    q.add_argument("--dim", type=int, default=None, help="dimension d (integer)")
    q.add_argument("--s", type=int, default=None, help="index s (integer, 1..d)")
    q.add_argument("--t", type=parse_float_list, default=tuple(10 ** (-1.5 - 0.3 * i) for i in range(6)), help="cap heights (length units, in (0, 0.1])")
    q.add_argument("--reps", type=int, default=400, help="draws of Z per height (count)")
    q.add_argument("--samples", type=int, default=2000, help="conditioned Haar frames (count)")
    _add_seed(q)
    _add_common(q)
    return top


def _leaf_parser(parser: argparse.ArgumentParser, argv) -> argparse.ArgumentParser:
    """The subparser that will handle ``argv`` (for applying config defaults)."""
    p = parser
    rest = list(argv)
    while True:
        subs = [a for a in p._actions if isinstance(a, argparse._SubParsersAction)]
        if not subs:
            return p
        choice = next((a for a in rest if a in subs[0].choices), None)
        if choice is None:
            return p
        rest = rest[rest.index(choice) + 1:]
        p = subs[0].choices[choice]


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        values = read_config(known.config)
        leaf = _leaf_parser(parser, argv)
        actions = {a.dest: a for a in leaf._actions}
        defaults = {}
        for key, raw in values.items():
            dest = "input" if key == "in" else key
            if dest not in actions or dest in ("help", "config"):
                raise UsageError(f"--config: unknown key {key!r}")
            act = actions[dest]
            try:
                defaults[dest] = act.type(raw) if act.type else raw
            except (argparse.ArgumentTypeError, ValueError):
                raise UsageError(f"--config: bad value for {key!r}: {raw!r}") from None
            if act.choices is not None and defaults[dest] not in act.choices:
                raise UsageError(f"--config: {key!r} must be one of {sorted(act.choices)}")
        leaf.set_defaults(**defaults)
    args = parser.parse_args(argv)
    if hasattr(args, "seed") and args.seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            args.seed = int(env) if env else 0
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
        if not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
    return args


# ---------------------------------------------------------------- helpers

def _require(args, *names):
    for n in names:
        if getattr(args, n, None) is None:
            raise UsageError(f"--{n.replace('_', '-')} is required")


def _body(args) -> BodySpec:
    if args.axes:
        if args.dim is not None and args.dim != len(args.axes):
            raise UsageError(f"--dim {args.dim} disagrees with {len(args.axes)} --axes values")
        return BodySpec.ellipsoid(args.axes)
    _require(args, "dim")
    try:
        return BodySpec.ball(args.dim)
    except ValueError as exc:
        raise UsageError(f"--dim: {exc}") from None


def _args_hash(args) -> str:
    skip = {"threads", "out", "config", "verbose"}
    d = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items() if k not in skip}
    return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()


def _load_points_or_polytope(path):
    if path is None:
        raise UsageError("--in is required")
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"--in: cannot read {path}: {exc.strerror}") from None
    if p.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
            return polytope_from_dict(obj)
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise UsageError(f"--in: not a polytope JSON file ({exc})") from None
    rows = [r for r in csv.reader(text.splitlines()) if r and not r[0].startswith("#")]
    try:
        pts = np.array([[float(v) for v in r] for r in rows])
    except ValueError:
        if rows:  # tolerate one header row
            pts = np.array([[float(v) for v in r] for r in rows[1:]])
        else:
            raise UsageError("--in: empty point file") from None
    if pts.ndim != 2:
        raise UsageError("--in: rows have different lengths")
    return convex_hull(pts)


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


def _emit_table(table, out):
    if out:
        csv_path, side = table.write(out)
        log.info("wrote %s and %s", csv_path, side)
    else:
        sys.stdout.write(table.to_csv())
    if not math.isnan(table.slope):
        print(f"slope {table.slope:.6g} +- {table.stderr:.3g}", file=sys.stderr)


# ------------------------------------------------------------ subcommands

def cmd_sample(args):
    _require(args, "n")
    body = _body(args)
    pts = uniform_body(body, RngStream(args.seed), args.n)
    _emit("".join(",".join(format_value(v) for v in row) + "\n" for row in pts), args.out)


def cmd_hull(args):
    P = _load_points_or_polytope(args.input)
    if args.method != "qhull":
        P = convex_hull(P.vertices, method=args.method)
    _emit(json.dumps(P.to_dict()) + "\n", args.out)
    print(f"vertices {len(P.vertices)} facets {len(P.facets)} volume {polytope_volume(P):.17g} surface {surface_area(P):.17g}", file=sys.stderr)


def cmd_intrinsic(args):
    _require(args, "s")
    P = _load_points_or_polytope(args.input)
    d = P.dim
    stream = RngStream(args.seed)
    if args.method == "steiner-fit":
        if not 0 <= args.s <= d:
            raise UsageError(f"--s must lie in [0, {d}]")
        lams = args.radii or tuple(np.linspace(0.05, 0.4, max(d + 2, 6)))
        est = steiner_fit_oracle(P, lams, args.samples, stream)[args.s]
    else:
        if not 1 <= args.s <= d:
            raise UsageError(f"--s must lie in [1, {d}]")
        if args.method == "kubota":
            est = kubota_intrinsic(P, args.s, args.frames, stream)
        else:
            est = exact_intrinsic(P, args.s, args.angle_samples, stream)
    _emit(f"{est.value:.17g}\n", args.out)
    print(f"V_{est.s} = {est.value:.10g} +- {est.std_error:.3g} ({est.method})", file=sys.stderr)


def cmd_capvol(args):
    _require(args, "dim", "t")
    _emit(f"{cap_volume(args.dim, args.t):.17g}\n", args.out)


def cmd_wetpart(args):
    _require(args, "dim", "t")
    w = wet_part(args.dim, args.t)
    _emit(f"t,cap_height,floating_radius,wet_volume\n{w.t:.17g},{w.cap_height:.17g},{w.floating_radius:.17g},{w.wet_volume:.17g}\n", args.out)


def cmd_capcover(args):
    _require(args, "dim", "t")
    stream = RngStream(args.seed)
    cov = economic_cover(args.dim, args.t, stream.derive("cover"), beta=args.beta)
    pts = cov.sample_wet_part(stream.derive("check"), args.samples)
    covered = float(cov.covered(pts).mean())
    text = (
        "t,height,m,count_ratio,covered_fraction,inner_disjoint\n"
        f"{cov.t:.17g},{cov.height:.17g},{cov.m},{cov.count_ratio:.17g},{covered:.17g},{int(cov.inner_disjoint())}\n"
    )
    _emit(text, args.out)


def _config(args) -> ExperimentConfig:
    body = _body(args)
    s = body.d if args.s is None else args.s
    try:
        return ExperimentConfig(
            body=body,
            s=s,
            n_grid=getattr(args, "n", (128,)),
            reps=getattr(args, "reps", 2),
            seed=args.seed,
            evaluator=args.evaluator,
            kubota_n=args.kubota_n,
            common_frames=args.common_frames,
            angle_samples=args.angle_samples,
            extra_points=getattr(args, "extra_points", 64),
            hull_method=args.hull_method,
            threads=args.threads,
            out=args.out,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_experiment(args):
    name = args.experiment
    if name in ("angle-measure", "hatvs"):
        _require(args, "dim", "s")
        stream = RngStream(args.seed)
        if name == "angle-measure":
            table = angle_measure_experiment(args.dim, args.s, args.alpha, args.samples, stream)
        else:
            table = hatvs_variance_experiment(args.dim, args.s, args.t, args.reps, args.samples, stream)
    else:
        cfg = _config(args)
        log.info("experiment config_hash %s (recorded in the sidecar)", cfg.config_hash)
        if name == "variance":
            table = variance_experiment(cfg)
        elif name == "expectation":
            table = expectation_experiment(cfg)
        elif name == "efron-stein":
            table = efron_stein_experiment(cfg)
        elif name == "floating":
            table = floating_containment_experiment(cfg, args.c)
        else:
            traj = strong_law_trajectory(cfg, n_max=args.n_max, power=args.power, trajectory=args.trajectory)
            table = traj.to_table(cfg.config_hash, cfg.seed)
    _emit_table(table, args.out)


COMMANDS = {
    "sample": cmd_sample,
    "hull": cmd_hull,
    "intrinsic": cmd_intrinsic,
    "capvol": cmd_capvol,
    "wetpart": cmd_wetpart,
    "capcover": cmd_capcover,
    "experiment": cmd_experiment,
}


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"stochgeo: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
    log.info("resolved config hash %s", _args_hash(args))
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"stochgeo: error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"stochgeo: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"stochgeo: error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())
