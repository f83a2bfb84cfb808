"""Command-line interface: ``linetime <command> ...``.

Every randomized command requires ``--seed``.  Simulation commands write the
batch as CSV (``--csv``), print a JSON summary (also to ``--json``), and can
record a run manifest (``--manifest``) that ``linetime replay`` re-executes
and checks byte-for-byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

from . import __version__, brownian, moments, montecarlo, partialsum, scale, stats
from .exprparse import ExprDomainError, ExprSyntaxError, UnknownIdentifierError
from .laws import Mixture
from .montecarlo import SimConfig, StripMode

EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_RECURRENT = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def dumps(obj) -> str:
    return json.dumps(_strict(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _strict(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _strict(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_strict(v) for v in obj]
    return obj


def _write(path: str | None, text: str) -> None:
    if path:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)


def _digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# --------------------------------------------------------------------------
# analyze


def cmd_analyze(args) -> tuple[dict, int]:
    try:
        spec = scale.DiffusionSpec.from_strings(args.mu, args.sigma)
    except (ExprSyntaxError, UnknownIdentifierError) as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    quad = scale.QuadPolicy(rel_tol=args.tol)
    try:
        result = scale.analyze(spec, scale.LineTarget(args.a, args.b), args.x0, quad)
    except (scale.QuadratureError, scale.SigmaError, ExprDomainError) as exc:
        raise CliError(str(exc), EXIT_NUMERIC) from None
    out = {"command": "analyze", "spec": spec.to_json(), "a": args.a, "b": args.b, "x0": args.x0,
           **result.to_json()}
    code = EXIT_RECURRENT if result.law.is_infinite else 0
    return out, code


# --------------------------------------------------------------------------
# simulate


def _sim_config(args) -> SimConfig:
    try:
        return SimConfig(epsilon=args.epsilon, dt=args.dt, t_max=args.t_max,
                         escape_margin=args.escape_margin, escape_return_tol=args.escape_tol,
                         n_reps=args.n_reps, seed=args.seed, strip_mode=StripMode(args.strip))
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _emit_batch(args, batch) -> dict:
    _write(args.csv, batch.to_csv())
    summary = {"command": " ".join(args.command_path), **batch.summary()}
    _write(args.json, dumps(summary))
    return summary


def cmd_simulate(args) -> tuple[dict, int]:
    cfg = _sim_config(args)
    threads = args.threads
    target = args.target
    try:
        if target == "line":
            spec = scale.DiffusionSpec.from_strings(args.mu, args.sigma)
            batch = montecarlo.simulate_line_occupancy(spec, args.x0, scale.LineTarget(args.a, args.b),
                                                       cfg, threads)
        elif target == "joint":
            batch = montecarlo.simulate_joint(args.b, cfg, args.c, threads)
        elif target == "truncated":
            batch = montecarlo.simulate_truncated(args.c, args.b, cfg, threads)
        elif target == "axis":
            batch = montecarlo.simulate_axis_time(args.T, cfg, threads)
        else:
            batch = montecarlo.simulate_exceedance_time(args.c, args.inv_sigma, cfg, threads)
    except montecarlo.RecurrentLineError as exc:
        raise CliError(str(exc), EXIT_RECURRENT) from None
    except (ExprSyntaxError, UnknownIdentifierError) as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    except (scale.QuadratureError, scale.SigmaError, ExprDomainError) as exc:
        raise CliError(str(exc), EXIT_NUMERIC) from None
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return _emit_batch(args, batch), 0


# --------------------------------------------------------------------------
# moments


def cmd_moments(args) -> tuple[dict, int]:
    try:
        if args.mgf is not None:
            s, t = args.mgf
            value = moments.mgf(args.b, args.c, s, t, tol=args.tol)
            return {"command": "moments", "kind": "mgf", "b": args.b, "c": args.c, "s": s, "t": t,
                    "value": value}, 0
        if args.m4 is not None:
            b, h = args.m4
            value = moments.fourth_moment_difference(b, h)
            return {"command": "moments", "kind": "m4", "b": b, "h": h, "value": value,
                    "value_over_h2": value / (h * h) if h > 0 else None}, 0
        if args.p is None or args.q is None:
            raise CliError("give --p and --q, or --mgf S T, or --m4 B H")
        if args.rational:
            from fractions import Fraction

            b, c = Fraction(str(args.b)), Fraction(str(args.c))
            exact = moments.joint_moment(b, c, args.p, args.q, rational=True)
            return {"command": "moments", "kind": "joint", "b": args.b, "c": args.c, "p": args.p,
                    "q": args.q, "value": float(exact), "exact": str(exact)}, 0
        value = moments.joint_moment(args.b, args.c, args.p, args.q)
        return {"command": "moments", "kind": "joint", "b": args.b, "c": args.c, "p": args.p,
                "q": args.q, "value": float(value)}, 0
    except moments.MgfDivergenceError as exc:
        raise CliError(str(exc), EXIT_NUMERIC) from None
    except (ValueError, ZeroDivisionError, NotImplementedError) as exc:
        raise CliError(str(exc)) from None


# --------------------------------------------------------------------------
# partialsum


def _iid(args) -> partialsum.IidSpec:
    try:
        if args.dist == "normal":
            return partialsum.IidSpec.normal(args.xi, args.scale)
        if args.dist == "exponential":
            return partialsum.IidSpec.exponential(args.scale, args.xi)
        return partialsum.IidSpec.uniform(args.xi, args.scale)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def cmd_partialsum(args) -> tuple[dict, int]:
    dist = _iid(args)
    common = dict(tol=args.escape_tol, horizon_factor=args.horizon_factor, threads=args.threads)
    try:
        if args.target == "occupancy":
            batch = partialsum.partial_sum_occupancy(dist, args.m, args.epsilon, args.c, args.b,
                                                     args.n_reps, args.seed, **common)
        elif args.target == "miss":
            batch = partialsum.delta_miss_count(dist, args.k, args.delta, args.c, args.n_reps,
                                                args.seed, **common)
        else:
            batch = partialsum.second_order_difference(dist, args.k, args.delta, args.c, args.n_reps,
                                                       args.seed, **common)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return _emit_batch(args, batch), 0


# --------------------------------------------------------------------------
# verify


def _suite_brownian_ray(seed, n):
    cfg = SimConfig(n_reps=n, seed=seed)
    batch = montecarlo.simulate_line_occupancy(scale.DiffusionSpec.brownian(), 0.0,
                                               scale.LineTarget(0.0, 1.0), cfg)
    return stats.fit_against(batch, Mixture(0.0, 1.0))


def _suite_atom(seed, n):
    cfg = SimConfig(n_reps=n, seed=seed)
    batch = montecarlo.simulate_line_occupancy(scale.DiffusionSpec.brownian(), 0.0,
                                               scale.LineTarget(1.0, 1.0), cfg)
    return stats.fit_against(batch, brownian.line_law(0.0, 1.0, 1.0))


def _suite_truncated(seed, n):
    cfg = SimConfig(n_reps=n, seed=seed)
    return stats.fit_against(montecarlo.simulate_truncated(1.0, 1.0, cfg), brownian.truncated_law(1.0, 1.0))


def _suite_axis(seed, n):
    cfg = SimConfig(epsilon=0.02, n_reps=n, seed=seed)
    return stats.abs_normal_check(montecarlo.simulate_axis_time(1.0, cfg))


def _suite_repulsive_axis(seed, n):
    # state-dependent drift: exercises the Euler loop and the quadrature law
    spec = scale.DiffusionSpec.from_strings("x", "1")
    line = scale.LineTarget(0.0, 0.0)
    cfg = SimConfig(n_reps=n, seed=seed)
    batch = montecarlo.simulate_line_occupancy(spec, 0.0, line, cfg)
    return stats.fit_against(batch, scale.limit_law(spec, line, 0.0))


SUITES = {
    "brownian-ray": _suite_brownian_ray,
    "atom": _suite_atom,
    "truncated-c1": _suite_truncated,
    "axis": _suite_axis,
    "repulsive-axis": _suite_repulsive_axis,
}


def cmd_verify(args) -> tuple[dict, int]:
    if args.suite not in SUITES:
        raise CliError(f"unknown suite {args.suite!r}; choose from {sorted(SUITES)}")
    report = SUITES[args.suite](args.seed, args.n_reps)
    out = {"command": "verify", "suite": args.suite, "seed": args.seed, "n_reps": args.n_reps,
           **report.to_json()}
    _write(args.json, dumps(out))
    return out, 0 if report.passed else EXIT_FAIL


# --------------------------------------------------------------------------
# replay


def cmd_replay(args) -> tuple[dict, int]:
    manifest = json.loads(Path(args.manifest_file).read_text())
    argv = list(manifest["argv"])
    expected = manifest.get("outputs", {})
    with tempfile.TemporaryDirectory() as tmp:
        redirected = []
        paths = {}
        skip = False
        for i, tok in enumerate(argv):
            if skip:
                skip = False
                continue
            if tok in ("--csv", "--json", "--manifest"):
                skip = True
                if tok != "--manifest":
                    paths[tok[2:]] = os.path.join(tmp, f"replay.{tok[2:]}")
                    redirected += [tok, paths[tok[2:]]]
                continue
            redirected.append(tok)
        if args.threads is not None and argv and argv[0] in ("simulate", "partialsum"):
            redirected += ["--threads", str(args.threads)]
        with open(os.devnull, "w") as sink:
            code = main(redirected, stdout=sink)
        results = {}
        for kind, info in expected.items():
            got = _digest(paths[kind]) if kind in paths and os.path.exists(paths[kind]) else None
            results[kind] = {"expected": info["sha256"], "actual": got, "match": got == info["sha256"]}
    ok = code == manifest.get("exit_code", 0) and all(r["match"] for r in results.values())
    return {"command": "replay", "argv": argv, "exit_code": code, "outputs": results, "identical": ok}, \
        0 if ok else EXIT_FAIL


# --------------------------------------------------------------------------
# parser


def _add_output(p, csv: bool = True):
    if csv:
        p.add_argument("--csv", help="write the sample batch here")
    p.add_argument("--json", help="write the JSON result here")
    p.add_argument("--manifest", help="write a run manifest here")


def _add_sim_config(p):
    d = SimConfig()
    p.add_argument("--epsilon", type=float, default=d.epsilon)
    p.add_argument("--dt", type=float, default=d.dt)
    p.add_argument("--t-max", type=float, default=d.t_max)
    p.add_argument("--escape-margin", type=float, default=d.escape_margin)
    p.add_argument("--escape-tol", type=float, default=d.escape_return_tol)
    p.add_argument("--n-reps", type=int, default=d.n_reps)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--strip", choices=[m.value for m in StripMode], default=d.strip_mode.value)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $LINETIME_THREADS or 1); never changes results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linetime", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"linetime {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="limit law of the occupancy time along a line")
    p.add_argument("--mu", required=True)
    p.add_argument("--sigma", required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--tol", type=float, default=scale.QuadPolicy().rel_tol)
    _add_output(p, csv=False)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo occupancy samples")
    tsub = p.add_subparsers(dest="target", required=True)
    t = tsub.add_parser("line")
    t.add_argument("--mu", default="0")
    t.add_argument("--sigma", default="1")
    t.add_argument("--x0", type=float, default=0.0)
    t.add_argument("--a", type=float, default=0.0)
    t.add_argument("--b", type=float, default=1.0)
    t = tsub.add_parser("joint")
    t.add_argument("--b", type=_floats, required=True, help="comma-separated slopes, e.g. 1,-1")
    t.add_argument("--c", type=float, default=0.0)
    t = tsub.add_parser("truncated")
    t.add_argument("--c", type=float, required=True)
    t.add_argument("--b", type=float, required=True)
    t = tsub.add_parser("axis")
    t.add_argument("--T", type=float, default=1.0)
    t = tsub.add_parser("exceedance")
    t.add_argument("--c", type=float, required=True)
    t.add_argument("--inv-sigma", type=float, default=1.0)
    for t in tsub.choices.values():
        _add_sim_config(t)
        _add_output(t)
        t.set_defaults(func=cmd_simulate)

    p = sub.add_parser("moments", help="exact joint moments, MGF, fourth-moment difference")
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--c", type=float, default=2.0)
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--rational", action="store_true", help="exact rational arithmetic")
    p.add_argument("--mgf", type=float, nargs=2, metavar=("S", "T"))
    p.add_argument("--m4", type=float, nargs=2, metavar=("B", "H"))
    p.add_argument("--tol", type=float, default=1e-12)
    _add_output(p, csv=False)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("partialsum", help="partial-sum occupancy and delta-miss counts")
    tsub = p.add_subparsers(dest="target", required=True)
    t = tsub.add_parser("occupancy")
    t.add_argument("--m", type=int, required=True)
    t.add_argument("--epsilon", type=float, required=True)
    t.add_argument("--c", type=float, required=True)
    t.add_argument("--b", type=float, required=True)
    for name in ("miss", "difference"):
        t = tsub.add_parser(name)
        t.add_argument("--k", type=float, required=True)
        t.add_argument("--delta", type=float, required=True)
        t.add_argument("--c", type=float, required=True)
    for t in tsub.choices.values():
        t.add_argument("--dist", choices=["normal", "exponential", "uniform"], default="normal")
        t.add_argument("--xi", type=float, default=0.0)
        t.add_argument("--scale", type=float, default=1.0,
                       help="sd (normal), rate (exponential) or half-width (uniform)")
        t.add_argument("--n-reps", type=int, default=2000)
        t.add_argument("--seed", type=int, required=True)
        t.add_argument("--escape-tol", type=float, default=1e-6)
        t.add_argument("--horizon-factor", type=int, default=100)
        t.add_argument("--threads", type=int, default=None)
        _add_output(t)
        t.set_defaults(func=cmd_partialsum)

    p = sub.add_parser("verify", help="run a named statistical scenario")
    p.add_argument("--suite", required=True, help=f"one of {', '.join(sorted(SUITES))}")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-reps", type=int, default=2000)
    _add_output(p, csv=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("replay", help="re-run a manifest and compare output digests")
    p.add_argument("manifest_file")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None, stdout=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.command_path = [args.command] + ([args.target] if getattr(args, "target", None) else [])
    t0 = time.perf_counter()
    try:
        result, code = args.func(args)
    except CliError as exc:
        print(f"linetime: error: {exc}", file=sys.stderr)
        return exc.code
    if args.command in ("analyze", "moments"):
        _write(args.json, dumps(result))
    out.write(dumps(result))
    out.flush()
    if getattr(args, "manifest", None):
        outputs = {}
        for kind in ("csv", "json"):
            path = getattr(args, kind, None)
            if path:
                outputs[kind] = {"path": path, "sha256": _digest(path)}
        params = {k: v for k, v in vars(args).items() if k not in ("func", "command_path")}
        manifest = {
            "tool": "linetime",
            "version": __version__,
            "subcommand": args.command_path,
            "argv": [a for a in argv],
            "params": params,
            "seed": getattr(args, "seed", None),
            "exit_code": code,
            "wall_time": time.perf_counter() - t0,
            "outputs": outputs,
        }
        _write(args.manifest, dumps(manifest))
    return code


if __name__ == "__main__":
    sys.exit(main())
