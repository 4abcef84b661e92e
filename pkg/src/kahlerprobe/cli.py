"""Command-line entry point.

Subcommands: ``delta`` (dichotomy-constant estimation), ``mean`` (Karcher
mean of a JSON sample set), ``transport`` (holonomy samples of a loop
family), ``orbit`` (conjugation orbit of a structure under sampled
holonomy), and ``probe`` (the full dichotomy pipeline).

Every output is a JSON document with a reproducibility header: the fully
resolved configuration and an optional timestamp (``--no-timestamp`` for
byte-stable output).  Domain errors exit with status 2 and a
``{"error": code, "detail": ...}`` payload; usage errors exit 1.
"""

from __future__ import annotations

import argparse
import datetime
import sys

import numpy as np

from . import acs, holonomy, io, karcher, prober
from .constants import compute_delta
from .errors import KahlerProbeError


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _csv_floats(text: str) -> list:
    return [float(v) for v in text.split(",")]


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file; flags override its keys")
    sub.add_argument("--out", help="write the output JSON here instead of stdout")
    sub.add_argument("--no-timestamp", action="store_true",
                     help="omit the timestamp field (byte-stable output)")
    sub.add_argument("--threads", type=int, default=0,
                     help="worker cap (0 = available parallelism); "
                          "output is independent of this value")
    sub.add_argument("--seed", type=int, default=0)


def _add_loop_flags(sub):
    sub.add_argument("--manifold", required=True,
                     choices=holonomy.CATALOG_NAMES)
    sub.add_argument("--point", required=True, type=_csv_floats,
                     help="base point, comma-separated coordinates")
    sub.add_argument("--loop-kind", default="coordinate_rectangles",
                     choices=("coordinate_rectangles", "fourier_random"))
    sub.add_argument("--loops", type=int, default=6)
    sub.add_argument("--loop-scale", type=float, default=0.5)
    sub.add_argument("--ode-steps", type=int, default=400)
    sub.add_argument("--word-length", type=int, default=3)


def build_parser():
    parser = _Parser(prog="kahler-probe",
                     description="Kahler dichotomy pipeline on chart-defined "
                                 "Riemannian manifolds")
    subs = parser.add_subparsers(dest="subcommand", required=True,
                               parser_class=_Parser)
    by_name = {}

    p = subs.add_parser("delta",
                        help="estimate the dichotomy constant")
    p.add_argument("--dim", type=int, default=4, help="ambient dimension 2n")
    p.add_argument("--samples", type=int, default=300)
    p.add_argument("--resolution", type=float, default=0.01)
    p.add_argument("--epsilon-override", type=float, default=None)
    p.add_argument("--no-cache", action="store_true")
    _add_common(p)
    by_name["delta"] = p

    p = subs.add_parser("mean",
                        help="Karcher mean of a JSON sample set")
    p.add_argument("--input", required=True,
                   help="JSON file: array of matrices or "
                        '{"points": [...], "weights": [...]}')
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=500)
    _add_common(p)
    by_name["mean"] = p

    p = subs.add_parser("transport",
                        help="holonomy samples of a loop family")
    _add_loop_flags(p)
    _add_common(p)
    by_name["transport"] = p

    p = subs.add_parser("orbit",
                        help="conjugation orbit of a structure under "
                             "sampled holonomy")
    _add_loop_flags(p)
    p.add_argument("--j", default="auto",
                   help="'auto' or a JSON matrix file (orthonormal frame)")
    p.add_argument("--csv", help="also write the distance table as CSV")
    _add_common(p)
    by_name["orbit"] = p

    p = subs.add_parser("probe",
                        help="full dichotomy pipeline")
    _add_loop_flags(p)
    p.add_argument("--j", default="auto")
    p.add_argument("--delta-dim", type=int, default=None,
                   help="dimension 2n for the delta constant "
                        "(default: the chart dimension)")
    p.add_argument("--grid", type=int, default=17)
    p.add_argument("--field-steps", type=int, default=300)
    p.add_argument("--probe-points", type=int, default=10)
    p.add_argument("--mean-tol", type=float, default=1e-10)
    _add_common(p)
    by_name["probe"] = p

    return parser, by_name


def _resolved_config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("config", "out")}
    return cfg


def _emit(args, result: dict) -> None:
    doc = {"config": _resolved_config(args), "result": result}
    if not args.no_timestamp:
        doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    text = io.dump_json(doc, args.out)
    if args.out is None:
        print(text)


def _structure_for(args, chart, p):
    if args.j == "auto":
        return prober.default_structure(chart, p)
    return io.structure_from_json(io.load_json(args.j))


def _loop_samples(args):
    chart = holonomy.catalog(args.manifold)
    p = np.asarray(args.point, dtype=float)
    loops = holonomy.loop_family(chart, p, args.loop_kind, args.loops,
                                 args.loop_scale, seed=args.seed)
    samples = holonomy.holonomy_samples(chart, p, loops, args.ode_steps,
                                        word_length=args.word_length)
    return chart, p, samples


def _delta_json(delta) -> dict:
    return {"n": delta.n, "delta": delta.delta,
            "epsilon_used": delta.epsilon_used, "inj_used": delta.inj_used}


def _cmd_delta(args) -> dict:
    delta = compute_delta(args.dim // 2, num_samples=args.samples,
                          resolution=args.resolution, seed=args.seed,
                          epsilon_override=args.epsilon_override,
                          use_cache=not args.no_cache)
    return _delta_json(delta)


def _cmd_mean(args) -> dict:
    s = io.sample_set_from_json(io.load_json(args.input))
    res = karcher.karcher_mean(s, tol=args.tol, max_iter=args.max_iter)
    return {"mean": io.structure_to_json(res.mean),
            "iterations": res.iterations,
            "final_grad_norm": res.final_grad_norm,
            "energy": res.energy,
            "converged": res.converged}


def _cmd_transport(args) -> dict:
    _, _, samples = _loop_samples(args)
    return {"samples": [io.holonomy_sample_to_json(s) for s in samples]}


def _cmd_orbit(args) -> dict:
    chart, p, samples = _loop_samples(args)
    J_p = _structure_for(args, chart, p)
    report = prober.orbit(J_p, samples)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("index,distance\n")
            for i, d in enumerate(report.distances):
                fh.write(f"{i},{d!r}\n")
    return {"j": io.structure_to_json(J_p),
            "distances": list(report.distances),
            "max_distance": report.max_distance,
            "argmax_loop": report.argmax_loop,
            "argmax_word": list(samples[report.argmax_loop].word)
            if report.argmax_loop >= 0 else []}


def _cmd_probe(args) -> dict:
    chart = holonomy.catalog(args.manifold)
    p = np.asarray(args.point, dtype=float)
    J_p = None if args.j == "auto" else io.structure_from_json(io.load_json(args.j))
    delta = None
    if args.delta_dim is not None:
        delta = compute_delta(args.delta_dim // 2, seed=args.seed)
    config = prober.ProbeConfig(loop_kind=args.loop_kind, loops=args.loops,
                                loop_scale=args.loop_scale,
                                ode_steps=args.ode_steps,
                                word_length=args.word_length,
                                grid_res=args.grid,
                                field_steps=args.field_steps,
                                probe_points=args.probe_points,
                                seed=args.seed, mean_tol=args.mean_tol)
    v = prober.probe(chart, p, J_p=J_p, config=config, delta=delta)
    result = {"kind": v.kind,
              "delta": _delta_json(v.delta_used),
              "certificates": dict(v.certificates),
              "failing_stage": v.failing_stage,
              "detail": v.detail}
    if v.orbit_report is not None:
        result["orbit_max_distance"] = v.orbit_report.max_distance
    if v.kind == "HolonomyObstruction":
        sample = v.orbit_report.samples[v.witness_loop_index]
        result["witness"] = {"loop_index": v.witness_loop_index,
                             "distance": v.witness_distance,
                             "word": list(sample.word),
                             "loop": sample.loop.description}
    if v.mean_result is not None:
        result["mean"] = io.structure_to_json(v.mean_result.mean)
    if v.global_field is not None:
        result["path_independence_residual"] = \
            v.global_field.path_independence_residual
    return result


_COMMANDS = {"delta": _cmd_delta, "mean": _cmd_mean, "transport": _cmd_transport,
             "orbit": _cmd_orbit, "probe": _cmd_probe}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, by_name = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = io.load_json(args.config)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config file: {exc}")
        sub = by_name[args.subcommand]
        valid = {a.dest for a in sub._actions} - {"help", "config"}
        unknown = sorted(set(cfg) - valid)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)  # explicit flags override config keys
    try:
        result = _COMMANDS[args.subcommand](args)
    except KahlerProbeError as exc:
        print(io.dump_json({"error": exc.code, "detail": str(exc)}),
              file=sys.stderr)
        return 2
    _emit(args, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
