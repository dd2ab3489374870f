"""Command-line entry point: ``cascadelab <command> [<action>] [options]``.

Exit codes: 0 success, 2 bad input, 3 infeasible or too large to enumerate.
Every command accepts ``--seed`` and ``--threads``; the worker count never
changes the output bytes. With ``-o PATH`` a manifest lands beside PATH.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Callable


from . import __version__
from .aseq import ASequence
from .cascade import (
    CascadeInstance,
    InfluenceSpec,
    Network,
    ThresholdSpec,
    estimate_sigma,
    estimate_sigma_pre_sampling,
    exact_sigma_bucket,
)
from .dp_oneway import OneWayInstance, bench_dp, dp_solve, parse_thresholds, reconstruct, verify_plan
from .errors import InfeasibleError, ValidationError
from .gadgets import (
    DEFAULT_SCALE_EPS,
    MAX_LAYERS,
    build_and,
    build_and_a1zero,
    build_directed_edge,
    build_filter,
    build_scaling_down,
    load_gadget,
    measure_directed_edge,
    measure_gadget,
    save_gadget,
)
from .hierarchy import (
    DETERMINISTIC,
    dump_edges,
    dump_tree,
    load_tree,
    materialize,
    normalize_tree,
    parse_edges,
    sample,
)
from .optimize import COLUMNS as GREEDY_COLUMNS
from .optimize import brute_force, greedy
from .quasisub import SeparationParams, choose_params, find_fixed_points
from .reductions import (
    HbmReductionParams,
    SetCoverInstance,
    SetCoverParams,
    ShbmReductionParams,
    VertexCoverInstance,
    build_hbm_reduction,
    build_setcover_reduction,
    build_shbm_reduction,
    check_good_sample,
    save_bundle,
    verify_no_gap_small,
    verify_yes_strategy,
)
from .report import RunManifest, dumps_json, fmt_float, render_rows, write_output
from .rng import default_threads

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 2, 3
# never recorded in manifests: they change scheduling or location, not results
_UNRECORDED = {"threads", "out", "func"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


# input helpers ----------------------------------------------------------------------


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc


def _ints(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        return [int(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad integer list {text!r}") from exc


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad number list {text!r}") from exc


def _aseq(args) -> ASequence:
    return ASequence.from_json(_read(args.aseq))


def _instance(args, k: int = 0) -> CascadeInstance:
    """Network + influence + thresholds from --graph/--tree, --aseq/--influence, --thresholds."""
    if args.aseq:
        influence = InfluenceSpec.symmetric(_aseq(args))
    elif args.influence:
        influence = InfluenceSpec.linear() if args.influence == "linear" else InfluenceSpec.counting()
    else:
        raise ValidationError("give --aseq or --influence")
    if args.graph:
        n, edges, weights = parse_edges(_read(args.graph))
        net = Network.from_parts(n, edges, edge_weights=weights, weighted=influence.variant == "linear")
    elif args.tree:
        tree = load_tree(_read(args.tree))
        if tree.mode != DETERMINISTIC:
            raise ValidationError("a stochastic tree needs `sigma pre-sampling` or `tree sample` first")
        net = Network.from_weighted_graph(materialize(tree))
    else:
        raise ValidationError("give --graph or --tree")
    thresholds = _thresholds(args, net.n_vertices)
    return CascadeInstance(net, influence, thresholds, k)


def _thresholds(args, n: int) -> ThresholdSpec:
    if getattr(args, "thresholds", None):
        return ThresholdSpec.degenerate(parse_thresholds(_read(args.thresholds), n))
    return ThresholdSpec.uniform(n)


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--graph", help="TSV edge list")
    src.add_argument("--tree", help="hierarchy tree JSON")
    p.add_argument("--aseq", help="JSON array a_0, a_1, ... (symmetric influence)")
    p.add_argument("--influence", choices=["linear", "counting"])
    p.add_argument("--thresholds", help="TSV vertex<TAB>theta (default: uniform on (0, 1])")


# commands ---------------------------------------------------------------------------


def _tree_normalize(args) -> str:
    return dump_tree(normalize_tree(load_tree(_read(args.tree))))


def _tree_materialize(args) -> str:
    g = materialize(load_tree(_read(args.tree)))
    return dump_edges(g.n_vertices, g.edges, g.weights)


def _tree_sample(args) -> str:
    g = sample(load_tree(_read(args.tree)), args.seed)
    return dump_edges(g.n_vertices, g.edges)


def _sigma_row(args, est) -> list[dict]:
    source = args.graph or args.tree
    return [
        {
            "instance_id": Path(source).name if source != "-" else "stdin",
            "seeds": ";".join(str(s) for s in sorted(set(_ints(args.seeds)))),
            "replications": est.replications,
            "mean": est.mean,
            "stderr": est.stderr,
        }
    ]


def _sigma_estimate(args) -> str:
    est = estimate_sigma(_instance(args), _ints(args.seeds), args.replications, args.seed, args.threads)
    return render_rows(_sigma_row(args, est), args.format)


def _sigma_exact(args) -> str:
    return fmt_float(exact_sigma_bucket(_instance(args), _ints(args.seeds), limit=args.limit)) + "\n"


def _sigma_pre_sampling(args) -> str:
    if not args.tree:
        raise ValidationError("pre-sampling needs --tree")
    tree = load_tree(_read(args.tree))
    if args.aseq:
        influence = InfluenceSpec.symmetric(_aseq(args))
    elif args.influence == "counting":
        influence = InfluenceSpec.counting()
    else:
        raise ValidationError("pre-sampling needs --aseq or --influence counting")
    est = estimate_sigma_pre_sampling(
        tree, influence, _thresholds(args, tree.n_vertices), _ints(args.seeds), args.replications, args.seed, args.threads
    )
    return render_rows(_sigma_row(args, est), args.format)


def _dp_solve(args) -> str:
    tree = load_tree(_read(args.tree))
    inst = OneWayInstance(tree, parse_thresholds(_read(args.thresholds), tree.n_vertices), args.k)
    table = dp_solve(inst, args.cascade_aware)
    plan = reconstruct(table, table.answer if args.nu is None else args.nu)
    out = json.loads(plan.to_json())
    out["achieved"] = verify_plan(inst, plan)
    return json.dumps(out, indent=1) + "\n"


def _greedy(args) -> str:
    trace = greedy(
        _instance(args, args.k), args.replications, args.seed, exact=args.exact, lazy=not args.naive, threads=args.threads
    )
    return render_rows(trace.rows(), args.format, GREEDY_COLUMNS)


def _brute_force(args) -> str:
    best, sigma = brute_force(_instance(args, args.k), not args.mc, args.replications, args.seed, args.cap, args.threads)
    return dumps_json({"seeds": list(best), "sigma": sigma})


def _separation(args, a: ASequence) -> SeparationParams:
    if args.h is not None:
        return SeparationParams.from_h_delta(args.h, args.delta, a)
    return choose_params(a, args.delta)


def _gadget_build(args) -> tuple[str, dict[str, str]]:
    a = _aseq(args)
    kind = args.type
    if kind == "scaling":
        g = build_scaling_down(args.alpha, args.eps, a)
    elif kind == "filter":
        g = build_filter(_separation(args, a), args.layers, a, args.scale_eps)
    elif kind == "and":
        g = build_and(
            args.inputs, args.p0, args.eps1, args.eps2, a, params=_separation(args, a), max_layers=args.max_layers, scale_eps=args.scale_eps
        )
    elif kind == "directed-edge":
        g = build_directed_edge(args.upsilon, args.eps, _separation(args, a), a, args.scale_eps, L=args.L)
    else:
        g = build_and_a1zero(args.inputs, args.lambda0, a)
    tsv, side = save_gadget(g)
    if not args.out:
        raise ValidationError("gadget build needs -o for the TSV (the sidecar goes next to it)")
    return tsv, {_sidecar_path(args.out, args.sidecar): side + "\n"}


def _sidecar_path(out: str, given: str | None) -> str:
    p = Path(out)
    return given or str(p.with_name(p.stem + ".sidecar.json"))


def _gadget_measure(args) -> str:
    side = _sidecar_path(args.gadget, args.sidecar)
    g = load_gadget(_read(args.gadget), _read(side))
    a = _aseq(args)
    if args.directed:
        return dumps_json(measure_directed_edge(g, a, args.trials, args.seed, args.threads))
    probs = _floats(args.probs)
    if len(probs) == 1:
        probs = probs * len(g.input_sets)
    return dumps_json(measure_gadget(g, probs, args.trials, args.seed, a, args.threads))


def _gadget_fixpoints(args) -> str:
    a = _aseq(args)
    return dumps_json(find_fixed_points(_separation(args, a), a).to_dict())


def _vc_hbm_params(args, vc: VertexCoverInstance) -> HbmReductionParams:
    if args.full_scale:
        return HbmReductionParams.full_scale(vc, args.epsilon)
    return HbmReductionParams.desk(vc, M=args.M, W=args.W, epsilon=args.epsilon)


def _bundle(args):
    if args.kind == "hbm":
        vc = VertexCoverInstance.from_json(_read(args.vc))
        return build_hbm_reduction(vc, _vc_hbm_params(args, vc))
    if args.kind == "shbm":
        vc = VertexCoverInstance.from_json(_read(args.vc))
        return build_shbm_reduction(vc, ShbmReductionParams.for_instance(vc, args.W or 4, args.M))
    sc = SetCoverInstance.from_json(_read(args.sc))
    if args.pad:
        sc = sc.padded()
    params = SetCoverParams(
        delta=args.delta,
        M1=args.M1,
        M2=args.M2,
        and_layers=args.and_layers,
        upsilon=args.upsilon,
        edge_eps=args.edge_eps,
        edge_layers=args.edge_layers,
        lambda0=args.lambda0,
        eps=args.eps,
    )
    return build_setcover_reduction(sc, args.variant, _aseq(args), params)


def _reduce(args) -> tuple[str, dict[str, str]]:
    bundle = _bundle(args)
    text, _kind, side = save_bundle(bundle)
    if not args.out:
        raise ValidationError("reduce needs -o for the structure file (the sidecar goes next to it)")
    return text, {_sidecar_path(args.out, args.sidecar): side}


def _verify_yes(args) -> str:
    rep = verify_yes_strategy(_bundle(args), args.trials, args.seed, threads=args.threads)
    return dumps_json(dataclasses.asdict(rep))


def _verify_no(args) -> str:
    bundle = _bundle(args)
    worst = verify_no_gap_small(bundle, args.mode, args.cap, args.probes, args.seed, avoid_payoff=args.avoid_payoff)
    return dumps_json(
        {
            "max_payoff_infected": worst,
            "expected_no_ceiling": bundle.expected_no_ceiling,
            "yes_instance": bundle.yes_strategy is not None,
            "mode": args.mode,
            "avoid_payoff": args.avoid_payoff,
        }
    )


def _verify_good_sample(args) -> str:
    args.kind = "shbm"
    bundle = _bundle(args)
    rep = check_good_sample(sample(bundle.tree, args.seed), bundle, args.draws, args.seed)
    return dumps_json(dataclasses.asdict(rep))


def _bench_dp(args) -> str:
    rows = bench_dp(_ints(args.sizes), _ints(args.budgets), args.seed, args.repeats)
    return render_rows(rows, args.format)


def _replay(args) -> str:
    manifest = RunManifest.from_json(_read(args.manifest))
    argv = list(manifest.argv)
    if args.out:
        argv += ["-o", args.out]
    return _run(argv)


# parser ------------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default $CASCADELAB_THREADS or 1)")
    p.add_argument("-o", "--out", help="output path (default stdout)")


def _leaf(sub, name: str, func: Callable, help_text: str) -> argparse.ArgumentParser:
    p = sub.add_parser(name, help=help_text, description=help_text)
    _common(p)
    p.set_defaults(func=func)
    return p


def _reduction_args(p: argparse.ArgumentParser, with_kind: bool) -> None:
    if with_kind:
        p.add_argument("--kind", choices=["hbm", "shbm", "setcover"], required=True)
    p.add_argument("--vc", help="vertex cover JSON {n, edges, k}")
    p.add_argument("--sc", help="set cover JSON {n, subsets, k}")
    p.add_argument("--M", type=int, default=64, help="payoff bundle size (hbm, shbm)")
    p.add_argument("--W", type=int, default=None, help="clique size (hbm default n*m, shbm default 4)")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--full-scale", action="store_true", help="hbm: W = nm and M from the gap exponent")
    p.add_argument("--variant", choices=["directed", "undirected", "a1zero"], default="directed")
    p.add_argument("--aseq")
    p.add_argument("--pad", action="store_true", help="pad the universe to a power of two")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--M1", type=int)
    p.add_argument("--M2", type=int)
    p.add_argument("--and-layers", type=int, default=2)
    p.add_argument("--upsilon", type=int)
    p.add_argument("--edge-eps", type=float)
    p.add_argument("--edge-layers", type=int)
    p.add_argument("--lambda0", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--sidecar")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cascadelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cascadelab {__version__}")
    top = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    tree = top.add_parser("tree", help="hierarchy tree tools").add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name, fn, text in [
        ("normalize", _tree_normalize, "splice out unary nodes"),
        ("materialize", _tree_materialize, "deterministic tree to weighted edge list"),
        ("sample", _tree_sample, "draw a graph from a stochastic tree"),
    ]:
        _leaf(tree, name, fn, text).add_argument("--tree", required=True)

    sigma = top.add_parser("sigma", help="expected cascade size").add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name, fn, text in [
        ("estimate", _sigma_estimate, "Monte Carlo estimate"),
        ("exact", _sigma_exact, "exact value by threshold-bucket enumeration"),
        ("pre-sampling", _sigma_pre_sampling, "estimate over fresh graph samples of a stochastic tree"),
    ]:
        p = _leaf(sigma, name, fn, text)
        _add_instance_args(p)
        p.add_argument("--seeds", default="", help="comma-separated seed vertices")
        p.add_argument("--replications", type=int, default=10_000)
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--limit", type=int, default=10, help="exact: largest N to enumerate")

    p = _leaf(top, "dp-solve", _dp_solve, "optimal one-way seeding by tree DP")
    p.add_argument("--tree", required=True)
    p.add_argument("--thresholds", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--nu", type=int, default=None, help="reconstruct this target instead of the best")
    p.add_argument("--cascade-aware", action="store_true", help="leaf tables count in-block follow-on infections")

    p = _leaf(top, "greedy", _greedy, "lazy greedy seed selection")
    _add_instance_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--replications", type=int, default=1000)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--naive", action="store_true", help="re-evaluate every candidate each step")
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = _leaf(top, "brute-force", _brute_force, "exhaustive seed search")
    _add_instance_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mc", action="store_true", help="Monte Carlo instead of exact evaluation")
    p.add_argument("--replications", type=int, default=1000)
    p.add_argument("--cap", type=int, default=200_000)

    gadget = top.add_parser("gadget", help="gadget tools").add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = _leaf(gadget, "build", _gadget_build, "build a gadget (TSV + JSON sidecar)")
    p.add_argument("--type", choices=["scaling", "filter", "and", "directed-edge", "and-a1zero"], required=True)
    p.add_argument("--aseq", required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--h", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--scale-eps", type=float, default=DEFAULT_SCALE_EPS)
    p.add_argument("--inputs", type=int, default=2)
    p.add_argument("--p0", type=float, default=0.5)
    p.add_argument("--eps1", type=float, default=0.05)
    p.add_argument("--eps2", type=float, default=0.01)
    p.add_argument("--max-layers", type=int, default=MAX_LAYERS)
    p.add_argument("--upsilon", type=int, default=2)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--lambda0", type=int, default=None)
    p.add_argument("--sidecar")
    p = _leaf(gadget, "measure", _gadget_measure, "Monte Carlo output frequency")
    p.add_argument("--gadget", required=True)
    p.add_argument("--sidecar")
    p.add_argument("--aseq", required=True)
    p.add_argument("--probs", default="1.0", help="per-input-set seeding probabilities")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--directed", action="store_true", help="forward and reverse-leak frequencies of a directed edge")
    p = _leaf(gadget, "fixpoints", _gadget_fixpoints, "fixed points of the separation map")
    p.add_argument("--aseq", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--h", type=int, default=None)

    reduce = top.add_parser("reduce", help="build reduction instances").add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for name in ["hbm", "shbm", "setcover"]:
        _reduction_args(_leaf(reduce, name, _reduce, f"{name} reduction bundle"), with_kind=False)

    verify = top.add_parser("verify", help="check reduction bundles").add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = _leaf(verify, "yes", _verify_yes, "payoff reached from the witness")
    _reduction_args(p, with_kind=True)
    p.add_argument("--trials", type=int, default=1)
    p = _leaf(verify, "no", _verify_no, "largest payoff reach over probed seed sets")
    _reduction_args(p, with_kind=True)
    p.add_argument("--mode", choices=["exhaustive", "heuristic"], default="exhaustive")
    p.add_argument("--cap", type=int, default=10_000_000)
    p.add_argument("--probes", type=int, default=256)
    p.add_argument("--avoid-payoff", action="store_true", help="skip seed sets touching the payoff region")
    p = _leaf(verify, "good-sample", _verify_good_sample, "concentration checks on a sampled graph")
    _reduction_args(p, with_kind=False)
    p.add_argument("--draws", type=int, default=32)

    bench = top.add_parser("bench", help="benchmarks").add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = _leaf(bench, "dp", _bench_dp, "wall time of the tree DP")
    p.add_argument("--sizes", default="50,100,200,400")
    p.add_argument("--budgets", default="5")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = _leaf(top, "replay", _replay, "re-run the command recorded in a manifest")
    p.add_argument("manifest")
    return parser


def _recorded_argv(argv: list[str]) -> list[str]:
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in ("--threads", "-o", "--out"):
            skip = True
            continue
        if tok.startswith(("--threads=", "--out=")):
            continue
        out.append(tok)
    return out


def _manifest(args, argv: list[str]) -> RunManifest:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _UNRECORDED}
    inputs = [
        str(v)
        for k, v in sorted(vars(args).items())
        if k in {"tree", "graph", "aseq", "thresholds", "gadget", "sidecar", "vc", "sc", "manifest"} and v
    ]
    name = " ".join(x for x in (args.command, getattr(args, "action", None) or getattr(args, "kind", None)) if x)
    return RunManifest(name, inputs, params, args.seed, _recorded_argv(argv))


def _run(argv: list[str]) -> str:
    args = build_parser().parse_args(argv)
    if args.threads is None:
        args.threads = default_threads()
    result = args.func(args)
    text, extra = result if isinstance(result, tuple) else (result, {})
    if args.out and args.func is not _replay:
        manifest = _manifest(args, argv)
        manifest.outputs = [args.out] + sorted(extra)
        for path, body in sorted(extra.items()):
            write_output(path, body)
        write_output(args.out, text, manifest)
        return ""
    return text


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        text = _run(argv)
    except _UsageError as exc:
        print(f"cascadelab: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as exc:
        print(f"cascadelab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InfeasibleError as exc:
        print(f"cascadelab: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if text:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
