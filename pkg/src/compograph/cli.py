"""Command-line interface.

Every subcommand writes into a flat output directory: ``checkpoint.json``
for trained models, ``report.json`` for metrics and ``*.csv`` for tabular
exports. Options may also come from a JSON file passed with ``--config``;
explicit flags take precedence over the file, which takes precedence over
the built-in defaults.

Exit codes: 0 on success, 1 on invalid input or data, 2 on a numeric
failure during computation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import evalsuite, interpret, synth
from .errors import CompographError, NumericFailure
from .graphio import (
    connected_link_split,
    largest_component,
    load_edge_list,
    load_labels,
    sample_test_negatives,
)
from .model import BASIS_MODES, FIXED_HELMERT, embed_all, load_checkpoint, save_checkpoint
from .train import TrainConfig, fit


class UsageError(CompographError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of option values (flags override it)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)


def _add_train(p: argparse.ArgumentParser, K: int = 9) -> None:
    p.add_argument("--K", type=int, default=K, help="number of archetypes (D = K - 1)")
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--neg-ratio", type=float, default=5.0)
    p.add_argument("--basis", choices=BASIS_MODES, default=FIXED_HELMERT)
    p.add_argument("--log-every", type=int, default=0)


def _add_split(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fraction", type=float, default=0.5, help="share of edges held out")
    p.add_argument(
        "--preserve-components",
        action="store_true",
        help="accept a disconnected graph and protect a spanning forest",
    )
    p.add_argument("--lcc", action="store_true", help="restrict to the largest connected component")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="compograph", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model and write a checkpoint")
    _add_common(p)
    p.add_argument("--edges")
    _add_train(p)
    p.add_argument(
        "--holdout",
        type=float,
        default=0.0,
        help="train on the residual of a link split with this fraction (split seed = --seed)",
    )
    p.add_argument("--preserve-components", action="store_true")
    p.add_argument("--lcc", action="store_true")

    p = sub.add_parser("linkpred", help="link prediction over dimensions and seeds")
    _add_common(p)
    p.add_argument("--edges")
    _add_train(p)
    _add_split(p)
    p.add_argument("--dims", type=int, nargs="+", default=None, help="dimensions D (K = D + 1)")
    p.add_argument("--seeds", type=int, default=1, help="number of runs, seeds --seed, --seed+1, ...")

    p = sub.add_parser("nodeclass", help="node classification probe on frozen embeddings")
    _add_common(p)
    p.add_argument("--edges")
    p.add_argument("--labels")
    _add_train(p, K=17)
    p.add_argument("--dim", type=int, default=None, help="dimension D (overrides --K)")
    p.add_argument("--export-features", action="store_true", help="write features.csv")
    p.add_argument(
        "--dyadic",
        choices=evalsuite.DYADIC_OPERATORS,
        default=None,
        help="also write pair_features.csv for edges and sampled non-edges",
    )

    p = sub.add_parser("subcomp", help="link prediction under random subcompositions")
    _add_common(p)
    p.add_argument("--edges")
    p.add_argument("--checkpoint", help="model trained on the split residual (else train one)")
    _add_train(p, K=65)
    _add_split(p)
    p.add_argument("--keep", type=int, nargs="+", default=None, help="kept component counts")
    p.add_argument("--masks", type=int, default=50)
    p.add_argument("--calibrate", choices=("off", "on", "both"), default="both")

    p = sub.add_parser("synth", help="synthetic membership recovery")
    _add_common(p)
    _add_train(p)
    p.add_argument("--generator", choices=(synth.ILR_DISTANCE, synth.BILINEAR), default=synth.ILR_DISTANCE)
    p.add_argument("--regime", choices=tuple(synth.CONCENTRATION), default=synth.CONTINUOUS)
    p.add_argument("--N", type=int, default=800)
    p.add_argument("--K-true", type=int, default=8)
    p.add_argument("--degree", type=float, default=20.0, help="target mean degree")
    p.add_argument("--seeds", type=int, default=1)

    p = sub.add_parser("probe", help="balance probe against node labels")
    _add_common(p)
    p.add_argument("--edges")
    p.add_argument("--labels")
    p.add_argument("--checkpoint", help="trained model (else train on the full graph)")
    _add_train(p)
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--varimax", action="store_true", help="probe varimax-rotated balances")

    p = sub.add_parser("trajectory", help="export a paired log-ratio trade-off path")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--node", type=int, default=0)
    p.add_argument("--a", type=int, default=0)
    p.add_argument("--b", type=int, default=1)
    p.add_argument("--smin", type=float, default=-2.0)
    p.add_argument("--smax", type=float, default=2.0)
    p.add_argument("--steps", type=int, default=41)
    return parser


def parse_args(argv) -> argparse.Namespace:
    """Parse ``argv`` with values from ``--config`` acting as defaults."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required; see --help")
    if args.config:
        path = Path(args.config)
        try:
            values = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read config file {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(values, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        values = {k.replace("-", "_"): v for k, v in values.items()}
        unknown = sorted(set(values) - known - {"command"})
        if unknown:
            raise UsageError(f"{path}: unknown options for {args.command}: {unknown}")
        values.pop("command", None)
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def _need(args, *names) -> None:
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise UsageError(f"--{name.replace('_', '-')} is required for {args.command}")


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "config"}


def _train_config(args, K=None, seed=None) -> TrainConfig:
    return TrainConfig(
        K=args.K if K is None else K,
        iterations=args.iters,
        lr=args.lr,
        neg_ratio=args.neg_ratio,
        seed=args.seed if seed is None else seed,
        basis_mode=args.basis,
        log_every=args.log_every,
    ).validate()


def _load_graph(args):
    graph = load_edge_list(args.edges)
    if getattr(args, "lcc", False):
        graph, _ = largest_component(graph)
    return graph


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> None:
    _need(args, "edges")
    config = _train_config(args)
    graph = _load_graph(args)
    out = _outdir(args)
    details = {"num_nodes": graph.num_nodes, "num_edges": graph.num_edges}
    if args.holdout > 0:
        split = connected_link_split(graph, args.holdout, args.seed, args.preserve_components)
        graph = split.residual
        details["num_train_edges"] = graph.num_edges
    state = fit(graph, config)
    save_checkpoint(state, out / "checkpoint.json")
    evalsuite.EvalReport(
        "train",
        evalsuite.composition_stats(state.compositions()),
        config_echo=_echo(args),
        details=details,
    ).save(out / "report.json")


def cmd_linkpred(args) -> None:
    _need(args, "edges")
    dims = args.dims or [args.K - 1]
    seeds = [args.seed + r for r in range(args.seeds)]
    configs = {D: _train_config(args, K=D + 1) for D in dims}
    graph = _load_graph(args)
    out = _outdir(args)
    rows, runs, by_dim = [], [], {}
    for D in dims:
        dim_rows = []
        for s in seeds:
            split = connected_link_split(graph, args.fraction, s, args.preserve_components)
            state = fit(split.residual, TrainConfig(**{**configs[D].to_dict(), "seed": s}))
            rep = evalsuite.link_predict_eval(state, split)
            dim_rows.append(rep.metrics)
            runs.append({"D": D, "seed": s, "n_test_pos": len(split.test_pos), "dropped": split.dropped})
        rows.extend(dim_rows)
        by_dim[str(D)] = evalsuite.mean_metrics(dim_rows)
    evalsuite.EvalReport(
        "linkpred",
        evalsuite.mean_metrics(rows),
        rows,
        config_echo=_echo(args),
        details={"runs": runs, "by_dim": by_dim},
    ).save(out / "report.json")


def cmd_nodeclass(args) -> None:
    _need(args, "edges", "labels")
    K = args.dim + 1 if args.dim is not None else args.K
    config = _train_config(args, K=K)
    graph = _load_graph(args)
    labels = load_labels(args.labels, graph)
    out = _outdir(args)
    split = evalsuite.probe_split(labels, args.seed)
    state = fit(graph, config)
    X = embed_all(state)
    rep = evalsuite.multinomial_probe(X, labels, split)
    rep.config_echo = {**_echo(args), "K": K, "probe": rep.config_echo}
    rep.save(out / "report.json")
    save_checkpoint(state, out / "checkpoint.json")
    if args.export_features:
        interpret.write_embedding_csv(out / "features.csv", X, graph.node_names)
    if args.dyadic:
        rng = np.random.default_rng([args.seed, 2])
        neg = sample_test_negatives(graph, min(graph.num_edges, graph.num_non_edges), rng)
        pairs = np.vstack([graph.edges, neg])
        y = np.r_[np.ones(graph.num_edges), np.zeros(len(neg))].astype(int)
        F = evalsuite.dyadic_features(X, pairs, args.dyadic)
        _write_pair_features(out / "pair_features.csv", pairs, y, F, graph.node_names)


def _write_pair_features(path, pairs, y, F, names) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v", "y"] + [f"f{d}" for d in range(F.shape[1])])
        for (i, j), lab, row in zip(pairs.tolist(), y.tolist(), F):
            w.writerow([names[i] if names else i, names[j] if names else j, lab] + [repr(float(v)) for v in row])


def cmd_subcomp(args) -> None:
    _need(args, "edges")
    graph = _load_graph(args)
    split = connected_link_split(graph, args.fraction, args.seed, args.preserve_components)
    if args.checkpoint:
        state = load_checkpoint(args.checkpoint)
        if state.N != graph.num_nodes:
            raise UsageError(f"checkpoint has {state.N} nodes, graph has {graph.num_nodes}")
    else:
        state = fit(split.residual, _train_config(args))
    keep = args.keep or [max(2, (state.K + 1) // 2)]
    out = _outdir(args)
    modes = {"off": [False], "on": [True], "both": [False, True]}[args.calibrate]
    reports = {c: evalsuite.subcomp_eval(state, split, keep, args.masks, c, args.seed) for c in modes}
    main = reports[modes[0]]
    details = {"calibrated" if c else "uncalibrated": r.details["curve"] for c, r in reports.items()}
    evalsuite.EvalReport(
        "subcomp",
        main.metrics,
        main.per_seed,
        config_echo={**_echo(args), "K": state.K, "keep": keep},
        details=details,
    ).save(out / "report.json")
    if not args.checkpoint:
        save_checkpoint(state, out / "checkpoint.json")


def cmd_synth(args) -> None:
    tc = _train_config(args, K=args.K_true)
    out = _outdir(args)
    rows, details = [], []
    for r in range(args.seeds):
        s = args.seed + r
        sc = synth.SynthConfig(args.N, args.K_true, args.regime, args.generator, args.degree, s).validate()
        rep = synth.run_recovery_experiment(sc, TrainConfig(**{**tc.to_dict(), "seed": s}))
        rows.append(rep.metrics)
        details.append({"seed": s, **rep.details})
        synth.write_memberships_csv(out / f"truth_seed{s}.csv", synth.sample_memberships(sc))
    evalsuite.EvalReport(
        "synth", evalsuite.mean_metrics(rows), rows, config_echo=_echo(args), details={"runs": details}
    ).save(out / "report.json")


def cmd_probe(args) -> None:
    _need(args, "edges", "labels")
    graph = _load_graph(args)
    labels = load_labels(args.labels, graph)
    if args.checkpoint:
        state = load_checkpoint(args.checkpoint)
        if state.N != graph.num_nodes:
            raise UsageError(f"checkpoint has {state.N} nodes, graph has {graph.num_nodes}")
    else:
        state = fit(graph, _train_config(args))
    out = _outdir(args)
    loadings = interpret.export_loadings(state, rotate_varimax=args.varimax)
    coords = state.logits @ loadings.columns
    rep = evalsuite.balance_probe(state, labels, args.bins, seed=args.seed, coords=coords)
    rep.config_echo = {**_echo(args), "probe": rep.config_echo, "basis_kind": loadings.basis_kind}
    rep.save(out / "report.json")
    interpret.write_loadings_csv(out / "loadings.csv", loadings)
    interpret.write_coordinate_table_csv(out / "coordinates.csv", coords, labels, graph.node_names)


def cmd_trajectory(args) -> None:
    _need(args, "checkpoint")
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    state = load_checkpoint(args.checkpoint)
    s_grid = np.linspace(args.smin, args.smax, args.steps)
    # snap the grid point nearest zero so the path passes through the node itself
    if args.smin <= 0 <= args.smax:
        s_grid[np.argmin(np.abs(s_grid))] = 0.0
    traj = interpret.export_trajectory(state, args.node, args.a, args.b, s_grid)
    out = _outdir(args)
    interpret.write_trajectory_csv(out / "trajectory.csv", traj)
    interpret.write_loadings_csv(out / "loadings.csv", interpret.export_loadings(state))


COMMANDS = {
    "train": cmd_train,
    "linkpred": cmd_linkpred,
    "nodeclass": cmd_nodeclass,
    "subcomp": cmd_subcomp,
    "synth": cmd_synth,
    "probe": cmd_probe,
    "trajectory": cmd_trajectory,
}


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        COMMANDS[args.command](args)
    except NumericFailure as exc:
        print(f"compograph: numeric failure: {exc}", file=sys.stderr)
        return 2
    except (CompographError, ValueError) as exc:
        print(f"compograph: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        where = f": {exc.filename}" if exc.filename else ""
        print(f"compograph: error: {exc.strerror or exc}{where}", file=sys.stderr)
        return 1
    except FloatingPointError as exc:
        print(f"compograph: numeric failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
