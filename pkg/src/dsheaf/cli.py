"""Command-line surface: verification, data generation, training, reporting.

Config files are line-based ``key = value`` text with ``#`` comments; keys
are the :class:`~dsheaf.train.ExperimentConfig` field names and unknown keys
are rejected.  Every run directory receives the fully resolved config, so
re-running from that file reproduces the outputs byte for byte.

Exit codes: 0 on success, 1 on verification failure, 2 on usage/config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import datasets as dio
from .graph import DirectedGraph, degree_features, dsbm_communities, dsbm_generate, uniform_dsbm_params
from .graph import Edge, EdgeKind
from .gradcheck import check_model_gradients
from .nn import ModelConfig, SheafDiffusionModel
from .sheaf import MapClass
from .train import ExperimentConfig, ExperimentSummary, run_experiment
from .verify import run_all_suites

GRAD_CHECK_BOUND = 1e-4


class ConfigError(Exception):
    pass


def parse_config_text(text: str, path: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _coerce(name: str, text: str, target_type) -> object:
    try:
        if target_type is bool:
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        return target_type(text)
    except ValueError:
        raise ConfigError(f"config key {name!r}: cannot parse {text!r} as {target_type.__name__}") from None


def experiment_config(raw: dict[str, str]) -> ExperimentConfig:
    """Build an ExperimentConfig from string settings, rejecting unknown keys."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {}
    for name, text in raw.items():
        ftype = {"int": int, "float": float, "str": str, "bool": bool}[fields[name].type]
        kwargs[name] = _coerce(name, text, ftype)
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def format_config(config: ExperimentConfig) -> str:
    """Fully resolved, re-parseable ``key = value`` form of a config."""
    lines = ["# resolved experiment configuration"]
    for f in dataclasses.fields(ExperimentConfig):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def load_experiment_config(args) -> ExperimentConfig:
    raw: dict[str, str] = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        raw = parse_config_text(path.read_text(encoding="utf-8"), str(path))
    config = experiment_config(raw)
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


# --- commands --------------------------------------------------------------


def cmd_verify(args) -> int:
    results = run_all_suites(seed=args.seed if args.seed is not None else 0,
                             trials=args.trials)
    lines = [r.line() for r in results]
    report = "\n".join(lines)
    print(report)
    ok = all(r.passed for r in results)
    print(f"verification {'PASSED' if ok else 'FAILED'} ({sum(r.passed for r in results)}/{len(results)} suites)")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify_report.txt").write_text(report + "\n", encoding="utf-8")
    return 0 if ok else 1


def cmd_dsbm(args) -> int:
    config = load_experiment_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = uniform_dsbm_params(config.n, config.communities, config.alpha_intra,
                                 config.alpha_inter, config.beta, seed=config.seed)
    graph = dsbm_generate(params)
    dio.save_edge_list(graph, out / "edges.txt")
    dio.save_features(degree_features(graph), out / "features.csv")
    dio.save_labels(dsbm_communities(config.n, config.communities), out / "labels.txt")
    (out / "config.txt").write_text(format_config(config), encoding="utf-8")
    print(f"wrote {graph.n} nodes, {graph.m} edges to {out}")
    return 0


def _summary_text(summary: ExperimentSummary, config: ExperimentConfig) -> str:
    lines = [
        f"test_acc_mean = {summary.mean_test_acc!r}",
        f"test_acc_std = {summary.std_test_acc!r}",
        f"seeds = {','.join(str(s) for s in summary.seeds)}",
        f"q = {config.q}",
        f"map_class = {config.map_class}",
    ]
    for r in summary.per_seed:
        lines.append(f"seed_{r.seed} = {r.test_acc!r} (best epoch {r.best_epoch}, {r.stop_reason})")
    lines.append(f"# accuracy: {100 * summary.mean_test_acc:.2f}+-{100 * summary.std_test_acc:.2f} %")
    return "\n".join(lines) + "\n"


def cmd_train(args) -> int:
    config = load_experiment_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = run_experiment(config)
    for seed, history in zip(summary.seeds, summary.histories):
        history.write_csv(out / f"history_seed{seed}.csv")
    (out / "summary.txt").write_text(_summary_text(summary, config), encoding="utf-8")
    (out / "config.txt").write_text(format_config(config), encoding="utf-8")
    print(f"test accuracy over {len(summary.seeds)} seeds: "
          f"{100 * summary.mean_test_acc:.2f}+-{100 * summary.std_test_acc:.2f} %")
    return 0


def _grad_check_instance(seed: int):
    rng = np.random.default_rng(seed)
    edges = (Edge(0, 1, EdgeKind.DIRECTED), Edge(1, 2, EdgeKind.UNDIRECTED),
             Edge(2, 3, EdgeKind.DIRECTED), Edge(4, 2, EdgeKind.DIRECTED),
             Edge(5, 6, EdgeKind.UNDIRECTED), Edge(6, 0, EdgeKind.DIRECTED),
             Edge(3, 7, EdgeKind.DIRECTED), Edge(7, 4, EdgeKind.UNDIRECTED))
    graph = DirectedGraph(8, edges)
    features = rng.normal(size=(8, 3))
    labels = rng.integers(0, 3, size=8)
    return graph, features, labels


def cmd_grad_check(args) -> int:
    seed = args.seed if args.seed is not None else 0
    graph, features, labels = _grad_check_instance(seed)
    mask = np.ones(graph.n, dtype=bool)
    worst_overall = 0.0
    for map_class in MapClass:
        config = ModelConfig(input_dim=features.shape[1], num_classes=3, num_layers=2,
                             d=2, q=0.25, hidden_channels=3, map_class=map_class,
                             sheaf_act="tanh", phi_hidden=8)
        model = SheafDiffusionModel(config, graph)
        params = model.init_params(np.random.default_rng(seed + 1))
        worst, _ = check_model_gradients(model, params, features, labels, mask)
        worst_overall = max(worst_overall, worst)
        print(f"map class {map_class.value:<10s} worst relative error {worst:.3e}")
    ok = worst_overall <= GRAD_CHECK_BOUND
    print(f"gradient check {'PASSED' if ok else 'FAILED'}: "
          f"worst {worst_overall:.3e} vs bound {GRAD_CHECK_BOUND:.0e}")
    return 0 if ok else 1


def cmd_report(args) -> int:
    rows = []
    for run_dir in args.run_dirs:
        path = Path(run_dir) / "summary.txt"
        if not path.exists():
            raise ConfigError(f"no summary.txt in {run_dir}")
        summary = parse_config_text(path.read_text(encoding="utf-8"), str(path))
        mean = float(summary.get("test_acc_mean", "nan"))
        std = float(summary.get("test_acc_std", "nan"))
        rows.append((Path(run_dir).name, summary.get("q", "?"),
                     summary.get("map_class", "?"), mean, std))
    print(f"{'run':<24s} {'q':>6s} {'maps':<12s} {'accuracy (mean+-std %)':>24s}")
    for name, q, map_class, mean, std in rows:
        print(f"{name:<24s} {q:>6s} {map_class:<12s} {100 * mean:>15.2f}+-{100 * std:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsheaf",
                                     description="Directed sheaf Laplacian toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the operator verification suites")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dsbm", help="generate a synthetic block-model dataset")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_dsbm)

    p = sub.add_parser("train", help="run the multi-seed training experiment")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grad-check", help="finite-difference gradient validation")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("report", help="aggregate run summaries into one table")
    p.add_argument("run_dirs", nargs="+")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_entry() -> None:
    sys.exit(main())
