"""Command-line entry point: ``evonet run | generate | ablate``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import (ABLATIONS, AblationSwitches, ConfigError, ExperimentConfig, StreamSpec, build_stream,
                     load_config)
from .harness import BatchError, run_prequential
from .network import MODES
from .streams import (RegressionConfig, SeaConfig, StreamFormatError, concept_boundaries, regression_arrays,
                      sea_arrays, write_csv, write_metadata)

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI experiment config (.cfg)")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--disable", default="", help="comma list of ablation switches")
    p.add_argument("--alpha-drift", type=float)
    p.add_argument("--alpha-warning", type=float)
    p.add_argument("--delta", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evonet", description="Self-evolving MLP for data streams.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="prequential run writing a JSON-lines metrics file")
    _common(run)
    run.add_argument("--out", default="metrics.jsonl")

    gen = sub.add_parser("generate", help="write a synthetic stream as CSV")
    gen.add_argument("kind", help="sea or regression")
    gen.add_argument("--config", help="take stream parameters from this config's [stream] section")
    gen.add_argument("--out", help="CSV path (default <kind>.csv)")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--concepts", type=int, default=None, help="number of concepts to emit")
    gen.add_argument("--samples-per-concept", type=int, default=None)

    abl = sub.add_parser("ablate", help="full learner vs single-switch ablations over seeds")
    _common(abl)
    abl.add_argument("--switches", default=",".join(ABLATIONS))
    abl.add_argument("--seeds", default="0,1,2")
    abl.add_argument("--out", help="optional JSON file for the table")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = dict(seed=args.seed, mode=args.mode, alpha_drift=args.alpha_drift,
                     alpha_warning=args.alpha_warning, delta=args.delta)
    if args.disable.strip():
        overrides["ablation"] = AblationSwitches.from_names(args.disable.split(","))
    return cfg.with_overrides(**overrides)


def _describe(summary: dict) -> str:
    if "accuracy_mean" in summary:
        score = f"accuracy {summary['accuracy_mean']:.4f} +- {summary['accuracy_std']:.4f}"
    else:
        score = (f"rmse {summary['rmse_mean']:.4f} +- {summary['rmse_std']:.4f}, "
                 f"ndei {summary['ndei_mean']:.4f}")
    ev = summary["events"]
    return (f"{score}; layers {summary['layers_mean']:.2f} (final {summary['final_layers']}), "
            f"nodes {summary['nodes_mean']:.2f} (final {summary['final_nodes']}); "
            f"events grow={ev['grow']} prune={ev['prune']} layer={ev['layer']}; "
            f"runtime {summary['runtime']:.1f}s")


def cmd_run(args) -> int:
    cfg = _config(args)
    stream = build_stream(cfg)
    out = Path(args.out)
    try:
        sink = open(out, "w", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write {out}: {exc}") from exc
    with sink:
        result = run_prequential(stream, cfg, sink)
    print(_describe(result.summary))
    print(f"metrics written to {out}")
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.kind not in ("sea", "regression"):
        print(f"error: unknown stream kind {args.kind!r} (expected sea or regression)", file=sys.stderr)
        build_parser().print_usage(sys.stderr)
        return EXIT_USAGE
    stream = load_config(args.config).stream if args.config else StreamSpec()
    seed = args.seed if args.seed is not None else (stream.seed or 0)
    if args.kind == "sea":
        thresholds = _cycle(stream.thresholds, args.concepts)
        spc = args.samples_per_concept or stream.samples_per_concept or SeaConfig.samples_per_concept
        cfg = SeaConfig(thresholds, spc, stream.noise_rate, seed=seed)
        X, targets, _ = sea_arrays(cfg)
        names = ("label",)
        extra = {"thresholds": list(thresholds), "noise_rate": cfg.noise_rate}
    else:
        omegas = _cycle(stream.omegas, args.concepts)
        spc = args.samples_per_concept or stream.samples_per_concept or RegressionConfig.samples_per_concept
        cfg = RegressionConfig(omegas, spc, stream.noise_std, stream.outputs, seed=seed)
        X, targets, _ = regression_arrays(cfg)
        names = tuple(f"y{i + 1}" for i in range(targets.shape[1]))
        extra = {"omegas": list(omegas), "noise_std": cfg.noise_std}
    n_concepts = len(thresholds) if args.kind == "sea" else len(omegas)
    boundaries = concept_boundaries(spc, n_concepts)
    out = Path(args.out or f"{args.kind}.csv")
    try:
        write_csv(out, X, targets, target_names=names)
        meta = {"kind": args.kind, "seed": seed, "rows": int(len(X)), "targets": list(names),
                "concepts": n_concepts, "samples_per_concept": spc,
                "boundaries": boundaries, "drift_points": boundaries[1:], **extra}
        side = write_metadata(out, meta)
    except OSError as exc:
        print(f"error: cannot write {out}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote {len(X)} rows to {out} (metadata in {side})")
    return EXIT_OK


def _cycle(values, count):
    values = tuple(values)
    if not count:
        return values
    if count < 1:
        raise ConfigError("--concepts must be positive")
    return tuple(values[i % len(values)] for i in range(count))


def ablation_table(cfg: ExperimentConfig, switches, seeds) -> list[dict]:
    """One row per configuration, full learner first."""
    configs = [("full", AblationSwitches())]
    configs += [(name, AblationSwitches.from_names([name])) for name in switches]
    rows = []
    for label, ablation in configs:
        summaries = []
        for seed in seeds:
            run_cfg = cfg.with_overrides(seed=seed, ablation=ablation)
            summaries.append(run_prequential(build_stream(run_cfg), run_cfg).summary)
        key = "accuracy_mean" if cfg.mode == "classification" else "rmse_mean"
        scores = np.array([s[key] for s in summaries])
        rows.append({
            "config": label,
            "runs": len(summaries),
            "score": key.replace("_mean", ""),
            "mean": float(scores.mean()),
            "std": float(scores.std()),
            "layers": float(np.mean([s["layers_mean"] for s in summaries])),
            "nodes": float(np.mean([s["nodes_mean"] for s in summaries])),
            "final_layers": float(np.mean([s["final_layers"] for s in summaries])),
        })
    return rows


def format_table(rows) -> str:
    lines = [f"{'config':<26}{'runs':>5}{'score':>10}{'mean':>10}{'std':>9}{'layers':>9}{'nodes':>9}"]
    for r in rows:
        lines.append(f"{r['config']:<26}{r['runs']:>5}{r['score']:>10}{r['mean']:>10.4f}{r['std']:>9.4f}"
                     f"{r['layers']:>9.2f}{r['nodes']:>9.2f}")
    return "\n".join(lines)


def cmd_ablate(args) -> int:
    cfg = _config(args)
    switches = [_switch_name(s) for s in args.switches.split(",") if s.strip()]
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad seed list {args.seeds!r}") from exc
    if not seeds:
        raise ConfigError("need at least one seed")
    rows = ablation_table(cfg, switches, seeds)
    print(format_table(rows))
    if args.out:
        try:
            Path(args.out).write_text(json.dumps(rows, indent=2), encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot write {args.out}: {exc}") from exc
    return EXIT_OK


def _switch_name(raw: str) -> str:
    # validates and canonicalises a single switch name
    return AblationSwitches.from_names([raw]).active()[0]


COMMANDS = {"run": cmd_run, "generate": cmd_generate, "ablate": cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, StreamFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BatchError as exc:
        print(f"error: numeric failure at {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
