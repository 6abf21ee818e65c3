"""Command-line entry point.

Exit codes: 0 success, 1 usage error (help text on stderr), 2 data or
validation error with its location. Every subcommand logs the resolved
configuration and the derived stage seeds into the output directory and
never mutates its input files. ORD_THREADS caps experiment-grid
parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .dataset import (SplitSpec, TabularDataset, load_csv, load_schema,
                      stratified_split, write_csv, write_schema)
from .errors import OrdkitError, UsageError
from .experiments import (MODE_BASELINE, MODE_ORD, MODE_ORD_AFTER,
                          PipelineConfig, ablate_augmentation,
                          ablate_before_after, ablate_overlap_removal,
                          bench_overlap, emit_report, resolve_threads,
                          run_efficacy)
from .generators import GmmGenerator
from .oracle import (NAMED_WORLDS, bayes_label, load_world, make_blobs,
                     world_to_json)
from .overlap import (DEFAULT_TAU_GRID, DEFAULT_TAU_REAL, OverlapConfig,
                      OverlapDetector, select_tau, sweep_tau)
from .rng import child_seed

STAGE_NAMES = ("split", "overlap", "generator-fit", "generator-sample",
               "classifier")


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 on usage problems."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _write_log(out_dir, command, resolved, seeds):
    os.makedirs(out_dir, exist_ok=True)
    doc = {"command": command, "config": resolved,
           "derived_seeds": {f"{name}@{s}": child_seed(s, name)
                             for s in seeds for name in STAGE_NAMES}}
    path = os.path.join(out_dir, "ord_log.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _resolve_world(name_or_path):
    if name_or_path in NAMED_WORLDS:
        return NAMED_WORLDS[name_or_path]()
    return load_world(name_or_path)


def _grid(text):
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands


def _cmd_detect(args):
    data = load_csv(args.data, args.schema)
    det = OverlapDetector(tau=args.tau, k_folds=args.k, n_trees=args.trees,
                          seed=args.seed, strict=args.strict)
    det.fit(data)
    ternary, result = det.transform(data)
    write_csv(ternary, args.out)
    sidecar = os.path.splitext(args.out)[0] + ".json"
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({
            "tau": result.tau,
            "k_folds": args.k,
            "n_trees": args.trees,
            "seed": args.seed,
            "counts": {**result.counts(),
                       "minority": int((data.y == 1).sum())},
            "majority_rows": result.majority_indices.tolist(),
            "fold_index": result.fold_index.tolist(),
            "confidences": result.confidence.tolist(),
        }, fh)
        fh.write("\n")
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    _write_log(out_dir, "detect", {
        "data": args.data, "schema": args.schema, "tau": args.tau,
        "k": args.k, "trees": args.trees, "seed": args.seed,
        "strict": args.strict, "out": args.out}, [args.seed])
    print(f"wrote {args.out} ({result.n_overlap} overlap rows) and {sidecar}")
    return 0


def _cmd_generate(args):
    data = load_csv(args.fit, args.schema)
    labels = [int(t) for t in args.labels.split(",") if t]
    counts = [int(t) for t in args.n.split(",") if t]
    if len(labels) != len(counts):
        raise UsageError("--labels and --n must list the same number of items")
    gen = GmmGenerator(components=args.components,
                       seed=child_seed(args.seed, "generator-fit"),
                       clamp_components=True).fit(data)
    batches = [gen.sample(lab, n, child_seed(args.seed, "generator-sample"))
               for lab, n in zip(labels, counts)]
    out = batches[0]
    if len(batches) > 1:
        out = out.concat(*batches[1:])
    write_csv(out, args.out)
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    _write_log(out_dir, "generate", {
        "fit": args.fit, "schema": args.schema, "labels": labels,
        "n": counts, "components": args.components, "seed": args.seed,
        "out": args.out}, [args.seed])
    print(f"wrote {out.n_rows} rows to {args.out}")
    return 0


def _cmd_toy(args):
    world = _resolve_world(args.world)
    data = make_blobs(world, args.seed)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "toy.csv")
    schema_path = os.path.join(args.out, "toy.schema.json")
    world_path = os.path.join(args.out, "toy.world.json")
    write_csv(data, csv_path)
    write_schema(data, schema_path)
    with open(world_path, "w", encoding="utf-8") as fh:
        json.dump(world_to_json(world), fh, indent=2)
        fh.write("\n")
    _write_log(args.out, "toy", {"world": args.world, "seed": args.seed,
                                 "out": args.out}, [args.seed])
    print(f"wrote {csv_path}, {schema_path}, {world_path}")
    return 0


def _load_run_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}") from exc
    if "data" not in raw:
        raise UsageError("config needs a 'data' entry")
    spec = raw["data"]
    world = None
    if "world" in spec:
        world = _resolve_world(spec["world"])
        data = make_blobs(world, int(spec.get("seed", 0)))
    elif "csv" in spec and "schema" in spec:
        data = load_csv(spec["csv"], spec["schema"])
    else:
        raise UsageError("config 'data' needs either 'world' or 'csv'+'schema'")
    ov = raw.get("overlap", {})
    overlap_cfg = OverlapConfig(
        tau=float(ov.get("tau", DEFAULT_TAU_REAL)),
        k_folds=int(ov.get("k_folds", 2)),
        n_trees=int(ov.get("n_trees", 50)),
        strict=bool(ov.get("strict", False)),
        max_depth=int(ov.get("max_depth", 12)),
        min_leaf=int(ov.get("min_leaf", 2)))
    cfg = PipelineConfig(
        overlap=overlap_cfg,
        generator=dict(raw.get("generator", {"kind": "gmm"})),
        classifiers=tuple(raw.get("classifiers",
                                  ("gbdt", "logistic", "tree", "adaboost", "mlp"))),
        seeds=tuple(int(s) for s in raw.get("seeds", (0, 1, 2))),
        modes=tuple(raw.get("modes", (MODE_ORD, MODE_BASELINE))),
        test_per_class=int(raw.get("test_per_class", 200)),
        synth_per_class=(None if raw.get("synth_per_class") is None
                         else int(raw["synth_per_class"])),
        augment_real_minority=bool(raw.get("augment_real_minority", False)),
        augment_majority_fraction=float(raw.get("augment_majority_fraction", 0.1)),
        world=world,
        classifier_params=dict(raw.get("classifier_params", {})))
    return data, cfg, raw


def emit_plot_data(out_dir, *, ternary, synthetic, world, priors=None):
    """Point-cloud CSVs for the toy visualizations.

    Writes ``real_points.csv`` (the detected training data) and
    ``synthetic_points.csv`` (the generated batch), each with columns
    x, y, class, ord_label, oracle_label, wrong_generation. ``class`` is
    the binary claim (overlap rows count as majority) and
    ``wrong_generation`` marks claims the closed-form oracle rejects.
    """
    os.makedirs(out_dir, exist_ok=True)
    header = "x,y,class,ord_label,oracle_label,wrong_generation"
    paths = {}
    for name, d in (("real_points.csv", ternary),
                    ("synthetic_points.csv", synthetic)):
        path = os.path.join(out_dir, name)
        lines = [header]
        if d is not None and d.n_rows:
            claimed = np.where(d.y == 2, 0, d.y)
            oracle, _ = bayes_label(world, d.X, priors)
            for i in range(d.n_rows):
                lines.append(",".join([
                    repr(float(d.X[i, 0])), repr(float(d.X[i, 1])),
                    str(int(claimed[i])), str(int(d.y[i])),
                    str(int(oracle[i])), str(int(claimed[i] != oracle[i]))]))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
        paths[name] = path
    return paths


def _cmd_run(args):
    data, cfg, raw = _load_run_config(args.config)
    threads = resolve_threads(args.threads)
    report = run_efficacy(data, cfg, threads=threads,
                          keep_artifacts=cfg.world is not None)
    emit_report(report, args.out)
    if cfg.world is not None:
        for art in report.artifacts:
            if art.mode == MODE_ORD and art.ternary is not None:
                emit_plot_data(args.out, ternary=art.ternary,
                               synthetic=art.synthetic, world=cfg.world,
                               priors=cfg.oracle_priors)
                break
    _write_log(args.out, "run", raw, list(cfg.seeds))
    print(f"wrote {os.path.join(args.out, 'cells.csv')} and report.md")
    return 0


def _cmd_ablate(args):
    data, cfg, raw = _load_run_config(args.config)
    if args.which == "removal":
        report = ablate_overlap_removal(data, cfg)
    elif args.which == "before-after":
        report = ablate_before_after(data, cfg, threads=args.threads)
    elif args.which == "augment":
        report = ablate_augmentation(data, cfg,
                                     include_majority_arm=args.majority_arm)
    else:
        raise UsageError(f"unknown ablation {args.which!r}")
    emit_report(report, args.out)
    _write_log(args.out, f"ablate-{args.which}", raw, list(cfg.seeds))
    print(f"wrote {os.path.join(args.out, 'cells.csv')} and report.md")
    return 0


def _cmd_sweep_tau(args):
    data = load_csv(args.data, args.schema)
    cfg = OverlapConfig(tau=args.grid[0] if args.grid else DEFAULT_TAU_REAL,
                        k_folds=args.k, n_trees=args.trees, seed=args.seed)
    grid = args.grid or list(DEFAULT_TAU_GRID)
    os.makedirs(args.out, exist_ok=True)
    if args.r is not None:
        tau, counts = select_tau(data, cfg, grid, args.r)
    else:
        results = sweep_tau(data, cfg, grid)
        counts = [(t, res.n_overlap) for t, _, res in results]
        tau = None
        for t, ternary, _ in results:
            write_csv(ternary, os.path.join(args.out, f"ternary_tau{t:g}.csv"))
    doc = {"grid": [t for t, _ in counts],
           "overlap_counts": [c for _, c in counts]}
    if tau is not None:
        doc["selected_tau"] = tau
        doc["r_percent"] = args.r
    with open(os.path.join(args.out, "sweep.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    _write_log(args.out, "sweep-tau", {
        "data": args.data, "schema": args.schema, "grid": grid, "r": args.r,
        "k": args.k, "trees": args.trees, "seed": args.seed}, [args.seed])
    print(json.dumps(doc))
    return 0


def _cmd_bench(args):
    result = bench_overlap(args.samples, args.features, seed=args.seed)
    line = {"n_samples": result.n_samples, "n_features": result.n_features,
            "seconds": result.seconds}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "bench.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(line, fh)
            fh.write("\n")
        _write_log(args.out, "bench", {"samples": args.samples,
                                       "features": args.features,
                                       "seed": args.seed}, [args.seed])
    print(json.dumps(line))
    return 0


def _cmd_report(args):
    from .experiments import CellMetrics, EvalReport
    report = EvalReport()
    with open(args.cells, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        expected = ["mode", "classifier", "seed", "minority_acc",
                    "majority_acc", "macro_acc", "f1", "auc"]
        if header != expected:
            raise UsageError(f"unexpected cells.csv header {header}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            report.cells.append(CellMetrics(
                mode=parts[0], classifier=parts[1], seed=int(parts[2]),
                minority_acc=float(parts[3]), majority_acc=float(parts[4]),
                macro_acc=float(parts[5]), f1=float(parts[6]),
                auc=float(parts[7])))
    emit_report(report, args.out)
    print(f"wrote {os.path.join(args.out, 'report.md')}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="ord", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="relabel a binary CSV ternary")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU_REAL)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--trees", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("generate", help="fit the mixture stand-in and sample")
    p.add_argument("--fit", required=True, help="training CSV (binary or ternary)")
    p.add_argument("--schema", required=True)
    p.add_argument("--labels", default="0,1")
    p.add_argument("--n", required=True, help="comma list matching --labels")
    p.add_argument("--components", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("toy", help="emit a blob-world dataset")
    p.add_argument("--world", default="blobs1",
                   help="blobs1, blobs2, or a world JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_toy)

    p = sub.add_parser("run", help="run the efficacy experiment grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("ablate", help="run one of the ablation protocols")
    p.add_argument("--which", required=True,
                   choices=("removal", "before-after", "augment"))
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--majority-arm", action="store_true",
                   help="include the +subsampled-majority augmentation arm")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("sweep-tau", help="overlap counts across a tau grid")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--grid", type=_grid, default=None)
    p.add_argument("--r", type=float, default=None,
                   help="select tau by the min(minority, r%% majority) rule")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--trees", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep_tau)

    p = sub.add_parser("bench", help="time detection on synthetic data")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--features", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", help="rebuild report.md from a cells.csv")
    p.add_argument("--cells", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ord: error: {exc}", file=sys.stderr)
        return 1
    except OrdkitError as exc:
        print(f"ord: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
