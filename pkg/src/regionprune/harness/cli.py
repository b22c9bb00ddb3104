"""Command-line interface.

Subcommands: map | locate | fit | plc | ilp | sweep-k | bench | relacc |
recall | render.  Global flags: --seed, --config <json file>, --out <dir>.
Exit codes: 0 success, 2 configuration errors, 3 data errors.

Non-timing commands are deterministic given their inputs and seeds: rerun
with the same configuration and every output file is byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import __version__
from ..compressor import PlcParams, compress, compress_ablated
from ..grid import (
    Region,
    RegionParseError,
    TokenGrid,
    format_region,
    parse_region,
    recall as grid_recall,
    region_to_tokens,
    token_count,
)
from ..localizer import (
    BudgetSpec,
    LOCALIZER_KINDS,
    PredictionsFileError,
    SampleLookupError,
    fit_budget,
    make_localizer,
    mean_recall,
    save_predictions,
)
from ..transformer import (
    POLICY_KEEP_ORIGINAL,
    POLICY_REINDEX,
    PruneConfig,
    count_flops,
    forward_baseline,
    forward_ilp,
)
from . import bench as bench_mod
from . import plots
from .checkpoint import load_params, save_params
from .dataset import (
    Sample,
    file_digest,
    fingerprint,
    load_dataset,
    prompt_embeddings,
    sample_tokens,
    synthetic_dataset,
)
from .errors import ConfigError, DataError
from .render import render_ppm, render_svg
from .runs import (
    METHOD_REGION,
    METHOD_TOPR,
    ModelSpec,
    fit_regions,
    format_relacc,
    prepare_samples,
    relative_accuracy,
    run_pruned_eval,
    sweep_layers,
)

logger = logging.getLogger("regionprune")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    _write_text(path, "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))


def _parse_region_arg(text: str) -> Region:
    region, repairs = parse_region(text)
    for repair in repairs:
        logger.warning("--region %r: %s", text, repair)
    return region


def _parse_rates(text: str) -> list[float]:
    try:
        rates = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as e:
        raise ConfigError(f"bad rates list {text!r}: {e}") from e
    if not rates or not all(0.0 <= r < 1.0 for r in rates):
        raise ConfigError(f"rates must be in [0, 1): {text!r}")
    return rates


def _load_samples(args) -> tuple[list[Sample], dict]:
    """Dataset from --dataset or --synthetic, plus fingerprint material."""
    if (args.dataset is None) == (args.synthetic is None):
        raise ConfigError("exactly one of --dataset or --synthetic is required")
    if args.dataset is not None:
        samples = load_dataset(args.dataset)
        source = {"dataset": file_digest(args.dataset)}
    else:
        samples = synthetic_dataset(args.synthetic, args.seed,
                                    side=args.side, views=args.views)
        source = {"synthetic": args.synthetic, "side": args.side,
                  "views": args.views, "seed": args.seed}
    return samples, source


def _localizer_from_args(args):
    return make_localizer(args.kind, predictions_path=args.predictions,
                          seed=args.seed, size_from=args.size_from)


def _localize_all(localizer, samples) -> list[Region]:
    return [localizer.localize(s) for s in samples]


def _model_from_args(args) -> ModelSpec:
    return ModelSpec(layers=args.layers, heads=args.heads, hidden=args.hidden,
                     mlp_width=args.mlp_width, seed=args.seed)


# ---------------------------------------------------------------- commands


def cmd_map(args, out: Path) -> int:
    region = _parse_region_arg(args.region)
    grid = TokenGrid(side=args.side, views=args.views)
    tokens = region_to_tokens(region, grid)
    print(f"# region {format_region(region)} side {grid.side} "
          f"views {grid.views} tokens {len(tokens)}")
    for idx in tokens.indices:
        print(idx)
    return EXIT_OK


def cmd_locate(args, out: Path) -> int:
    samples, source = _load_samples(args)
    localizer = _localizer_from_args(args)
    regions = _localize_all(localizer, samples)
    save_predictions(out / "predictions.jsonl", dict(zip((s.id for s in samples), regions)))
    summary = {
        "command": "locate",
        "kind": args.kind,
        "samples": len(samples),
        "mean_block_area": float(np.mean([r.block_area for r in regions])),
        "fingerprint": fingerprint({"command": "locate", "kind": args.kind,
                                    "size_from": args.size_from,
                                    "seed": args.seed, "source": source}),
    }
    _write_json(out / "locate_summary.json", summary)
    print(f"locate: {len(samples)} regions ({args.kind}) -> {out / 'predictions.jsonl'}")
    return EXIT_OK


def cmd_fit(args, out: Path) -> int:
    if args.region is not None:
        # Single-region mode: fit one region and print the result.
        region = _parse_region_arg(args.region)
        grid = TokenGrid(side=args.side, views=args.views)
        spec = BudgetSpec(rate=args.rate, grid=grid)
        fitted = fit_budget(region, spec)
        print(f"fitted {format_region(fitted)} kept {token_count(fitted, grid)} "
              f"target {spec.kept_target} of {grid.total_tokens}")
        return EXIT_OK
    samples, source = _load_samples(args)
    localizer = _localizer_from_args(args)
    regions = _localize_all(localizer, samples)
    fitted = fit_regions(samples, regions, args.rate, balance=not args.no_balance)
    rows = []
    kept_total = 0
    target_total = 0
    for sample, region in zip(samples, fitted):
        kept = token_count(region, sample.grid)
        target = BudgetSpec(rate=args.rate, grid=sample.grid).kept_target
        kept_total += kept
        target_total += target
        rows.append({"id": sample.id, "region": format_region(region),
                     "kept": kept, "target": target,
                     "total": sample.grid.total_tokens})
    _write_jsonl(out / "fitted.jsonl", rows)
    summary = {
        "command": "fit",
        "rate": args.rate,
        "balanced": not args.no_balance,
        "samples": len(samples),
        "mean_kept": kept_total / len(samples),
        "mean_target": target_total / len(samples),
        "fingerprint": fingerprint({"command": "fit", "rate": args.rate,
                                    "kind": args.kind, "seed": args.seed,
                                    "balance": not args.no_balance,
                                    "source": source}),
    }
    _write_json(out / "fit_summary.json", summary)
    print(f"fit: mean kept {summary['mean_kept']:.2f} vs target "
          f"{summary['mean_target']:.2f} over {len(samples)} samples")
    return EXIT_OK


def cmd_plc(args, out: Path) -> int:
    samples, source = _load_samples(args)
    localizer = _localizer_from_args(args)
    if args.params is not None:
        params = load_params(args.params)
        if params.dim != args.hidden:
            raise ConfigError(
                f"checkpoint dim {params.dim} != --hidden {args.hidden}")
    else:
        params = PlcParams.initialize(
            args.hidden, n_contextual=args.contextual_queries,
            n_noncontextual=args.noncontextual_queries,
            n_anchor=args.anchor_tokens, seed=args.seed)
    if args.save_params is not None:
        save_params(params, Path(args.save_params))
    rows = []
    for sample in samples:
        tokens = sample_tokens(sample, params.dim)
        region = localizer.localize(sample)
        if args.ablated:
            data = compress_ablated(tokens, region, params)
            provenance = {"compressed-contextual": params.q_contextual.shape[0],
                          "compressed-noncontextual": params.q_noncontextual.shape[0]}
            nc_empty = token_count(region, sample.grid) == sample.grid.total_tokens
        else:
            result = compress(tokens, region, params)
            data = result.tokens
            provenance = {"fused-anchor": params.n_anchor,
                          "compressed-noncontextual": params.q_noncontextual.shape[0]}
            nc_empty = result.noncontextual_source_empty
        contextual = token_count(region, sample.grid)
        rows.append({
            "id": sample.id,
            "region": format_region(region),
            "input_tokens": sample.grid.total_tokens,
            "contextual_rows": contextual,
            "noncontextual_rows": sample.grid.total_tokens - contextual,
            "output_rows": int(data.shape[0]),
            "provenance": provenance,
            "noncontextual_source_empty": nc_empty,
            "output_sha256": hashlib.sha256(data.tobytes()).hexdigest(),
        })
    _write_jsonl(out / "plc_report.jsonl", rows)
    out_rows = rows[0]["output_rows"]
    summary = {
        "command": "plc",
        "ablated": args.ablated,
        "samples": len(samples),
        "output_rows": out_rows,
        "row_arithmetic": (
            f"{params.q_contextual.shape[0]} + {params.q_noncontextual.shape[0]}"
            if args.ablated else
            f"{params.n_anchor} + {params.q_noncontextual.shape[0]}"),
        "note": ("every output has "
                 f"{out_rows} rows; a budget label quoting only the "
                 f"{params.n_anchor if not args.ablated else params.q_contextual.shape[0]}"
                 " primary rows undercounts the "
                 f"{params.q_noncontextual.shape[0]} compressed background rows"),
        "fingerprint": fingerprint({"command": "plc", "kind": args.kind,
                                    "seed": args.seed, "hidden": args.hidden,
                                    "ablated": args.ablated, "source": source}),
    }
    _write_json(out / "plc_summary.json", summary)
    print(f"plc: {len(samples)} samples, {out_rows} output rows each "
          f"({summary['row_arithmetic']})")
    return EXIT_OK


def cmd_ilp(args, out: Path) -> int:
    samples, source = _load_samples(args)
    localizer = _localizer_from_args(args)
    regions = _localize_all(localizer, samples)
    if args.rate is not None:
        regions = fit_regions(samples, regions, args.rate,
                              balance=not args.no_balance)
    model = _model_from_args(args).build()
    prepared = prepare_samples(model, samples, args.seed)
    records, summary = run_pruned_eval(model, prepared, regions,
                                       layer_k=args.layer_k, policy=args.policy,
                                       method=args.method)
    summary.update({
        "command": "ilp",
        "rate": args.rate,
        "kind": args.kind,
        "fingerprint": fingerprint({"command": "ilp", "kind": args.kind,
                                    "rate": args.rate, "layer_k": args.layer_k,
                                    "policy": args.policy, "method": args.method,
                                    "model": vars(_model_from_args(args)),
                                    "seed": args.seed, "source": source}),
    })
    _write_jsonl(out / "ilp_report.jsonl", records)
    _write_json(out / "ilp_summary.json", summary)
    print(f"ilp: mean kept {summary['mean_kept']:.2f} tokens, "
          f"mean pruning rate {summary['mean_pruning_rate']:.4f}, "
          f"mean proxy quality {summary['mean_proxy_quality']:.6f}")
    return EXIT_OK


def cmd_sweep_k(args, out: Path) -> int:
    samples, source = _load_samples(args)
    localizer = _localizer_from_args(args)
    gt_regions = _localize_all(localizer, samples)
    model_spec = _model_from_args(args)
    model = model_spec.build()
    k_max = args.k_max if args.k_max is not None else model.layers
    ks = list(range(args.k_min, k_max + 1, args.k_step))
    if args.k_convention == "before":
        ks = [k - 1 for k in ks]
    if any(k < 1 or k > model.layers for k in ks):
        raise ConfigError(
            f"layer sweep {ks} outside 1..{model.layers} "
            f"(convention {args.k_convention!r})")
    rates = _parse_rates(args.rates)
    prepared = prepare_samples(model, samples, args.seed)
    rows = sweep_layers(model, prepared, gt_regions, rates, ks,
                        balance=not args.no_balance, measure_time=True)
    lines = ["k,rate,proxy_quality,flops,wall_time_ms"]
    for row in rows:
        lines.append(f"{row['k']},{row['rate']!r},{row['proxy_quality']!r},"
                     f"{row['flops']},{row['wall_time_ms']!r}")
    _write_text(out / "sweep_k.csv", "\n".join(lines) + "\n")
    plots.save_sweep_figure(rows, out / "sweep_k.png")
    print(f"sweep-k: {len(rows)} rows -> {out / 'sweep_k.csv'}")
    return EXIT_OK


def cmd_bench(args, out: Path) -> int:
    if args.reps < 3:
        raise ConfigError(f"--reps must be >= 3, got {args.reps}")
    rates = _parse_rates(args.rates)
    sample = synthetic_dataset(1, args.seed, side=args.side, views=args.views)[0]
    sample.m = args.m
    sample.query_len = args.query_len
    model = _model_from_args(args).build()
    tokens = sample_tokens(sample, model.hidden)
    system, query = prompt_embeddings(sample, model.hidden, args.seed)
    from ..transformer import build_sequence
    seq = build_sequence(system, tokens, query)
    baseline = bench_mod.time_median_ms(lambda: forward_baseline(model, seq),
                                        args.reps)
    baseline_flops = count_flops(seq.length, seq.length, model.layers,
                                 model.layers, model.hidden, model.heads,
                                 model.mlp_width)
    rows = []
    for rate in rates:
        spec = BudgetSpec(rate=rate, grid=sample.grid)
        region = fit_budget(sample.gt_region, spec)
        kept = token_count(region, sample.grid)
        cfg = PruneConfig(args.layer_k, region)
        timing = bench_mod.time_median_ms(lambda: forward_ilp(model, seq, cfg),
                                          args.reps)
        after = seq.length - (sample.grid.total_tokens - kept)
        flops = count_flops(seq.length, after, args.layer_k, model.layers,
                            model.hidden, model.heads, model.mlp_width)
        pipeline = bench_mod.pipeline_latency(args.localizer_ms,
                                              timing["median_ms"], args.batches)
        rows.append({
            "rate": rate,
            "kept": kept,
            "median_ms": timing["median_ms"],
            "min_ms": timing["min_ms"],
            "max_ms": timing["max_ms"],
            "speedup": baseline["median_ms"] / timing["median_ms"],
            "flops": flops,
            "flops_ratio": flops / baseline_flops,
            "pipeline": pipeline,
        })
    report = {
        "command": "bench",
        "reps": args.reps,
        "sequence_length": seq.length,
        "model": vars(_model_from_args(args)),
        "baseline": {**baseline, "flops": baseline_flops},
        "rows": rows,
    }
    _write_json(out / "bench.json", report)
    plots.save_bench_figure(rows, baseline["median_ms"], out / "bench.png")
    print(f"bench: baseline median {baseline['median_ms']:.2f} ms "
          f"over {args.reps} reps")
    for row in rows:
        print(f"  rate {row['rate']:.3f}: median {row['median_ms']:.2f} ms, "
              f"speedup {row['speedup']:.2f}x, flops ratio {row['flops_ratio']:.3f}, "
              f"pipeline saving {row['pipeline']['saving_ms']:.2f} ms")
    return EXIT_OK


def _load_metrics(path: str) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read metrics file {path}: {e}") from e
    if isinstance(obj, dict) and isinstance(obj.get("metrics"), dict):
        obj = obj["metrics"]
    if not isinstance(obj, dict):
        raise DataError(f"metrics file {path} must hold a JSON object")
    return obj


def cmd_relacc(args, out: Path) -> int:
    run = _load_metrics(args.run)
    baseline = _load_metrics(args.baseline)
    weights = None
    if args.weights is not None:
        weights = _load_metrics(args.weights)
    ratios, mean = relative_accuracy(run, baseline, weights)
    result = {
        "command": "relacc",
        "per_metric": ratios,
        "mean_ratio": mean,
        "relacc": format_relacc(mean),
        "weighted": weights is not None,
    }
    _write_json(out / "relacc.json", result)
    for key in sorted(ratios):
        print(f"  {key}: {ratios[key] * 100.0:.1f}%")
    print(f"relacc: {result['relacc']}")
    return EXIT_OK


def cmd_recall(args, out: Path) -> int:
    samples, source = _load_samples(args)
    gts = []
    for s in samples:
        if s.gt_region is None:
            raise DataError(f"sample {s.id!r} has no gt_region for recall")
        gts.append(s.gt_region)
    localizer = _localizer_from_args(args)
    preds = _localize_all(localizer, samples)
    summary = mean_recall(gts, preds)
    values = [grid_recall(gt, pred) for gt, pred in zip(gts, preds)]
    header = "count,mean_recall,recall>0.5,recall>0.7,recall>0.9"
    row = (f"{summary.count},{summary.mean!r},{summary.above_05},"
           f"{summary.above_07},{summary.above_09}")
    _write_text(out / "recall.csv", header + "\n" + row + "\n")
    _write_json(out / "recall.json", {
        "command": "recall",
        **summary.as_dict(),
        "kind": args.kind,
        "fingerprint": fingerprint({"command": "recall", "kind": args.kind,
                                    "size_from": args.size_from,
                                    "seed": args.seed, "source": source}),
    })
    plots.save_recall_figure(values, out / "recall.png")
    print(f"recall: n={summary.count} mean={summary.mean:.4f} "
          f">0.5:{summary.above_05} >0.7:{summary.above_07} >0.9:{summary.above_09}")
    return EXIT_OK


def cmd_render(args, out: Path) -> int:
    if args.dataset is not None or args.synthetic is not None:
        samples, _ = _load_samples(args)
        if args.id is None:
            raise ConfigError("--id is required with --dataset/--synthetic")
        matches = [s for s in samples if s.id == args.id]
        if not matches:
            raise DataError(f"sample id {args.id!r} not in dataset")
        sample = matches[0]
        grid = sample.grid
        regions = []
        if sample.gt_region is not None:
            regions.append(("gt", sample.gt_region))
        if args.predictions is not None:
            loc = make_localizer("file", predictions_path=args.predictions)
            regions.append(("pred", loc.localize(sample)))
        if not regions:
            raise ConfigError("nothing to render: no gt_region and no --predictions")
    else:
        if not args.region:
            raise ConfigError("render needs --region (or --dataset/--synthetic with --id)")
        grid = TokenGrid(side=args.side, views=args.views)
        labels = (args.labels.split(",") if args.labels
                  else [f"r{i}" for i in range(len(args.region))])
        if len(labels) != len(args.region):
            raise ConfigError("--labels count must match --region count")
        regions = [(label, _parse_region_arg(text))
                   for label, text in zip(labels, args.region)]
    kept = region_to_tokens(regions[0][1], grid)
    _write_text(out / "overlay.svg", render_svg(grid, regions, kept))
    _write_text(out / "overlay.ppm", render_ppm(grid, regions, kept))
    print(f"render: {len(regions)} region(s) on side-{grid.side} grid -> "
          f"{out / 'overlay.svg'}")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _add_dataset_args(p, *, synthetic_default_side=24):
    p.add_argument("--dataset", help="JSON Lines dataset path")
    p.add_argument("--synthetic", type=int, metavar="N",
                   help="generate N synthetic samples instead of --dataset")
    p.add_argument("--side", type=int, default=synthetic_default_side,
                   help="tokens per edge for synthetic samples")
    p.add_argument("--views", type=int, default=1,
                   help="image views for synthetic samples")


def _add_localizer_args(p):
    p.add_argument("--kind", choices=LOCALIZER_KINDS, default="gt",
                   help="region provider")
    p.add_argument("--predictions", help="predictions JSONL for kind=file")
    p.add_argument("--size-from", choices=("gt", "pred"), default="gt",
                   dest="size_from",
                   help="reference dims for center/random baselines")


def _add_model_args(p):
    p.add_argument("--layers", type=int, default=8)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--mlp-width", type=int, default=None, dest="mlp_width")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="run seed")
    common.add_argument("--config", help="JSON file of option defaults")
    common.add_argument("--out", default="out", help="output directory")

    parser = argparse.ArgumentParser(
        prog="regionprune",
        description="Region-guided visual-token pruning toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("map", parents=[common],
                       help="list token indices covered by a region")
    p.add_argument("--region", required=True, help='e.g. "2 1 5 2"')
    p.add_argument("--side", type=int, default=24)
    p.add_argument("--views", type=int, default=1)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("locate", parents=[common],
                       help="run a region provider over a dataset")
    _add_dataset_args(p)
    _add_localizer_args(p)
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("fit", parents=[common],
                       help="fit regions to a pruning-rate budget")
    p.add_argument("--region", help="single-region mode")
    p.add_argument("--rate", type=float, required=True,
                   help="target pruning rate in [0, 1)")
    _add_dataset_args(p)
    _add_localizer_args(p)
    p.add_argument("--no-balance", action="store_true", dest="no_balance",
                   help="disable dataset-level target balancing")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plc", parents=[common],
                       help="compress dataset tokens with the query banks")
    _add_dataset_args(p)
    _add_localizer_args(p)
    p.add_argument("--hidden", type=int, default=64, help="token width")
    p.add_argument("--contextual-queries", type=int, default=64,
                   dest="contextual_queries")
    p.add_argument("--noncontextual-queries", type=int, default=4,
                   dest="noncontextual_queries")
    p.add_argument("--anchor-tokens", type=int, default=64, dest="anchor_tokens")
    p.add_argument("--params", help="load query banks from a checkpoint")
    p.add_argument("--save-params", dest="save_params",
                   help="write the query banks to a checkpoint")
    p.add_argument("--ablated", action="store_true",
                   help="drop the anchor/fusion path")
    p.set_defaults(func=cmd_plc)

    p = sub.add_parser("ilp", parents=[common],
                       help="prune inside the toy decoder and score quality")
    _add_dataset_args(p)
    _add_localizer_args(p)
    _add_model_args(p)
    p.add_argument("--rate", type=float, default=None,
                   help="budget-fit regions to this pruning rate first")
    p.add_argument("--no-balance", action="store_true", dest="no_balance")
    p.add_argument("--layer-k", type=int, default=2, dest="layer_k")
    p.add_argument("--policy", choices=(POLICY_KEEP_ORIGINAL, POLICY_REINDEX),
                   default=POLICY_KEEP_ORIGINAL)
    p.add_argument("--method", choices=(METHOD_REGION, METHOD_TOPR),
                   default=METHOD_REGION,
                   help="region pruning or the attention-score baseline")
    p.set_defaults(func=cmd_ilp)

    p = sub.add_parser("sweep-k", parents=[common],
                       help="sweep the pruning layer across rates")
    _add_dataset_args(p)
    _add_localizer_args(p)
    _add_model_args(p)
    p.add_argument("--rates", default="0.667,0.778,0.889")
    p.add_argument("--k-min", type=int, default=1, dest="k_min")
    p.add_argument("--k-max", type=int, default=None, dest="k_max")
    p.add_argument("--k-step", type=int, default=1, dest="k_step")
    p.add_argument("--k-convention", choices=("after", "before"),
                   default="after", dest="k_convention",
                   help="prune after block K, or before it (at its input)")
    p.add_argument("--no-balance", action="store_true", dest="no_balance")
    p.set_defaults(func=cmd_sweep_k)

    p = sub.add_parser("bench", parents=[common],
                       help="median wall-clock of baseline vs pruned forwards")
    _add_model_args(p)
    p.add_argument("--rates", default="0.667,0.778,0.889")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--side", type=int, default=24)
    p.add_argument("--views", type=int, default=1)
    p.add_argument("--m", type=int, default=35, help="system prompt rows")
    p.add_argument("--query-len", type=int, default=40, dest="query_len")
    p.add_argument("--layer-k", type=int, default=2, dest="layer_k")
    p.add_argument("--localizer-ms", type=float, default=5.0,
                   dest="localizer_ms",
                   help="modeled localization latency per batch")
    p.add_argument("--batches", type=int, default=8,
                   help="stream length for the pipeline model")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("relacc", parents=[common],
                       help="relative accuracy of a run vs its baseline")
    p.add_argument("--run", required=True, help="metrics JSON")
    p.add_argument("--baseline", required=True, help="baseline metrics JSON")
    p.add_argument("--weights", help="optional metric weights JSON")
    p.set_defaults(func=cmd_relacc)

    p = sub.add_parser("recall", parents=[common],
                       help="area recall of predictions against ground truth")
    _add_dataset_args(p)
    _add_localizer_args(p)
    p.set_defaults(func=cmd_recall)

    p = sub.add_parser("render", parents=[common],
                       help="emit SVG and PPM overlays of regions on a grid")
    p.add_argument("--region", action="append", default=[],
                   help="region string; repeatable")
    p.add_argument("--labels", help="comma-separated labels for --region")
    _add_dataset_args(p)
    p.add_argument("--id", help="sample id to render from the dataset")
    p.add_argument("--predictions", help="overlay the stored prediction")
    p.set_defaults(func=cmd_render)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Load --config JSON (if any) as parser-wide defaults."""
    if "--config" not in argv:
        return
    path = argv[argv.index("--config") + 1]
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, IndexError) as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    defaults = {key.replace("-", "_"): value for key, value in cfg.items()}
    # Applies to the selected subparser through the shared namespace.
    for action in parser._subparsers._group_actions:  # noqa: SLF001
        for sp in action.choices.values():
            known = {a.dest for a in sp._actions}  # noqa: SLF001
            sp.set_defaults(**{k: v for k, v in defaults.items() if k in known})


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return args.func(args, out)
    except (DataError, SampleLookupError, PredictionsFileError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, RegionParseError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
