"""Command-line entry point.

Subcommands: train, hv, stats, report, sweep, eval. Every command resolves
its configuration (JSON config file, overridden by flags), writes the
resolved config next to its outputs so the run can be reproduced exactly,
and exits with a stable code: 0 success, 2 input error, 3 precondition
error, 4 numeric failure. Failures emit a machine-readable error JSON on
stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import secrets
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import data, pareto, report, seeds, trainer
from .errors import (ConfigError, DimensionError, GridError, NumericError,
                     ParseError, UndefinedMetricError)
from .losses import geometric_mean

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PRECONDITION = 3
EXIT_NUMERIC = 4

_INPUT_ERRORS = (ParseError, DimensionError, FileNotFoundError, IsADirectoryError,
                 PermissionError, json.JSONDecodeError, KeyError)
_PRECONDITION_ERRORS = (ConfigError, GridError, UndefinedMetricError, ValueError)
_NUMERIC_ERRORS = (NumericError, FloatingPointError, np.linalg.LinAlgError)


def _fail(exc: Exception, code: int) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}))
    return code


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    raw = Path(os.path.expandvars(os.path.expanduser(path))).read_text()
    cfg = json.loads(raw)
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def _resolve(args, file_cfg: dict, keys: list[str]) -> dict:
    """Merge config-file values with CLI flags; flags win when given."""
    resolved = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in file_cfg:
            resolved[key] = file_cfg[key]
    if resolved.get("seed") is None:
        resolved["seed"] = secrets.randbits(32)
    return resolved


def _expand_path(p):
    return Path(os.path.expandvars(os.path.expanduser(str(p))))


def _out_dir(args, command: str) -> Path:
    out = getattr(args, "out", None) or f"hvml_out/{command}"
    out = _expand_path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_resolved(out: Path, command: str, resolved: dict) -> None:
    (out / "resolved_config.json").write_text(
        json.dumps({"command": command, **resolved}, indent=2, sort_keys=True))


def _losses_json(lv, bce) -> dict:
    return {"l1": lv.l1, "l2": lv.l2, "l3": lv.l3, "l4": bce,
            "geometric_mean": geometric_mean(lv)}


def _prepare_dataset(manifest_path, seed: int) -> data.Dataset:
    ds = data.load_manifest(_expand_path(manifest_path))
    ds = ds.with_split(data.stratified_split(ds, seed))
    return data.normalize(ds)


def _train_config(resolved: dict) -> trainer.TrainConfig:
    keys = {f for f in trainer.TrainConfig.__dataclass_fields__}
    return trainer.TrainConfig(**{k: v for k, v in resolved.items() if k in keys})


# ---------------------------------------------------------------------------
# commands

def cmd_train(args) -> int:
    file_cfg = _load_config_file(args.config)
    resolved = _resolve(args, file_cfg, [
        "manifest", "seed", "epochs", "embedding", "mc_samples", "threshold",
        "sigma", "lambda_pop", "mu", "c_cov", "literal_cma", "exact_fitness",
        "archive_cap", "track_archive_hv", "workers", "sigma_rule",
    ])
    if "manifest" not in resolved:
        raise ConfigError("train requires a dataset manifest (--manifest or config)")
    out = _out_dir(args, "train")
    _write_resolved(out, "train", resolved)
    config = _train_config(resolved)
    dataset = _prepare_dataset(resolved["manifest"], config.seed)

    resume_state = None
    if args.resume:
        resume_state, saved_cfg = trainer.load_checkpoint(_expand_path(args.resume))
        config = saved_cfg
    result = trainer.train(dataset, config, resume_state=resume_state)

    trainer.emit_curves(result.curves, out / "curves.csv")
    trainer.save_checkpoint(result.state, config, out)
    summary = {
        "dataset": dataset.name,
        "epochs": result.epochs_run,
        "seed": config.seed,
        "final": {
            "validation": _losses_json(result.final.validation, result.final.validation_bce),
            "test": _losses_json(result.final_test, result.final_test_bce),
        },
        "per_loss": {
            key: {
                "validation": _losses_json(inc.validation, inc.validation_bce),
                "test": _losses_json(*result.best_per_loss_test[key]),
                "epoch": inc.epoch,
            }
            for key, inc in sorted(result.best_per_loss.items())
        },
        "archive_size": len(result.archive),
        "archive_hv": result.archive_hv[-1] if result.archive_hv else None,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_hv(args) -> int:
    path = _expand_path(args.front)
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, cells in enumerate(csv.reader(fh), start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if lineno == 1 and any(not _is_float(c) for c in cells[-3:]):
                continue  # header row
            if len(cells) < 3:
                raise ParseError(f"need at least 3 loss columns, got {len(cells)}", path, lineno)
            try:
                vec = [float(c) for c in cells[-3:]]
            except ValueError:
                raise ParseError(f"non-numeric loss value in row {cells!r}", path, lineno) from None
            tag = cells[0] if len(cells) > 3 else f"row{lineno}"
            rows.append((np.array(vec), tag))
    ref = np.array([float(v) for v in args.ref.split(",")]) if args.ref else pareto.UNIT_REF
    out = _out_dir(args, "hv")
    _write_resolved(out, "hv", {"front": str(path), "ref": list(map(float, ref)),
                                "mc_samples": args.mc_samples, "seed": args.seed or 0})
    total = pareto.exact_hypervolume([p for p, _ in rows], ref) if rows else 0.0
    lines = [f"total_hypervolume {total:.6f}"]
    report_rows = []
    for vec, tag in rows:
        exact = pareto.exact_contribution(rows, tag, ref)
        entry = {"tag": tag, "losses": list(vec), "contribution": exact}
        if args.mc_samples:
            entry["mc_contribution"] = pareto.mc_contribution(
                rows, tag, ref, g=args.mc_samples,
                seed=seeds.seed_sequence(args.seed or 0, seeds.STREAM_MC, 0, len(report_rows)))
        report_rows.append(entry)
        mc = f" mc={entry['mc_contribution']:.6f}" if "mc_contribution" in entry else ""
        lines.append(f"{tag} contribution={exact:.6f}{mc}")
    (out / "hv.json").write_text(json.dumps({"total": total, "rows": report_rows}, indent=2))
    print("\n".join(lines))
    return EXIT_OK


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def cmd_stats(args) -> int:
    ds = data.load_manifest(_expand_path(args.manifest))
    stats = data.compute_stats(ds)
    out = _out_dir(args, "stats")
    _write_resolved(out, "stats", {"manifest": str(args.manifest)})
    payload = asdict(stats)
    payload["name"] = ds.name
    (out / "stats.json").write_text(json.dumps(payload, indent=2))
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    table = report.ResultsTable.from_csv(_expand_path(args.results))
    out = _out_dir(args, "report")
    _write_resolved(out, "report", {"results": str(args.results), "alpha": args.alpha})
    summary = report.write_report(table, out, alpha=args.alpha)
    print(json.dumps({"medians": summary["medians"], "cd": summary["cd"]}, indent=2))
    return EXIT_OK


def cmd_sweep(args) -> int:
    file_cfg = _load_config_file(args.config)
    resolved = _resolve(args, file_cfg, [
        "manifest", "seed", "epochs", "mc_samples", "threshold", "sigma",
        "lambda_pop", "mu", "c_cov", "literal_cma", "exact_fitness", "workers",
    ])
    if "manifest" not in resolved:
        raise ConfigError("sweep requires a dataset manifest")
    c_values = [int(c) for c in args.c_list.split(",") if c.strip()]
    if not c_values:
        raise ConfigError("sweep requires a non-empty embedding dimension list")
    out = _out_dir(args, "sweep")
    _write_resolved(out, "sweep", {**resolved, "c_list": c_values})

    rows = []
    for c in c_values:
        run_seed = int(seeds.rng_for(resolved["seed"], seeds.STREAM_SWEEP, c).integers(2**31))
        config = _train_config({**resolved, "embedding": c, "seed": run_seed})
        dataset = _prepare_dataset(resolved["manifest"], run_seed)
        result = trainer.train(dataset, config)
        best = {key: inc.validation for key, inc in result.best_per_loss.items()}
        row = {
            "c": c, "seed": run_seed,
            "best_l1": best["l1"].l1, "best_l2": best["l2"].l2, "best_l3": best["l3"].l3,
            "best_l4": result.best_per_loss["l4"].validation_bce,
            "final_gm": geometric_mean(result.final.validation),
            "archive_hv": result.archive_hv[-1] if result.archive_hv else None,
        }
        rows.append(row)
        np.savetxt(out / f"archive_hv_c{c}.csv",
                   np.column_stack([np.arange(len(result.archive_hv)), result.archive_hv]),
                   delimiter=",", header="epoch,archive_hv", comments="", fmt="%.17g")
    with open(out / "sweep.csv", "w", encoding="utf-8") as fh:
        cols = ["c", "seed", "best_l1", "best_l2", "best_l3", "best_l4", "final_gm", "archive_hv"]
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(str(row[c]) for c in cols) + "\n")
    print(json.dumps(rows, indent=2))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .model import load_model
    params = load_model(_expand_path(args.checkpoint))
    resolved = {"checkpoint": str(args.checkpoint), "manifest": str(args.manifest),
                "split": args.split, "threshold": args.threshold, "seed": args.seed}
    if resolved["seed"] is None:
        raise ConfigError("eval requires the seed that produced the split (--seed)")
    out = _out_dir(args, "eval")
    _write_resolved(out, "eval", resolved)
    dataset = _prepare_dataset(args.manifest, args.seed)
    lv, bce = trainer.evaluate(params, dataset, args.split, args.threshold)
    payload = _losses_json(lv, bce)
    (out / "eval.json").write_text(json.dumps(payload, indent=2))
    print(json.dumps(payload, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int, help="root seed (auto-generated and recorded if absent)")
    p.add_argument("--out", help="output directory (default hvml_out/<command>)")
    p.add_argument("--workers", type=int, help="parallel evaluation workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hvml",
                                     description="Hypervolume-guided multi-label learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a dataset manifest")
    _add_common(p)
    p.add_argument("--manifest", help="dataset manifest JSON")
    p.add_argument("--epochs", type=int)
    p.add_argument("--embedding", type=int)
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lambda-pop", dest="lambda_pop", type=int)
    p.add_argument("--mu", type=int)
    p.add_argument("--c-cov", dest="c_cov", type=float)
    p.add_argument("--exact-fitness", dest="exact_fitness", action="store_const", const=True)
    p.add_argument("--literal-cma", dest="literal_cma", action="store_const", const=True)
    p.add_argument("--archive-cap", dest="archive_cap", type=int)
    p.add_argument("--sigma-rule", dest="sigma_rule", choices=("none", "fifth"),
                   help="experimental one-fifth success rule for the step size")
    p.add_argument("--resume", help="checkpoint directory to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("hv", help="hypervolume and contributions of a front CSV")
    _add_common(p)
    p.add_argument("front", help="CSV of loss triples; optional leading tag column")
    p.add_argument("--ref", help="reference vector as 'r1,r2,r3' (default 1,1,1)")
    p.add_argument("--mc-samples", dest="mc_samples", type=int,
                   help="also print Monte Carlo estimates with this sample count")
    p.set_defaults(func=cmd_hv)

    p = sub.add_parser("stats", help="dataset statistics from a manifest")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="aggregate statistics over a results CSV")
    _add_common(p)
    p.add_argument("results", help="CSV with dataset,method,l1,l2,l3[,geometric_mean]")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="train once per embedding dimension")
    _add_common(p)
    p.add_argument("--manifest", help="dataset manifest JSON")
    p.add_argument("--c-list", dest="c_list", required=True,
                   help="comma-separated embedding dimensions")
    p.add_argument("--epochs", type=int)
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lambda-pop", dest="lambda_pop", type=int)
    p.add_argument("--mu", type=int)
    p.add_argument("--c-cov", dest="c_cov", type=float)
    p.add_argument("--exact-fitness", dest="exact_fitness", action="store_const", const=True)
    p.add_argument("--literal-cma", dest="literal_cma", action="store_const", const=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="evaluate a model checkpoint on one split")
    _add_common(p)
    p.add_argument("--checkpoint", required=True, help="binary model checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "validation", "test"), default="test")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _NUMERIC_ERRORS as exc:
        return _fail(exc, EXIT_NUMERIC)
    except _PRECONDITION_ERRORS as exc:
        return _fail(exc, EXIT_PRECONDITION)
    except _INPUT_ERRORS as exc:
        return _fail(exc, EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
