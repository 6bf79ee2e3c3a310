"""Command-line entry point: ``ckge {train,sweep,fit-scale,eval}``.

Every command resolves a :class:`~ckge.config.RunConfig` (defaults, then
``--config`` file, then flags) and writes it to ``<out>/config.resolved``
so a run can be repeated from that file alone.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ABLATIONS, MODES, RunConfig
from .errors import CKGEError, SnapshotError
from .evaluator import TripleFilter, cumulative_metrics, link_prediction_metrics, metrics_from_ranks
from .kg import SPLITS, EvolvingKG, load_sequence
from .scale import fit_scale_curve, predict_bounds, reference_points, update_dimension
from .trainer import run_pipeline

METRIC_KEYS = ("snapshot", "mrr", "h1", "h10", "cum_mrr", "cum_h1", "cum_h10", "dim")


class CLIError(Exception):
    """Bad arguments or inputs detected by the CLI itself."""


def _common(p, data=True):
    if data:
        p.add_argument("--data", help="dataset root with snapshot dirs 0/, 1/, ...")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--verbose", "-v", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="ckge", description="Continual TransE with adaptive dimensions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train over a snapshot sequence")
    _common(p)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--dim", type=int,
                   help="initial dim for sage; pinned dim for finetune/fixed-dim")
    p.add_argument("--ablate", action="append", default=[], type=str.upper, choices=ABLATIONS)
    p.add_argument("--footprints", action="store_true", help="write footprints.tsv")
    p.add_argument("--no-checkpoints", action="store_true")

    p = sub.add_parser("sweep", help="fixed-dim runs over several dimensions")
    _common(p)
    p.add_argument("--dims", required=True, help="comma-separated dimensions, e.g. 100,150,200")

    p = sub.add_parser("fit-scale", help="fit P = a ln N and report implied dims")
    _common(p)
    p.add_argument("--points", help="file of 'N P' pairs, one per line")
    p.add_argument("--reference", action="store_true",
                   help="use the bundled benchmark counts at --dim (default 200)")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--write-config", metavar="PATH",
                   help="write the fitted scale.a / scale.b into this config file")

    p = sub.add_parser("eval", help="re-evaluate a checkpoint on a dataset's test sets")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    return parser


def resolve_config(args):
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    for item in args.set:
        if "=" not in item:
            raise CLIError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value.strip())
    flags = {"seed": args.seed, "workers": args.workers, "data": getattr(args, "data", None),
             "out": args.out}
    if args.verbose:
        flags["verbose"] = True
    if getattr(args, "mode", None):
        flags["mode"] = args.mode
    if getattr(args, "ablate", None):
        flags["ablate"] = ",".join(args.ablate)
    if getattr(args, "footprints", False):
        flags["footprints"] = True
    cfg.update({k: v for k, v in flags.items() if v is not None})
    if args.command == "train" and args.dim is not None:
        cfg.set("dim.fixed" if cfg["mode"] != "sage" else "dim.initial", args.dim)
    return cfg


def _out_dir(cfg):
    if not cfg["out"]:
        raise CLIError("--out is required")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(cfg):
    if not cfg["data"]:
        raise CLIError("--data is required")
    return load_sequence(cfg["data"])


def _flat(rec):
    return {k: getattr(rec, k) for k in METRIC_KEYS}


def write_metrics(out, result, extra=None):
    """``metrics.jsonl`` (one object per snapshot plus a summary) and ``metrics.csv``."""
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for rec in result.records:
            row = _flat(rec)
            row["skipped"] = rec.skipped
            fh.write(json.dumps(row) + "\n")
        final = {"final": True, "rtf": result.rtf, "h": result.h.tolist(), "dims": result.dims}
        final.update(extra or {})
        fh.write(json.dumps(final) + "\n")
    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_KEYS)
        for rec in result.records:
            w.writerow([getattr(rec, k) for k in METRIC_KEYS])


def cmd_train(args):
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    vocab, snaps = _load(cfg)
    cfg.dump(out / "config.resolved")
    ckpt = None if args.no_checkpoints else out / "checkpoints"
    if ckpt is not None:
        ckpt.mkdir(exist_ok=True)
    fp_file = open(out / "footprints.tsv", "w", encoding="utf-8") if cfg["footprints"] else None
    try:
        if fp_file is not None:
            fp_file.write("snapshot\tkind\tname\tf_n\tf_r\tquality\n")

        def on_snapshot(i, model, rec, report):
            if ckpt is not None:
                save_checkpoint(ckpt / f"snapshot_{i}.npz", model, vocab, snapshot=i, dim=rec.dim)
            if fp_file is not None and report.footprints is not None:
                report.footprints.write_tsv(fp_file, vocab, snapshot=i)
            print(f"snapshot {i}: dim={rec.dim} mrr={rec.mrr:.4f} h10={rec.h10:.4f} "
                  f"cum_mrr={rec.cum_mrr:.4f}", flush=True)

        result = run_pipeline(snaps, cfg, vocab, on_snapshot=on_snapshot)
    finally:
        if fp_file is not None:
            fp_file.close()
    write_metrics(out, result)
    if result.rtf is not None:
        print(f"rtf={result.rtf:.4f}")
    return 0


def cmd_sweep(args):
    cfg = resolve_config(args)
    try:
        dims = [int(x) for x in args.dims.split(",") if x.strip()]
    except ValueError:
        raise CLIError(f"--dims must be comma-separated integers, got {args.dims!r}") from None
    if not dims or any(d < 1 for d in dims):
        raise CLIError("--dims needs at least one positive dimension")
    out = _out_dir(cfg)
    vocab, snaps = _load(cfg)
    cfg.set("mode", "fixed-dim")
    cfg.dump(out / "config.resolved")
    rows = []
    for d in dims:
        run = cfg.copy().set("dim.fixed", d)
        result = run_pipeline(snaps, run, vocab)
        for rec in result.records:
            rows.append(_flat(rec))
    table = sweep_table(rows)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_KEYS)
        for row in rows:
            w.writerow([row[k] for k in METRIC_KEYS])
    with open(out / "sweep_best.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["snapshot", "best_dim", "mrr"])
        w.writerows(table)
    for snap, d, mrr in table:
        print(f"snapshot {snap}: best dim {d} (mrr={mrr:.4f})")
    return 0


def sweep_table(rows):
    """Per snapshot, the dimension with the highest MRR (first one on ties)."""
    best = {}
    for row in rows:
        s = row["snapshot"]
        if s not in best or row["mrr"] > best[s][1]:
            best[s] = (row["dim"], row["mrr"])
    return [(s, d, m) for s, (d, m) in sorted(best.items())]


def read_points(path):
    pts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise CLIError(f"{path}:{lineno}: expected 'N P', got {line!r}")
            try:
                pts.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise CLIError(f"{path}:{lineno}: non-numeric value in {line!r}") from None
    return pts


def dataset_points(snaps, dim):
    """``(N, P)`` per snapshot of a loaded sequence at a fixed dimension."""
    kg = EvolvingKG()
    pts = []
    for s in snaps:
        kg.ingest(s)
        n_e, n_r, n_t = kg.element_counts()
        pts.append((n_t, dim * (n_e + n_r)))
    return pts


def cmd_fit_scale(args):
    cfg = resolve_config(args)
    dim = args.dim or 200
    snaps = None
    if args.points:
        pts = read_points(args.points)
    elif args.reference:
        pts = reference_points(dim=dim)
    elif cfg["data"]:
        _, snaps = _load(cfg)
        pts = dataset_points(snaps, dim)
    else:
        raise CLIError("fit-scale needs --points, --reference or --data")
    fit = fit_scale_curve(pts, band=cfg["scale.band"])
    report = {"a": fit.a, "b": fit.b, "rms": fit.rms, "n_points": len(pts)}
    print(f"a={fit.a:.6g} b={fit.b:.6g} rms={fit.rms:.6g} points={len(pts)}")
    if snaps is None and cfg["data"]:
        _, snaps = _load(cfg)
    if snaps is not None:
        report["bounds"] = implied_bounds(snaps, fit, cfg)
        for row in report["bounds"]:
            print("snapshot {snapshot}: y_min={y_min} y={y} y_max={y_max} dim={dim}".format(**row))
    if args.write_config:
        path = Path(args.write_config)
        base = RunConfig.from_file(path) if path.exists() else cfg.copy()
        base.update({"scale.a": fit.a, "scale.b": fit.b})
        base.dump(path)
    if cfg["out"]:
        out = _out_dir(cfg)
        cfg.dump(out / "config.resolved")
        with open(out / "scale_fit.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
    return 0


def implied_bounds(snaps, fit, cfg):
    """Bounds and the dimension the update rule would pick for each snapshot."""
    kg = EvolvingKG()
    rows = []
    d = None
    for s in snaps:
        kg.ingest(s)
        n_e, n_r, n_t = kg.element_counts()
        b = predict_bounds(fit, max(n_t, 2), max(n_e + n_r, 1))
        if d is None:
            d = int(min(max(b.y, cfg["dim.initial_min"]), cfg["dim.initial_max"]))
        else:
            d = update_dimension(d, b, cfg.policy())
        rows.append({"snapshot": s.index, "y_min": b.y_min, "y": b.y, "y_max": b.y_max, "dim": d})
    return rows


def cmd_eval(args):
    cfg = resolve_config(args)
    model, ck_vocab, meta = load_checkpoint(args.checkpoint)
    vocab, snaps = _load(cfg)
    # Re-map dataset ids onto the checkpoint's vocabulary.
    ent_ids = {n: i for i, n in enumerate(ck_vocab.entities)}
    rel_ids = {n: i for i, n in enumerate(ck_vocab.relations)}
    ent_map = np.array([ent_ids.get(n, -1) for n in vocab.entities], dtype=np.int64)
    rel_map = np.array([rel_ids.get(n, -1) for n in vocab.relations], dtype=np.int64)
    filt = TripleFilter()
    tests = []
    for s in snaps:
        for name in SPLITS:
            filt.add(_remap(s.split(name), ent_map, rel_map))
        tests.append(_remap(s.test, ent_map, rel_map))
    mask = np.zeros(model.n_entities, dtype=bool)
    for s in snaps:
        tri = _remap(s.train, ent_map, rel_map)
        mask[tri[:, [0, 2]].ravel()] = True
    tcfg = cfg.train_config()
    per_set = []
    for t in tests:
        per_set.append(link_prediction_metrics(model, t, filt, mask, tcfg.eval_batch_size, tcfg.workers)
                       if len(t) else metrics_from_ranks([]))
    cum = cumulative_metrics(per_set)
    rows = [{"test_set": j, "mrr": m.mrr, "h1": m.h1, "h10": m.h10, "n_queries": m.n_queries,
             "skipped": m.skipped} for j, m in enumerate(per_set)]
    summary = {"cum_mrr": cum.mrr, "cum_h1": cum.h1, "cum_h10": cum.h10, "dim": model.dim,
               "checkpoint": str(args.checkpoint)}
    for r in rows:
        print("test {test_set}: mrr={mrr:.4f} h1={h1:.4f} h10={h10:.4f} skipped={skipped}".format(**r))
    print(f"cumulative: mrr={cum.mrr:.4f} h1={cum.h1:.4f} h10={cum.h10:.4f}")
    if cfg["out"]:
        out = _out_dir(cfg)
        cfg.dump(out / "config.resolved")
        with open(out / "eval.jsonl", "w", encoding="utf-8") as fh:
            for r in rows:
                fh.write(json.dumps(r) + "\n")
            fh.write(json.dumps(summary) + "\n")
    return 0


def _remap(tri, ent_map, rel_map):
    """Dataset ids to checkpoint ids, dropping triples with names the checkpoint lacks."""
    if len(tri) == 0:
        return tri
    out = np.stack([ent_map[tri[:, 0]], rel_map[tri[:, 1]], ent_map[tri[:, 2]]], axis=1)
    return out[np.all(out >= 0, axis=1)]


COMMANDS = {"train": cmd_train, "sweep": cmd_sweep, "fit-scale": cmd_fit_scale, "eval": cmd_eval}


def _module_of(exc):
    tb = exc.__traceback__
    mod = "cli"
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("ckge."):
            mod = name.split(".", 1)[1]
        tb = tb.tb_next
    return mod


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SnapshotError as exc:
        cause = exc.__cause__ or exc
        print(f"ckge: error [{_module_of(cause)}] {exc}", file=sys.stderr)
    except CLIError as exc:
        print(f"ckge: error [cli] {exc}", file=sys.stderr)
        return 2
    except (CKGEError, ValueError, OSError) as exc:
        print(f"ckge: error [{_module_of(exc)}] {type(exc).__name__}: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
