"""Command line entry point: ``python -m dalab <subcommand>``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds as bnd
from .concentration import VERIFIERS, McConfig, ViolationReport
from .emit import Table, emit, to_json
from .experiments import (AXES, RATE_KINDS, RATE_LABELS, ExperimentConfig, alpha_opt_curve,
                          fit_rate, sweep)
from .shallow import ShallowConfig, error_curve
from .trainers import evaluate, train

SECTIONS = {"train-mmd": "train", "train-adv": "train", "shallow": "shallow", "bounds": "bounds",
            "verify": "verify", "sweep": "sweep", "fit": "fit"}


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _load_config(args) -> dict:
    if not args.config:
        return {}
    record = json.loads(Path(args.config).read_text())
    section = SECTIONS[args.command]
    return dict(record.get(section, record))


def _write(out_dir: Path, name: str, text: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text, encoding="utf-8", newline="\n")


def _experiment(args, record, trainer=None) -> ExperimentConfig:
    if trainer:
        record["trainer"] = trainer
    for key in ("epochs", "alpha", "beta"):
        v = getattr(args, key, None)
        if v is not None:
            record[key] = v
    record["seed"] = args.seed
    return ExperimentConfig.from_dict(record)


def cmd_train(args, trainer):
    cfg = _experiment(args, _load_config(args), trainer)
    ds = cfg.dataset(cfg.seed)
    model = cfg.model(cfg.seed)
    trace = train(model, ds, cfg.train_config(cfg.seed))
    prefix = "train_mmd" if trainer == "mmd" else "train_adv"
    _write(args.out_dir, f"{prefix}_trace.csv", trace.to_csv())
    summary = {"config": cfg.to_dict(),
               "source_test_accuracy": evaluate(model, ds.xs_test, ds.ys_test, "source"),
               "target_test_accuracy": evaluate(model, ds.xt_test, ds.yt_test, "target"),
               "final": trace.records[-1] if len(trace) else None}
    _write(args.out_dir, f"{prefix}_summary.json", to_json(summary))
    print(f"target accuracy {summary['target_test_accuracy']:.4f}")


def cmd_shallow(args):
    record = _load_config(args)
    record["seed"] = args.seed
    if args.alpha is not None:
        record["alpha"] = args.alpha
    base = ShallowConfig(**record)
    fits = {}
    for axis, grid, kind in (("Mt", args.mt_grid, "inv_sqrt"), ("tau", args.tau_grid, "linear")):
        if not grid:
            continue
        rows = error_curve(base, axis, grid, args.trials, args.seed)
        xs = [r[0] for r in rows]
        ys = [r[1] for r in rows]
        fit = fit_rate(xs, ys, kind) if len(rows) >= 3 else None
        table = Table([axis, "mean_error", "std_error"], [[r[0], r[1], r[2]] for r in rows],
                      f"target error vs {axis}", axis, "target error", {"mean error": (xs, ys)})
        if fit:
            fits[axis] = fit.to_dict()
            gx = np.linspace(min(xs), max(xs), 50)
            table.fits[RATE_LABELS[kind]] = (gx, fit.predict(gx))
        emit(table, "csv", args.out_dir / f"shallow_{axis.lower()}.csv")
        emit(table, "svg", args.out_dir / f"shallow_{axis.lower()}.svg")
    _write(args.out_dir, "shallow_fits.json", to_json(fits))


def cmd_bounds(args):
    record = _load_config(args)
    extras = {k: record.pop(k) for k in ("hLw", "distance", "variant", "c_scale") if k in record}
    inputs = bnd.BoundInputs.from_dict(record)
    report = bnd.bound_report(inputs, extras.get("hLw"), extras.get("distance", 0.0),
                              extras.get("variant", "mmd"), extras.get("c_scale", 1.0))
    _write(args.out_dir, "bounds.json", to_json({"inputs": inputs.to_dict(),
                                                 "report": report.to_dict()}))
    row = report.flat_row()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(row))
    w.writerow(["" if v is None else (repr(float(v)) if not isinstance(v, bool) else str(v).lower())
                for v in row.values()])
    _write(args.out_dir, "bounds.csv", buf.getvalue())
    print(f"theorem2 {report.theorem2:.6g} theorem3 {report.theorem3:.6g} "
          f"lemma9 {report.lemma9:.6g}")


def cmd_verify(args):
    record = _load_config(args)
    record["seed"] = args.seed
    if args.trials is not None:
        record["trials"] = args.trials
    lemmas = list(VERIFIERS) if args.lemma == "all" else [args.lemma]
    rows, ok = [], True
    per = record.pop("per_lemma", {})
    for name in lemmas:
        cfg = McConfig(**{**record, **per.get(name, {})})
        rep = VERIFIERS[name](cfg)
        rows += rep.rows
        ok &= rep.passed
    text = ViolationReport(rows).to_csv()
    _write(args.out_dir, "verify.csv", text)
    print("all checked cells within bound" if ok else "violations above bound found")
    return 0 if ok else 1


def cmd_sweep(args):
    base = _experiment(args, _load_config(args))
    cells = args.out_dir / f"sweep_{args.axis}.cells.jsonl"
    if args.axis == "alpha" and args.mt_grid:
        result = alpha_opt_curve(args.mt_grid, base, args.trials, args.seed,
                                 args.grid or (0.0, 0.2, 0.4, 0.6, 0.8, 1.0), cells, args.threads)
    else:
        if not args.grid:
            raise SystemExit("--grid is required")
        grid = [int(g) if args.axis != "alpha" else g for g in args.grid]
        result = sweep(args.axis, grid, base, args.trials, args.seed, args.mode,
                       args.count_axis, args.lattice, None, cells, args.threads)
    for fmt in ("csv", "json", "svg"):
        emit(result, fmt, args.out_dir / f"sweep_{args.axis}.{fmt}")


def cmd_fit(args):
    with open(args.input, newline="") as fh:
        rows = list(csv.DictReader(fh))
    xs = [float(r[args.x]) for r in rows]
    ys = [float(r[args.y]) for r in rows]
    fit = fit_rate(xs, ys, args.kind)
    gx = np.linspace(min(xs), max(xs), 50)
    table = Table([args.x, args.y], [[x, y] for x, y in zip(xs, ys)], f"fit {RATE_LABELS[args.kind]}",
                  args.x, args.y, {"data": (xs, ys)}, {RATE_LABELS[args.kind]: (gx, fit.predict(gx))})
    _write(args.out_dir, "fit.json", to_json(fit.to_dict()))
    emit(table, "svg", args.out_dir / "fit.svg")
    print(f"{RATE_LABELS[args.kind]}: {fit.coefficients} R2={fit.r2:.4f}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dalab", description="domain adaptation laboratory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, default=Path("out"))
    p.add_argument("--config", type=str, default=None, help="JSON config file")
    p.add_argument("--threads", type=int, default=1)
    sub = p.add_subparsers(dest="command", required=True)

    for name in ("train-mmd", "train-adv"):
        s = sub.add_parser(name)
        s.add_argument("--epochs", type=int)
        s.add_argument("--alpha", type=float)
        s.add_argument("--beta", type=float)

    s = sub.add_parser("shallow")
    s.add_argument("--mt-grid", type=_ints, default=[2, 4, 8, 16, 32, 64])
    s.add_argument("--tau-grid", type=_floats, default=[0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    s.add_argument("--alpha", type=float)
    s.add_argument("--trials", type=int, default=100)

    sub.add_parser("bounds")

    s = sub.add_parser("verify")
    s.add_argument("--lemma", choices=["all"] + list(VERIFIERS), default="all")
    s.add_argument("--trials", type=int)

    s = sub.add_parser("sweep")
    s.add_argument("--axis", choices=AXES, required=True)
    s.add_argument("--grid", type=_floats)
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--mode", choices=["accuracy", "complexity"], default="accuracy")
    s.add_argument("--count-axis", choices=["ms", "ns"], default="ms")
    s.add_argument("--lattice", type=_ints)
    s.add_argument("--mt-grid", type=_ints, help="with --axis alpha: optimal alpha per Mt")
    s.add_argument("--epochs", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--beta", type=float)

    s = sub.add_parser("fit")
    s.add_argument("--input", required=True)
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.add_argument("--kind", choices=RATE_KINDS, required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cmd = args.command
    if cmd == "train-mmd":
        rc = cmd_train(args, "mmd")
    elif cmd == "train-adv":
        rc = cmd_train(args, "adversarial")
    elif cmd == "shallow":
        rc = cmd_shallow(args)
    elif cmd == "bounds":
        rc = cmd_bounds(args)
    elif cmd == "verify":
        rc = cmd_verify(args)
    elif cmd == "sweep":
        rc = cmd_sweep(args)
    else:
        rc = cmd_fit(args)
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
