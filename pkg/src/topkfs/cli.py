"""``topkfs``: batch front end for selection, sweeps, stability and checks.

Each run writes into ``<out>/<command>-<fingerprint[:12]>/``:

* ``results.jsonl``: one record per run, fixed field order, no wall times
* ``summary.txt``: a readable table
* ``curves.csv``: plot-ready rows (sweep-k, stability, approx-study)

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure
(including a gradient check over tolerance).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import approx, gradcheck
from .config import COMMANDS, ExperimentConfig
from .data import (Dataset, inject_noise_features, load_csv, make_preset, make_sparse_classification,
                   make_sparse_regression, split)
from .errors import ConfigError, InvalidArgumentError, NumericalError
from .selection import evaluate_selection, select, stability, sweep_k

log = logging.getLogger("topkfs")

OUTPUT_ENV = "TOPKFS_OUTPUT_DIR"
DEFAULT_OUTPUT = "runs"


class RunOutput:
    """Collects records and text in memory; nothing touches disk until :meth:`write`."""

    def __init__(self, command: str, fp: str):
        self.command = command
        self.fp = fp
        self.records: list[dict] = []
        self.summary: list[str] = []
        self.curves: list[list] | None = None

    def add(self, record: dict):
        self.records.append({"command": self.command, "config_fingerprint": self.fp, **record})

    def write(self, directory: Path):
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "results.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for r in self.records:
                fh.write(json.dumps(r, allow_nan=True) + "\n")
        with open(directory / "summary.txt", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(self.summary) + "\n")
        if self.curves is not None:
            buf = io.StringIO()
            csv.writer(buf, lineterminator="\n").writerows(self.curves)
            (directory / "curves.csv").write_text(buf.getvalue(), encoding="utf-8")


# ----------------------------------------------------------------- data ----

def load_dataset(cfg: ExperimentConfig, seed: int) -> tuple[Dataset, float]:
    d = cfg["data"]
    ratio = d["train_ratio"]
    if d["source"] == "csv":
        try:
            ds = load_csv(d["path"], d["target"], d["task"])
        except OSError as exc:
            raise ConfigError(f"cannot read {d['path']}: {exc}") from None
    elif d["source"] == "preset":
        ds, ratio = make_preset(d["preset"], seed)
    elif d["task"] == "regression":
        ds = make_sparse_regression(d["n"], d["m"], d["n_informative"], d["noise_sd"], seed)
    else:
        n_classes = 2 if d["task"] == "binary" else d["n_classes"]
        ds = make_sparse_classification(d["n"], d["m"], d["n_informative"], n_classes, seed,
                                        class_sep=d["class_sep"])
    if d["inject_noise"]:
        ds = inject_noise_features(ds, seed, d["noise_subset"], d["noise_mean_scale"],
                                   d["noise_sd_scale"])
    return ds, ratio


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _table(header, rows) -> list[str]:
    cells = [list(map(str, header))] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]


# ------------------------------------------------------------- commands ----

def _selection_run(cfg: ExperimentConfig, out: RunOutput):
    kind = cfg["experiment"]["model_kind"]
    ds, ratio = load_dataset(cfg, cfg.seed)
    train, test = split(ds, ratio, cfg.seed)
    sc = cfg.select_config()
    rep = select(train, kind, sc)
    metrics = evaluate_selection(train, test, rep.selected, cfg.seed, sc.n_trees)
    out.add({**rep.to_record(), "dataset": ds.name, "metrics": metrics})
    out.summary += [f"dataset: {ds.name}  n={ds.n} m={ds.m}", f"model: {kind}  top-k: {sc.topk}  k={sc.k}",
                    "selected: " + " ".join(ds.feature_names[i] for i in rep.selected.indices), ""]
    out.summary += _table(["metric", "value"], sorted(metrics.items()))


def cmd_select(cfg, out):
    _selection_run(cfg, out)


def cmd_simulate(cfg, out):
    if cfg["data"]["source"] == "synthetic":
        cfg = ExperimentConfig({**cfg.values, "data": {**cfg["data"], "source": "preset"}})
    _selection_run(cfg, out)


def cmd_sweep(cfg, out):
    kind = cfg["experiment"]["model_kind"]
    ds, ratio = load_dataset(cfg, cfg.seed)
    rows = sweep_k(ds, kind, cfg.select_config(), cfg["sweep"]["k_values"], train_ratio=ratio,
                   max_workers=cfg["experiment"]["workers"])
    keys = sorted({key for r in rows for key in r.metrics})
    out.curves = [["k", *keys]]
    for r in rows:
        out.add({**r.to_record(), "dataset": ds.name})
        out.curves.append([r.k, *(r.metrics.get(key, "") for key in keys)])
    out.summary += [f"dataset: {ds.name}  model: {kind}", ""]
    out.summary += _table(out.curves[0], out.curves[1:])


def cmd_stability(cfg, out):
    kind = cfg["experiment"]["model_kind"]
    ds, ratio = load_dataset(cfg, cfg.seed)
    sc = cfg.select_config()
    n_splits = cfg["stability"]["n_splits"]
    out.curves = [["topk", "i", "j", "jaccard"]]
    table = []
    for topk in (True, False):
        res = stability(ds, kind, replace(sc, topk=topk), n_splits, ratio,
                        max_workers=cfg["experiment"]["workers"])
        for i, rep in enumerate(res.reports):
            out.add({**rep.to_record(), "split": i, "dataset": ds.name})
        for i in range(n_splits):
            for j in range(i + 1, n_splits):
                out.curves.append([topk, i, j, float(res.jaccard[i, j])])
        out.add({"model_kind": kind, "topk": topk, "k": sc.k, "seed": sc.seed, "n_splits": n_splits,
                 "mean_jaccard": res.mean_jaccard})
        table.append(["top-k" if topk else "plain", res.mean_jaccard])
    out.summary += [f"dataset: {ds.name}  model: {kind}  k={sc.k}  splits={n_splits}", ""]
    out.summary += _table(["variant", "mean_jaccard"], table)


def _approx_target(cfg):
    a = cfg["approx"]
    if a["target"] == "sinusoid":
        return approx.sinusoid_target(a["m"], a["support"], a["radius"])
    if a["target"] == "constant":
        return approx.constant_target(a["constant"], a["m"], a["support"], max(1.0, abs(a["constant"])),
                                      a["radius"])
    if len(a["support"]) != 1:
        raise ConfigError("approx.target = linear needs a single-index support")
    return approx.linear_target(a["m"], a["support"][0], radius=a["radius"])


def cmd_approx(cfg, out):
    a = cfg["approx"]
    target = _approx_target(cfg)
    ac = approx.ApproxConfig(n_train=a["n_train"], epochs=a["epochs"], rate=a["rate"],
                             lambda_topk=a["lambda_topk"], lambda_l1=a["lambda_l1"],
                             hidden_l2=a["hidden_l2"], polish_epochs=a["polish_epochs"],
                             polish_rate=a["polish_rate"], margin=a["margin"])
    table = approx.approx_study(target, a["widths"], a["seeds"], a["grid_size"], ac)
    for r in table.rows:
        out.add({"target": table.target, "k": table.k, "width": r.width, "seed": r.seed,
                 "sup_error": r.sup_error, "support_found": r.support_found})
    med = table.medians()
    out.curves = [["width", "median_sup_error"], *([M, e] for M, e in med.items())]
    out.summary += [f"target: {table.target}  k={table.k}", ""]
    out.summary += _table(out.curves[0], out.curves[1:])
    out.summary += ["", f"median non-increasing in width: {table.non_increasing()}"]


def cmd_gradcheck(cfg, out) -> bool:
    g = cfg["gradcheck"]
    results = gradcheck.run_suite(cfg.seed, linear_m=g["linear_m"], mlp_m=g["mlp_m"])
    worst: dict[str, float] = {}
    ok = True
    for r in results:
        tol = g["tol_linear"] if r.component == "linear" else g["tol_mlp"]
        passed = r.rel_error < tol
        ok &= passed
        worst[r.component] = max(worst.get(r.component, 0.0), r.rel_error)
        out.add({"component": r.component, "lambda_topk": r.lambda_topk, "k": r.k,
                 "rel_error": r.rel_error, "tol": tol, "passed": passed})
    out.summary += _table(["component", "max_rel_error"], sorted(worst.items()))
    out.summary += ["", "PASS" if ok else "FAIL"]
    return ok


HANDLERS = {"select": cmd_select, "simulate": cmd_simulate, "sweep-k": cmd_sweep,
            "stability": cmd_stability, "approx-study": cmd_approx, "gradcheck": cmd_gradcheck}


# ------------------------------------------------------------------ main ----

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topkfs", description="Top-k regularized feature selection experiments.")
    p.add_argument("command", nargs="?", choices=COMMANDS, help="defaults to experiment.command")
    p.add_argument("-c", "--config", help="INI file; missing keys take their defaults")
    p.add_argument("-s", "--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one setting (repeatable)")
    p.add_argument("-o", "--out", help=f"output root (default: ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    p.add_argument("--seed", type=int, help="shorthand for --set experiment.seed=N")
    p.add_argument("--overwrite", action="store_true", help="replace an existing run directory")
    p.add_argument("--print-defaults", action="store_true", help="print every default setting and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(cfg: ExperimentConfig, out_root, overwrite: bool = False) -> tuple[int, Path]:
    fp = cfg.fingerprint()
    directory = Path(out_root) / f"{cfg.command}-{fp[:12]}"
    if directory.exists() and not overwrite:
        raise ConfigError(f"{directory} already exists; pass --overwrite to replace it")
    out = RunOutput(cfg.command, fp)
    ok = HANDLERS[cfg.command](cfg, out)
    out.write(directory)
    return (2 if ok is False else 0), directory


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_defaults:
        sys.stdout.write(ExperimentConfig.defaults().to_text())
        return 0
    overrides = list(args.set)
    if args.command:
        overrides.append(f"experiment.command={args.command}")
    if args.seed is not None:
        overrides.append(f"experiment.seed={args.seed}")
    try:
        if args.config:
            cfg = ExperimentConfig.from_file(args.config, overrides)
        else:
            cfg = ExperimentConfig.from_text("", overrides)
        out_root = args.out or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
        code, directory = run(cfg, out_root, args.overwrite)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    print(directory)
    print((directory / "summary.txt").read_text(encoding="utf-8"), end="")
    return code


if __name__ == "__main__":
    sys.exit(main())
