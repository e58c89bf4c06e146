"""Command-line entry point: ``wassreg <command> [flags]``.

Every command writes its output files with a ``#`` comment header carrying
the package version, seed and a digest of the resolved configuration, plus a
``<out>.manifest.json`` echoing that configuration. Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import default_threads, parallel_map
from .errors import DataError, NumericalError
from .exact import exact_wasserstein
from .experiments import (
    GaussianMixtureSpec,
    dimension_sweep,
    knn_accuracy,
    metrics,
    pairwise_matrix,
    sample_gaussian_mixture,
)
from .measures import MeasureDataset, load_dataset, read_pairs, sample_pairs, write_dataset
from .regression import build_design, fit, load_model, predict_array, save_model
from .sampling import SeedSpec
from .sliced import KINDS, PRESET_KINDS, PredictorConfig, evaluate_features, preset

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 1, 2, 3

# keys that do not influence results and stay out of the config digest
_NON_RESULT_KEYS = {"threads", "out", "config"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _int_list(text) -> list[int]:
    try:
        return [int(t) for t in str(text).replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def _str_list(text) -> list[str]:
    return [t for t in str(text).replace(" ", "").split(",") if t]


# name -> (type, default); shared by flags and config files
_OPTIONS = {
    "dataset": (str, None),
    "dataset_b": (str, None),
    "pairs": (str, None),
    "labels": (str, None),
    "model": (str, None),
    "predictions": (str, None),
    "preset": (str, "rg-s"),
    "constrained": (_bool, False),
    "p": (float, 2.0),
    "seed": (int, 0),
    "threads": (int, None),
    "out": (str, None),
    "share_directions": (_bool, True),
    "L": (int, None),
    "T": (int, None),
    "temperature": (float, None),
    "step_size": (float, None),
    "exclude_train": (_bool, False),
    "d": (int, 3),
    "dims": (_int_list, [1, 2, 5, 10, 20, 50, 100]),
    "count": (int, 20),
    "components": (int, 3),
    "points": (int, 200),
    "mean_scale": (float, 5.0),
    "cov_scale": (float, 1.0),
    "m": (int, None),
    "mode": (str, "uniform-random"),
    "variants": (_str_list, ["rg-s", "rg-e", "rg-o"]),
    "fit_pairs": (int, 60),
    "eval_pairs": (int, 60),
    "train": (str, None),
    "test": (str, None),
    "scorer": (str, "exact"),
    "k": (_int_list, [1, 3, 5, 10, 15]),
}

_COMMANDS = {
    "label": ("exact Wasserstein labels for indexed pairs", ["dataset", "pairs", "p", "threads", "out"]),
    "fit": (
        "fit regression weights on labelled pairs",
        ["dataset", "pairs", "labels", "preset", "constrained", "p", "seed", "threads", "out",
         "share_directions", "L", "T", "temperature", "step_size"],
    ),
    "predict": (
        "predict distances for pairs with a fitted model",
        ["model", "dataset", "pairs", "threads", "out", "exclude_train"],
    ),
    "eval": ("compare predictions with labels", ["predictions", "labels", "out"]),
    "simulate": (
        "write a dataset of Gaussian-mixture point clouds",
        ["d", "count", "components", "points", "mean_scale", "cov_scale", "seed", "out", "m", "mode"],
    ),
    "sweep": (
        "constrained one-weight fits across dimensions",
        ["dims", "variants", "fit_pairs", "eval_pairs", "components", "points", "mean_scale",
         "cov_scale", "seed", "threads", "out", "p", "L", "T", "temperature", "step_size"],
    ),
    "knn": (
        "k-NN accuracy of a test dataset against a labelled training dataset",
        ["train", "test", "scorer", "model", "k", "p", "seed", "threads", "out", "L", "T", "temperature"],
    ),
    "matrix": (
        "pairwise distance matrix",
        ["dataset", "dataset_b", "scorer", "model", "p", "seed", "threads", "out", "L", "T", "temperature"],
    ),
}

_HELP = {
    "labels": "labels CSV (i,j,wasserstein) from the label command",
    "config": "plain-text key=value file; flags override its values",
    "scorer": "exact, model (needs --model) or a predictor kind: " + ", ".join(KINDS),
    "preset": "one of " + ", ".join(PRESET_KINDS),
    "mode": "pair sampling for simulate: uniform-random or all-unordered",
    "exclude_train": "drop pairs the model was fitted on",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wassreg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wassreg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (helptext, opts) in _COMMANDS.items():
        sp = sub.add_parser(name, help=helptext, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help=_HELP["config"])
        for opt in opts:
            typ, default = _OPTIONS[opt]
            flag = "--" + opt.replace("_", "-")
            extra = f" (default {default})" if default is not None else ""
            sp.add_argument(flag, dest=opt, type=typ, help=_HELP.get(opt, "") + extra)
    return parser


def _read_config_file(path: str, allowed: list[str]) -> dict:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"missing config file: {p}")
    out = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{p}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise DataError(f"{p}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _OPTIONS[key][0](value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise DataError(f"{p}:{lineno}: {exc}") from None
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then config file, then explicit flags."""
    opts = _COMMANDS[args.command][1]
    cfg = {k: _OPTIONS[k][1] for k in opts}
    given = vars(args)
    if given.get("config"):
        cfg.update(_read_config_file(given["config"], opts))
    cfg.update({k: v for k, v in given.items() if k in opts})
    if "threads" in cfg and cfg["threads"] is None:
        cfg["threads"] = default_threads()
    cfg["command"] = args.command
    return cfg


def config_digest(cfg: dict) -> str:
    body = {k: v for k, v in sorted(cfg.items()) if k not in _NON_RESULT_KEYS}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


def _header(cfg: dict, **extra) -> str:
    fields = [f"wassreg {__version__}", f"command={cfg['command']}"]
    if "seed" in cfg:
        fields.append(f"seed={cfg['seed']}")
    fields.append(f"config={config_digest(cfg)}")
    fields += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(fields) + "\n"


def _need(cfg: dict, *keys):
    for k in keys:
        if cfg.get(k) in (None, ""):
            raise _UsageError(f"--{k.replace('_', '-')} is required for {cfg['command']}")


class _UsageError(Exception):
    pass


def _out_path(cfg: dict) -> Path:
    _need(cfg, "out")
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(target: Path, cfg: dict) -> None:
    doc = {"wassreg": __version__, "config_digest": config_digest(cfg), "config": cfg}
    manifest = target / "manifest.json" if target.is_dir() else Path(str(target) + ".manifest.json")
    manifest.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: str, columns: list[str] | None, rows) -> None:
    buf = io.StringIO()
    buf.write(header)
    w = csv.writer(buf, lineterminator="\n")
    if columns:
        w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _read_table(path: str, value_col: str) -> dict:
    """``{(i, j): value}`` from a CSV with columns ``i,j,<value_col>``."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"missing file: {p}")
    lines = [ln for ln in p.read_text().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or not {"i", "j", value_col} <= set(reader.fieldnames):
        raise DataError(f"{p}: expected columns i,j,{value_col}")
    out = {}
    for row in reader:
        try:
            out[(int(row["i"]), int(row["j"]))] = float(row[value_col])
        except (TypeError, ValueError):
            raise DataError(f"{p}: bad row {row}") from None
    return out


def _single_config(cfg: dict, kind: str) -> PredictorConfig:
    return PredictorConfig.default(kind, p=cfg["p"], L=cfg.get("L"), T=cfg.get("T"), temperature=cfg.get("temperature"))


def _scorer(cfg: dict):
    name = cfg["scorer"]
    if name == "exact":
        return "exact"
    if name == "model":
        _need(cfg, "model")
        return load_model(cfg["model"])
    if name in KINDS:
        return _single_config(cfg, name)
    raise DataError(f"unknown scorer {name!r}")


# ---------------------------------------------------------------- commands


def cmd_label(cfg: dict) -> Path:
    _need(cfg, "dataset", "pairs")
    out = _out_path(cfg)
    data = load_dataset(cfg["dataset"])
    pairs = read_pairs(cfg["pairs"])
    data.check_pairs(pairs)
    p = cfg["p"]
    dists = parallel_map(lambda q: exact_wasserstein(data[q.i], data[q.j], p).distance(p), pairs, cfg["threads"])
    _write_csv(out, _header(cfg), ["i", "j", "wasserstein"], ((q.i, q.j, v) for q, v in zip(pairs, dists)))
    return out


def cmd_fit(cfg: dict) -> Path:
    _need(cfg, "dataset", "pairs")
    out = _out_path(cfg)
    data = load_dataset(cfg["dataset"])
    pairs = read_pairs(cfg["pairs"])
    pre = preset(cfg["preset"], cfg["p"], cfg["L"], cfg["T"], cfg["temperature"], cfg["step_size"])
    labels = _read_table(cfg["labels"], "wasserstein") if cfg.get("labels") else None
    design = build_design(
        data, pairs, pre.configs, cfg["seed"], share_directions=cfg["share_directions"],
        threads=cfg["threads"], labels=labels,
    )
    model = fit(
        design, pre.configs, cfg["constrained"], pre.lower_idx, pre.upper_idx,
        seed=cfg["seed"], share_directions=cfg["share_directions"], preset=pre.name,
    )
    save_model(model, out)
    if model.fit_report.get("degenerate"):
        print("warning: degenerate fit (lower and upper features coincide)", file=sys.stderr)
    return out


def cmd_predict(cfg: dict) -> Path:
    _need(cfg, "model", "dataset", "pairs")
    out = _out_path(cfg)
    model = load_model(cfg["model"])
    data = load_dataset(cfg["dataset"])
    pairs = read_pairs(cfg["pairs"])
    data.check_pairs(pairs)
    train = set(model.train_pairs)
    overlap = sum((q.i, q.j) in train for q in pairs)
    if cfg["exclude_train"]:
        pairs = [q for q in pairs if (q.i, q.j) not in train]
        if not pairs:
            raise DataError("every pair was used for fitting")
    if overlap:
        what = "excluded" if cfg["exclude_train"] else "kept"
        print(f"note: {overlap} pair(s) overlap the training pairs ({what})", file=sys.stderr)

    def task(q):
        fv = evaluate_features(data[q.i], data[q.j], model.configs, SeedSpec(model.seed, q.key), model.share_directions)
        return fv.values

    S = np.array(parallel_map(task, pairs, cfg["threads"]))
    pred = predict_array(model, S)
    header = _header(cfg, train_overlap=overlap, exclude_train=str(cfg["exclude_train"]).lower())
    _write_csv(out, header, ["i", "j", "prediction"], ((q.i, q.j, v) for q, v in zip(pairs, pred)))
    return out


def cmd_eval(cfg: dict) -> Path:
    _need(cfg, "predictions", "labels")
    out = _out_path(cfg)
    pred = _read_table(cfg["predictions"], "prediction")
    lab = _read_table(cfg["labels"], "wasserstein")
    common = sorted(set(pred) & set(lab))
    if not common:
        raise DataError("predictions and labels share no pair")
    dropped = len(pred) + len(lab) - 2 * len(common)
    if dropped:
        print(f"note: {dropped} unmatched row(s) ignored", file=sys.stderr)
    rep = metrics([pred[k] for k in common], [lab[k] for k in common], config_digest=config_digest(cfg))
    row = rep.as_row()
    print(" ".join(f"{k}={_fmt(v)}" for k, v in row.items()))
    _write_csv(out, _header(cfg), list(row), [list(row.values())])
    return out


def cmd_simulate(cfg: dict) -> Path:
    _need(cfg, "out")
    out = Path(cfg["out"])
    if cfg["count"] < 1:
        raise DataError("--count must be positive")
    measures = []
    for k in range(cfg["count"]):
        spec = GaussianMixtureSpec(
            cfg["d"], cfg["components"], cfg["points"], cfg["mean_scale"], cfg["cov_scale"], SeedSpec(cfg["seed"], k)
        )
        measures.append(sample_gaussian_mixture(spec))
    write_dataset(MeasureDataset(tuple(measures)), out)
    if cfg["m"] is not None:
        pairs = sample_pairs(len(measures), cfg["m"], cfg["seed"], cfg["mode"])
        _write_csv(out / "pairs.csv", _header(cfg), ["i", "j"], ((q.i, q.j) for q in pairs))
    return out


def cmd_sweep(cfg: dict) -> Path:
    out = _out_path(cfg)
    template = GaussianMixtureSpec(1, cfg["components"], cfg["points"], cfg["mean_scale"], cfg["cov_scale"])
    overrides = {k: cfg[k] for k in ("L", "T", "temperature", "step_size") if cfg[k] is not None}
    rows = dimension_sweep(
        cfg["dims"], template, cfg["variants"], cfg["fit_pairs"], cfg["eval_pairs"], cfg["seed"],
        cfg["threads"], p=cfg["p"], **overrides,
    )
    _write_csv(
        out, _header(cfg), ["variant", "d", "omega", "r2", "mse", "mae", "degenerate"],
        ((r.variant, r.d, r.omega, r.r2, r.mse, r.mae, r.degenerate) for r in rows),
    )
    return out


def cmd_knn(cfg: dict) -> Path:
    _need(cfg, "train", "test")
    out = _out_path(cfg)
    train, test = load_dataset(cfg["train"]), load_dataset(cfg["test"])
    if train.labels is None or test.labels is None:
        raise DataError("both manifests need a label column")
    D = pairwise_matrix(test, train, _scorer(cfg), cfg["seed"], cfg["p"], cfg["threads"])
    acc = knn_accuracy(D, train.labels, test.labels, cfg["k"])
    _write_csv(out, _header(cfg), ["k", "accuracy"], sorted(acc.items()))
    return out


def cmd_matrix(cfg: dict) -> Path:
    _need(cfg, "dataset")
    out = _out_path(cfg)
    a = load_dataset(cfg["dataset"])
    b = load_dataset(cfg["dataset_b"]) if cfg.get("dataset_b") else None
    D = pairwise_matrix(a, b, _scorer(cfg), cfg["seed"], cfg["p"], cfg["threads"])
    _write_csv(out, _header(cfg, shape=f"{D.shape[0]}x{D.shape[1]}"), None, D.tolist())
    return out


_HANDLERS = {
    "label": cmd_label,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "knn": cmd_knn,
    "matrix": cmd_matrix,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        target = _HANDLERS[args.command](cfg)
        _write_manifest(target, cfg)
    except _UsageError as exc:
        print(f"wassreg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"wassreg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, ValueError, OSError) as exc:
        print(f"wassreg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
