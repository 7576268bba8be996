"""Command-line interface: one subcommand per pipeline stage, artifacts under --out.

Exit codes: 0 success, 2 input/validation error (including bad usage),
3 configuration error, 4 model or internal error.
"""
import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .automl import (PipelineConfig, compare_models, explain_final, explain_rows, finalize,
                     tune_model)
from .dataset import Dataset, load_csv, profile, stratified_holdout, synthesize_table1, write_csv
from .errors import ConfigError, InputError, PedcrashError, SchemaError
from .explain import force_breakdown, shap_summary
from .pipeline import Pipeline
from .report import (MANIFEST, PlotSpec, leaderboard_markdown, render_svg, to_csv, to_json,
                     write_manifest, write_run_bundle)
from .resample import smote_tomek
from .rng import substream
from .schema import CRASH_SCHEMA, SEVERITY_NAMES, SEVERITY_SHORT


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _common(p, data=True, out=True, config=True):
    if data:
        p.add_argument("--data", required=True, help="encoded crash CSV")
    if out:
        p.add_argument("--out", required=True, help="output directory for all artifacts")
    if config:
        p.add_argument("--config", help="PipelineConfig JSON file (flags override it)")
        p.add_argument("--seed", type=int)
        p.add_argument("--holdout-fraction", type=float)
        p.add_argument("--folds", type=int, dest="cv_folds")
        p.add_argument("--models", help="comma-separated model kinds")
        p.add_argument("--sort-metric")
        p.add_argument("--no-resample", action="store_true")
        p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")


def build_parser():
    parser = _Parser(prog="pedcrash", description="Crash-severity AutoML pipeline.")
    parser.add_argument("--version", action="version", version=f"pedcrash {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("validate", help="check a CSV against the crash schema")
    _common(p, out=False, config=False)

    p = sub.add_parser("profile", help="descriptive table per feature level and category")
    _common(p, config=False)

    p = sub.add_parser("synth", help="synthetic records drawn from the published marginals")
    p.add_argument("--n", type=int, default=8319)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--interactions", choices=("on", "off"), default="on")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("resample", help="SMOTE + Tomek-link cleaning of a CSV")
    _common(p, config=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=5)

    p = sub.add_parser("compare", help="cross-validated leaderboard of the model zoo")
    _common(p)

    p = sub.add_parser("tune", help="random-search tuning of one model kind")
    _common(p)
    p.add_argument("--kind", help="model kind (default: leaderboard winner)")
    p.add_argument("--budget", type=int, dest="tune_budget")

    p = sub.add_parser("finalize", help="fit on the training partition, score the holdout once")
    _common(p)
    p.add_argument("--kind", help="model kind (default: leaderboard winner)")
    p.add_argument("--params", help="hyperparameters as a JSON object (default: tune.json if present)")

    p = sub.add_parser("explain", help="Shapley attributions for holdout rows")
    _common(p)
    p.add_argument("--instance", type=int, action="append", default=[],
                   help="dataset row index for a force breakdown (repeatable)")
    p.add_argument("--all", action="store_true", help="explain every holdout row")
    p.add_argument("--max-instances", type=int, dest="explain_instances")

    p = sub.add_parser("report", help="render SVG plots and tables from a run directory")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    return parser


# -- helpers --------------------------------------------------------------------

def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{what} not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path} is not valid JSON: {exc}") from None


def _file_sha256(path):
    try:
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _load(path):
    if not os.path.isfile(path):
        raise InputError(f"data file not found: {path}")
    return load_csv(path, CRASH_SCHEMA)


def resolve_config(args):
    """Defaults < <out>/config.json < --config file < flags."""
    doc = {}
    echoed = os.path.join(args.out, "config.json")
    if os.path.isfile(echoed):
        doc.update(_read_json(echoed, "config echo"))
    if getattr(args, "config", None):
        doc.update(_read_json(args.config, "config file"))
    doc.pop("data", None)
    overrides = {}
    for name in ("seed", "holdout_fraction", "cv_folds", "sort_metric", "tune_budget",
                 "explain_instances"):
        overrides[name] = getattr(args, name, None)
    if getattr(args, "models", None):
        overrides["models"] = [m.strip() for m in args.models.split(",") if m.strip()]
    if getattr(args, "no_resample", False):
        overrides["resample"] = False
    if getattr(args, "no_normalize", False):
        overrides["normalize"] = False
    try:
        return PipelineConfig.from_dict(doc, **overrides)
    except TypeError as exc:
        raise ConfigError(f"bad configuration: {exc}") from None


def _config_echo(config, data_path, data):
    return {**config.to_dict(), "data": {"sha256": _file_sha256(data_path), "rows": data.n_rows}}


def _set_threads(n):
    if n < 1:
        raise ConfigError("--threads must be at least 1")
    try:
        import numba

        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    except (ImportError, ValueError):  # pragma: no cover - numba is a hard dependency
        pass


def _winner(out):
    path = os.path.join(out, "leaderboard.json")
    if not os.path.isfile(path):
        raise ConfigError(f"no leaderboard.json in {out}; run compare first or pass --kind")
    board = _read_json(path, "leaderboard")
    if not board.get("entries"):
        raise ConfigError("leaderboard is empty")
    return board["entries"][0]["kind"]


# -- subcommands ----------------------------------------------------------------

def cmd_validate(args):
    data = _load(args.data)
    counts = data.counts()
    print(f"ok: {data.n_rows} rows, {len(data.feature_names)} features; "
          + ", ".join(f"{n} {c}" for n, c in zip(SEVERITY_NAMES, counts)))
    return 0


def cmd_profile(args):
    data = _load(args.data)
    write_run_bundle({"profile.md": profile(data).to_markdown()}, args.out)
    return 0


def cmd_synth(args):
    if args.n < 100:
        raise InputError("--n must be at least 100")
    data = synthesize_table1(args.n, args.seed, interactions=args.interactions == "on")
    os.makedirs(args.out, exist_ok=True)
    write_csv(data, os.path.join(args.out, "synthetic.csv"))
    write_manifest(args.out)
    _log(f"wrote {data.n_rows} rows: " + ", ".join(f"{n} {c}" for n, c in zip(SEVERITY_SHORT, data.counts())))
    return 0


def cmd_resample(args):
    data = _load(args.data)
    X, y, report = smote_tomek(data.X, data.y, k=args.k, rng=substream(args.seed, "resample"),
                               discrete=data.schema.discrete_codes())
    out = Dataset(X, y, data.schema)
    os.makedirs(args.out, exist_ok=True)
    write_csv(out, os.path.join(args.out, "resampled.csv"))
    write_run_bundle({"resample_report.json": report.to_dict()}, args.out)
    _log(f"counts {report.counts_before} -> {report.counts_after}, {len(report.tomek_pairs)} Tomek links")
    return 0


def cmd_compare(args):
    config = resolve_config(args)
    data = _load(args.data)
    result = compare_models(config, data, threads=args.threads, log=_log)
    for audit in result.audits:
        if not audit.clean:
            raise PedcrashError(f"leakage audit failed in fold {audit.fold}")
    names = data.feature_names
    artifacts = {
        "config.json": _config_echo(config, args.data, data),
        "leaderboard.json": {"sort_metric": config.sort_metric,
                             "entries": [e.to_dict() for e in result.leaderboard]},
        "leaderboard.md": leaderboard_markdown(result.leaderboard),
        "preprocessing.json": result.preprocessing(names),
        "leakage_audit.json": {"folds": [dict(vars(a), clean=a.clean) for a in result.audits]},
    }
    for e in result.leaderboard:
        artifacts[f"fold_metrics/{e.kind}.json"] = {"kind": e.kind, "folds": e.folds}
    write_run_bundle(artifacts, args.out)
    for e in result.leaderboard:
        _log(f"  {e.kind:9s} accuracy {e.accuracy:.4f}  auc {e.auc:.4f}  wall {e.wall_time:.1f}s")
    return 0


def cmd_tune(args):
    config = resolve_config(args)
    data = _load(args.data)
    kind = args.kind or _winner(args.out)
    result = tune_model(kind, data, config=config, threads=args.threads, log=_log)
    write_run_bundle({"tune.json": result.to_dict(),
                      "config.json": _config_echo(config, args.data, data)}, args.out)
    return 0


def _finalize(args, config, data):
    kind = getattr(args, "kind", None) or _winner(args.out)
    params = {}
    if getattr(args, "params", None):
        try:
            params = json.loads(args.params)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--params is not valid JSON: {exc}") from None
        if not isinstance(params, dict):
            raise ConfigError("--params must be a JSON object")
    else:
        tuned = os.path.join(args.out, "tune.json")
        if os.path.isfile(tuned):
            doc = _read_json(tuned, "tuning result")
            if doc.get("kind") == kind:
                params = doc["best_params"]
    final = finalize(kind, params, data, config)
    if not final.audit.clean:
        raise PedcrashError("leakage audit failed for the final training partition")
    write_run_bundle({
        "model.json": final.pipeline.to_dict(),
        "holdout_report.json": final.holdout_dict(),
        "final_preprocessing.json": dict(final.training.preprocessing_dict(data.feature_names),
                                         audit=dict(vars(final.audit), clean=final.audit.clean)),
        "config.json": _config_echo(config, args.data, data),
    }, args.out)
    _log(f"{kind}: holdout accuracy {final.report.accuracy:.4f}")
    return final.pipeline


def cmd_finalize(args):
    config = resolve_config(args)
    _finalize(args, config, _load(args.data))
    return 0


def cmd_explain(args):
    config = resolve_config(args)
    data = _load(args.data)
    path = os.path.join(args.out, "model.json")
    if os.path.isfile(path):
        pipeline = Pipeline.from_dict(_read_json(path, "model"))
    else:
        pipeline = _finalize(args, config, data)
    if pipeline.feature_names != data.feature_names:
        raise SchemaError("data columns differ from the columns the model was trained on")
    for i in args.instance:
        if not 0 <= i < data.n_rows:
            raise InputError(f"--instance {i} out of range 0..{data.n_rows - 1}")
    train, hold = stratified_holdout(data.y, config.holdout_fraction, config.seed)
    rows = explain_rows(hold, config.explain_instances, args.instance, all_rows=args.all)
    t0 = time.perf_counter()
    shap = explain_final(pipeline, data, config, rows, train)
    _log(f"explained {len(rows)} rows with {shap.method} attribution in {time.perf_counter() - t0:.1f}s; "
         f"max additivity error {shap.additivity_error():.2e}")
    summary = shap_summary(shap)
    artifacts = {
        "shap_values.csv": to_csv(["instance", "feature", "category", "value"], shap.rows()),
        "shap_inputs.csv": to_csv(["instance"] + list(shap.feature_names),
                                  ([r] + [float(v) for v in x] for r, x in zip(shap.instances, shap.X))),
        "shap_base.json": {"base": shap.base, "method": shap.method, "output": shap.output_kind,
                           "model": pipeline.kind, "categories": list(SEVERITY_NAMES)},
        "summary.json": summary.to_dict(),
    }
    position = {r: a for a, r in enumerate(shap.instances)}
    for i in args.instance or [shap.instances[0]]:
        a = position[i]
        cat = int(np.argmax(shap.outputs[a]))
        artifacts[f"force_{i}.json"] = force_breakdown(shap, a, cat).to_dict()
    write_run_bundle(artifacts, args.out)
    config_path = os.path.join(args.out, "config.json")
    if not os.path.isfile(config_path):
        write_run_bundle({"config.json": _config_echo(config, args.data, data)}, args.out)
    return 0


def _read_shap(out):
    import csv

    values, inputs = {}, {}
    with open(os.path.join(out, "shap_values.csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            values[(int(row["instance"]), row["feature"], int(row["category"]))] = float(row["value"])
    with open(os.path.join(out, "shap_inputs.csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            inst = int(row.pop("instance"))
            inputs[inst] = {k: float(v) for k, v in row.items()}
    return values, inputs


def cmd_report(args):
    out = args.out
    if not os.path.isdir(out):
        raise InputError(f"run directory not found: {out}")
    artifacts = {}
    if os.path.isfile(os.path.join(out, "leaderboard.json")):
        board = _read_json(os.path.join(out, "leaderboard.json"), "leaderboard")
        artifacts["leaderboard.md"] = leaderboard_markdown(board["entries"])
    if os.path.isfile(os.path.join(out, "holdout_report.json")):
        hr = _read_json(os.path.join(out, "holdout_report.json"), "holdout report")
        kind = hr["kind"]
        artifacts["confusion.svg"] = render_svg(PlotSpec(
            "confusion", hr["confusion"], f"Confusion matrix ({kind}, holdout)", 560, 480))
        artifacts["roc.svg"] = render_svg(PlotSpec(
            "roc", {"curves": hr["roc"]}, f"ROC curves ({kind}, holdout)"))
        artifacts["pr.svg"] = render_svg(PlotSpec(
            "pr", {"curves": hr["pr"]}, f"Precision-recall curves ({kind}, holdout)"))
    if os.path.isfile(os.path.join(out, "summary.json")):
        summary = _read_json(os.path.join(out, "summary.json"), "SHAP summary")
        overall = [e["feature"] for e in summary["overall"]]
        per_cat = [{e["feature"]: e["mean_abs"] for e in cat} for cat in summary["per_category"]]
        bar = {"features": overall,
               "values": [[pc[f] for pc in per_cat] for f in overall],
               "categories": list(SEVERITY_NAMES[:len(per_cat)])}
        height = 90 + 22 * len(overall)
        artifacts["shap_bar.svg"] = render_svg(PlotSpec("shap_bar", bar, "Feature importance (mean |SHAP|)",
                                                        720, height))
        values, inputs = _read_shap(out)
        instances = sorted(inputs)
        for c, cat in enumerate(summary["per_category"]):
            features = [e["feature"] for e in cat]
            points = [[[i, inputs[i][f], values[(i, f, c)]] for i in instances] for f in features]
            artifacts[f"shap_beeswarm_{SEVERITY_SHORT[c]}.svg"] = render_svg(PlotSpec(
                "shap_beeswarm", {"features": features, "points": points},
                f"SHAP values: {SEVERITY_NAMES[c]}", 720, height))
    for name in sorted(os.listdir(out)):
        if name.startswith("force_") and name.endswith(".json"):
            fb = _read_json(os.path.join(out, name), "force breakdown")
            title = f"Row {fb['instance']}: {SEVERITY_NAMES[fb['category']]}"
            artifacts[name[:-5] + ".svg"] = render_svg(PlotSpec("force", fb, title, 720, 420))
    if not artifacts:
        raise InputError(f"nothing to report in {out}; run compare, finalize or explain first")
    write_run_bundle(artifacts, out)
    _log(f"rendered {sum(k.endswith('.svg') for k in artifacts)} plots into {out}")
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "profile": cmd_profile,
    "synth": cmd_synth,
    "resample": cmd_resample,
    "compare": cmd_compare,
    "tune": cmd_tune,
    "finalize": cmd_finalize,
    "explain": cmd_explain,
    "report": cmd_report,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _set_threads(args.threads)
        return COMMANDS[args.command](args)
    except PedcrashError as exc:
        _log(f"error: {exc}")
        return exc.exit_code
    except (OSError, UnicodeDecodeError) as exc:
        _log(f"error: {exc}")
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the internal-error code
        _log(f"internal error: {type(exc).__name__}: {exc}")
        return 4


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
