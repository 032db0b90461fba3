"""Command-line entry point: ``torflowid <subcommand> ...``.

Subcommands
-----------
synth       write a labeled synthetic corpus (PCAPs + manifest)
extract     corpus manifest -> flow feature dataset file
train       dataset -> standardized classifier model (+ scaler file)
evaluate    apply a trained model to a dataset and write reports
experiment  cross-validated run of one configuration
grid        all 16 configurations over a reduced and a full padding corpus
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

import yaml

from . import learn, report
from .features import fit_scaler, read_dataset, read_scaler, write_dataset, write_scaler
from .flowing import FlowConfig
from .learn import LabeledDataset
from .metrics import confusion_matrix, overall_metrics
from .pipeline import (ExperimentConfig, ExperimentResult, extract_dataset, load_corpus,
                       run_experiment, run_grid)
from .synth import PaddingConfig, build_labeled_corpus, load_archetypes, read_manifest

log = logging.getLogger("torflowid")


def _add_classifier_params(p):
    g = p.add_argument_group("classifier parameters")
    g.add_argument("--k", type=int, help="k-NN neighbours (default 5)")
    g.add_argument("--trees", type=int, help="random forest size (default 100)")
    g.add_argument("--max-depth", type=int, help="random forest depth limit (default none)")
    g.add_argument("--C", type=float, dest="C", help="SVM soft-margin constant (default 1)")
    g.add_argument("--epochs", type=int, help="SVM passes over the data (default 20)")


def _classifier_params(args) -> dict:
    params = {}
    for kind, keys in (("knn", ("k",)), ("random_forest", ("trees", "max_depth")),
                       ("svm_linear_ovr", ("C", "epochs"))):
        chosen = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
        if chosen:
            params[kind] = chosen
    return params


def _add_experiment_flags(p, with_grid_axes=True):
    p.add_argument("--config", type=Path, help="YAML/JSON file with experiment config fields")
    if with_grid_axes:
        p.add_argument("--padding", choices=("reduced", "full", "none"),
                       help="expected corpus padding (default: read from manifest)")
        p.add_argument("--flow-timeout-s", type=float)
        p.add_argument("--activity-timeout-s", type=float)
        p.add_argument("--include-browser", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--browser-label")
    p.add_argument("--classifiers", help=f"comma list from {','.join(learn.CLASSIFIERS)}")
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    _add_classifier_params(p)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--no-figures", action="store_true")


def _experiment_config(args, **overrides) -> ExperimentConfig:
    values = {}
    if args.config is not None:
        loaded = yaml.safe_load(args.config.read_text()) or {}
        known = {f.name for f in fields(ExperimentConfig)}
        unknown = set(loaded) - known
        if unknown:
            raise ValueError(f"{args.config}: unknown config keys {sorted(unknown)}")
        values.update(loaded)
    for name in ("padding", "flow_timeout_s", "activity_timeout_s", "include_browser",
                 "browser_label", "folds", "seed"):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if args.classifiers:
        values["classifiers"] = tuple(c.strip() for c in args.classifiers.split(",") if c.strip())
    elif "classifiers" in values:
        values["classifiers"] = tuple(values["classifiers"])
    params = {k: dict(v) for k, v in values.get("classifier_params", {}).items()}
    for kind, p in _classifier_params(args).items():
        params.setdefault(kind, {}).update(p)
    values["classifier_params"] = params
    values.update(overrides)
    return ExperimentConfig(**values)


def cmd_synth(args):
    specs = load_archetypes(args.archetypes)
    if args.classes:
        wanted = [c.strip() for c in args.classes.split(",")]
        missing = set(wanted) - {s.name for s in specs}
        if missing:
            raise ValueError(f"unknown archetypes: {sorted(missing)}")
        specs = [s for s in specs if s.name in wanted]
    padding = PaddingConfig(args.padding, args.padding_cell_size)
    m = build_labeled_corpus(specs, args.sessions_per_class, args.duration, padding, args.seed, args.out_dir)
    print(f"wrote {len(m.entries)} sessions to {args.out_dir / 'manifest.csv'}")


def cmd_extract(args):
    manifest = read_manifest(args.manifest)
    config = FlowConfig(args.flow_timeout_s, args.activity_timeout_s)
    ds = extract_dataset(load_corpus(manifest), config, manifest.padding_mode)
    if args.exclude_label:
        ds = ds.subset([lab not in args.exclude_label for lab in ds.labels])
    write_dataset(ds, args.out)
    print(f"wrote {len(ds)} flows to {args.out}")


def cmd_train(args):
    ds = read_dataset(args.dataset)
    if any(lab is None for lab in ds.labels):
        raise ValueError(f"{args.dataset}: training needs every flow labeled")
    tag = f"{ds.digest()}/all"
    scaler = fit_scaler(ds.X, fitted_on=tag)
    train_set = LabeledDataset(scaler.transform(ds.X), ds.labels)
    params = _classifier_params(args).get(args.classifier, {})
    model = learn.train(args.classifier, train_set, params, seed=args.seed, scaler_id=tag)
    model.save(args.model)
    scaler_path = args.scaler or Path(str(args.model) + ".scaler")
    write_scaler(scaler, scaler_path)
    print(f"trained {model.display_name} on {len(ds)} flows -> {args.model}, {scaler_path}")


def cmd_evaluate(args):
    model = learn.load_model(args.model)
    scaler = read_scaler(args.scaler or Path(str(args.model) + ".scaler"))
    if scaler.fitted_on != model.scaler_id:
        raise ValueError(f"scaler {scaler.fitted_on!r} does not match model provenance {model.scaler_id!r}")
    ds = read_dataset(args.dataset)
    preds = model.predict_many(scaler.transform(ds.X))
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "predictions.csv").write_text(
        "index,predicted,label\n" + "".join(f"{i},{p},{t or ''}\n" for i, (p, t) in enumerate(zip(preds, ds.labels))))
    if any(lab is None for lab in ds.labels):
        print(f"wrote {len(preds)} predictions to {out / 'predictions.csv'} (unlabeled data, no metrics)")
        return
    unknown = sorted(set(ds.labels) - set(model.classes))
    if unknown:
        raise ValueError(f"dataset labels outside the model's classes: {unknown}")
    cm = confusion_matrix(ds.labels, preds, model.classes)
    cfg = ExperimentConfig(padding=ds.padding, flow_timeout_s=ds.flow_timeout_s,
                           activity_timeout_s=ds.activity_timeout_s, classifiers=(model.kind,),
                           seed=model.seed or 0, classifier_params={model.kind: dict(model.params)})
    counts = {c: ds.labels.count(c) for c in model.classes}
    result = ExperimentResult(cfg, model.classes, len(ds), counts, {model.kind: cm},
                              {model.kind: overall_metrics(cm)}, [], ds.digest(), name="evaluation")
    report.write_experiment_report(result, out, figures=not args.no_figures)
    print(report.overall_table({model.display_name: result.reports[model.kind]}, "Evaluation"), end="")


def cmd_experiment(args):
    manifest = read_manifest(args.manifest)
    overrides = {} if args.padding or (args.config and "padding" in (yaml.safe_load(args.config.read_text()) or {})) \
        else {"padding": manifest.padding_mode}
    cfg = _experiment_config(args, **overrides)
    result = run_experiment(cfg, manifest)
    report.write_experiment_report(result, args.out_dir, figures=not args.no_figures)
    rows = {report.display_name(k): result.reports[k] for k in cfg.classifiers}
    print(report.overall_table(rows, f"{result.n_flows} flows, {len(result.classes)} classes"), end="")


def cmd_grid(args):
    base = _experiment_config(args)
    out = args.out_dir

    def on_result(i, res):
        report.write_experiment_report(res, out / res.name, figures=not args.no_figures)
        print(f"{res.name}: done ({res.n_flows} flows)")

    results = run_grid(base, {"reduced": args.reduced_manifest, "full": args.full_manifest}, on_result)
    report.write_grid_summary(results, out, figures=not args.no_figures)
    print(f"wrote {len(results)} experiment reports to {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="torflowid", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--sessions-per-class", type=int, default=50)
    p.add_argument("--duration", type=float, default=120.0)
    p.add_argument("--padding", choices=("none", "reduced", "full"), default="reduced")
    p.add_argument("--padding-cell-size", type=int, default=543)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--archetypes", type=Path, help="archetype preset file (default: packaged six)")
    p.add_argument("--classes", help="comma list restricting which archetypes to generate")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract flow features from a corpus")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--flow-timeout-s", type=float, default=10.0)
    p.add_argument("--activity-timeout-s", type=float, default=2.0)
    p.add_argument("--exclude-label", action="append", default=[])
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train one classifier on a whole dataset")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--classifier", choices=learn.CLASSIFIERS, default="random_forest")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--scaler", type=Path, help="scaler output (default: <model>.scaler)")
    p.add_argument("--seed", type=int, default=0)
    _add_classifier_params(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="classify a dataset with a trained model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--scaler", type=Path, help="scaler file (default: <model>.scaler)")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="cross-validated run of one configuration")
    p.add_argument("--manifest", type=Path, required=True)
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("grid", help="run the 16-configuration experiment grid")
    p.add_argument("--reduced-manifest", type=Path, required=True)
    p.add_argument("--full-manifest", type=Path, required=True)
    _add_experiment_flags(p, with_grid_axes=False)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"torflowid: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
