"""Text tables, key=value files and figures for experiment results.

Layout of one experiment directory::

    per_class.txt        per-app PR./REC./F1/ACC. for every classifier
    overall.txt          averaged metrics, one row per classifier
    report.kv            everything above plus config, in key=value form
    <classifier>.kv      the same, restricted to one classifier
    confusion_<classifier>.csv
    overall.png          grouped bars of the overall metrics
"""
from __future__ import annotations

from pathlib import Path

from . import learn, plotting
from .metrics import Report

OVERALL_COLUMNS = (
    ("average_accuracy", "Avg. Accuracy"),
    ("error_rate", "Error Rate"),
    ("micro_f1", "Micro F1 score"),
    ("macro_precision", "Macro Precision"),
    ("macro_recall", "Macro Recall"),
    ("macro_f1", "Macro F1 score"),
)
PER_CLASS_COLUMNS = ("PR.", "REC.", "F1", "ACC.")
EXPERIMENT_COLUMNS = ("Connection Padding", "Flow Timeout", "Activity Timeout", "Web Browser")


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def display_name(kind: str) -> str:
    return learn.DISPLAY_NAMES.get(kind, kind)


def per_class_table(result) -> str:
    kinds = list(result.config.classifiers)
    app_w = max([len("APP")] + [len(c) for c in result.classes]) + 2
    block_w = 6 * len(PER_CLASS_COLUMNS) + 1
    title = f"Per-class performance of each classifier for {result.name}."
    head1 = " " * app_w + "|" + "|".join(f" {display_name(k):^{block_w - 2}} " for k in kinds)
    head2 = f"{'APP':<{app_w}}|" + "|".join(
        "".join(f"{c:>6}" for c in PER_CLASS_COLUMNS) + " " for _ in kinds)
    rule = "-" * app_w + "+" + "+".join("-" * block_w for _ in kinds)
    lines = [title, head1, head2, rule]
    for cls in result.classes:
        cells = []
        for k in kinds:
            m = result.reports[k].per_class[cls]
            mark = "*" if m.degenerate else " "
            cells.append("".join(f"{v:>6.2f}" for v in m) + mark)
        lines.append(f"{cls:<{app_w}}|" + "|".join(cells))
    lines.append(rule)
    if any(result.reports[k].per_class[c].degenerate for k in kinds for c in result.classes):
        lines.append("* a 0/0 ratio in this row was reported as 0")
    return "\n".join(lines) + "\n"


def overall_table(rows: dict, title: str, first_col: str = "Classifier") -> str:
    """``rows`` maps a row name to a Report."""
    name_w = max([len(first_col)] + [len(n) for n in rows]) + 2
    widths = [max(len(h), 8) + 2 for _, h in OVERALL_COLUMNS]
    head = f"{first_col:<{name_w}}" + "".join(f"{h:>{w}}" for (_, h), w in zip(OVERALL_COLUMNS, widths))
    lines = [title, head, "-" * len(head)]
    for name, rep in rows.items():
        vals = "".join(f"{getattr(rep, key):>{w}.4f}" for (key, _), w in zip(OVERALL_COLUMNS, widths))
        lines.append(f"{name:<{name_w}}{vals}")
    return "\n".join(lines) + "\n"


def _config_items(result) -> list[tuple[str, object]]:
    cfg = result.config
    items = [
        ("experiment.name", result.name),
        ("config.padding", cfg.padding),
        ("config.flow_timeout_s", cfg.flow_timeout_s),
        ("config.activity_timeout_s", cfg.activity_timeout_s),
        ("config.include_browser", int(cfg.include_browser)),
        ("config.folds", cfg.folds),
        ("config.seed", cfg.seed),
        ("config.classifiers", ",".join(cfg.classifiers)),
        ("dataset.digest", result.dataset_digest),
        ("dataset.flows", result.n_flows),
        ("dataset.classes", ",".join(result.classes)),
    ]
    items += [(f"dataset.count.{c}", n) for c, n in result.class_counts.items()]
    items += [(f"fold.{r.fold}.scaler_fitted_on", r.scaler_fitted_on) for r in result.folds]
    items += [(f"fold.{r.fold}.test_size", len(r.test_idx)) for r in result.folds]
    return items


def _classifier_items(result, kind: str) -> list[tuple[str, object]]:
    rep: Report = result.reports[kind]
    pre = f"classifier.{kind}"
    items = [(f"{pre}.display_name", display_name(kind))]
    items += [(f"{pre}.params.{k}", v) for k, v in sorted(result.config.params_for(kind).items())]
    items += [(f"{pre}.overall.{k}", _fmt(v)) for k, v in rep.as_dict().items()]
    items.append((f"{pre}.overall.degenerate", int(rep.degenerate)))
    for cls, m in rep.per_class.items():
        for key in ("precision", "recall", "f1", "accuracy"):
            items.append((f"{pre}.class.{cls}.{key}", _fmt(getattr(m, key))))
        items.append((f"{pre}.class.{cls}.degenerate", int(m.degenerate)))
    cm = result.confusion[kind]
    items.append((f"{pre}.confusion", ";".join(",".join(str(int(v)) for v in row) for row in cm.counts)))
    return items


def format_kv(items) -> str:
    return "".join(f"{k}={v}\n" for k, v in items)


def read_kv(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line and not line.startswith("#"):
            k, v = line.split("=", 1)
            out[k] = v
    return out


def overall_figure(result, path) -> None:
    fig, ax = plotting.new()
    groups = [h for _, h in OVERALL_COLUMNS]
    series = {display_name(k): [getattr(result.reports[k], key) for key, _ in OVERALL_COLUMNS]
              for k in result.config.classifiers}
    plotting.grouped_bars(ax, groups, series)
    ax.set_title(f"Classifiers' overall performance, {result.name}")
    plotting.save(fig, path)


def write_experiment_report(result, out_dir, figures: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        p = out / name
        p.write_text(text)
        written.append(p)

    put("per_class.txt", per_class_table(result))
    rows = {display_name(k): result.reports[k] for k in result.config.classifiers}
    put("overall.txt", overall_table(rows, f"Overall classifier performance for {result.name}."))
    base = _config_items(result)
    all_items = list(base)
    for kind in result.config.classifiers:
        cls_items = _classifier_items(result, kind)
        all_items += cls_items
        put(f"{kind}.kv", format_kv(base + cls_items))
        cm = result.confusion[kind]
        csv = [",".join(["true\\pred", *cm.classes])]
        csv += [",".join([c, *map(str, row)]) for c, row in zip(cm.classes, cm.counts.tolist())]
        put(f"confusion_{kind}.csv", "\n".join(csv) + "\n")
    put("report.kv", format_kv(all_items))
    if figures:
        overall_figure(result, out / "overall.png")
        written.append(out / "overall.png")
    return written


def experiment_table(results) -> str:
    """The grid's settings, one row per experiment."""
    head = f"{'Experiment':<14}" + "".join(f"{h:>20}" for h in EXPERIMENT_COLUMNS)
    lines = ["The complete set of performed experiments (timeouts in seconds).", head, "-" * len(head)]
    for r in results:
        c = r.config
        row = (c.padding.capitalize(), f"{c.flow_timeout_s:g}", f"{c.activity_timeout_s:g}",
               "Yes" if c.include_browser else "No")
        lines.append(f"{r.name:<14}" + "".join(f"{v:>20}" for v in row))
    return "\n".join(lines) + "\n"


def write_grid_summary(results, out_dir, figures: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kinds = list(results[0].config.classifiers) if results else []
    parts = [experiment_table(results)]
    for kind in kinds:
        rows = {r.name: r.reports[kind] for r in results}
        parts.append(overall_table(rows, f"Summary of the results, {display_name(kind)}.", "Experiment"))
    written = [out / "grid_summary.txt", out / "grid.kv"]
    written[0].write_text("\n".join(parts))
    items = []
    for r in results:
        c = r.config
        items += [(f"{r.name}.padding", c.padding), (f"{r.name}.flow_timeout_s", c.flow_timeout_s),
                  (f"{r.name}.activity_timeout_s", c.activity_timeout_s),
                  (f"{r.name}.include_browser", int(c.include_browser)), (f"{r.name}.flows", r.n_flows)]
        for kind in kinds:
            items += [(f"{r.name}.{kind}.{k}", _fmt(v)) for k, v in r.reports[kind].as_dict().items()]
    written[1].write_text(format_kv(items))
    if figures and results:
        fig, ax = plotting.new(scale=1.4, ratio=0.45)
        series = {display_name(k): [r.reports[k].macro_f1 for r in results] for k in kinds}
        plotting.grouped_bars(ax, [r.name for r in results], series)
        ax.set_ylabel("Macro F1 score")
        ax.set_title("Macro F1 score per experiment")
        plotting.save(fig, out / "grid_macro_f1.png")
        written.append(out / "grid_macro_f1.png")
    return written
